// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Addresses, prefixes and the wire codecs for the outer IPv6 header and the
//! Segment Routing Header.

mod addr;
mod packet;
mod prefix;
mod srh;

pub use addr::{parse_addr, Addr, Family, V4Addr, V6Addr};
pub use packet::{decode_outer, encode_outer, InnerPacket, OuterPacket, IPV4_HEADER_LEN, IPV6_HEADER_LEN};
pub use prefix::{prefix_contains, Prefix};
pub use srh::{decode_srh, encode_srh, Srh, MAX_SEGMENTS, ROUTING_TYPE_SRH, SID_LEN, SRH_FIXED_LEN};

/// IPv4 carried in IPv6.
pub const PROTO_IPV4: u8 = 4;
/// IPv6 carried in IPv6.
pub const PROTO_IPV6: u8 = 41;
/// IPv6 routing extension header.
pub const PROTO_ROUTING: u8 = 43;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error("invalid address `{token}`")]
    AddrParse { token: String },
    #[error("invalid prefix `{text}`")]
    PrefixParse { text: String },
    #[error("prefix length {len} too long for {family}")]
    PrefixLength { len: u8, family: Family },
    #[error("address family mismatch: expected {expected}, found {found}")]
    FamilyMismatch { expected: Family, found: Family },
    #[error("truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unsupported routing type {0}")]
    UnsupportedRoutingType(u8),
    #[error("malformed packet: {0}")]
    Malformed(String),
}
