// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Two-step BGP signaling: pod-prefix reachability (step 1) and SR Policy
//! candidate paths over SAFI 73 (step 2), carried on a simulated full mesh.

mod bus;
mod injector;
mod safi73;

pub use bus::{BgpMessage, BusStats, Channel, Delivery, SessionBus, INJECTOR_PEER};
pub use injector::{PolicyFile, PolicyFileFamily, PolicyFileNlri, PolicyFileSegment, PolicyFileSegmentList};
pub use safi73::{
    decode_safi73, encode_safi73, AFI_IPV6, ATTR_MP_REACH, ATTR_MP_UNREACH, ATTR_TUNNEL_ENCAP, BGP_MAX_LEN,
    SAFI_SR_POLICY, TUNNEL_TYPE_SR_POLICY,
};

use serde::{Deserialize, Serialize};

use crate::dataplane::Behavior;
use crate::net::{Family, Prefix, V6Addr, MAX_SEGMENTS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BgpError {
    #[error("truncated {what}: need {need} bytes, have {have}")]
    Truncated { what: &'static str, need: usize, have: usize },
    #[error("bad BGP marker")]
    Marker,
    #[error("unexpected message type {0}")]
    MessageType(u8),
    #[error("bad {what} length: want {want}, got {got}")]
    BadLength { what: &'static str, want: usize, got: usize },
    #[error("{extra} trailing bytes after {what}")]
    Trailing { what: &'static str, extra: usize },
    #[error("unexpected path attribute type {0}")]
    UnexpectedAttribute(u8),
    #[error("path attribute {code} has flags {flags:#04x}")]
    AttributeFlags { code: u8, flags: u8 },
    #[error("unsupported family afi={afi} safi={safi}")]
    Family { afi: u16, safi: u8 },
    #[error("unsupported tunnel type {0}")]
    TunnelType(u16),
    #[error("unknown {scope} sub-TLV type {sub_type}")]
    UnknownSubTlv { scope: &'static str, sub_type: u8 },
    #[error("{scope} sub-TLV type {sub_type} out of order")]
    OutOfOrder { scope: &'static str, sub_type: u8 },
    #[error("{what} must be zero, got {value:#04x}")]
    NonZero { what: &'static str, value: u8 },
    #[error("segment list is empty")]
    EmptySegmentList,
    #[error("{0} segments exceed the SRH limit")]
    TooManySegments(usize),
    #[error("next hop {next_hop} differs from endpoint {endpoint}")]
    NextHopMismatch { endpoint: V6Addr, next_hop: V6Addr },
    #[error("final segment behavior {0} is not End.DT4 (19) or End.DT6 (18)")]
    NotDecap(u16),
    #[error("message of {0} bytes exceeds 4096")]
    TooLarge(usize),
    #[error("policy file: {0}")]
    PolicyFile(String),
}

/// Step 1: a node's pod prefix and the infrastructure address behind it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step1Update {
    pub prefix: Prefix,
    pub next_hop: V6Addr,
    pub withdraw: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PolicyNlri {
    pub distinguisher: u32,
    pub color: u32,
    pub endpoint: V6Addr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub sid: V6Addr,
    pub behavior: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentList {
    pub weight: u32,
    pub segments: Vec<Segment>,
}

/// Step 2: one SR Policy candidate path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SrPolicyUpdate {
    pub nlri: PolicyNlri,
    pub bsid: V6Addr,
    pub segment_list: SegmentList,
    pub preference: u32,
    pub priority: u8,
    pub next_hop: V6Addr,
    pub withdraw: bool,
}

impl SrPolicyUpdate {
    /// Policy from `segments`, where every non-final segment is End and the
    /// final one is the egress DT SID for `family`.
    pub fn for_path(nlri: PolicyNlri, bsid: V6Addr, segments: &[V6Addr], family: Family) -> Result<Self, BgpError> {
        let last = Behavior::decap(family).code();
        let n = segments.len();
        let u = SrPolicyUpdate {
            nlri,
            bsid,
            segment_list: SegmentList {
                weight: 0,
                segments: segments
                    .iter()
                    .enumerate()
                    .map(|(i, &sid)| Segment { sid, behavior: if i + 1 == n { last } else { Behavior::CODE_END } })
                    .collect(),
            },
            preference: 0,
            priority: 0,
            next_hop: nlri.endpoint,
            withdraw: false,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<(), BgpError> {
        let segs = &self.segment_list.segments;
        let Some(last) = segs.last() else {
            return Err(BgpError::EmptySegmentList);
        };
        if segs.len() > MAX_SEGMENTS {
            return Err(BgpError::TooManySegments(segs.len()));
        }
        if self.next_hop != self.nlri.endpoint {
            return Err(BgpError::NextHopMismatch { endpoint: self.nlri.endpoint, next_hop: self.next_hop });
        }
        if Behavior::decap_family_of_code(last.behavior).is_none() {
            return Err(BgpError::NotDecap(last.behavior));
        }
        Ok(())
    }

    /// Traffic family selected by the final segment's behavior.
    pub fn family(&self) -> Option<Family> {
        self.segment_list.segments.last().and_then(|s| Behavior::decap_family_of_code(s.behavior))
    }

    pub fn sids(&self) -> Vec<V6Addr> {
        self.segment_list.segments.iter().map(|s| s.sid).collect()
    }
}
