// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use super::{Addr, Family, NetError, Srh, V4Addr, V6Addr, PROTO_ROUTING};

pub const IPV4_HEADER_LEN: usize = 20;
pub const IPV6_HEADER_LEN: usize = 40;

/// A pod packet. Serialized with a minimal fixed header: 20 bytes without
/// options for IPv4 (checksum left zero), 40 bytes for IPv6.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InnerPacket {
    src: Addr,
    dst: Addr,
    pub hop_limit: u8,
    pub protocol: u8,
    pub payload: Vec<u8>,
}

impl InnerPacket {
    pub fn new(src: Addr, dst: Addr, hop_limit: u8, protocol: u8, payload: Vec<u8>) -> Result<Self, NetError> {
        if src.family() != dst.family() {
            return Err(NetError::FamilyMismatch { expected: src.family(), found: dst.family() });
        }
        Ok(InnerPacket { src, dst, hop_limit, protocol, payload })
    }

    /// An ICMP (v4) or ICMPv6 (v6) echo-like packet.
    pub fn echo(src: Addr, dst: Addr, payload: Vec<u8>) -> Result<Self, NetError> {
        let proto = match src.family() {
            Family::V4 => 1,
            Family::V6 => 58,
        };
        InnerPacket::new(src, dst, 64, proto, payload)
    }

    pub fn family(&self) -> Family {
        self.src.family()
    }

    pub fn src(&self) -> Addr {
        self.src
    }

    pub fn dst(&self) -> Addr {
        self.dst
    }

    pub fn encoded_len(&self) -> usize {
        self.header_len() + self.payload.len()
    }

    fn header_len(&self) -> usize {
        match self.family() {
            Family::V4 => IPV4_HEADER_LEN,
            Family::V6 => IPV6_HEADER_LEN,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        match (self.src, self.dst) {
            (Addr::V4(s), Addr::V4(d)) => {
                let total = (IPV4_HEADER_LEN + self.payload.len()) as u16;
                out.push(0x45);
                out.push(0);
                out.extend_from_slice(&total.to_be_bytes());
                out.extend_from_slice(&[0, 0, 0, 0]);
                out.push(self.hop_limit);
                out.push(self.protocol);
                out.extend_from_slice(&[0, 0]);
                out.extend_from_slice(&s.octets());
                out.extend_from_slice(&d.octets());
            }
            (Addr::V6(s), Addr::V6(d)) => {
                out.extend_from_slice(&[0x60, 0, 0, 0]);
                out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
                out.push(self.protocol);
                out.push(self.hop_limit);
                out.extend_from_slice(&s.octets());
                out.extend_from_slice(&d.octets());
            }
            _ => unreachable!("family checked at construction"),
        }
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(b: &[u8]) -> Result<Self, NetError> {
        let version = b.first().ok_or(NetError::Truncated { need: 1, have: 0 })? >> 4;
        match version {
            4 => {
                if b.len() < IPV4_HEADER_LEN {
                    return Err(NetError::Truncated { need: IPV4_HEADER_LEN, have: b.len() });
                }
                if b[0] != 0x45 {
                    return Err(NetError::Malformed("IPv4 options are not supported".into()));
                }
                let total = u16::from_be_bytes([b[2], b[3]]) as usize;
                if total != b.len() {
                    return Err(NetError::Truncated { need: total, have: b.len() });
                }
                let src = V4Addr::from_bits(u32::from_be_bytes(b[12..16].try_into().unwrap()));
                let dst = V4Addr::from_bits(u32::from_be_bytes(b[16..20].try_into().unwrap()));
                InnerPacket::new(src.into(), dst.into(), b[8], b[9], b[IPV4_HEADER_LEN..].to_vec())
            }
            6 => {
                if b.len() < IPV6_HEADER_LEN {
                    return Err(NetError::Truncated { need: IPV6_HEADER_LEN, have: b.len() });
                }
                let plen = u16::from_be_bytes([b[4], b[5]]) as usize;
                if IPV6_HEADER_LEN + plen != b.len() {
                    return Err(NetError::Truncated { need: IPV6_HEADER_LEN + plen, have: b.len() });
                }
                let src = V6Addr::from_octets(b[8..24].try_into().unwrap());
                let dst = V6Addr::from_octets(b[24..40].try_into().unwrap());
                InnerPacket::new(src.into(), dst.into(), b[7], b[6], b[IPV6_HEADER_LEN..].to_vec())
            }
            v => Err(NetError::Malformed(format!("inner version nibble {v}"))),
        }
    }
}

/// Outer IPv6 packet: fixed header, optional SRH, then the inner packet bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OuterPacket {
    pub src: V6Addr,
    pub dst: V6Addr,
    pub next_header: u8,
    pub hop_limit: u8,
    pub srh: Option<Srh>,
    pub inner: Vec<u8>,
}

impl OuterPacket {
    /// Checks the header chain and the active-segment invariant.
    pub fn validate(&self) -> Result<(), NetError> {
        if let Some(srh) = &self.srh {
            if self.next_header != PROTO_ROUTING {
                return Err(NetError::Malformed(format!("next header {} with SRH present", self.next_header)));
            }
            if srh.active_segment() != self.dst {
                return Err(NetError::Malformed(format!(
                    "destination {} is not the active segment {}",
                    self.dst,
                    srh.active_segment()
                )));
            }
        }
        Ok(())
    }

    /// Protocol number of whatever follows the IPv6 header chain.
    pub fn inner_protocol(&self) -> u8 {
        match &self.srh {
            Some(srh) => srh.next_header(),
            None => self.next_header,
        }
    }

    pub fn payload_len(&self) -> usize {
        self.srh.as_ref().map_or(0, Srh::encoded_len) + self.inner.len()
    }

    pub fn encoded_len(&self) -> usize {
        IPV6_HEADER_LEN + self.payload_len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&[0x60, 0, 0, 0]);
        out.extend_from_slice(&(self.payload_len() as u16).to_be_bytes());
        out.push(self.next_header);
        out.push(self.hop_limit);
        out.extend_from_slice(&self.src.octets());
        out.extend_from_slice(&self.dst.octets());
        if let Some(srh) = &self.srh {
            srh.encode_into(&mut out);
        }
        out.extend_from_slice(&self.inner);
        out
    }

    pub fn decode(b: &[u8]) -> Result<Self, NetError> {
        if b.len() < IPV6_HEADER_LEN {
            return Err(NetError::Truncated { need: IPV6_HEADER_LEN, have: b.len() });
        }
        if b[0] >> 4 != 6 {
            return Err(NetError::Malformed(format!("version nibble {}", b[0] >> 4)));
        }
        let plen = u16::from_be_bytes([b[4], b[5]]) as usize;
        if IPV6_HEADER_LEN + plen != b.len() {
            return Err(NetError::Truncated { need: IPV6_HEADER_LEN + plen, have: b.len() });
        }
        let next_header = b[6];
        let rest = &b[IPV6_HEADER_LEN..];
        let (srh, inner) = if next_header == PROTO_ROUTING {
            let (srh, used) = Srh::decode_prefix(rest)?;
            (Some(srh), &rest[used..])
        } else {
            (None, rest)
        };
        let pkt = OuterPacket {
            src: V6Addr::from_octets(b[8..24].try_into().unwrap()),
            dst: V6Addr::from_octets(b[24..40].try_into().unwrap()),
            next_header,
            hop_limit: b[7],
            srh,
            inner: inner.to_vec(),
        };
        pkt.validate()?;
        Ok(pkt)
    }
}

pub fn encode_outer(p: &OuterPacket) -> Vec<u8> {
    p.encode()
}

pub fn decode_outer(b: &[u8]) -> Result<OuterPacket, NetError> {
    OuterPacket::decode(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{PROTO_IPV4, PROTO_IPV6};
    use proptest::prelude::*;

    fn v6(s: &str) -> V6Addr {
        s.parse().unwrap()
    }

    fn outer_with(path: &[V6Addr], inner: Vec<u8>) -> OuterPacket {
        let srh = Srh::for_path(PROTO_IPV4, path).unwrap();
        OuterPacket {
            src: v6("fd12::1000"),
            dst: srh.active_segment(),
            next_header: PROTO_ROUTING,
            hop_limit: 64,
            srh: Some(srh),
            inner,
        }
    }

    #[test]
    fn two_segment_packet_size() {
        let p = outer_with(&[v6("fcff:3::1"), v6("fcdd::1")], vec![0xab; 100]);
        let b = encode_outer(&p);
        assert_eq!(b.len(), 180);
        assert_eq!(u16::from_be_bytes([b[4], b[5]]), 140);
        assert_eq!(decode_outer(&b).unwrap(), p);
    }

    #[test]
    fn version_four_is_malformed() {
        let mut b = encode_outer(&outer_with(&[v6("fcdd::1")], vec![1, 2, 3]));
        b[0] = 0x45;
        assert!(matches!(decode_outer(&b), Err(NetError::Malformed(_))));
    }

    #[test]
    fn payload_length_mismatch_is_truncation() {
        let mut b = encode_outer(&outer_with(&[v6("fcdd::1")], vec![1, 2, 3]));
        b.pop();
        assert!(matches!(decode_outer(&b), Err(NetError::Truncated { .. })));
    }

    #[test]
    fn plain_ip_in_ipv6_without_srh() {
        let inner =
            InnerPacket::echo("10.0.0.1".parse().unwrap(), "10.0.0.2".parse().unwrap(), vec![7; 8]).unwrap().encode();
        let p = OuterPacket {
            src: v6("fd10::1000"),
            dst: v6("fd11::1000"),
            next_header: PROTO_IPV4,
            hop_limit: 64,
            srh: None,
            inner,
        };
        let b = p.encode();
        assert_eq!(b.len(), 40 + 28);
        assert_eq!(decode_outer(&b).unwrap(), p);
    }

    #[test]
    fn inner_round_trips_both_families() {
        let v4 =
            InnerPacket::echo("172.16.104.65".parse().unwrap(), "172.16.166.128".parse().unwrap(), b"ping".to_vec())
                .unwrap();
        assert_eq!(v4.encode().len(), 24);
        assert_eq!(InnerPacket::decode(&v4.encode()).unwrap(), v4);
        let v6p = InnerPacket::echo("fd20::1".parse().unwrap(), "fd20::2".parse().unwrap(), vec![]).unwrap();
        assert_eq!(v6p.encode().len(), 40);
        assert_eq!(InnerPacket::decode(&v6p.encode()).unwrap(), v6p);
    }

    #[test]
    fn mixed_family_inner_is_rejected() {
        assert!(InnerPacket::echo("10.0.0.1".parse().unwrap(), "fd00::1".parse().unwrap(), vec![]).is_err());
    }

    fn arb_outer() -> impl Strategy<Value = OuterPacket> {
        (
            any::<u128>(),
            proptest::collection::vec(any::<u128>(), 0..=6),
            any::<u8>(),
            any::<u8>(),
            proptest::collection::vec(any::<u8>(), 0..200),
            any::<bool>(),
        )
            .prop_map(|(src, sids, sl_seed, hop_limit, inner, v4)| {
                let nh = if v4 { PROTO_IPV4 } else { PROTO_IPV6 };
                if sids.is_empty() {
                    return OuterPacket {
                        src: V6Addr::from_bits(src),
                        dst: V6Addr::from_bits(!src),
                        next_header: nh,
                        hop_limit,
                        srh: None,
                        inner,
                    };
                }
                let list: Vec<V6Addr> = sids.into_iter().map(V6Addr::from_bits).collect();
                let sl = sl_seed % list.len() as u8;
                let srh = Srh::new(nh, list, sl).unwrap();
                OuterPacket {
                    src: V6Addr::from_bits(src),
                    dst: srh.active_segment(),
                    next_header: PROTO_ROUTING,
                    hop_limit,
                    srh: Some(srh),
                    inner,
                }
            })
    }

    proptest! {
        #[test]
        fn outer_codec_round_trips(p in arb_outer()) {
            let b = p.encode();
            prop_assert_eq!(b.len(), p.encoded_len());
            prop_assert_eq!(decode_outer(&b).unwrap(), p);
        }
    }
}
