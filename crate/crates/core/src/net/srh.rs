// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Segment Routing Header (IPv6 routing header, type 4).
//!
//! ```text
//!  0                   1                   2                   3
//!  0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! | Next Header   |  Hdr Ext Len  | Routing Type  | Segments Left |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |  Last Entry   |     Flags     |              Tag              |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |            Segment List[0] (128 bits IPv6 address)            |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//!                               ...
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |            Segment List[n] (128 bits IPv6 address)            |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! ```
//!
//! The segment list is stored in reverse path order: entry 0 is the last
//! segment of the path, entry `last_entry` the first. Flags and tag are
//! carried verbatim.

use super::{NetError, V6Addr};

pub const ROUTING_TYPE_SRH: u8 = 4;
pub const SRH_FIXED_LEN: usize = 8;
pub const SID_LEN: usize = 16;
/// Largest list whose length still fits the 8-bit `hdr_ext_len`.
pub const MAX_SEGMENTS: usize = 127;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Srh {
    next_header: u8,
    segments_left: u8,
    flags: u8,
    tag: u16,
    segment_list: Vec<V6Addr>,
}

impl Srh {
    /// Builds an SRH from a segment list already in stored (reverse) order.
    pub fn new(next_header: u8, segment_list: Vec<V6Addr>, segments_left: u8) -> Result<Self, NetError> {
        if segment_list.is_empty() {
            return Err(NetError::Malformed("empty segment list".into()));
        }
        if segment_list.len() > MAX_SEGMENTS {
            return Err(NetError::Malformed(format!("{} segments exceed the header length field", segment_list.len())));
        }
        if segments_left as usize >= segment_list.len() {
            return Err(NetError::Malformed(format!(
                "segments left {} beyond last entry {}",
                segments_left,
                segment_list.len() - 1
            )));
        }
        Ok(Srh { next_header, segments_left, flags: 0, tag: 0, segment_list })
    }

    /// SRH for a path given in forward order; the first segment is active.
    pub fn for_path(next_header: u8, path: &[V6Addr]) -> Result<Self, NetError> {
        let stored: Vec<V6Addr> = path.iter().rev().copied().collect();
        let sl = path.len().saturating_sub(1).min(u8::MAX as usize) as u8;
        Srh::new(next_header, stored, sl)
    }

    pub fn with_flags_tag(mut self, flags: u8, tag: u16) -> Self {
        self.flags = flags;
        self.tag = tag;
        self
    }

    pub fn next_header(&self) -> u8 {
        self.next_header
    }

    pub fn segments_left(&self) -> u8 {
        self.segments_left
    }

    pub fn last_entry(&self) -> u8 {
        (self.segment_list.len() - 1) as u8
    }

    pub fn hdr_ext_len(&self) -> u8 {
        (2 * self.segment_list.len()) as u8
    }

    pub fn flags(&self) -> u8 {
        self.flags
    }

    pub fn tag(&self) -> u16 {
        self.tag
    }

    /// Stored (reverse path) order.
    pub fn segment_list(&self) -> &[V6Addr] {
        &self.segment_list
    }

    pub fn active_segment(&self) -> V6Addr {
        self.segment_list[self.segments_left as usize]
    }

    /// Moves to the next segment and returns it. None when no segments remain.
    pub fn advance(&mut self) -> Option<V6Addr> {
        if self.segments_left == 0 {
            return None;
        }
        self.segments_left -= 1;
        Some(self.active_segment())
    }

    pub fn encoded_len(&self) -> usize {
        SRH_FIXED_LEN + SID_LEN * self.segment_list.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.next_header);
        out.push(self.hdr_ext_len());
        out.push(ROUTING_TYPE_SRH);
        out.push(self.segments_left);
        out.push(self.last_entry());
        out.push(self.flags);
        out.extend_from_slice(&self.tag.to_be_bytes());
        for sid in &self.segment_list {
            out.extend_from_slice(&sid.octets());
        }
    }

    /// Decodes exactly one SRH spanning all of `b`.
    pub fn decode(b: &[u8]) -> Result<Self, NetError> {
        let (srh, used) = Srh::decode_prefix(b)?;
        if used != b.len() {
            return Err(NetError::Malformed(format!("{} trailing bytes after SRH", b.len() - used)));
        }
        Ok(srh)
    }

    /// Decodes an SRH from the front of `b`, returning it and the bytes used.
    pub fn decode_prefix(b: &[u8]) -> Result<(Self, usize), NetError> {
        if b.len() < SRH_FIXED_LEN {
            return Err(NetError::Truncated { need: SRH_FIXED_LEN, have: b.len() });
        }
        let routing_type = b[2];
        if routing_type != ROUTING_TYPE_SRH {
            return Err(NetError::UnsupportedRoutingType(routing_type));
        }
        let hdr_ext_len = b[1] as usize;
        let total = SRH_FIXED_LEN + 8 * hdr_ext_len;
        if b.len() < total {
            return Err(NetError::Truncated { need: total, have: b.len() });
        }
        let segments_left = b[3];
        let last_entry = b[4];
        if hdr_ext_len != 2 * (last_entry as usize + 1) {
            return Err(NetError::Malformed(format!(
                "hdr ext len {} inconsistent with last entry {}",
                hdr_ext_len, last_entry
            )));
        }
        if segments_left > last_entry {
            return Err(NetError::Malformed(format!("segments left {segments_left} beyond last entry {last_entry}")));
        }
        let segment_list = b[SRH_FIXED_LEN..total]
            .chunks_exact(SID_LEN)
            .map(|c| V6Addr::from_octets(c.try_into().expect("16-byte chunk")))
            .collect();
        Ok((
            Srh { next_header: b[0], segments_left, flags: b[5], tag: u16::from_be_bytes([b[6], b[7]]), segment_list },
            total,
        ))
    }
}

/// Free-function codec entry points.
pub fn encode_srh(h: &Srh) -> Vec<u8> {
    h.encode()
}

pub fn decode_srh(b: &[u8]) -> Result<Srh, NetError> {
    Srh::decode(b)
}
