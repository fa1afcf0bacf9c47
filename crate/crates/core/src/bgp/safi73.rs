// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! BGP UPDATE carrying one SR Policy candidate path (AFI 2, SAFI 73).
//!
//! ```text
//! marker(16) len(2) type=2 | withdrawn_len(2)=0 | attrs_len(2) | attrs
//! attrs: ORIGIN(1)=IGP, AS_PATH(2)=empty,
//!        MP_REACH_NLRI(14) | MP_UNREACH_NLRI(15),
//!        TUNNEL_ENCAP(23)
//! NLRI: len_bits(1)=192 | distinguisher(4) | color(4) | endpoint(16)
//! TUNNEL_ENCAP: tunnel_type(2)=15 | len(2) | sub-TLVs
//!   13 Binding SID   len=18: flags reserved sid(16)
//!   12 Preference    len=6:  flags reserved pref(4)
//!   15 Priority      len=2:  priority reserved
//!   128 Segment List len(2): reserved | 9 Weight len=6 | 13 Type B len=20 ...
//!   Type B: flags reserved sid(16) behavior(2)
//! ```
//!
//! Decoding is strict: every length, reserved octet and flag must hold the
//! value the encoder writes, and sub-TLVs must appear in encoder order, so a
//! successful decode always re-encodes to the same bytes.

use super::{BgpError, PolicyNlri, Segment, SegmentList, SrPolicyUpdate};
use crate::net::{V6Addr, SID_LEN};

pub const BGP_MARKER: [u8; 16] = [0xff; 16];
pub const BGP_HEADER_LEN: usize = 19;
pub const BGP_MAX_LEN: usize = 4096;
pub const MSG_UPDATE: u8 = 2;

pub const AFI_IPV6: u16 = 2;
pub const SAFI_SR_POLICY: u8 = 73;

pub const ATTR_ORIGIN: u8 = 1;
pub const ATTR_AS_PATH: u8 = 2;
pub const ATTR_MP_REACH: u8 = 14;
pub const ATTR_MP_UNREACH: u8 = 15;
pub const ATTR_TUNNEL_ENCAP: u8 = 23;

const FLAG_OPTIONAL: u8 = 0x80;
const FLAG_TRANSITIVE: u8 = 0x40;
const FLAG_EXTENDED: u8 = 0x10;

pub const TUNNEL_TYPE_SR_POLICY: u16 = 15;

pub const SUBTLV_BINDING_SID: u8 = 13;
pub const SUBTLV_PREFERENCE: u8 = 12;
pub const SUBTLV_PRIORITY: u8 = 15;
pub const SUBTLV_SEGMENT_LIST: u8 = 128;
pub const SUBTLV_WEIGHT: u8 = 9;
pub const SUBTLV_SEGMENT_TYPE_B: u8 = 13;

const NLRI_BITS: u8 = 192;
const BSID_LEN: u8 = 2 + SID_LEN as u8;
const PREFERENCE_LEN: u8 = 6;
const PRIORITY_LEN: u8 = 2;
const WEIGHT_LEN: u8 = 6;
const TYPE_B_LEN: u8 = 2 + SID_LEN as u8 + 2;

fn push_attr(out: &mut Vec<u8>, flags: u8, code: u8, body: &[u8]) {
    if flags & FLAG_EXTENDED != 0 {
        out.extend_from_slice(&[flags, code]);
        out.extend_from_slice(&(body.len() as u16).to_be_bytes());
    } else {
        out.extend_from_slice(&[flags, code, body.len() as u8]);
    }
    out.extend_from_slice(body);
}

fn nlri_bytes(n: &PolicyNlri, out: &mut Vec<u8>) {
    out.push(NLRI_BITS);
    out.extend_from_slice(&n.distinguisher.to_be_bytes());
    out.extend_from_slice(&n.color.to_be_bytes());
    out.extend_from_slice(&n.endpoint.octets());
}

fn tunnel_encap_bytes(u: &SrPolicyUpdate) -> Vec<u8> {
    let mut sub = Vec::new();
    sub.extend_from_slice(&[SUBTLV_BINDING_SID, BSID_LEN, 0, 0]);
    sub.extend_from_slice(&u.bsid.octets());
    sub.extend_from_slice(&[SUBTLV_PREFERENCE, PREFERENCE_LEN, 0, 0]);
    sub.extend_from_slice(&u.preference.to_be_bytes());
    sub.extend_from_slice(&[SUBTLV_PRIORITY, PRIORITY_LEN, u.priority, 0]);

    let mut sl = vec![0u8];
    sl.extend_from_slice(&[SUBTLV_WEIGHT, WEIGHT_LEN, 0, 0]);
    sl.extend_from_slice(&u.segment_list.weight.to_be_bytes());
    for s in &u.segment_list.segments {
        sl.extend_from_slice(&[SUBTLV_SEGMENT_TYPE_B, TYPE_B_LEN, 0, 0]);
        sl.extend_from_slice(&s.sid.octets());
        sl.extend_from_slice(&s.behavior.to_be_bytes());
    }
    sub.push(SUBTLV_SEGMENT_LIST);
    sub.extend_from_slice(&(sl.len() as u16).to_be_bytes());
    sub.extend_from_slice(&sl);

    let mut tlv = TUNNEL_TYPE_SR_POLICY.to_be_bytes().to_vec();
    tlv.extend_from_slice(&(sub.len() as u16).to_be_bytes());
    tlv.extend_from_slice(&sub);
    tlv
}

/// Encodes a validated update into one BGP UPDATE message.
pub fn encode_safi73(u: &SrPolicyUpdate) -> Result<Vec<u8>, BgpError> {
    u.validate()?;
    let mut attrs = Vec::new();
    push_attr(&mut attrs, FLAG_TRANSITIVE, ATTR_ORIGIN, &[0]);
    push_attr(&mut attrs, FLAG_TRANSITIVE, ATTR_AS_PATH, &[]);
    let mut mp = AFI_IPV6.to_be_bytes().to_vec();
    mp.push(SAFI_SR_POLICY);
    if u.withdraw {
        nlri_bytes(&u.nlri, &mut mp);
        push_attr(&mut attrs, FLAG_OPTIONAL | FLAG_EXTENDED, ATTR_MP_UNREACH, &mp);
    } else {
        mp.push(SID_LEN as u8);
        mp.extend_from_slice(&u.next_hop.octets());
        mp.push(0);
        nlri_bytes(&u.nlri, &mut mp);
        push_attr(&mut attrs, FLAG_OPTIONAL | FLAG_EXTENDED, ATTR_MP_REACH, &mp);
    }
    let encap = tunnel_encap_bytes(u);
    push_attr(&mut attrs, FLAG_OPTIONAL | FLAG_TRANSITIVE | FLAG_EXTENDED, ATTR_TUNNEL_ENCAP, &encap);

    let total = BGP_HEADER_LEN + 2 + 2 + attrs.len();
    if total > BGP_MAX_LEN {
        return Err(BgpError::TooLarge(total));
    }
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&BGP_MARKER);
    out.extend_from_slice(&(total as u16).to_be_bytes());
    out.push(MSG_UPDATE);
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&(attrs.len() as u16).to_be_bytes());
    out.extend_from_slice(&attrs);
    Ok(out)
}

/// Bounds-checked cursor; every read names what it was reading.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], BgpError> {
        if self.remaining() < n {
            return Err(BgpError::Truncated { what, need: n, have: self.remaining() });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, BgpError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, BgpError> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, BgpError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn addr(&mut self, what: &'static str) -> Result<V6Addr, BgpError> {
        let b = self.take(SID_LEN, what)?;
        Ok(V6Addr::from_octets(b.try_into().expect("16 bytes")))
    }

    fn zero(&mut self, what: &'static str) -> Result<(), BgpError> {
        match self.u8(what)? {
            0 => Ok(()),
            v => Err(BgpError::NonZero { what, value: v }),
        }
    }

    fn sub(&mut self, n: usize, what: &'static str) -> Result<Reader<'a>, BgpError> {
        Ok(Reader::new(self.take(n, what)?))
    }

    fn finish(&self, what: &'static str) -> Result<(), BgpError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(BgpError::Trailing { what, extra: n }),
        }
    }
}

fn expect_len(what: &'static str, want: usize, got: usize) -> Result<(), BgpError> {
    if want == got {
        Ok(())
    } else {
        Err(BgpError::BadLength { what, want, got })
    }
}

/// Reads one path attribute header, checking code and flags.
fn attr<'a>(r: &mut Reader<'a>, code: &[u8], flags: u8) -> Result<(u8, Reader<'a>), BgpError> {
    let f = r.u8("attribute flags")?;
    let c = r.u8("attribute type")?;
    if !code.contains(&c) {
        return Err(BgpError::UnexpectedAttribute(c));
    }
    if f != flags {
        return Err(BgpError::AttributeFlags { code: c, flags: f });
    }
    let len =
        if f & FLAG_EXTENDED != 0 { r.u16("attribute length")? as usize } else { r.u8("attribute length")? as usize };
    Ok((c, r.sub(len, "attribute body")?))
}

fn read_nlri(r: &mut Reader<'_>) -> Result<PolicyNlri, BgpError> {
    let bits = r.u8("NLRI length")?;
    if bits != NLRI_BITS {
        return Err(BgpError::BadLength { what: "NLRI", want: NLRI_BITS as usize, got: bits as usize });
    }
    let distinguisher = r.u32("distinguisher")?;
    let color = r.u32("color")?;
    let endpoint = r.addr("endpoint")?;
    Ok(PolicyNlri { distinguisher, color, endpoint })
}

fn family(r: &mut Reader<'_>) -> Result<(), BgpError> {
    let afi = r.u16("AFI")?;
    let safi = r.u8("SAFI")?;
    if (afi, safi) != (AFI_IPV6, SAFI_SR_POLICY) {
        return Err(BgpError::Family { afi, safi });
    }
    Ok(())
}

/// Sub-TLV header: type must be `want`, length must be `len`.
fn sub_tlv<'a>(r: &mut Reader<'a>, scope: &'static str, want: u8, len: u8) -> Result<Reader<'a>, BgpError> {
    let t = r.u8("sub-TLV type")?;
    if t != want {
        return Err(unexpected_sub_tlv(scope, t));
    }
    let got = r.u8("sub-TLV length")?;
    expect_len(scope_name(t, scope), len as usize, got as usize)?;
    r.sub(got as usize, "sub-TLV body")
}

fn unexpected_sub_tlv(scope: &'static str, t: u8) -> BgpError {
    let known: &[u8] = match scope {
        "segment list" => &[SUBTLV_WEIGHT, SUBTLV_SEGMENT_TYPE_B],
        _ => &[SUBTLV_BINDING_SID, SUBTLV_PREFERENCE, SUBTLV_PRIORITY, SUBTLV_SEGMENT_LIST],
    };
    if known.contains(&t) {
        BgpError::OutOfOrder { scope, sub_type: t }
    } else {
        BgpError::UnknownSubTlv { scope, sub_type: t }
    }
}

fn scope_name(t: u8, scope: &'static str) -> &'static str {
    match (scope, t) {
        ("segment list", SUBTLV_WEIGHT) => "weight sub-TLV",
        ("segment list", _) => "Type B segment sub-TLV",
        (_, SUBTLV_BINDING_SID) => "binding SID sub-TLV",
        (_, SUBTLV_PREFERENCE) => "preference sub-TLV",
        (_, SUBTLV_PRIORITY) => "priority sub-TLV",
        _ => "sub-TLV",
    }
}

fn read_tunnel_encap(mut r: Reader<'_>) -> Result<(V6Addr, u32, u8, SegmentList), BgpError> {
    let tt = r.u16("tunnel type")?;
    if tt != TUNNEL_TYPE_SR_POLICY {
        return Err(BgpError::TunnelType(tt));
    }
    let len = r.u16("tunnel length")? as usize;
    let mut t = r.sub(len, "tunnel body")?;
    r.finish("tunnel encapsulation attribute")?;

    let mut b = sub_tlv(&mut t, "tunnel", SUBTLV_BINDING_SID, BSID_LEN)?;
    b.zero("binding SID flags")?;
    b.zero("binding SID reserved")?;
    let bsid = b.addr("binding SID")?;

    let mut p = sub_tlv(&mut t, "tunnel", SUBTLV_PREFERENCE, PREFERENCE_LEN)?;
    p.zero("preference flags")?;
    p.zero("preference reserved")?;
    let preference = p.u32("preference")?;

    let mut q = sub_tlv(&mut t, "tunnel", SUBTLV_PRIORITY, PRIORITY_LEN)?;
    let priority = q.u8("priority")?;
    q.zero("priority reserved")?;

    let st = t.u8("sub-TLV type")?;
    if st != SUBTLV_SEGMENT_LIST {
        return Err(unexpected_sub_tlv("tunnel", st));
    }
    let sl_len = t.u16("segment list length")? as usize;
    let mut s = t.sub(sl_len, "segment list body")?;
    t.finish("tunnel body")?;
    s.zero("segment list reserved")?;
    let mut w = sub_tlv(&mut s, "segment list", SUBTLV_WEIGHT, WEIGHT_LEN)?;
    w.zero("weight flags")?;
    w.zero("weight reserved")?;
    let weight = w.u32("weight")?;
    let mut segments = Vec::new();
    while s.remaining() > 0 {
        let mut g = sub_tlv(&mut s, "segment list", SUBTLV_SEGMENT_TYPE_B, TYPE_B_LEN)?;
        g.zero("segment flags")?;
        g.zero("segment reserved")?;
        let sid = g.addr("segment SID")?;
        let behavior = g.u16("segment behavior")?;
        segments.push(Segment { sid, behavior });
    }
    Ok((bsid, preference, priority, SegmentList { weight, segments }))
}

/// Strict inverse of [`encode_safi73`].
pub fn decode_safi73(bytes: &[u8]) -> Result<SrPolicyUpdate, BgpError> {
    let mut r = Reader::new(bytes);
    if r.take(16, "marker")? != BGP_MARKER {
        return Err(BgpError::Marker);
    }
    let total = r.u16("message length")? as usize;
    if total != bytes.len() || !(BGP_HEADER_LEN..=BGP_MAX_LEN).contains(&total) {
        return Err(BgpError::BadLength { what: "message", want: bytes.len(), got: total });
    }
    let ty = r.u8("message type")?;
    if ty != MSG_UPDATE {
        return Err(BgpError::MessageType(ty));
    }
    let withdrawn = r.u16("withdrawn routes length")?;
    expect_len("withdrawn routes", 0, withdrawn as usize)?;
    let attrs_len = r.u16("path attributes length")? as usize;
    let mut a = r.sub(attrs_len, "path attributes")?;
    r.finish("UPDATE (IPv4 NLRI not allowed)")?;

    let (_, mut origin) = attr(&mut a, &[ATTR_ORIGIN], FLAG_TRANSITIVE)?;
    expect_len("ORIGIN", 1, origin.remaining())?;
    origin.zero("ORIGIN (IGP)")?;
    let (_, as_path) = attr(&mut a, &[ATTR_AS_PATH], FLAG_TRANSITIVE)?;
    expect_len("AS_PATH", 0, as_path.remaining())?;

    let (code, mut mp) = attr(&mut a, &[ATTR_MP_REACH, ATTR_MP_UNREACH], FLAG_OPTIONAL | FLAG_EXTENDED)?;
    family(&mut mp)?;
    let withdraw = code == ATTR_MP_UNREACH;
    let mut next_hop = None;
    if !withdraw {
        let nh_len = mp.u8("next hop length")?;
        expect_len("next hop", SID_LEN, nh_len as usize)?;
        next_hop = Some(mp.addr("next hop")?);
        mp.zero("MP_REACH reserved")?;
    }
    let nlri = read_nlri(&mut mp)?;
    mp.finish("multiprotocol NLRI")?;

    let (_, encap) = attr(&mut a, &[ATTR_TUNNEL_ENCAP], FLAG_OPTIONAL | FLAG_TRANSITIVE | FLAG_EXTENDED)?;
    let (bsid, preference, priority, segment_list) = read_tunnel_encap(encap)?;
    a.finish("path attributes")?;

    let u = SrPolicyUpdate {
        nlri,
        bsid,
        segment_list,
        preference,
        priority,
        next_hop: next_hop.unwrap_or(nlri.endpoint),
        withdraw,
    };
    u.validate()?;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Family;

    fn v6(s: &str) -> V6Addr {
        s.parse().unwrap()
    }

    fn worker2_v4() -> SrPolicyUpdate {
        SrPolicyUpdate {
            nlri: PolicyNlri { distinguisher: 4, color: 94, endpoint: v6("fd12::1000") },
            bsid: v6("cafe::4"),
            segment_list: SegmentList {
                weight: 0,
                segments: ["fcff:5::1", "fcff:7::1", "fcff:8::1", "fcdd::12aa:d460:b250:45:b04"]
                    .iter()
                    .map(|s| Segment { sid: v6(s), behavior: 19 })
                    .collect(),
            },
            preference: 0,
            priority: 0,
            next_hop: v6("fd12::1000"),
            withdraw: false,
        }
    }

    fn hex(b: &[u8]) -> String {
        b.iter().map(|x| format!("{x:02x}")).collect()
    }

    /// Byte-by-byte assembly of the expected message, independent of the
    /// encoder's helpers.
    fn oracle(u: &SrPolicyUpdate) -> Vec<u8> {
        let n = u.segment_list.segments.len();
        let seg_list_len = 1 + 8 + n * 22;
        let tunnel_body = 20 + 8 + 4 + 3 + seg_list_len;
        let encap_len = 4 + tunnel_body;
        let mp_len = 3 + 1 + 16 + 1 + 25;
        let attrs = 4 + 3 + (4 + mp_len) + (4 + encap_len);
        let total = 19 + 4 + attrs;
        let mut m = vec![0xff; 16];
        m.extend([(total >> 8) as u8, total as u8, 2, 0, 0, (attrs >> 8) as u8, attrs as u8]);
        m.extend([0x40, 1, 1, 0, 0x40, 2, 0]);
        m.extend([0x90, 14, (mp_len >> 8) as u8, mp_len as u8, 0, 2, 73, 16]);
        m.extend(u.next_hop.octets());
        m.push(0);
        m.push(192);
        m.extend(u.nlri.distinguisher.to_be_bytes());
        m.extend(u.nlri.color.to_be_bytes());
        m.extend(u.nlri.endpoint.octets());
        m.extend([0xd0, 23, (encap_len >> 8) as u8, encap_len as u8, 0, 15]);
        m.extend([(tunnel_body >> 8) as u8, tunnel_body as u8]);
        m.extend([13, 18, 0, 0]);
        m.extend(u.bsid.octets());
        m.extend([12, 6, 0, 0]);
        m.extend(u.preference.to_be_bytes());
        m.extend([15, 2, u.priority, 0]);
        m.extend([128, (seg_list_len >> 8) as u8, seg_list_len as u8, 0]);
        m.extend([9, 6, 0, 0]);
        m.extend(u.segment_list.weight.to_be_bytes());
        for s in &u.segment_list.segments {
            m.extend([13, 20, 0, 0]);
            m.extend(s.sid.octets());
            m.extend(s.behavior.to_be_bytes());
        }
        m
    }

    const WORKER2_V4_HEX: &str = concat!(
        "ffffffffffffffffffffffffffffffff00dc02",
        "0000",
        "00c5",
        "40010100400200",
        "900e002e",
        "000249",
        "10",
        "fd120000000000000000000000001000",
        "00",
        "c0",
        "00000004",
        "0000005e",
        "fd120000000000000000000000001000",
        "d0170088",
        "000f",
        "0084",
        "0d120000",
        "cafe0000000000000000000000000004",
        "0c06000000000000",
        "0f020000",
        "80006100",
        "0906000000000000",
        "0d140000fcff00050000000000000000000000010013",
        "0d140000fcff00070000000000000000000000010013",
        "0d140000fcff00080000000000000000000000010013",
        "0d140000fcdd0000000012aad460b25000450b040013",
    );

    #[test]
    fn encoder_matches_oracle() {
        let u = worker2_v4();
        let enc = encode_safi73(&u).unwrap();
        assert_eq!(hex(&enc), hex(&oracle(&u)));
        assert_eq!(hex(&enc), WORKER2_V4_HEX);
    }

    #[test]
    fn worker2_round_trip() {
        let u = worker2_v4();
        let back = decode_safi73(&encode_safi73(&u).unwrap()).unwrap();
        assert_eq!(back, u);
        assert_eq!(back.nlri.color, 94);
        assert_eq!(back.segment_list.segments[3].sid, v6("fcdd::12aa:d460:b250:45:b04"));
        assert_eq!(back.family(), Some(Family::V4));
    }

    #[test]
    fn withdraw_round_trip() {
        let u = SrPolicyUpdate { withdraw: true, ..worker2_v4() };
        let enc = encode_safi73(&u).unwrap();
        assert_eq!(enc[23 + 7 + 1], ATTR_MP_UNREACH);
        assert_eq!(decode_safi73(&enc).unwrap(), u);
    }

    #[test]
    fn empty_segment_list_rejected() {
        let mut u = worker2_v4();
        u.segment_list.segments.clear();
        assert_eq!(encode_safi73(&u), Err(BgpError::EmptySegmentList));
    }

    #[test]
    fn unknown_sub_tlv_is_named() {
        let mut enc = encode_safi73(&worker2_v4()).unwrap();
        let at = enc.windows(4).position(|w| w == [12, 6, 0, 0]).unwrap();
        enc[at] = 99;
        let err = decode_safi73(&enc).unwrap_err();
        assert_eq!(err, BgpError::UnknownSubTlv { scope: "tunnel", sub_type: 99 });
        assert!(err.to_string().contains("99"));
    }

    #[test]
    fn flipped_length_octet_is_an_error() {
        let enc = encode_safi73(&worker2_v4()).unwrap();
        for (i, _) in enc.iter().enumerate().skip(16).take(8) {
            let mut m = enc.clone();
            m[i] ^= 0x01;
            assert!(decode_safi73(&m).is_err(), "byte {i}");
        }
        let mut m = enc.clone();
        let at = m.windows(2).position(|w| w == [128, 0]).unwrap();
        m[at + 2] = m[at + 2].wrapping_add(22);
        assert!(matches!(decode_safi73(&m), Err(BgpError::Truncated { .. })));
    }

    #[test]
    fn truncation_everywhere() {
        let enc = encode_safi73(&worker2_v4()).unwrap();
        for n in 0..enc.len() {
            assert!(decode_safi73(&enc[..n]).is_err());
        }
    }

    #[test]
    fn mutation_fuzz_differential() {
        use rand::{Rng, SeedableRng};
        let base = encode_safi73(&worker2_v4()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5_000 {
            let mut m = base.clone();
            for _ in 0..rng.gen_range(1..4) {
                let i = rng.gen_range(0..m.len());
                m[i] = rng.gen();
            }
            if let Ok(u) = decode_safi73(&m) {
                assert_eq!(encode_safi73(&u).unwrap(), m);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn codec_round_trip(
            d in proptest::num::u32::ANY,
            c in proptest::num::u32::ANY,
            ep in proptest::num::u128::ANY,
            bsid in proptest::num::u128::ANY,
            pref in proptest::num::u32::ANY,
            prio in proptest::num::u8::ANY,
            weight in proptest::num::u32::ANY,
            sids in proptest::collection::vec((proptest::num::u128::ANY, proptest::num::u16::ANY), 0..12),
            v4 in proptest::bool::ANY,
            withdraw in proptest::bool::ANY,
        ) {
            let last = if v4 { 19 } else { 18 };
            let mut segments: Vec<Segment> =
                sids.into_iter().map(|(s, b)| Segment { sid: V6Addr::from_bits(s), behavior: b }).collect();
            segments.push(Segment { sid: V6Addr::from_bits(ep ^ 1), behavior: last });
            let u = SrPolicyUpdate {
                nlri: PolicyNlri { distinguisher: d, color: c, endpoint: V6Addr::from_bits(ep) },
                bsid: V6Addr::from_bits(bsid),
                segment_list: SegmentList { weight, segments },
                preference: pref,
                priority: prio,
                next_hop: V6Addr::from_bits(ep),
                withdraw,
            };
            let enc = encode_safi73(&u).unwrap();
            proptest::prop_assert_eq!(hex(&enc), hex(&oracle_any(&u)));
            proptest::prop_assert_eq!(decode_safi73(&enc).unwrap(), u);
        }
    }

    fn oracle_any(u: &SrPolicyUpdate) -> Vec<u8> {
        if !u.withdraw {
            return oracle(u);
        }
        // MP_UNREACH drops next-hop length, next hop and reserved (18 bytes)
        let mut m = oracle(&SrPolicyUpdate { withdraw: false, ..u.clone() });
        let total = u16::from_be_bytes([m[16], m[17]]) - 18;
        m[16..18].copy_from_slice(&total.to_be_bytes());
        let attrs = u16::from_be_bytes([m[21], m[22]]) - 18;
        m[21..23].copy_from_slice(&attrs.to_be_bytes());
        let mp = 23 + 7;
        m[mp + 1] = ATTR_MP_UNREACH;
        let len = u16::from_be_bytes([m[mp + 2], m[mp + 3]]) - 18;
        m[mp + 2..mp + 4].copy_from_slice(&len.to_be_bytes());
        m.drain(mp + 7..mp + 7 + 18);
        m
    }
}
