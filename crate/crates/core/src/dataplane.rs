// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Per-node SRv6 dataplane state and behavior execution.
//!
//! A [`NodeDataplane`] holds what a VPP instance would: the localSID table
//! with per-SID counters, SR policies keyed by binding SID, per-family
//! steering rules, the encapsulation source, a FIB, and tenant tables used by
//! the decapsulating behaviors. Routers in the underlay use the same type
//! with only an `End` SID and a FIB.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::net::{Addr, Family, InnerPacket, OuterPacket, Prefix, Srh, V6Addr, PROTO_ROUTING};

pub const DEFAULT_HOP_LIMIT: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Behavior {
    End,
    EndX { next_hop: V6Addr },
    EndDT4 { table_id: u32 },
    EndDT6 { table_id: u32 },
}

impl Behavior {
    pub const CODE_END: u16 = 1;
    pub const CODE_END_X: u16 = 5;
    pub const CODE_END_DT6: u16 = 18;
    pub const CODE_END_DT4: u16 = 19;

    pub fn code(&self) -> u16 {
        match self {
            Behavior::End => Self::CODE_END,
            Behavior::EndX { .. } => Self::CODE_END_X,
            Behavior::EndDT6 { .. } => Self::CODE_END_DT6,
            Behavior::EndDT4 { .. } => Self::CODE_END_DT4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Behavior::End => "End",
            Behavior::EndX { .. } => "End.X",
            Behavior::EndDT4 { .. } => "End.DT4",
            Behavior::EndDT6 { .. } => "End.DT6",
        }
    }

    /// Decap behavior for a family in the default tenant table.
    pub fn decap(family: Family) -> Self {
        match family {
            Family::V4 => Behavior::EndDT4 { table_id: 0 },
            Family::V6 => Behavior::EndDT6 { table_id: 0 },
        }
    }

    /// Family selected by a decap behavior code, if it is one.
    pub fn decap_family_of_code(code: u16) -> Option<Family> {
        match code {
            Self::CODE_END_DT4 => Some(Family::V4),
            Self::CODE_END_DT6 => Some(Family::V6),
            _ => None,
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Behavior::End => f.write_str("End"),
            Behavior::EndX { next_hop } => write!(f, "End.X nh={next_hop}"),
            Behavior::EndDT4 { table_id } => write!(f, "End.DT4 table={table_id}"),
            Behavior::EndDT6 { table_id } => write!(f, "End.DT6 table={table_id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSidEntry {
    pub sid: V6Addr,
    pub behavior: Behavior,
    pub rx_counter: u64,
}

impl LocalSidEntry {
    pub fn new(sid: V6Addr, behavior: Behavior) -> Self {
        LocalSidEntry { sid, behavior, rx_counter: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrPolicyEntry {
    pub bsid: V6Addr,
    /// Forward path order; the first entry is the first segment visited.
    pub segments: Vec<V6Addr>,
    pub family: Family,
}

impl SrPolicyEntry {
    pub fn new(bsid: V6Addr, segments: Vec<V6Addr>, family: Family) -> Result<Self, DataplaneError> {
        if segments.is_empty() {
            return Err(DataplaneError::EmptySegmentList(bsid));
        }
        if segments.len() > crate::net::MAX_SEGMENTS {
            return Err(DataplaneError::TooManySegments(segments.len()));
        }
        Ok(SrPolicyEntry { bsid, segments, family })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteeringRule {
    pub prefix: Prefix,
    pub bsid: V6Addr,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FibResult {
    Local,
    NextHop(String),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    NoMoreSegments,
    PrematureDecap,
    FamilyMismatch,
    NoSrh,
    NotLocalSid,
    NoTenantRoute,
    MalformedInner,
    NoSteeringMatch,
    NoRoute,
    Ttl,
    NoAdjacency,
    Encap,
    Loop,
}

impl DropReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::NoMoreSegments => "no more segments",
            DropReason::PrematureDecap => "premature decap",
            DropReason::FamilyMismatch => "family mismatch",
            DropReason::NoSrh => "no SRH",
            DropReason::NotLocalSid => "not a local sid",
            DropReason::NoTenantRoute => "no tenant route",
            DropReason::MalformedInner => "malformed inner",
            DropReason::NoSteeringMatch => "no steering match",
            DropReason::NoRoute => "no route",
            DropReason::Ttl => "ttl",
            DropReason::NoAdjacency => "no adjacency",
            DropReason::Encap => "encap failed",
            DropReason::Loop => "forwarding loop",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of executing a local SID's behavior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Disposition {
    Forward(OuterPacket),
    ForwardVia(V6Addr, OuterPacket),
    Deliver { inner: InnerPacket, table_id: u32, target: String },
    Drop(DropReason),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataplaneError {
    #[error("steering rule {prefix} references unknown binding SID {bsid}")]
    DanglingPolicy { prefix: Prefix, bsid: V6Addr },
    #[error("unknown binding SID {0}")]
    UnknownBsid(V6Addr),
    #[error("policy {bsid} is {policy} but {what} is {found}")]
    FamilyMismatch { bsid: V6Addr, policy: Family, what: &'static str, found: Family },
    #[error("policy {0} has an empty segment list")]
    EmptySegmentList(V6Addr),
    #[error("{0} segments do not fit in an SRH")]
    TooManySegments(usize),
    #[error("no encapsulation source configured")]
    NoEncapSource,
    #[error("policy {bsid} still steered by {prefix}")]
    PolicyInUse { bsid: V6Addr, prefix: Prefix },
    #[error("local SID {0} already bound to a different behavior")]
    SidConflict(V6Addr),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeDataplane {
    localsids: BTreeMap<V6Addr, LocalSidEntry>,
    policies: BTreeMap<V6Addr, SrPolicyEntry>,
    steering: BTreeMap<Prefix, V6Addr>,
    encap_source: Option<V6Addr>,
    fib: BTreeMap<Prefix, String>,
    tenant_tables: BTreeMap<u32, BTreeMap<Prefix, String>>,
    mutations: u64,
}

/// Longest-prefix match over a prefix-keyed map.
fn lpm<V>(table: &BTreeMap<Prefix, V>, a: Addr) -> Option<(&Prefix, &V)> {
    table.iter().filter(|(p, _)| p.matches(a)).max_by_key(|(p, _)| p.len())
}

impl NodeDataplane {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of state changes applied so far. Idempotent reinstalls leave it unchanged.
    pub fn mutations(&self) -> u64 {
        self.mutations
    }

    pub fn install_localsid(&mut self, entry: LocalSidEntry) -> Result<bool, DataplaneError> {
        match self.localsids.get(&entry.sid) {
            Some(cur) if cur.behavior == entry.behavior => Ok(false),
            Some(_) => Err(DataplaneError::SidConflict(entry.sid)),
            None => {
                self.localsids.insert(entry.sid, entry);
                self.mutations += 1;
                Ok(true)
            }
        }
    }

    pub fn remove_localsid(&mut self, sid: V6Addr) -> bool {
        let removed = self.localsids.remove(&sid).is_some();
        self.mutations += removed as u64;
        removed
    }

    /// Installs or replaces the policy for `entry.bsid`. A replacement swaps the
    /// segment list in one step; steering rules keep pointing at the BSID.
    pub fn install_policy(&mut self, entry: SrPolicyEntry) -> Result<bool, DataplaneError> {
        if let Some(cur) = self.policies.get(&entry.bsid) {
            if *cur == entry {
                return Ok(false);
            }
            if cur.family != entry.family {
                if let Some((prefix, _)) = self.steering.iter().find(|(_, b)| **b == entry.bsid) {
                    return Err(DataplaneError::FamilyMismatch {
                        bsid: entry.bsid,
                        policy: entry.family,
                        what: "steered prefix",
                        found: prefix.family(),
                    });
                }
            }
        }
        self.policies.insert(entry.bsid, entry);
        self.mutations += 1;
        Ok(true)
    }

    pub fn remove_policy(&mut self, bsid: V6Addr) -> Result<bool, DataplaneError> {
        if let Some((prefix, _)) = self.steering.iter().find(|(_, b)| **b == bsid) {
            return Err(DataplaneError::PolicyInUse { bsid, prefix: *prefix });
        }
        let removed = self.policies.remove(&bsid).is_some();
        self.mutations += removed as u64;
        Ok(removed)
    }

    pub fn install_steering(&mut self, rule: SteeringRule) -> Result<bool, DataplaneError> {
        let policy = self
            .policies
            .get(&rule.bsid)
            .ok_or(DataplaneError::DanglingPolicy { prefix: rule.prefix, bsid: rule.bsid })?;
        if policy.family != rule.prefix.family() {
            return Err(DataplaneError::FamilyMismatch {
                bsid: rule.bsid,
                policy: policy.family,
                what: "steered prefix",
                found: rule.prefix.family(),
            });
        }
        if self.steering.get(&rule.prefix) == Some(&rule.bsid) {
            return Ok(false);
        }
        self.steering.insert(rule.prefix, rule.bsid);
        self.mutations += 1;
        Ok(true)
    }

    pub fn remove_steering(&mut self, prefix: &Prefix) -> bool {
        let removed = self.steering.remove(prefix).is_some();
        self.mutations += removed as u64;
        removed
    }

    pub fn set_encap_source(&mut self, addr: V6Addr) -> bool {
        if self.encap_source == Some(addr) {
            return false;
        }
        self.encap_source = Some(addr);
        self.mutations += 1;
        true
    }

    pub fn set_fib_route(&mut self, prefix: Prefix, next_hop: impl Into<String>) {
        let next_hop = next_hop.into();
        if self.fib.get(&prefix) != Some(&next_hop) {
            self.fib.insert(prefix, next_hop);
            self.mutations += 1;
        }
    }

    /// Replaces the whole FIB; counts as one mutation only if it changed.
    pub fn replace_fib(&mut self, fib: BTreeMap<Prefix, String>) {
        if self.fib != fib {
            self.fib = fib;
            self.mutations += 1;
        }
    }

    pub fn clear_fib(&mut self) {
        if !self.fib.is_empty() {
            self.fib.clear();
            self.mutations += 1;
        }
    }

    pub fn add_tenant_route(&mut self, table_id: u32, prefix: Prefix, target: impl Into<String>) {
        self.tenant_tables.entry(table_id).or_default().insert(prefix, target.into());
        self.mutations += 1;
    }

    pub fn encap_source(&self) -> Option<V6Addr> {
        self.encap_source
    }

    pub fn localsids(&self) -> impl Iterator<Item = &LocalSidEntry> {
        self.localsids.values()
    }

    pub fn localsid(&self, sid: V6Addr) -> Option<&LocalSidEntry> {
        self.localsids.get(&sid)
    }

    pub fn policies(&self) -> impl Iterator<Item = &SrPolicyEntry> {
        self.policies.values()
    }

    pub fn policy(&self, bsid: V6Addr) -> Option<&SrPolicyEntry> {
        self.policies.get(&bsid)
    }

    pub fn steering(&self) -> impl Iterator<Item = SteeringRule> + '_ {
        self.steering.iter().map(|(p, b)| SteeringRule { prefix: *p, bsid: *b })
    }

    pub fn fib(&self) -> impl Iterator<Item = (&Prefix, &String)> {
        self.fib.iter()
    }

    /// Longest-prefix match of `dst` over the steering rules of its family.
    pub fn steer_lookup(&self, dst: Addr) -> Option<V6Addr> {
        lpm(&self.steering, dst).map(|(_, b)| *b)
    }

    pub fn tenant_lookup(&self, table_id: u32, dst: Addr) -> Option<&str> {
        self.tenant_tables.get(&table_id).and_then(|t| lpm(t, dst)).map(|(_, t)| t.as_str())
    }

    pub fn fib_lookup(&self, dst: V6Addr) -> FibResult {
        if self.localsids.contains_key(&dst) {
            return FibResult::Local;
        }
        match lpm(&self.fib, Addr::V6(dst)) {
            Some((_, nh)) => FibResult::NextHop(nh.clone()),
            None => FibResult::None,
        }
    }

    /// SR headend with encapsulation: wraps `inner` in an outer IPv6 packet
    /// whose SRH carries the policy's segments.
    pub fn h_encaps(&self, inner: &InnerPacket, bsid: V6Addr) -> Result<OuterPacket, DataplaneError> {
        let policy = self.policies.get(&bsid).ok_or(DataplaneError::UnknownBsid(bsid))?;
        let src = self.encap_source.ok_or(DataplaneError::NoEncapSource)?;
        if policy.family != inner.family() {
            return Err(DataplaneError::FamilyMismatch {
                bsid,
                policy: policy.family,
                what: "inner packet",
                found: inner.family(),
            });
        }
        let srh = Srh::for_path(inner.family().encap_protocol(), &policy.segments)
            .map_err(|_| DataplaneError::TooManySegments(policy.segments.len()))?;
        Ok(OuterPacket {
            src,
            dst: policy.segments[0],
            next_header: PROTO_ROUTING,
            hop_limit: DEFAULT_HOP_LIMIT,
            srh: Some(srh),
            inner: inner.encode(),
        })
    }

    /// Executes the behavior bound to `pkt.dst` and bumps its counter.
    pub fn process_local(&mut self, mut pkt: OuterPacket) -> Disposition {
        let Some(entry) = self.localsids.get_mut(&pkt.dst) else {
            return Disposition::Drop(DropReason::NotLocalSid);
        };
        entry.rx_counter += 1;
        let behavior = entry.behavior;
        match behavior {
            Behavior::End | Behavior::EndX { .. } => {
                let Some(srh) = pkt.srh.as_mut() else {
                    return Disposition::Drop(DropReason::NoSrh);
                };
                let Some(next) = srh.advance() else {
                    return Disposition::Drop(DropReason::NoMoreSegments);
                };
                pkt.dst = next;
                match behavior {
                    Behavior::EndX { next_hop } => Disposition::ForwardVia(next_hop, pkt),
                    _ => Disposition::Forward(pkt),
                }
            }
            Behavior::EndDT4 { table_id } | Behavior::EndDT6 { table_id } => {
                let want = match behavior {
                    Behavior::EndDT4 { .. } => Family::V4,
                    _ => Family::V6,
                };
                if pkt.srh.as_ref().is_some_and(|s| s.segments_left() > 0) {
                    return Disposition::Drop(DropReason::PrematureDecap);
                }
                if Family::from_encap_protocol(pkt.inner_protocol()) != Some(want) {
                    return Disposition::Drop(DropReason::FamilyMismatch);
                }
                let inner = match InnerPacket::decode(&pkt.inner) {
                    Ok(p) if p.family() == want => p,
                    Ok(_) => return Disposition::Drop(DropReason::FamilyMismatch),
                    Err(_) => return Disposition::Drop(DropReason::MalformedInner),
                };
                match self.tenant_lookup(table_id, inner.dst()) {
                    Some(target) => {
                        let target = target.to_string();
                        Disposition::Deliver { inner, table_id, target }
                    }
                    None => Disposition::Drop(DropReason::NoTenantRoute),
                }
            }
        }
    }

    pub fn counter_total(&self) -> u64 {
        self.localsids.values().map(|e| e.rx_counter).sum()
    }

    pub fn reset_counters(&mut self) {
        for e in self.localsids.values_mut() {
            e.rx_counter = 0;
        }
    }

    pub fn show_localsids(&self) -> String {
        let mut out = String::new();
        for e in self.localsids.values() {
            let _ = writeln!(out, "{} {} packets={}", e.sid, e.behavior, e.rx_counter);
        }
        out
    }

    pub fn show_policies(&self) -> String {
        let mut out = String::new();
        for p in self.policies.values() {
            let segs: Vec<String> = p.segments.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "bsid {} {} segments <{}>", p.bsid, p.family, segs.join(", "));
        }
        out
    }

    pub fn show_steering(&self) -> String {
        let mut out = String::new();
        for (prefix, bsid) in &self.steering {
            let _ = writeln!(out, "{prefix} via bsid {bsid}");
        }
        out
    }

    pub fn show_encap_source(&self) -> String {
        match self.encap_source {
            Some(a) => format!("{a}\n"),
            None => "unset\n".to_string(),
        }
    }

    /// Serializable view of the SR configuration.
    pub fn dump(&self) -> DataplaneDump {
        DataplaneDump {
            localsids: self.localsids.values().cloned().collect(),
            policies: self.policies.values().cloned().collect(),
            steering: self.steering().collect(),
            encap_source: self.encap_source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataplaneDump {
    pub localsids: Vec<LocalSidEntry>,
    pub policies: Vec<SrPolicyEntry>,
    pub steering: Vec<SteeringRule>,
    pub encap_source: Option<V6Addr>,
}

impl DataplaneDump {
    /// The part of the dump that does not depend on where localSIDs came from.
    pub fn tunnel_view(&self) -> (Vec<SrPolicyEntry>, Vec<SteeringRule>, Option<V6Addr>) {
        (self.policies.clone(), self.steering.clone(), self.encap_source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::PROTO_IPV4;

    fn v6(s: &str) -> V6Addr {
        s.parse().unwrap()
    }

    fn pfx(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    fn worker2_v4_policy() -> SrPolicyEntry {
        SrPolicyEntry::new(
            v6("cafe::4"),
            vec![v6("fcff:5::1"), v6("fcff:7::1"), v6("fcff:8::1"), v6("fcdd::12aa:d460:b250:45:b04")],
            Family::V4,
        )
        .unwrap()
    }

    #[test]
    fn policy_install_is_idempotent() {
        let mut dp = NodeDataplane::new();
        assert!(dp.install_policy(worker2_v4_policy()).unwrap());
        let v = dp.mutations();
        assert!(!dp.install_policy(worker2_v4_policy()).unwrap());
        assert_eq!(dp.mutations(), v);
        assert_eq!(dp.policies().count(), 1);
        assert_eq!(
            dp.show_policies(),
            "bsid cafe::4 v4 segments <fcff:5::1, fcff:7::1, fcff:8::1, fcdd::12aa:d460:b250:45:b04>\n"
        );
    }

    #[test]
    fn policy_replace_swaps_segments() {
        let mut dp = NodeDataplane::new();
        dp.install_policy(worker2_v4_policy()).unwrap();
        dp.install_steering(SteeringRule { prefix: pfx("172.16.104.64/26"), bsid: v6("cafe::4") }).unwrap();
        let newer = SrPolicyEntry::new(v6("cafe::4"), vec![v6("fcff:8::1")], Family::V4).unwrap();
        assert!(dp.install_policy(newer.clone()).unwrap());
        assert_eq!(dp.policy(v6("cafe::4")), Some(&newer));
        assert_eq!(dp.steer_lookup("172.16.104.70".parse().unwrap()), Some(v6("cafe::4")));
    }

    #[test]
    fn dangling_steering_is_rejected() {
        let mut dp = NodeDataplane::new();
        let err =
            dp.install_steering(SteeringRule { prefix: pfx("172.16.166.128/26"), bsid: v6("cafe::99") }).unwrap_err();
        assert!(matches!(err, DataplaneError::DanglingPolicy { .. }));
    }

    #[test]
    fn steering_family_must_match_policy() {
        let mut dp = NodeDataplane::new();
        dp.install_policy(worker2_v4_policy()).unwrap();
        let err = dp.install_steering(SteeringRule { prefix: pfx("fd20::/64"), bsid: v6("cafe::4") });
        assert!(matches!(err, Err(DataplaneError::FamilyMismatch { .. })));
    }

    #[test]
    fn steering_uses_longest_prefix() {
        let mut dp = NodeDataplane::new();
        dp.install_policy(worker2_v4_policy()).unwrap();
        dp.install_policy(SrPolicyEntry::new(v6("cafe::8"), vec![v6("fcdd::1")], Family::V4).unwrap()).unwrap();
        dp.install_steering(SteeringRule { prefix: pfx("172.16.104.0/24"), bsid: v6("cafe::8") }).unwrap();
        dp.install_steering(SteeringRule { prefix: pfx("172.16.104.64/26"), bsid: v6("cafe::4") }).unwrap();
        assert_eq!(dp.steer_lookup("172.16.104.70".parse().unwrap()), Some(v6("cafe::4")));
        assert_eq!(dp.steer_lookup("172.16.104.1".parse().unwrap()), Some(v6("cafe::8")));
        assert_eq!(dp.steer_lookup("10.1.1.1".parse().unwrap()), None);
        assert_eq!(dp.steer_lookup("fd00::1".parse().unwrap()), None);
    }

    #[test]
    fn policy_in_use_cannot_be_removed() {
        let mut dp = NodeDataplane::new();
        dp.install_policy(worker2_v4_policy()).unwrap();
        dp.install_steering(SteeringRule { prefix: pfx("172.16.104.64/26"), bsid: v6("cafe::4") }).unwrap();
        assert!(matches!(dp.remove_policy(v6("cafe::4")), Err(DataplaneError::PolicyInUse { .. })));
        assert!(dp.remove_steering(&pfx("172.16.104.64/26")));
        assert!(dp.remove_policy(v6("cafe::4")).unwrap());
    }

    fn headend() -> NodeDataplane {
        let mut dp = NodeDataplane::new();
        dp.set_encap_source(v6("fd12::1000"));
        dp
    }

    fn inner_v4() -> InnerPacket {
        InnerPacket::echo("172.16.104.65".parse().unwrap(), "172.16.166.128".parse().unwrap(), b"hello".to_vec())
            .unwrap()
    }

    #[test]
    fn encaps_stores_segments_reversed() {
        let (s1, s2, s3) = (v6("fc00:1::1"), v6("fc00:2::1"), v6("fc00:3::1"));
        let mut dp = headend();
        dp.install_policy(SrPolicyEntry::new(v6("cafe::1"), vec![s1, s2, s3], Family::V4).unwrap()).unwrap();
        let out = dp.h_encaps(&inner_v4(), v6("cafe::1")).unwrap();
        let srh = out.srh.as_ref().unwrap();
        assert_eq!(srh.segment_list(), &[s3, s2, s1]);
        assert_eq!(srh.segments_left(), 2);
        assert_eq!(srh.last_entry(), 2);
        assert_eq!(srh.next_header(), PROTO_IPV4);
        assert_eq!(out.dst, s1);
        assert_eq!(out.src, v6("fd12::1000"));
        assert_eq!(out.inner, inner_v4().encode());
    }

    #[test]
    fn encaps_errors() {
        let mut dp = NodeDataplane::new();
        dp.install_policy(worker2_v4_policy()).unwrap();
        assert_eq!(dp.h_encaps(&inner_v4(), v6("cafe::4")), Err(DataplaneError::NoEncapSource));
        dp.set_encap_source(v6("fd10::1000"));
        assert_eq!(dp.h_encaps(&inner_v4(), v6("cafe::9")), Err(DataplaneError::UnknownBsid(v6("cafe::9"))));
        let v6inner = InnerPacket::echo("fd20::1".parse().unwrap(), "fd20::2".parse().unwrap(), vec![]).unwrap();
        assert!(matches!(dp.h_encaps(&v6inner, v6("cafe::4")), Err(DataplaneError::FamilyMismatch { .. })));
    }

    #[test]
    fn end_advances_to_next_segment() {
        let (s1, s2, s3) = (v6("fc00:1::1"), v6("fc00:2::1"), v6("fc00:3::1"));
        let mut src = headend();
        src.install_policy(SrPolicyEntry::new(v6("cafe::1"), vec![s1, s2, s3], Family::V4).unwrap()).unwrap();
        let pkt = src.h_encaps(&inner_v4(), v6("cafe::1")).unwrap();
        let mut router = NodeDataplane::new();
        router.install_localsid(LocalSidEntry::new(s1, Behavior::End)).unwrap();
        match router.process_local(pkt) {
            Disposition::Forward(p) => {
                assert_eq!(p.srh.as_ref().unwrap().segments_left(), 1);
                assert_eq!(p.dst, s2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(router.localsid(s1).unwrap().rx_counter, 1);
    }

    #[test]
    fn end_x_forwards_via_configured_next_hop() {
        let (s1, s2) = (v6("fc00:1::1"), v6("fc00:2::1"));
        let mut src = headend();
        src.install_policy(SrPolicyEntry::new(v6("cafe::1"), vec![s1, s2], Family::V4).unwrap()).unwrap();
        let pkt = src.h_encaps(&inner_v4(), v6("cafe::1")).unwrap();
        let mut router = NodeDataplane::new();
        router.install_localsid(LocalSidEntry::new(s1, Behavior::EndX { next_hop: v6("fe80::2") })).unwrap();
        match router.process_local(pkt) {
            Disposition::ForwardVia(nh, p) => {
                assert_eq!(nh, v6("fe80::2"));
                assert_eq!(p.dst, s2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn end_without_segments_drops() {
        let s1 = v6("fc00:1::1");
        let mut src = headend();
        src.install_policy(SrPolicyEntry::new(v6("cafe::1"), vec![s1], Family::V4).unwrap()).unwrap();
        let pkt = src.h_encaps(&inner_v4(), v6("cafe::1")).unwrap();
        let mut router = NodeDataplane::new();
        router.install_localsid(LocalSidEntry::new(s1, Behavior::End)).unwrap();
        assert_eq!(router.process_local(pkt), Disposition::Drop(DropReason::NoMoreSegments));
    }

    #[test]
    fn end_without_srh_drops() {
        let s1 = v6("fc00:1::1");
        let mut router = NodeDataplane::new();
        router.install_localsid(LocalSidEntry::new(s1, Behavior::End)).unwrap();
        let pkt = OuterPacket {
            src: v6("fd00::1"),
            dst: s1,
            next_header: PROTO_IPV4,
            hop_limit: 64,
            srh: None,
            inner: inner_v4().encode(),
        };
        assert_eq!(router.process_local(pkt), Disposition::Drop(DropReason::NoSrh));
    }

    fn decap_node(dt: V6Addr, behavior: Behavior) -> NodeDataplane {
        let mut dp = NodeDataplane::new();
        dp.install_localsid(LocalSidEntry::new(dt, behavior)).unwrap();
        dp.add_tenant_route(0, pfx("172.16.166.128/26"), "pod-a");
        dp.add_tenant_route(0, pfx("fd20:0:0:11::/64"), "pod-a");
        dp
    }

    #[test]
    fn dt4_delivers_identical_inner() {
        let dt = v6("fcdd::11aa:c11:b42f:f17e:a682");
        let mut src = headend();
        src.install_policy(SrPolicyEntry::new(v6("cafe::1c2"), vec![dt], Family::V4).unwrap()).unwrap();
        let pkt = src.h_encaps(&inner_v4(), v6("cafe::1c2")).unwrap();
        let mut dst = decap_node(dt, Behavior::EndDT4 { table_id: 0 });
        match dst.process_local(pkt) {
            Disposition::Deliver { inner, table_id, target } => {
                assert_eq!(inner.encode(), inner_v4().encode());
                assert_eq!(table_id, 0);
                assert_eq!(target, "pod-a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dt4_with_segments_left_is_premature() {
        let dt = v6("fcdd::a682");
        let mut src = headend();
        src.install_policy(SrPolicyEntry::new(v6("cafe::1"), vec![dt, v6("fcdd::ffff")], Family::V4).unwrap()).unwrap();
        let pkt = src.h_encaps(&inner_v4(), v6("cafe::1")).unwrap();
        let mut dst = decap_node(dt, Behavior::EndDT4 { table_id: 0 });
        assert_eq!(dst.process_local(pkt), Disposition::Drop(DropReason::PrematureDecap));
    }

    #[test]
    fn dt6_rejects_v4_inner() {
        let dt = v6("fcdd::a683");
        let mut src = headend();
        src.install_policy(SrPolicyEntry::new(v6("cafe::1"), vec![dt], Family::V4).unwrap()).unwrap();
        let pkt = src.h_encaps(&inner_v4(), v6("cafe::1")).unwrap();
        let mut dst = decap_node(dt, Behavior::EndDT6 { table_id: 0 });
        assert_eq!(dst.process_local(pkt), Disposition::Drop(DropReason::FamilyMismatch));
    }

    #[test]
    fn fib_prefers_local_then_longest_match() {
        let mut dp = NodeDataplane::new();
        let sid = v6("fcff:3::1");
        dp.install_localsid(LocalSidEntry::new(sid, Behavior::End)).unwrap();
        dp.set_fib_route(pfx("fcff:3::/32"), "R3-R4");
        dp.set_fib_route(pfx("::/0"), "default");
        assert_eq!(dp.fib_lookup(sid), FibResult::Local);
        assert_eq!(dp.fib_lookup(v6("fcff:3::2")), FibResult::NextHop("R3-R4".into()));
        assert_eq!(dp.fib_lookup(v6("fd00::1")), FibResult::NextHop("default".into()));
        dp.clear_fib();
        assert_eq!(dp.fib_lookup(v6("fd00::1")), FibResult::None);
    }

    #[test]
    fn counters_count_every_local_call() {
        let dt = v6("fcdd::a682");
        let mut src = headend();
        src.install_policy(SrPolicyEntry::new(v6("cafe::1"), vec![dt], Family::V4).unwrap()).unwrap();
        let mut dst = decap_node(dt, Behavior::EndDT4 { table_id: 0 });
        for _ in 0..4 {
            let pkt = src.h_encaps(&inner_v4(), v6("cafe::1")).unwrap();
            dst.process_local(pkt);
        }
        assert_eq!(dst.counter_total(), 4);
        assert_eq!(dst.show_localsids(), "fcdd::a682 End.DT4 table=0 packets=4\n");
    }
}
