// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Routed backbone: routers joined by weighted links, cluster nodes hanging
//! off a single router each, shortest-path routes and hop-by-hop forwarding
//! of outer packets with path tracing.
//!
//! Router `R<n>` owns the End SID `fcff:<n>::1` inside `fcff:<n>::/32`.
//! Cluster nodes originate routes but never carry transit traffic.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use crate::dataplane::{Behavior, Disposition, DropReason, FibResult, LocalSidEntry, NodeDataplane};
use crate::net::{Addr, InnerPacket, OuterPacket, Prefix, V6Addr};

/// Upper bound on hops per trace, independent of the hop limit.
pub const MAX_TRACE_HOPS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UnderlayError {
    #[error("router id `{0}` is not of the form R<n>")]
    BadRouterId(String),
    #[error("duplicate element `{0}`")]
    Duplicate(String),
    #[error("unknown router `{0}`")]
    UnknownRouter(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("link `{0}` must have a positive cost")]
    ZeroCost(String),
    #[error("duplicate link name `{0}`")]
    DuplicateLink(String),
    #[error("prefix {prefix} originated by `{origin}` is unreachable from `{from}`")]
    Unreachable { prefix: Prefix, origin: String, from: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub name: String,
    pub a: String,
    pub b: String,
    pub cost: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    pub node: String,
    pub router: String,
    pub infra: V6Addr,
    pub cost: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Router,
    Node,
}

/// Routers, links and node attachments. Attachments are links too, named
/// `<node>-<router>`.
#[derive(Debug, Clone, Default)]
pub struct Topology {
    elements: BTreeMap<String, (Kind, V6Addr)>,
    links: Vec<Link>,
    attachments: BTreeMap<String, Attachment>,
}

/// `fcff:<n>::1` for router `R<n>`.
pub fn router_sid(id: &str) -> Result<V6Addr, UnderlayError> {
    let n: u16 = id
        .strip_prefix('R')
        .and_then(|d| d.parse().ok())
        .filter(|n| *n > 0)
        .ok_or_else(|| UnderlayError::BadRouterId(id.to_string()))?;
    Ok(V6Addr::from_bits((0xfcff_u128 << 112) | ((n as u128) << 96) | 1))
}

/// `fcff:<n>::/32` for router `R<n>`.
pub fn router_prefix(id: &str) -> Result<Prefix, UnderlayError> {
    let sid = router_sid(id)?;
    Ok(Prefix::new(Addr::V6(sid), 32).expect("32 fits v6"))
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_router(&mut self, id: &str) -> Result<(), UnderlayError> {
        let sid = router_sid(id)?;
        if self.elements.insert(id.to_string(), (Kind::Router, sid)).is_some() {
            return Err(UnderlayError::Duplicate(id.to_string()));
        }
        Ok(())
    }

    pub fn add_link(&mut self, a: &str, b: &str, cost: u32, name: Option<&str>) -> Result<(), UnderlayError> {
        let name = name.map(str::to_string).unwrap_or_else(|| format!("{a}-{b}"));
        for r in [a, b] {
            if self.kind(r) != Some(Kind::Router) {
                return Err(UnderlayError::UnknownRouter(r.to_string()));
            }
        }
        self.push_link(Link { name, a: a.to_string(), b: b.to_string(), cost })
    }

    pub fn attach(&mut self, node: &str, router: &str, infra: V6Addr, cost: u32) -> Result<(), UnderlayError> {
        if self.kind(router) != Some(Kind::Router) {
            return Err(UnderlayError::UnknownRouter(router.to_string()));
        }
        if self.elements.contains_key(node) {
            return Err(UnderlayError::Duplicate(node.to_string()));
        }
        self.push_link(Link { name: format!("{node}-{router}"), a: node.to_string(), b: router.to_string(), cost })?;
        self.elements.insert(node.to_string(), (Kind::Node, infra));
        self.attachments
            .insert(node.to_string(), Attachment { node: node.to_string(), router: router.to_string(), infra, cost });
        Ok(())
    }

    fn push_link(&mut self, link: Link) -> Result<(), UnderlayError> {
        if link.cost == 0 {
            return Err(UnderlayError::ZeroCost(link.name));
        }
        if self.links.iter().any(|l| l.name == link.name) {
            return Err(UnderlayError::DuplicateLink(link.name));
        }
        self.links.push(link);
        Ok(())
    }

    fn kind(&self, id: &str) -> Option<Kind> {
        self.elements.get(id).map(|(k, _)| *k)
    }

    pub fn is_router(&self, id: &str) -> bool {
        self.kind(id) == Some(Kind::Router)
    }

    pub fn routers(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter(|(_, (k, _))| *k == Kind::Router).map(|(id, _)| id.as_str())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Attachment> {
        self.attachments.values()
    }

    pub fn attachment(&self, node: &str) -> Option<&Attachment> {
        self.attachments.get(node)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Loopback of a router or infrastructure address of a node.
    pub fn address(&self, id: &str) -> Option<V6Addr> {
        self.elements.get(id).map(|(_, a)| *a)
    }

    /// `(link, neighbor)` pairs incident to `id`.
    pub fn neighbors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = (&'a Link, &'a str)> + 'a {
        self.links.iter().filter_map(move |l| {
            if l.a == id {
                Some((l, l.b.as_str()))
            } else if l.b == id {
                Some((l, l.a.as_str()))
            } else {
                None
            }
        })
    }

    /// Router loopback /32s and node infrastructure /128s.
    pub fn default_origins(&self) -> BTreeMap<Prefix, String> {
        let mut out = BTreeMap::new();
        for r in self.routers() {
            out.insert(router_prefix(r).expect("validated on insert"), r.to_string());
        }
        for a in self.attachments.values() {
            out.insert(Prefix::host(Addr::V6(a.infra)), a.node.clone());
        }
        out
    }

    /// Minimum cost from every element to `origin`, transiting routers only.
    fn distances_to(&self, origin: &str) -> BTreeMap<&str, u64> {
        let mut dist: BTreeMap<&str, u64> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        let Some((origin, _)) = self.elements.get_key_value(origin) else {
            return dist;
        };
        dist.insert(origin.as_str(), 0);
        heap.push(Reverse((0u64, origin.as_str())));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist.get(u).is_some_and(|&best| d > best) {
                continue;
            }
            if u != origin && self.kind(u) == Some(Kind::Node) {
                continue;
            }
            for (l, v) in self.neighbors(u) {
                let nd = d + l.cost as u64;
                if dist.get(v).is_none_or(|&cur| nd < cur) {
                    dist.insert(v, nd);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Route {
    pub next: String,
    pub link: String,
    pub cost: u64,
}

/// Per-element forwarding state: prefix → next hop.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouteTable {
    tables: BTreeMap<String, BTreeMap<Prefix, Route>>,
    origins: BTreeMap<Prefix, String>,
}

/// Dijkstra from each origin. At each element the next hop is the incident
/// link on a minimum-cost path, ties broken by the smallest link name.
pub fn compute_routes(t: &Topology, advertised: &BTreeMap<Prefix, String>) -> Result<RouteTable, UnderlayError> {
    let mut rt = RouteTable { tables: BTreeMap::new(), origins: advertised.clone() };
    for id in t.elements.keys() {
        rt.tables.insert(id.clone(), BTreeMap::new());
    }
    let mut by_origin: BTreeMap<&str, Vec<Prefix>> = BTreeMap::new();
    for (p, o) in advertised {
        if !t.elements.contains_key(o) {
            return Err(UnderlayError::UnknownElement(o.clone()));
        }
        by_origin.entry(o.as_str()).or_default().push(*p);
    }
    for (origin, prefixes) in by_origin {
        let dist = t.distances_to(origin);
        for id in t.elements.keys() {
            if id == origin {
                continue;
            }
            let Some(&d) = dist.get(id.as_str()) else {
                return Err(UnderlayError::Unreachable {
                    prefix: prefixes[0],
                    origin: origin.to_string(),
                    from: id.clone(),
                });
            };
            let best = t
                .neighbors(id)
                .filter(|(_, v)| *v == origin || t.is_router(v))
                .filter(|(l, v)| dist.get(v).is_some_and(|&dv| dv + l.cost as u64 == d))
                .min_by(|(a, _), (b, _)| a.name.cmp(&b.name))
                .expect("a finite distance implies a predecessor");
            let route = Route { next: best.1.to_string(), link: best.0.name.clone(), cost: d };
            let table = rt.tables.get_mut(id).expect("seeded above");
            for p in &prefixes {
                table.insert(*p, route.clone());
            }
        }
    }
    Ok(rt)
}

impl RouteTable {
    /// Longest-prefix match at `at`.
    pub fn lookup(&self, at: &str, dst: V6Addr) -> Option<&Route> {
        self.tables
            .get(at)?
            .iter()
            .filter(|(p, _)| p.matches(Addr::V6(dst)))
            .max_by_key(|(p, _)| p.len())
            .map(|(_, r)| r)
    }

    pub fn origins(&self) -> &BTreeMap<Prefix, String> {
        &self.origins
    }

    pub fn table(&self, at: &str) -> Option<&BTreeMap<Prefix, Route>> {
        self.tables.get(at)
    }

    /// Replaces the FIB of every dataplane present in `dps` with this table.
    pub fn install(&self, dps: &mut BTreeMap<String, NodeDataplane>) {
        for (id, dp) in dps.iter_mut() {
            let fib = self.tables.get(id).map(|t| t.iter().map(|(p, r)| (*p, r.next.clone())).collect());
            dp.replace_fib(fib.unwrap_or_default());
        }
    }

    /// Sum of link costs walking next hops from `from` toward `dst`.
    pub fn path_cost(&self, from: &str, dst: V6Addr) -> Option<u64> {
        self.lookup(from, dst).map(|r| r.cost)
    }
}

/// Router dataplanes with their End SIDs installed.
pub fn router_dataplanes(t: &Topology) -> BTreeMap<String, NodeDataplane> {
    let mut out = BTreeMap::new();
    for r in t.routers() {
        let mut dp = NodeDataplane::new();
        let sid = router_sid(r).expect("validated on insert");
        dp.install_localsid(LocalSidEntry::new(sid, Behavior::End)).expect("fresh table");
        out.insert(r.to_string(), dp);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HopAction {
    Forward {
        via: String,
    },
    /// At least one SID consumed here before forwarding.
    Endpoint {
        via: String,
    },
    Deliver {
        target: String,
    },
    Drop(DropReason),
}

impl fmt::Display for HopAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HopAction::Forward { via } => write!(f, "forward({via})"),
            HopAction::Endpoint { via } => write!(f, "end({via})"),
            HopAction::Deliver { target } => write!(f, "deliver({target})"),
            HopAction::Drop(r) => write!(f, "drop({r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceHop {
    pub id: String,
    /// Outer destination on arrival.
    pub dst: V6Addr,
    pub segments_left_in: Option<u8>,
    pub segments_left_out: Option<u8>,
    pub action: HopAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TraceEnd {
    Deliver { node: String, target: String, table_id: u32, inner: InnerPacket },
    Drop { at: String, reason: DropReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub hops: Vec<TraceHop>,
    pub end: TraceEnd,
}

impl TraceRecord {
    pub fn delivered(&self) -> Option<&InnerPacket> {
        match &self.end {
            TraceEnd::Deliver { inner, .. } => Some(inner),
            TraceEnd::Drop { .. } => None,
        }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.hops.iter().map(|h| h.id.as_str()).collect()
    }

    /// One `hop <id> dst=<addr> action=<...>` line per hop.
    pub fn lines(&self) -> Vec<String> {
        self.hops.iter().map(|h| format!("hop {} dst={} action={}", h.id, h.dst, h.action)).collect()
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.lines() {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Hops at which segments_left decreased, in order.
pub fn waypoints(tr: &TraceRecord) -> Vec<String> {
    tr.hops
        .iter()
        .filter(|h| matches!((h.segments_left_in, h.segments_left_out), (Some(i), Some(o)) if o < i))
        .map(|h| h.id.clone())
        .collect()
}

fn sl(p: &OuterPacket) -> Option<u8> {
    p.srh.as_ref().map(|s| s.segments_left())
}

/// Carries `pkt` hop by hop starting at element `from`. Local SIDs run on the
/// element's dataplane; only routers decrement the hop limit.
pub fn forward(
    t: &Topology,
    rt: &RouteTable,
    dps: &mut BTreeMap<String, NodeDataplane>,
    from: &str,
    mut pkt: OuterPacket,
) -> TraceRecord {
    let mut hops = Vec::new();
    let mut at = from.to_string();
    let drop = |hops: Vec<TraceHop>, at: &str| TraceRecord {
        end: TraceEnd::Drop {
            at: at.to_string(),
            reason: match hops.last().map(|h: &TraceHop| &h.action) {
                Some(HopAction::Drop(r)) => *r,
                _ => DropReason::Loop,
            },
        },
        hops,
    };
    loop {
        if hops.len() >= MAX_TRACE_HOPS {
            return TraceRecord { hops, end: TraceEnd::Drop { at, reason: DropReason::Loop } };
        }
        let arrival_dst = pkt.dst;
        let sl_in = sl(&pkt);
        let mut consumed = false;
        let mut via: Option<String> = None;
        let mut terminal: Option<HopAction> = None;
        let mut delivered: Option<(String, u32, InnerPacket)> = None;
        // Local processing until the packet leaves this element.
        for _ in 0..=crate::net::MAX_SEGMENTS {
            let local = dps.get(&at).is_some_and(|dp| dp.fib_lookup(pkt.dst) == FibResult::Local);
            if !local {
                via = rt.lookup(&at, pkt.dst).map(|r| r.next.clone());
                if via.is_none() {
                    terminal = Some(HopAction::Drop(DropReason::NoRoute));
                }
                break;
            }
            let dp = dps.get_mut(&at).expect("checked above");
            match dp.process_local(pkt.clone()) {
                Disposition::Forward(p) => {
                    pkt = p;
                    consumed = true;
                }
                Disposition::ForwardVia(nh, p) => {
                    pkt = p;
                    consumed = true;
                    match t.neighbors(&at).find(|(_, v)| t.address(v) == Some(nh)) {
                        Some((_, v)) => via = Some(v.to_string()),
                        None => terminal = Some(HopAction::Drop(DropReason::NoAdjacency)),
                    }
                    break;
                }
                Disposition::Deliver { inner, table_id, target } => {
                    terminal = Some(HopAction::Deliver { target: target.clone() });
                    delivered = Some((target, table_id, inner));
                    break;
                }
                Disposition::Drop(r) => {
                    terminal = Some(HopAction::Drop(r));
                    break;
                }
            }
        }
        if terminal.is_none() && via.is_none() {
            terminal = Some(HopAction::Drop(DropReason::Loop));
        }
        if terminal.is_none() && t.is_router(&at) {
            if pkt.hop_limit <= 1 {
                terminal = Some(HopAction::Drop(DropReason::Ttl));
            } else {
                pkt.hop_limit -= 1;
            }
        }
        let sl_out = sl(&pkt);
        let action = match (terminal, via) {
            (Some(a), _) => a,
            (None, Some(v)) if consumed => HopAction::Endpoint { via: v },
            (None, Some(v)) => HopAction::Forward { via: v },
            (None, None) => unreachable!("handled above"),
        };
        let next = match &action {
            HopAction::Forward { via } | HopAction::Endpoint { via } => Some(via.clone()),
            _ => None,
        };
        hops.push(TraceHop {
            id: at.clone(),
            dst: arrival_dst,
            segments_left_in: sl_in,
            segments_left_out: sl_out,
            action,
        });
        match (next, delivered) {
            (Some(n), _) => at = n,
            (None, Some((target, table_id, inner))) => {
                return TraceRecord { hops, end: TraceEnd::Deliver { node: at, target, table_id, inner } };
            }
            (None, None) => return drop(hops, &at),
        }
    }
}
