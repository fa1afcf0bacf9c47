// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Deterministic scenario driver: builds the underlay, starts one agent per
//! node, runs the control plane to quiescence on a seeded scheduler, and
//! pushes pod traffic through the node graphs and the routed backbone.

mod report;
mod scenario;

use std::collections::BTreeMap;
use std::path::PathBuf;

pub use report::{ChangeSummary, ControlCounters, MetricsReport, PingReport, SidCounter, TunnelCounter};
pub use scenario::{InjectorSpec, LinkSpec, NodeSpec, PodSpec, Scenario, DEFAULT_MAX_STEPS};

use crate::agent::{Agent, AgentConfig, AgentError, AgentMode, Installed, Outbound, TunnelKey};
use crate::bgp::{BgpError, PolicyFile, PolicyNlri, SessionBus, SrPolicyUpdate};
use crate::dataplane::{DataplaneDump, DropReason, NodeDataplane};
use crate::graph::{standard_pipeline, Graph, GraphError, Outcome, WorkPacket};
use crate::k8s::{parse_configmap_file, parse_ippools, write_configmap, ConfigMapDoc, Ipam, K8sError, KvStore};
use crate::net::{Addr, Family, InnerPacket, Prefix, V6Addr};
use crate::underlay::{
    compute_routes, forward, router_dataplanes, router_sid, HopAction, RouteTable, Topology, TraceEnd, TraceHop,
    TraceRecord, UnderlayError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("{file}: {msg}")]
    Scenario { file: String, msg: String },
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error(transparent)]
    Underlay(#[from] UnderlayError),
    #[error("agent {node}: {source}")]
    Agent { node: String, source: AgentError },
    #[error(transparent)]
    Bgp(#[from] BgpError),
    #[error(transparent)]
    K8s(#[from] K8sError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("control plane did not converge within {steps} steps ({in_flight} messages in flight)")]
    NoConvergence { steps: u64, in_flight: usize },
    #[error("`{command}` is not available in {mode} mode")]
    ModeMismatch { command: &'static str, mode: AgentMode },
    #[error("unknown pod {0}")]
    UnknownPod(String),
    #[error("unknown node or router {0}")]
    UnknownElement(String),
    #[error("pods {src} and {dst} share no address family")]
    NoCommonFamily { src: String, dst: String },
    #[error("unknown table `{0}` (localsids, policies, steering, encap-source)")]
    ShowWhat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShowWhat {
    LocalSids,
    Policies,
    Steering,
    EncapSource,
}

impl std::str::FromStr for ShowWhat {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "localsids" => Ok(ShowWhat::LocalSids),
            "policies" => Ok(ShowWhat::Policies),
            "steering" | "steering-policies" => Ok(ShowWhat::Steering),
            "encap-source" => Ok(ShowWhat::EncapSource),
            other => Err(SimError::ShowWhat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pod {
    node: String,
    addrs: Vec<Addr>,
}

impl Pod {
    fn addr(&self, f: Family) -> Option<Addr> {
        self.addrs.iter().copied().find(|a| a.family() == f)
    }
}

pub struct Simulation {
    scenario: Scenario,
    topo: Topology,
    routes: RouteTable,
    routers: BTreeMap<String, NodeDataplane>,
    agents: BTreeMap<String, Agent>,
    bus: SessionBus,
    store: KvStore,
    ipam: Ipam,
    graph: Graph,
    pods: BTreeMap<String, Pod>,
    clock: u64,
    steps: u64,
    tunnel_packets: BTreeMap<(String, V6Addr), u64>,
    decap_delivered: BTreeMap<(String, Family), u64>,
    pings_sent: u64,
    pings_delivered: u64,
    traces: Vec<Vec<String>>,
}

fn agent_err(node: &str) -> impl Fn(AgentError) -> SimError + '_ {
    move |source| SimError::Agent { node: node.to_string(), source }
}

impl Simulation {
    /// Builds the scenario, starts every agent and runs the control plane
    /// to quiescence, then applies the scenario's initial policies.
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        let mut topo = Topology::new();
        for r in &scenario.routers {
            topo.add_router(r)?;
        }
        for l in &scenario.links {
            topo.add_link(&l.a, &l.b, l.cost, l.name.as_deref())?;
        }
        for n in &scenario.nodes {
            topo.attach(&n.name, &n.router, n.infra, n.cost)?;
        }

        let mut ipam = Ipam::new();
        if let Some(p) = &scenario.pools {
            for pool in parse_ippools(&scenario.read(p)?)? {
                ipam.add_pool(pool)?;
            }
        }

        let mut store = KvStore::new();
        let docs = match &scenario.configmap {
            Some(p) => parse_configmap_file(&scenario.read(p)?)?,
            None => Vec::new(),
        };
        for d in &docs {
            if scenario.node(&d.node).is_none() {
                return Err(SimError::UnknownElement(d.node.clone()));
            }
        }
        if scenario.mode == AgentMode::Configmap {
            for d in &docs {
                write_configmap(&mut store, scenario.layout, d)?;
            }
        }

        let mut bus = SessionBus::new(scenario.seed);
        for n in &scenario.nodes {
            bus.add_peer(&n.name);
        }
        let peers: Vec<String> =
            scenario.injector.peers.clone().unwrap_or_else(|| scenario.nodes.iter().map(|n| n.name.clone()).collect());
        bus.register_injector(&scenario.injector.name, peers.iter().map(String::as_str));

        let mut pods = BTreeMap::new();
        for (name, node, addrs) in scenario.pod_addresses() {
            pods.insert(name, Pod { node, addrs });
        }

        let mut sim = Simulation {
            routers: router_dataplanes(&topo),
            topo,
            routes: RouteTable::default(),
            agents: BTreeMap::new(),
            bus,
            store,
            ipam,
            graph: standard_pipeline(true),
            pods,
            clock: 0,
            steps: 0,
            tunnel_packets: BTreeMap::new(),
            decap_delivered: BTreeMap::new(),
            pings_sent: 0,
            pings_delivered: 0,
            traces: Vec::new(),
            scenario,
        };
        sim.start_agents()?;
        sim.refresh_routes()?;
        sim.run_until_quiet()?;

        if sim.scenario.mode == AgentMode::Bgp {
            for d in &docs {
                sim.inject_doc(d)?;
            }
            for p in sim.scenario.inject.clone() {
                let text = sim.scenario.read(&p)?;
                sim.inject_text(&text, None)?;
            }
        } else if !sim.scenario.inject.is_empty() {
            return Err(SimError::ModeMismatch { command: "inject", mode: AgentMode::Configmap });
        }
        Ok(sim)
    }

    fn start_agents(&mut self) -> Result<(), SimError> {
        let s = &self.scenario;
        for n in &s.nodes {
            let mut cfg = AgentConfig::new(&n.name, n.infra, s.mode);
            cfg.router_sid = Some(router_sid(&n.router)?);
            cfg.pod_prefixes = n.pod_prefixes.clone();
            for (pod, p) in &self.pods {
                if p.node == n.name {
                    cfg.pods.extend(p.addrs.iter().map(|a| (pod.clone(), *a)));
                }
            }
            cfg.pinned_localsids = n.localsids.clone();
            cfg.originate_policies = s.originate_policies;
            cfg.segment_mode = s.segment_mode;
            cfg.bsid_pool = s.bsid_pool.clone();
            cfg.layout = s.layout;
            cfg.poll_interval_ms = s.poll_interval_ms;
            let mut agent = Agent::new(cfg);
            agent.set_time(self.clock);
            let out = agent.startup(&mut self.ipam, Some(&self.store)).map_err(agent_err(&n.name))?;
            for o in out {
                match o {
                    Outbound::Step1(u) => {
                        self.bus.advertise_prefix(&n.name, u);
                    }
                    Outbound::Step2(u) => {
                        self.bus.advertise_policy(&n.name, &u)?;
                    }
                }
            }
            self.agents.insert(n.name.clone(), agent);
        }
        Ok(())
    }

    /// Recomputes underlay routes (routers, node infra addresses and node
    /// localSIDs) and installs them everywhere.
    fn refresh_routes(&mut self) -> Result<(), SimError> {
        let mut origins = self.topo.default_origins();
        for (name, a) in &self.agents {
            for sid in [a.localsids().dt4, a.localsids().dt6].into_iter().flatten() {
                origins.insert(Prefix::host(Addr::V6(sid)), name.clone());
            }
        }
        self.routes = compute_routes(&self.topo, &origins)?;
        self.with_dataplanes(|_, rt, dps| rt.install(dps));
        Ok(())
    }

    /// Delivers bus messages until none are in flight.
    pub fn run_until_quiet(&mut self) -> Result<u64, SimError> {
        let mut n = 0;
        while !self.bus.is_quiet() {
            if n >= self.scenario.max_steps {
                return Err(SimError::NoConvergence { steps: n, in_flight: self.bus.in_flight() });
            }
            let d = self.bus.deliver_next().expect("not quiet");
            n += 1;
            self.steps += 1;
            self.clock += 1;
            if let Some(a) = self.agents.get_mut(&d.to) {
                a.set_time(self.clock);
                a.on_message(&d.from, &d.msg);
            }
        }
        Ok(n)
    }

    fn with_dataplanes<R>(
        &mut self,
        f: impl FnOnce(&Topology, &RouteTable, &mut BTreeMap<String, NodeDataplane>) -> R,
    ) -> R {
        let mut dps = std::mem::take(&mut self.routers);
        for (n, a) in &mut self.agents {
            dps.insert(n.clone(), std::mem::take(a.dataplane_mut()));
        }
        let r = f(&self.topo, &self.routes, &mut dps);
        for (n, a) in &mut self.agents {
            *a.dataplane_mut() = dps.remove(n).expect("inserted above");
        }
        self.routers = dps;
        r
    }

    fn tunnels(&self) -> BTreeMap<(String, TunnelKey), Installed> {
        let mut out = BTreeMap::new();
        for (n, a) in &self.agents {
            for (k, i) in a.installed() {
                out.insert((n.clone(), *k), i.clone());
            }
        }
        out
    }

    fn summarize(
        before: &BTreeMap<(String, TunnelKey), Installed>,
        after: &BTreeMap<(String, TunnelKey), Installed>,
    ) -> ChangeSummary {
        let mut s = ChangeSummary::default();
        for (k, a) in after {
            match before.get(k) {
                None => s.added += 1,
                Some(b) if b.bsid != a.bsid || b.segments != a.segments => s.replaced += 1,
                Some(_) => {}
            }
        }
        s.removed = before.keys().filter(|k| !after.contains_key(*k)).count();
        s
    }

    /// Injects one policy file through the injector peer.
    pub fn inject_text(&mut self, text: &str, targets: Option<&[String]>) -> Result<ChangeSummary, SimError> {
        let u = PolicyFile::parse(text)?.to_update()?;
        self.inject_update(&u, targets)
    }

    pub fn inject_update(&mut self, u: &SrPolicyUpdate, targets: Option<&[String]>) -> Result<ChangeSummary, SimError> {
        if self.scenario.mode != AgentMode::Bgp {
            return Err(SimError::ModeMismatch { command: "inject", mode: self.scenario.mode });
        }
        let before = self.tunnels();
        let name = self.scenario.injector.name.clone();
        self.bus.inject_policy(&name, u, targets)?;
        self.run_until_quiet()?;
        Ok(Self::summarize(&before, &self.tunnels()))
    }

    /// Injects the policies of a ConfigMap document to that document's node only.
    pub fn inject_doc(&mut self, doc: &ConfigMapDoc) -> Result<ChangeSummary, SimError> {
        let mut total = ChangeSummary::default();
        let target = [doc.node.clone()];
        for p in &doc.policies {
            let nlri = PolicyNlri { distinguisher: 0, color: 0, endpoint: p.node };
            let u = SrPolicyUpdate::for_path(nlri, p.bsid, &p.segment_list, p.traffic.family())?;
            let s = self.inject_update(&u, Some(&target))?;
            total.added += s.added;
            total.replaced += s.replaced;
            total.removed += s.removed;
        }
        Ok(total)
    }

    /// Writes ConfigMap documents to the store and lets every agent poll once.
    pub fn apply_configmap_text(&mut self, text: &str) -> Result<ChangeSummary, SimError> {
        if self.scenario.mode != AgentMode::Configmap {
            return Err(SimError::ModeMismatch { command: "apply-configmap", mode: self.scenario.mode });
        }
        let docs = parse_configmap_file(text)?;
        self.apply_configmap_docs(&docs)
    }

    pub fn apply_configmap_docs(&mut self, docs: &[ConfigMapDoc]) -> Result<ChangeSummary, SimError> {
        if self.scenario.mode != AgentMode::Configmap {
            return Err(SimError::ModeMismatch { command: "apply-configmap", mode: self.scenario.mode });
        }
        for d in docs {
            if !self.agents.contains_key(&d.node) {
                return Err(SimError::UnknownElement(d.node.clone()));
            }
        }
        let before = self.tunnels();
        for d in docs {
            write_configmap(&mut self.store, self.scenario.layout, d)?;
        }
        let polled = self.poll_all();
        self.refresh_routes()?;
        polled?;
        Ok(Self::summarize(&before, &self.tunnels()))
    }

    /// One poll per agent, one poll interval later.
    pub fn poll_all(&mut self) -> Result<(), SimError> {
        self.clock += self.scenario.poll_interval_ms;
        let mut first_err = None;
        for (n, a) in &mut self.agents {
            a.set_time(self.clock);
            if let Some(Err(e)) = a.poll(&self.store) {
                first_err.get_or_insert(SimError::Agent { node: n.clone(), source: e });
            }
        }
        first_err.map_or(Ok(()), Err)
    }

    fn pod(&self, name: &str) -> Result<&Pod, SimError> {
        self.pods.get(name).ok_or_else(|| SimError::UnknownPod(name.to_string()))
    }

    fn pick_family(&self, src: &str, dst: &str, family: Option<Family>) -> Result<(Addr, Addr, Family), SimError> {
        let (s, d) = (self.pod(src)?, self.pod(dst)?);
        let fams: Vec<Family> = match family {
            Some(f) => vec![f],
            None => vec![Family::V4, Family::V6],
        };
        fams.into_iter()
            .find_map(|f| Some((s.addr(f)?, d.addr(f)?, f)))
            .ok_or_else(|| SimError::NoCommonFamily { src: src.to_string(), dst: dst.to_string() })
    }

    /// Runs one pod packet from `node` through its graph and the backbone.
    fn send(&mut self, node: &str, pkt: InnerPacket) -> Result<TraceRecord, SimError> {
        let agent = self.agents.get_mut(node).ok_or_else(|| SimError::UnknownElement(node.to_string()))?;
        let infra = agent.infra();
        let bsid = agent.dataplane().steer_lookup(pkt.dst());
        let fam = pkt.family();
        let outcome = self.graph.run_scalar(agent.dataplane_mut(), WorkPacket::Inner(pkt))?;
        let rec = match outcome {
            Outcome::Deliver { target, table_id, packet } => TraceRecord {
                hops: vec![TraceHop {
                    id: node.to_string(),
                    dst: infra,
                    segments_left_in: None,
                    segments_left_out: None,
                    action: HopAction::Deliver { target: target.clone() },
                }],
                end: TraceEnd::Deliver { node: node.to_string(), target, table_id, inner: packet },
            },
            Outcome::Drop { reason } => TraceRecord {
                hops: vec![TraceHop {
                    id: node.to_string(),
                    dst: infra,
                    segments_left_in: None,
                    segments_left_out: None,
                    action: HopAction::Drop(reason),
                }],
                end: TraceEnd::Drop { at: node.to_string(), reason },
            },
            Outcome::Tx { via, packet } => {
                if let Some(b) = bsid {
                    *self.tunnel_packets.entry((node.to_string(), b)).or_default() += 1;
                }
                let sl = packet.srh.as_ref().map(|s| s.segments_left());
                let first = TraceHop {
                    id: node.to_string(),
                    dst: packet.dst,
                    segments_left_in: sl,
                    segments_left_out: sl,
                    action: HopAction::Forward { via: via.clone() },
                };
                let mut rec = self.with_dataplanes(|t, rt, dps| forward(t, rt, dps, &via, packet));
                rec.hops.insert(0, first);
                if let TraceEnd::Deliver { node: at, .. } = &rec.end {
                    *self.decap_delivered.entry((at.clone(), fam)).or_default() += 1;
                }
                rec
            }
        };
        Ok(rec)
    }

    /// Echo request/reply pairs between two pods. A ping counts as delivered
    /// when its reply reaches the source pod.
    pub fn ping(&mut self, src: &str, dst: &str, family: Option<Family>, count: u32) -> Result<PingReport, SimError> {
        let (sa, da, _) = self.pick_family(src, dst, family)?;
        let (sn, dn) = (self.pod(src)?.node.clone(), self.pod(dst)?.node.clone());
        let mut report =
            PingReport { src: src.to_string(), dst: dst.to_string(), sent: count, delivered: 0, traces: vec![] };
        for seq in 0..count {
            let payload = seq.to_be_bytes().to_vec();
            let req = InnerPacket::echo(sa, da, payload.clone()).expect("same family");
            let tr = self.send(&sn, req)?;
            let reached = matches!(&tr.end, TraceEnd::Deliver { target, .. } if target == dst);
            report.traces.push(tr.lines());
            if reached {
                let reply = InnerPacket::echo(da, sa, payload).expect("same family");
                let back = self.send(&dn, reply)?;
                if matches!(&back.end, TraceEnd::Deliver { target, .. } if target == src) {
                    report.delivered += 1;
                }
                report.traces.push(back.lines());
            }
        }
        self.pings_sent += u64::from(count);
        self.pings_delivered += u64::from(report.delivered);
        self.traces.extend(report.traces.iter().cloned());
        Ok(report)
    }

    /// Path of one request packet, leaving every counter untouched.
    pub fn trace(&mut self, src: &str, dst: &str, family: Option<Family>) -> Result<TraceRecord, SimError> {
        let (sa, da, _) = self.pick_family(src, dst, family)?;
        let sn = self.pod(src)?.node.clone();
        let saved_routers = self.routers.clone();
        let saved: BTreeMap<String, NodeDataplane> =
            self.agents.iter().map(|(n, a)| (n.clone(), a.dataplane().clone())).collect();
        let (tp, dd) = (self.tunnel_packets.clone(), self.decap_delivered.clone());
        let res = self.send(&sn, InnerPacket::echo(sa, da, vec![0; 4]).expect("same family"));
        self.routers = saved_routers;
        for (n, dp) in saved {
            *self.agents.get_mut(&n).expect("same keys").dataplane_mut() = dp;
        }
        self.tunnel_packets = tp;
        self.decap_delivered = dd;
        res
    }

    pub fn show(&self, element: &str, what: ShowWhat) -> Result<String, SimError> {
        let dp = match self.agents.get(element) {
            Some(a) => a.dataplane(),
            None => self.routers.get(element).ok_or_else(|| SimError::UnknownElement(element.to_string()))?,
        };
        Ok(match what {
            ShowWhat::LocalSids => dp.show_localsids(),
            ShowWhat::Policies => dp.show_policies(),
            ShowWhat::Steering => dp.show_steering(),
            ShowWhat::EncapSource => dp.show_encap_source(),
        })
    }

    pub fn report(&self) -> MetricsReport {
        let mut localsids = Vec::new();
        let elements = self.agents.iter().map(|(n, a)| (n, a.dataplane())).chain(self.routers.iter());
        let mut tunnels = Vec::new();
        for (name, dp) in elements {
            for e in dp.localsids() {
                localsids.push(SidCounter {
                    element: name.clone(),
                    sid: e.sid,
                    behavior: e.behavior.name().to_string(),
                    packets: e.rx_counter,
                });
            }
            for p in dp.policies() {
                let packets = self.tunnel_packets.get(&(name.clone(), p.bsid)).copied().unwrap_or(0);
                tunnels.push(TunnelCounter { node: name.clone(), bsid: p.bsid, packets });
            }
        }
        let bus = self.bus.stats();
        let (polls, scans) =
            self.agents.values().map(Agent::watch_cost).fold((0, 0), |(p, s), c| (p + c.polls, s + c.scans));
        MetricsReport {
            scenario: self.scenario.name.clone(),
            mode: self.scenario.mode.to_string(),
            seed: self.scenario.seed,
            localsids,
            tunnels,
            control: ControlCounters {
                step1: bus.step1_sent,
                step2: bus.step2_sent,
                injected: bus.injected,
                delivered: bus.delivered,
                polls,
                scans,
                scheduler_steps: self.steps,
            },
            pings_sent: self.pings_sent,
            pings_delivered: self.pings_delivered,
            traces: self.traces.clone(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn routes(&self) -> &RouteTable {
        &self.routes
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.values()
    }

    pub fn agent(&self, node: &str) -> Option<&Agent> {
        self.agents.get(node)
    }

    pub fn router(&self, id: &str) -> Option<&NodeDataplane> {
        self.routers.get(id)
    }

    pub fn bus(&self) -> &SessionBus {
        &self.bus
    }

    pub fn store(&self) -> &KvStore {
        &self.store
    }

    pub fn pod_names(&self) -> impl Iterator<Item = &str> {
        self.pods.keys().map(String::as_str)
    }

    pub fn pod_node(&self, pod: &str) -> Option<&str> {
        self.pods.get(pod).map(|p| p.node.as_str())
    }

    pub fn pod_address(&self, pod: &str, f: Family) -> Option<Addr> {
        self.pods.get(pod).and_then(|p| p.addr(f))
    }

    /// Packets decapsulated and delivered at each node, per family.
    pub fn decap_deliveries(&self) -> &BTreeMap<(String, Family), u64> {
        &self.decap_delivered
    }

    pub fn dumps(&self) -> BTreeMap<String, DataplaneDump> {
        self.agents.iter().map(|(n, a)| (n.clone(), a.dump())).collect()
    }

    /// Installed tunnels across the cluster for `f`.
    pub fn tunnel_count(&self, f: Family) -> usize {
        self.agents.values().map(|a| a.installed().keys().filter(|(_, kf)| *kf == f).count()).sum()
    }

    /// Agent events from every node, ordered by time then node.
    pub fn events(&self) -> Vec<String> {
        let mut all: Vec<_> = self.agents.values().flat_map(|a| a.events().iter()).collect();
        all.sort_by(|a, b| (a.ts, &a.node).cmp(&(b.ts, &b.node)));
        all.into_iter().map(ToString::to_string).collect()
    }

    pub fn drop_reason_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for t in &self.traces {
            if let Some(last) = t.last() {
                if let Some(r) = last.split("action=drop(").nth(1) {
                    *out.entry(r.trim_end_matches(')').to_string()).or_default() += 1;
                }
            }
        }
        out
    }
}

/// Drop reason of a trace, if it ended in a drop.
pub fn drop_reason(t: &TraceRecord) -> Option<DropReason> {
    match t.end {
        TraceEnd::Drop { reason, .. } => Some(reason),
        TraceEnd::Deliver { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::underlay::waypoints;

    const THREE: &str = "\
name: three
mode: bgp
seed: 3
routers: [R1]
nodes:
  - {name: master, infra: 'fd10::1000', router: R1, pod_prefixes: [172.16.219.64/26, 'fd20:0:0:10::/122'],
     localsids: {DT4: 'fcdd::10:4', DT6: 'fcdd::10:6'}}
  - {name: node1, infra: 'fd11::1000', router: R1, pod_prefixes: [172.16.166.128/26, 'fd20:0:0:11::/122'],
     localsids: {DT4: 'fcdd::11:4', DT6: 'fcdd::11:6'}}
  - {name: node2, infra: 'fd12::1000', router: R1, pod_prefixes: [172.16.104.64/26, 'fd20:0:0:12::/122'],
     localsids: {DT4: 'fcdd::12:4', DT6: 'fcdd::12:6'}}
pods:
  - {name: pod-m, node: master, families: [v4, v6]}
  - {name: pod-m2, node: master, families: [v4]}
  - {name: pod-1, node: node1, families: [v4, v6]}
  - {name: pod-2, node: node2, families: [v4, v6]}
";

    fn pools_dir() -> PathBuf {
        let dir = std::env::temp_dir().join(format!("srv6-sim-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("pools.yaml"),
            "- kind: IPPool\n  metadata: {name: sr-policies-pool}\n  spec: {cidr: 'cafe::/118', blockSize: 122, nodeSelector: '!all()'}\n",
        )
        .unwrap();
        dir
    }

    fn three(extra: &str) -> Simulation {
        let dir = pools_dir();
        let text = format!("{THREE}pools: pools.yaml\n{extra}");
        Simulation::new(Scenario::parse(&text, "three.scn", &dir).unwrap()).unwrap()
    }

    #[test]
    fn bgp_three_nodes_converge_and_ping() {
        let mut sim = three("");
        assert_eq!(sim.tunnel_count(Family::V4), 6);
        assert_eq!(sim.tunnel_count(Family::V6), 6);
        let r = sim.ping("pod-2", "pod-1", None, 4).unwrap();
        assert_eq!(r.delivered, 4, "{r:?}");
        let r = sim.ping("pod-m", "pod-2", Some(Family::V6), 2).unwrap();
        assert_eq!(r.delivered, 2);
        let local = sim.ping("pod-m", "pod-m2", None, 1).unwrap();
        assert_eq!(local.delivered, 1);
        assert_eq!(local.traces[0].len(), 1);

        let t = sim.trace("pod-2", "pod-1", None).unwrap();
        assert_eq!(waypoints(&t), ["R1"]);
        let before = sim.report();
        sim.trace("pod-2", "pod-1", None).unwrap();
        assert_eq!(sim.report().localsids, before.localsids);

        let dt4 = sim.agent("node1").unwrap().dataplane().localsid("fcdd::11:4".parse().unwrap()).unwrap().rx_counter;
        assert_eq!(dt4, 4);
        assert_eq!(sim.decap_deliveries()[&("node1".to_string(), Family::V4)], 4);
    }

    #[test]
    fn no_policies_means_no_delivery() {
        let mut sim = three("originate_policies: false\n");
        assert_eq!(sim.tunnel_count(Family::V4), 0);
        let r = sim.ping("pod-2", "pod-1", None, 4).unwrap();
        assert_eq!(r.delivered, 0);
        assert_eq!(sim.drop_reason_counts()["no steering match"], 4);
        assert_eq!(sim.show("node2", ShowWhat::Policies).unwrap(), "");
        assert_eq!(sim.show("node2", ShowWhat::EncapSource).unwrap(), "fd12::1000\n");
    }

    #[test]
    fn commands_are_refused_in_the_wrong_mode() {
        let mut sim = three("");
        let err = sim.apply_configmap_text("").unwrap_err();
        assert!(matches!(err, SimError::ModeMismatch { command: "apply-configmap", .. }));
        assert!(matches!(sim.ping("nope", "pod-1", None, 1), Err(SimError::UnknownPod(_))));
        assert!(matches!(sim.show("R9", ShowWhat::Policies), Err(SimError::UnknownElement(_))));
        assert!(matches!(sim.ping("pod-m2", "pod-1", Some(Family::V6), 1), Err(SimError::NoCommonFamily { .. })));
    }

    #[test]
    fn convergence_bound_is_enforced() {
        let dir = pools_dir();
        let text = format!("{THREE}pools: pools.yaml\nmax_steps: 3\n");
        let err = Simulation::new(Scenario::parse(&text, "x", &dir).unwrap()).err().unwrap();
        assert!(matches!(err, SimError::NoConvergence { steps: 3, .. }));
    }

    #[test]
    fn replay_is_deterministic() {
        let run = || {
            let mut sim = three("");
            sim.ping("pod-1", "pod-m", None, 3).unwrap();
            (sim.report().to_json(), sim.events())
        };
        assert_eq!(run(), run());
    }
}
