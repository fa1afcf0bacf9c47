// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Per-node agent: startup allocation and advertisement, step 1 / step 2 or
//! ConfigMap inputs, and reconciliation into the node dataplane.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bgp::{decode_safi73, BgpError, BgpMessage, PolicyNlri, SrPolicyUpdate, Step1Update};
use crate::dataplane::{
    Behavior, DataplaneDump, DataplaneError, LocalSidEntry, NodeDataplane, SrPolicyEntry, SteeringRule,
};
use crate::k8s::{
    diff_policies, read_configmap, CmPolicy, ConfigMapDoc, ConfigMapLayout, Ipam, K8sError, KvStore, LocalSids,
    PolicyDiff, Traffic, WatchCost, WatchHandle,
};
use crate::net::{Addr, Family, Prefix, V6Addr};

/// Tenant table the agent programs pod routes into.
pub const POD_TABLE: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentMode {
    Bgp,
    Configmap,
}

impl fmt::Display for AgentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentMode::Bgp => f.write_str("bgp"),
            AgentMode::Configmap => f.write_str("configmap"),
        }
    }
}

/// Shape of the policies a node originates for its own localSIDs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMode {
    /// Attached router End SID, then the DT SID.
    #[default]
    Double,
    /// DT SID only; needs localSIDs routable in the underlay.
    Single,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    K8s(#[from] K8sError),
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
    #[error(transparent)]
    Bgp(#[from] BgpError),
    #[error("no ConfigMap document for node {0}")]
    MissingConfigMap(String),
    #[error("node {node}: no {family} localSID available")]
    MissingLocalSid { node: String, family: Family },
    #[error("node {node}: no localSID pool for {family}")]
    NoPool { node: String, family: Family },
    #[error("double-segment mode needs the attached router SID of {0}")]
    NoRouterSid(String),
    #[error("document for node {got} delivered to {want}")]
    WrongNode { want: String, got: String },
    #[error("{input} is not accepted in {mode} mode")]
    Mode { mode: AgentMode, input: &'static str },
    #[error("bsid {bsid} already used for {holder} {family}")]
    BsidInUse { bsid: V6Addr, holder: V6Addr, family: Family },
    #[error("address {0} is not IPv6")]
    NotV6(Addr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentConfig {
    pub node: String,
    pub infra: V6Addr,
    pub mode: AgentMode,
    pub router_sid: Option<V6Addr>,
    pub pod_prefixes: Vec<Prefix>,
    /// Pod name and address, programmed as host routes in [`POD_TABLE`].
    pub pods: Vec<(String, Addr)>,
    /// Fixed DT SIDs that bypass IPAM and the ConfigMap.
    pub pinned_localsids: Option<LocalSids>,
    pub originate_policies: bool,
    pub segment_mode: SegmentMode,
    pub bsid_pool: String,
    pub layout: ConfigMapLayout,
    pub poll_interval_ms: u64,
}

impl AgentConfig {
    pub fn new(node: &str, infra: V6Addr, mode: AgentMode) -> Self {
        AgentConfig {
            node: node.to_string(),
            infra,
            mode,
            router_sid: None,
            pod_prefixes: Vec::new(),
            pods: Vec::new(),
            pinned_localsids: None,
            originate_policies: true,
            segment_mode: SegmentMode::Double,
            bsid_pool: "sr-policies-pool".to_string(),
            layout: ConfigMapLayout::PerNode,
            poll_interval_ms: 1000,
        }
    }

    /// Families with at least one pod prefix.
    pub fn families(&self) -> BTreeSet<Family> {
        self.pod_prefixes.iter().map(Prefix::family).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outbound {
    Step1(Step1Update),
    Step2(SrPolicyUpdate),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentEvent {
    pub ts: u64,
    pub node: String,
    pub event: String,
    pub detail: String,
}

impl fmt::Display for AgentEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.ts, self.node, self.event, self.detail)
    }
}

/// Tunnel toward one (endpoint, family).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub bsid: V6Addr,
    pub segments: Vec<V6Addr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Installed {
    pub bsid: V6Addr,
    pub segments: Vec<V6Addr>,
    pub prefixes: BTreeSet<Prefix>,
}

pub type TunnelKey = (V6Addr, Family);

pub struct Agent {
    cfg: AgentConfig,
    dp: NodeDataplane,
    localsids: LocalSids,
    prefix_map: BTreeMap<V6Addr, BTreeSet<Prefix>>,
    intents: BTreeMap<TunnelKey, Intent>,
    installed: BTreeMap<TunnelKey, Installed>,
    cm_policies: Vec<CmPolicy>,
    watch: Option<WatchHandle>,
    events: Vec<AgentEvent>,
    now: u64,
}

/// Everything an input may change, restored wholesale on failure.
struct Snapshot {
    dp: NodeDataplane,
    localsids: LocalSids,
    intents: BTreeMap<TunnelKey, Intent>,
    installed: BTreeMap<TunnelKey, Installed>,
}

impl Agent {
    pub fn new(cfg: AgentConfig) -> Self {
        Agent {
            cfg,
            dp: NodeDataplane::new(),
            localsids: LocalSids::default(),
            prefix_map: BTreeMap::new(),
            intents: BTreeMap::new(),
            installed: BTreeMap::new(),
            cm_policies: Vec::new(),
            watch: None,
            events: Vec::new(),
            now: 0,
        }
    }

    pub fn node(&self) -> &str {
        &self.cfg.node
    }

    pub fn infra(&self) -> V6Addr {
        self.cfg.infra
    }

    pub fn mode(&self) -> AgentMode {
        self.cfg.mode
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn dataplane(&self) -> &NodeDataplane {
        &self.dp
    }

    pub fn dataplane_mut(&mut self) -> &mut NodeDataplane {
        &mut self.dp
    }

    pub fn dump(&self) -> DataplaneDump {
        self.dp.dump()
    }

    pub fn localsids(&self) -> &LocalSids {
        &self.localsids
    }

    pub fn prefixes_of(&self, endpoint: V6Addr) -> Option<&BTreeSet<Prefix>> {
        self.prefix_map.get(&endpoint)
    }

    pub fn installed(&self) -> &BTreeMap<TunnelKey, Installed> {
        &self.installed
    }

    /// Intents still waiting for a step-1 prefix of their family.
    pub fn pending(&self) -> Vec<TunnelKey> {
        self.intents.keys().filter(|k| !self.installed.contains_key(k)).copied().collect()
    }

    pub fn events(&self) -> &[AgentEvent] {
        &self.events
    }

    pub fn watch_cost(&self) -> WatchCost {
        self.watch.as_ref().map(WatchHandle::cost).unwrap_or_default()
    }

    /// Sets the logical clock stamped on new events.
    pub fn set_time(&mut self, now: u64) {
        self.now = now;
    }

    fn log(&mut self, event: &str, detail: impl Into<String>) {
        self.events.push(AgentEvent {
            ts: self.now,
            node: self.cfg.node.clone(),
            event: event.into(),
            detail: detail.into(),
        });
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            dp: self.dp.clone(),
            localsids: self.localsids.clone(),
            intents: self.intents.clone(),
            installed: self.installed.clone(),
        }
    }

    fn restore(&mut self, s: Snapshot) {
        self.dp = s.dp;
        self.localsids = s.localsids;
        self.intents = s.intents;
        self.installed = s.installed;
    }

    /// Seeds the dataplane and returns the advertisements this node sends.
    pub fn startup(&mut self, ipam: &mut Ipam, store: Option<&KvStore>) -> Result<Vec<Outbound>, AgentError> {
        let families = self.cfg.families();
        self.dp.set_encap_source(self.cfg.infra);
        for (name, addr) in self.cfg.pods.clone() {
            self.dp.add_tenant_route(POD_TABLE, Prefix::host(addr), name);
        }

        let doc = match (self.cfg.mode, store) {
            (AgentMode::Configmap, Some(s)) => read_configmap(s, self.cfg.layout, &self.cfg.node)?.map(|(d, _)| d),
            _ => None,
        };
        if self.cfg.mode == AgentMode::Configmap && doc.is_none() && self.cfg.pinned_localsids.is_none() {
            return Err(AgentError::MissingConfigMap(self.cfg.node.clone()));
        }

        let mut sids = LocalSids::default();
        for &f in &families {
            let sid = self.obtain_localsid(f, ipam, doc.as_ref())?;
            match f {
                Family::V4 => sids.dt4 = Some(sid),
                Family::V6 => sids.dt6 = Some(sid),
            }
        }
        self.seed_localsids(&sids)?;

        let mut out: Vec<Outbound> = self
            .cfg
            .pod_prefixes
            .iter()
            .map(|&prefix| Outbound::Step1(Step1Update { prefix, next_hop: self.cfg.infra, withdraw: false }))
            .collect();

        if self.cfg.mode == AgentMode::Bgp && self.cfg.originate_policies {
            for (i, &f) in families.iter().enumerate() {
                let dt = sids.get(f).expect("seeded above");
                let handle = format!("{}/bsid/{}", self.cfg.node, Behavior::decap(f).name());
                let bsid = as_v6(ipam.allocate(&self.cfg.bsid_pool, &self.cfg.node, &handle)?)?;
                let segments = match self.cfg.segment_mode {
                    SegmentMode::Double => {
                        let r = self.cfg.router_sid.ok_or_else(|| AgentError::NoRouterSid(self.cfg.node.clone()))?;
                        vec![r, dt]
                    }
                    SegmentMode::Single => vec![dt],
                };
                let nlri = PolicyNlri { distinguisher: i as u32 + 1, color: 0, endpoint: self.cfg.infra };
                out.push(Outbound::Step2(SrPolicyUpdate::for_path(nlri, bsid, &segments, f)?));
            }
        }

        if let Some(d) = doc {
            self.apply_doc(d)?;
        }
        if self.cfg.mode == AgentMode::Configmap {
            let key = self.cfg.layout.key_for(&self.cfg.node);
            let mut w = WatchHandle::new([key.as_str()], self.cfg.poll_interval_ms);
            if let Some(s) = store {
                w.mark_seen(s);
            }
            self.watch = Some(w);
        }
        let n1 = out.iter().filter(|o| matches!(o, Outbound::Step1(_))).count();
        self.log("startup", format!("mode={} step1={} step2={}", self.cfg.mode, n1, out.len() - n1));
        Ok(out)
    }

    fn obtain_localsid(&self, f: Family, ipam: &mut Ipam, doc: Option<&ConfigMapDoc>) -> Result<V6Addr, AgentError> {
        if let Some(p) = &self.cfg.pinned_localsids {
            return p.get(f).ok_or_else(|| AgentError::MissingLocalSid { node: self.cfg.node.clone(), family: f });
        }
        match self.cfg.mode {
            AgentMode::Configmap => doc
                .and_then(|d| d.localsids.get(f))
                .ok_or_else(|| AgentError::MissingLocalSid { node: self.cfg.node.clone(), family: f }),
            AgentMode::Bgp => {
                let pool = ipam
                    .node_pool(&self.cfg.node, Family::V6)
                    .ok_or_else(|| AgentError::NoPool { node: self.cfg.node.clone(), family: f })?
                    .name
                    .clone();
                let handle = format!("{}/{}", self.cfg.node, Behavior::decap(f).name());
                as_v6(ipam.allocate(&pool, &self.cfg.node, &handle)?)
            }
        }
    }

    /// Installs DT SIDs for `sids`, replacing any previous ones.
    fn seed_localsids(&mut self, sids: &LocalSids) -> Result<(), AgentError> {
        for f in [Family::V4, Family::V6] {
            let (old, new) = (self.localsids.get(f), sids.get(f));
            if old == new {
                continue;
            }
            if let Some(o) = old {
                self.dp.remove_localsid(o);
            }
            if let Some(n) = new {
                self.dp.install_localsid(LocalSidEntry::new(n, Behavior::decap(f)))?;
            }
        }
        self.localsids = sids.clone();
        Ok(())
    }

    /// Dispatches a bus delivery.
    pub fn on_message(&mut self, from: &str, msg: &BgpMessage) {
        match msg {
            BgpMessage::Step1(u) => self.on_step1(*u),
            BgpMessage::SrPolicy(bytes) => match decode_safi73(bytes) {
                Ok(u) => self.on_policy(from, &u),
                Err(e) => self.log("decode-error", format!("from {from}: {e}")),
            },
        }
    }

    pub fn on_step1(&mut self, u: Step1Update) {
        if u.next_hop == self.cfg.infra {
            return;
        }
        let changed = if u.withdraw {
            let set = self.prefix_map.entry(u.next_hop).or_default();
            let removed = set.remove(&u.prefix);
            if set.is_empty() {
                self.prefix_map.remove(&u.next_hop);
            }
            removed
        } else {
            self.prefix_map.entry(u.next_hop).or_default().insert(u.prefix)
        };
        if !changed {
            return;
        }
        let verb = if u.withdraw { "step1-withdraw" } else { "step1" };
        self.log(verb, format!("{} via {}", u.prefix, u.next_hop));
        self.reconcile_logged((u.next_hop, u.prefix.family()));
    }

    pub fn on_policy(&mut self, from: &str, u: &SrPolicyUpdate) {
        let ep = u.nlri.endpoint;
        if self.cfg.mode == AgentMode::Configmap {
            self.log("ignored-step2", format!("from {from} for {ep} bsid {}", u.bsid));
            return;
        }
        if ep == self.cfg.infra {
            return;
        }
        let Some(f) = u.family() else {
            self.log("policy-error", format!("from {from}: no decap behavior"));
            return;
        };
        let key = (ep, f);
        let want = Intent { bsid: u.bsid, segments: u.sids() };
        let snap = self.snapshot();
        if u.withdraw {
            if self.intents.get(&key).is_none_or(|cur| cur.bsid != u.bsid) {
                return;
            }
            self.intents.remove(&key);
            self.log("step2-withdraw", format!("{ep} {f} bsid {}", u.bsid));
        } else {
            if self.intents.get(&key) == Some(&want) {
                return;
            }
            self.intents.insert(key, want);
            self.log("step2", format!("from {from} {ep} {f} bsid {}", u.bsid));
        }
        if let Err(e) = self.reconcile(key) {
            self.restore(snap);
            self.log("policy-error", format!("{ep} {f}: {e}"));
        }
    }

    fn reconcile_logged(&mut self, key: TunnelKey) {
        let snap = self.snapshot();
        if let Err(e) = self.reconcile(key) {
            self.restore(snap);
            self.log("reconcile-error", format!("{} {}: {e}", key.0, key.1));
        }
    }

    /// Brings the dataplane in line with the intent for `key`. Works on a
    /// copy so a failure leaves the live dataplane untouched.
    fn reconcile(&mut self, key: TunnelKey) -> Result<(), AgentError> {
        let (ep, f) = key;
        let prefixes: BTreeSet<Prefix> = self
            .prefix_map
            .get(&ep)
            .map(|s| s.iter().filter(|p| p.family() == f).copied().collect())
            .unwrap_or_default();
        let want = match self.intents.get(&key) {
            Some(i) if !prefixes.is_empty() => Some(Installed { bsid: i.bsid, segments: i.segments.clone(), prefixes }),
            _ => None,
        };
        let have = self.installed.get(&key).cloned();
        if want == have {
            return Ok(());
        }
        if let Some(w) = &want {
            if let Some((holder, _)) = self.installed.iter().find(|(k, i)| **k != key && i.bsid == w.bsid) {
                return Err(AgentError::BsidInUse { bsid: w.bsid, holder: holder.0, family: holder.1 });
            }
        }

        let mut dp = self.dp.clone();
        if let Some(w) = &want {
            dp.install_policy(SrPolicyEntry::new(w.bsid, w.segments.clone(), f)?)?;
            for p in &w.prefixes {
                dp.install_steering(SteeringRule { prefix: *p, bsid: w.bsid })?;
            }
        }
        if let Some(h) = &have {
            for p in h.prefixes.iter().filter(|p| want.as_ref().is_none_or(|w| !w.prefixes.contains(p))) {
                dp.remove_steering(p);
            }
            if want.as_ref().is_none_or(|w| w.bsid != h.bsid) {
                dp.remove_policy(h.bsid)?;
            }
        }
        self.dp = dp;

        let detail = match &want {
            Some(w) => format!("{ep} {f} bsid {} segments {}", w.bsid, w.segments.len()),
            None => format!("{ep} {f}"),
        };
        match want {
            Some(w) => {
                self.installed.insert(key, w);
                self.log("installed", detail);
            }
            None => {
                self.installed.remove(&key);
                let pending = self.intents.contains_key(&key);
                self.log(if pending { "pending" } else { "removed" }, detail);
            }
        }
        Ok(())
    }

    /// Applies a new ConfigMap document for this node in one step.
    pub fn on_configmap_doc(&mut self, doc: ConfigMapDoc) -> Result<PolicyDiff, AgentError> {
        if self.cfg.mode != AgentMode::Configmap {
            return Err(AgentError::Mode { mode: self.cfg.mode, input: "ConfigMap document" });
        }
        match self.apply_doc(doc) {
            Ok(d) => Ok(d),
            Err(e) => {
                self.log("configmap-error", e.to_string());
                Err(e)
            }
        }
    }

    fn apply_doc(&mut self, doc: ConfigMapDoc) -> Result<PolicyDiff, AgentError> {
        if doc.node != self.cfg.node {
            return Err(AgentError::WrongNode { want: self.cfg.node.clone(), got: doc.node });
        }
        doc.validate()?;
        let policies: Vec<CmPolicy> = doc.policies.iter().filter(|p| p.node != self.cfg.infra).cloned().collect();
        let diff = diff_policies(&self.cm_policies, &policies);
        let snap = self.snapshot();
        match self.apply_doc_inner(&doc, &diff) {
            Ok(()) => {
                self.cm_policies = policies;
                self.log("configmap-applied", diff.to_string());
                Ok(diff)
            }
            Err(e) => {
                self.restore(snap);
                Err(e)
            }
        }
    }

    fn apply_doc_inner(&mut self, doc: &ConfigMapDoc, diff: &PolicyDiff) -> Result<(), AgentError> {
        if self.cfg.pinned_localsids.is_none() && doc.localsids != self.localsids {
            let mut sids = LocalSids::default();
            for f in self.cfg.families() {
                let sid = doc
                    .localsids
                    .get(f)
                    .ok_or_else(|| AgentError::MissingLocalSid { node: self.cfg.node.clone(), family: f })?;
                match f {
                    Family::V4 => sids.dt4 = Some(sid),
                    Family::V6 => sids.dt6 = Some(sid),
                }
            }
            self.seed_localsids(&sids)?;
        }
        let mut keys = BTreeSet::new();
        for p in &diff.removed {
            let key = cm_key(p);
            self.intents.remove(&key);
            keys.insert(key);
        }
        for p in diff.added.iter().chain(diff.replaced.iter().map(|(_, n)| n)) {
            let key = cm_key(p);
            self.intents.insert(key, Intent { bsid: p.bsid, segments: p.segment_list.clone() });
            keys.insert(key);
        }
        // Removals first so a BSID can move between keys within one document.
        let (gone, kept): (Vec<TunnelKey>, Vec<TunnelKey>) =
            keys.into_iter().partition(|k| !self.intents.contains_key(k));
        for k in gone.into_iter().chain(kept) {
            self.reconcile(k)?;
        }
        Ok(())
    }

    /// Polls the ConfigMap watch and applies a changed document. Returns the
    /// applied diff, if any document was seen.
    pub fn poll(&mut self, store: &KvStore) -> Option<Result<PolicyDiff, AgentError>> {
        let watch = self.watch.as_mut()?;
        let change = watch.poll(store).pop()?;
        let doc = match self.cfg.layout.doc_from_value(&self.cfg.node, &change.value) {
            Ok(Some(d)) => d,
            Ok(None) => {
                self.log("configmap-absent", format!("{} v{}", change.key, change.version));
                return None;
            }
            Err(e) => {
                self.log("configmap-error", e.to_string());
                return Some(Err(e.into()));
            }
        };
        Some(self.on_configmap_doc(doc))
    }

    /// Checks that every installed tunnel is present in the dataplane.
    pub fn check_invariants(&self) -> Result<(), String> {
        for ((ep, f), i) in &self.installed {
            let p = self.dp.policy(i.bsid).ok_or_else(|| format!("{ep} {f}: policy {} missing", i.bsid))?;
            if p.segments != i.segments || p.family != *f {
                return Err(format!("{ep} {f}: policy {} differs", i.bsid));
            }
            for pfx in &i.prefixes {
                if self.dp.steer_lookup(pfx.base()) != Some(i.bsid) {
                    return Err(format!("{ep} {f}: {pfx} not steered into {}", i.bsid));
                }
            }
        }
        let tunnels = self.installed.len();
        if self.dp.policies().count() != tunnels {
            return Err(format!("{} policies for {tunnels} tunnels", self.dp.policies().count()));
        }
        let steered: usize = self.installed.values().map(|i| i.prefixes.len()).sum();
        if self.dp.steering().count() != steered {
            return Err(format!("{} steering rules for {steered} prefixes", self.dp.steering().count()));
        }
        Ok(())
    }
}

fn cm_key(p: &CmPolicy) -> TunnelKey {
    (p.node, p.traffic.family())
}

fn as_v6(a: Addr) -> Result<V6Addr, AgentError> {
    a.as_v6().ok_or(AgentError::NotV6(a))
}

/// ConfigMap policy equivalent to a step-2 update.
pub fn cm_policy_of(u: &SrPolicyUpdate) -> Option<CmPolicy> {
    Some(CmPolicy { bsid: u.bsid, node: u.nlri.endpoint, segment_list: u.sids(), traffic: Traffic::of(u.family()?) })
}
