// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::agent::{AgentMode, SegmentMode};
use crate::bgp::INJECTOR_PEER;
use crate::k8s::{ConfigMapLayout, LocalSids};
use crate::net::{Addr, Family, Prefix, V6Addr};
use crate::underlay::router_sid;

pub const DEFAULT_MAX_STEPS: u64 = 10_000;

fn default_cost() -> u32 {
    1
}

fn default_true() -> bool {
    true
}

fn default_poll() -> u64 {
    1000
}

fn default_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

fn default_layout() -> ConfigMapLayout {
    ConfigMapLayout::PerNode
}

fn default_bsid_pool() -> String {
    "sr-policies-pool".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    #[serde(default = "default_cost")]
    pub cost: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub infra: V6Addr,
    pub router: String,
    #[serde(default = "default_cost")]
    pub cost: u32,
    pub pod_prefixes: Vec<Prefix>,
    /// Fixed DT SIDs; otherwise taken from IPAM or the ConfigMap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localsids: Option<LocalSids>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodSpec {
    pub name: String,
    pub node: String,
    pub families: BTreeSet<Family>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectorSpec {
    pub name: String,
    /// Nodes that accept the injector as a peer; all nodes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peers: Option<Vec<String>>,
}

impl Default for InjectorSpec {
    fn default() -> Self {
        InjectorSpec { name: INJECTOR_PEER.to_string(), peers: None }
    }
}

/// Declarative scenario. File references are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: AgentMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub originate_policies: bool,
    #[serde(default)]
    pub segment_mode: SegmentMode,
    #[serde(default = "default_layout")]
    pub layout: ConfigMapLayout,
    #[serde(default = "default_poll")]
    pub poll_interval_ms: u64,
    #[serde(default = "default_steps")]
    pub max_steps: u64,
    #[serde(default = "default_bsid_pool")]
    pub bsid_pool: String,
    pub routers: Vec<String>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub pods: Vec<PodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pools: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configmap: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inject: Vec<PathBuf>,
    #[serde(default)]
    pub injector: InjectorSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    /// Parses and validates scenario text. `base_dir` anchors file references.
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self, SimError> {
        let mut s: Scenario = serde_yaml::from_str(text)
            .map_err(|e| SimError::Scenario { file: origin.to_string(), msg: e.to_string() })?;
        s.base_dir = base_dir.to_path_buf();
        s.validate().map_err(|msg| SimError::Scenario { file: origin.to_string(), msg })?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SimError::Io { path: path.to_path_buf(), msg: e.to_string() })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn read(&self, p: &Path) -> Result<String, SimError> {
        let full = self.resolve(p);
        std::fs::read_to_string(&full).map_err(|e| SimError::Io { path: full, msg: e.to_string() })
    }

    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }

    fn validate(&self) -> Result<(), String> {
        let mut routers = BTreeSet::new();
        for r in &self.routers {
            router_sid(r).map_err(|e| format!("routers: {e}"))?;
            if !routers.insert(r.as_str()) {
                return Err(format!("routers: duplicate {r}"));
            }
        }
        for (i, l) in self.links.iter().enumerate() {
            for end in [&l.a, &l.b] {
                if !routers.contains(end.as_str()) {
                    return Err(format!("links[{i}]: unknown router {end}"));
                }
            }
        }
        let mut names = BTreeSet::new();
        let mut infras = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !names.insert(n.name.as_str()) || routers.contains(n.name.as_str()) {
                return Err(format!("nodes[{i}]: duplicate name {}", n.name));
            }
            if !infras.insert(n.infra) {
                return Err(format!("nodes[{i}]: duplicate infra address {}", n.infra));
            }
            if !routers.contains(n.router.as_str()) {
                return Err(format!("nodes[{i}]: unknown router {}", n.router));
            }
            let fams: Vec<Family> = n.pod_prefixes.iter().map(Prefix::family).collect();
            if fams.iter().collect::<BTreeSet<_>>().len() != fams.len() {
                return Err(format!("nodes[{i}]: more than one pod prefix per family"));
            }
        }
        let mut pods = BTreeSet::new();
        for (i, p) in self.pods.iter().enumerate() {
            if !pods.insert(p.name.as_str()) {
                return Err(format!("pods[{i}]: duplicate name {}", p.name));
            }
            let Some(n) = self.node(&p.node) else {
                return Err(format!("pods[{i}]: unknown node {}", p.node));
            };
            for f in &p.families {
                if !n.pod_prefixes.iter().any(|x| x.family() == *f) {
                    return Err(format!("pods[{i}]: node {} has no {f} pod prefix", p.node));
                }
            }
        }
        if let Some(peers) = &self.injector.peers {
            for p in peers {
                if !names.contains(p.as_str()) {
                    return Err(format!("injector.peers: unknown node {p}"));
                }
            }
        }
        if self.mode == AgentMode::Configmap
            && self.configmap.is_none()
            && self.nodes.iter().any(|n| n.localsids.is_none())
        {
            return Err("configmap mode needs a configmap file or pinned localsids".into());
        }
        if self.max_steps == 0 {
            return Err("max_steps must be positive".into());
        }
        Ok(())
    }

    /// Pod addresses: the k-th pod on a node takes the k-th address of the
    /// node's pod prefix in each of its families.
    pub fn pod_addresses(&self) -> Vec<(String, String, Vec<Addr>)> {
        let mut per_node: std::collections::BTreeMap<&str, u128> = Default::default();
        let mut out = Vec::new();
        for p in &self.pods {
            let k = per_node.entry(p.node.as_str()).or_default();
            let node = self.node(&p.node).expect("validated");
            let addrs = p
                .families
                .iter()
                .filter_map(|f| node.pod_prefixes.iter().find(|x| x.family() == *f))
                .filter_map(|x| x.nth(*k))
                .collect();
            *k += 1;
            out.push((p.name.clone(), p.node.clone(), addrs));
        }
        out
    }
}
