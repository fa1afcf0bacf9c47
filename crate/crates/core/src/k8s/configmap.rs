// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{K8sError, KvStore};
use crate::net::{Family, V6Addr, MAX_SEGMENTS};

pub const SINGLE_MAP_KEY: &str = "srv6-config";

pub fn per_node_key(node: &str) -> String {
    format!("{SINGLE_MAP_KEY}-{node}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Traffic {
    IPv4,
    IPv6,
}

impl Traffic {
    pub fn family(self) -> Family {
        match self {
            Traffic::IPv4 => Family::V4,
            Traffic::IPv6 => Family::V6,
        }
    }

    pub fn of(f: Family) -> Self {
        match f {
            Family::V4 => Traffic::IPv4,
            Family::V6 => Traffic::IPv6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSids {
    #[serde(rename = "DT4", default, skip_serializing_if = "Option::is_none")]
    pub dt4: Option<V6Addr>,
    #[serde(rename = "DT6", default, skip_serializing_if = "Option::is_none")]
    pub dt6: Option<V6Addr>,
}

impl LocalSids {
    pub fn get(&self, f: Family) -> Option<V6Addr> {
        match f {
            Family::V4 => self.dt4,
            Family::V6 => self.dt6,
        }
    }
}

/// One tunnel from the document's node toward an egress node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmPolicy {
    pub bsid: V6Addr,
    /// Egress node infrastructure address.
    #[serde(alias = "egress_node")]
    pub node: V6Addr,
    pub segment_list: Vec<V6Addr>,
    pub traffic: Traffic,
}

impl CmPolicy {
    pub fn key(&self) -> (V6Addr, Traffic) {
        (self.node, self.traffic)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigMapDoc {
    #[serde(default)]
    pub localsids: LocalSids,
    pub node: String,
    #[serde(default)]
    pub policies: Vec<CmPolicy>,
}

impl ConfigMapDoc {
    pub fn validate(&self) -> Result<(), K8sError> {
        let mut seen = BTreeSet::new();
        for (i, p) in self.policies.iter().enumerate() {
            let path = || format!("{}.policies[{i}]", self.node);
            if p.segment_list.is_empty() {
                return Err(K8sError::Validation { path: path(), msg: "empty segment_list".into() });
            }
            if p.segment_list.len() > MAX_SEGMENTS {
                return Err(K8sError::Validation { path: path(), msg: "segment_list too long".into() });
            }
            if !seen.insert(p.key()) {
                return Err(K8sError::Validation {
                    path: path(),
                    msg: format!("duplicate {:?} policy for {}", p.traffic, p.node),
                });
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, K8sError> {
        let doc: ConfigMapDoc = serde_yaml::from_str(text)
            .map_err(|e| K8sError::Validation { path: "<document>".into(), msg: e.to_string() })?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("plain data")
    }

    pub fn policy(&self, egress: V6Addr, traffic: Traffic) -> Option<&CmPolicy> {
        self.policies.iter().find(|p| p.key() == (egress, traffic))
    }
}

#[derive(Debug, Deserialize)]
struct CmMeta {
    name: String,
}

#[derive(Debug, Deserialize)]
struct CmManifest {
    kind: String,
    metadata: CmMeta,
    data: BTreeMap<String, String>,
}

/// Reads ConfigMap manifests (`data.srv6` holding the document) or bare
/// documents from a multi-document YAML stream.
pub fn parse_configmap_file(text: &str) -> Result<Vec<ConfigMapDoc>, K8sError> {
    let mut out = Vec::new();
    for (i, d) in serde_yaml::Deserializer::from_str(text).enumerate() {
        let v = serde_yaml::Value::deserialize(d)
            .map_err(|e| K8sError::Validation { path: format!("document {i}"), msg: e.to_string() })?;
        if v.is_null() {
            continue;
        }
        let doc = if v.get("kind").is_some() {
            let m: CmManifest = serde_yaml::from_value(v)
                .map_err(|e| K8sError::Validation { path: format!("document {i}"), msg: e.to_string() })?;
            if m.kind != "ConfigMap" {
                return Err(K8sError::Manifest(format!("expected kind ConfigMap, got {}", m.kind)));
            }
            let body = m.data.get("srv6").ok_or_else(|| K8sError::Validation {
                path: format!("{}.data", m.metadata.name),
                msg: "missing srv6 key".into(),
            })?;
            let doc = ConfigMapDoc::parse(body).map_err(|e| match e {
                K8sError::Validation { path, msg } => {
                    K8sError::Validation { path: format!("{}.data.srv6.{path}", m.metadata.name), msg }
                }
                other => other,
            })?;
            if m.metadata.name != per_node_key(&doc.node) {
                return Err(K8sError::Validation {
                    path: m.metadata.name.clone(),
                    msg: format!("name does not match node {}", doc.node),
                });
            }
            doc
        } else {
            let doc: ConfigMapDoc = serde_yaml::from_value(v)
                .map_err(|e| K8sError::Validation { path: format!("document {i}"), msg: e.to_string() })?;
            doc.validate()?;
            doc
        };
        out.push(doc);
    }
    Ok(out)
}

/// Renders documents as ConfigMap manifests.
pub fn render_configmap_file(docs: &[ConfigMapDoc], namespace: &str) -> String {
    #[derive(Serialize)]
    struct Meta<'a> {
        name: String,
        namespace: &'a str,
    }
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Manifest<'a> {
        api_version: &'a str,
        kind: &'a str,
        metadata: Meta<'a>,
        data: BTreeMap<&'a str, String>,
    }
    let mut out = String::new();
    for d in docs {
        let m = Manifest {
            api_version: "v1",
            kind: "ConfigMap",
            metadata: Meta { name: per_node_key(&d.node), namespace },
            data: BTreeMap::from([("srv6", format!("---\n{}", d.to_yaml()))]),
        };
        out.push_str("---\n");
        out.push_str(&serde_yaml::to_string(&m).expect("plain data"));
    }
    out
}

/// Single-map: one key, node name -> document. Per-node: one key per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfigMapLayout {
    SingleMap,
    PerNode,
}

impl ConfigMapLayout {
    pub fn key_for(self, node: &str) -> String {
        match self {
            ConfigMapLayout::SingleMap => SINGLE_MAP_KEY.to_string(),
            ConfigMapLayout::PerNode => per_node_key(node),
        }
    }

    /// Extracts `node`'s document from a stored value.
    pub fn doc_from_value(self, node: &str, value: &str) -> Result<Option<ConfigMapDoc>, K8sError> {
        match self {
            ConfigMapLayout::PerNode => ConfigMapDoc::parse(value).map(Some),
            ConfigMapLayout::SingleMap => {
                let mut map = parse_single_map(value)?;
                Ok(map.remove(node))
            }
        }
    }
}

fn parse_single_map(value: &str) -> Result<BTreeMap<String, ConfigMapDoc>, K8sError> {
    let map: BTreeMap<String, ConfigMapDoc> = serde_yaml::from_str(value)
        .map_err(|e| K8sError::Validation { path: SINGLE_MAP_KEY.into(), msg: e.to_string() })?;
    for (k, d) in &map {
        if *k != d.node {
            return Err(K8sError::Validation {
                path: format!("{SINGLE_MAP_KEY}.{k}"),
                msg: format!("holds node {}", d.node),
            });
        }
        d.validate()?;
    }
    Ok(map)
}

pub fn write_configmap(store: &mut KvStore, layout: ConfigMapLayout, doc: &ConfigMapDoc) -> Result<u64, K8sError> {
    doc.validate()?;
    let key = layout.key_for(&doc.node);
    let value = match layout {
        ConfigMapLayout::PerNode => doc.to_yaml(),
        ConfigMapLayout::SingleMap => {
            let mut map = match store.get(&key) {
                Some((v, _)) => parse_single_map(v)?,
                None => BTreeMap::new(),
            };
            map.insert(doc.node.clone(), doc.clone());
            serde_yaml::to_string(&map).expect("plain data")
        }
    };
    Ok(store.put(&key, value))
}

pub fn read_configmap(
    store: &KvStore,
    layout: ConfigMapLayout,
    node: &str,
) -> Result<Option<(ConfigMapDoc, u64)>, K8sError> {
    let Some((value, version)) = store.get(&layout.key_for(node)) else {
        return Ok(None);
    };
    Ok(layout.doc_from_value(node, value)?.map(|d| (d, version)))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicyDiff {
    pub added: Vec<CmPolicy>,
    pub replaced: Vec<(CmPolicy, CmPolicy)>,
    pub removed: Vec<CmPolicy>,
}

impl PolicyDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.replaced.is_empty() && self.removed.is_empty()
    }

    pub fn len(&self) -> usize {
        self.added.len() + self.replaced.len() + self.removed.len()
    }
}

impl fmt::Display for PolicyDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("0 changes");
        }
        write!(f, "{} added, {} replaced, {} removed", self.added.len(), self.replaced.len(), self.removed.len())
    }
}

/// Keyed by (egress node, traffic). A policy missing from `new` is removed.
pub fn diff_policies(old: &[CmPolicy], new: &[CmPolicy]) -> PolicyDiff {
    let o: BTreeMap<_, _> = old.iter().map(|p| (p.key(), p)).collect();
    let n: BTreeMap<_, _> = new.iter().map(|p| (p.key(), p)).collect();
    let mut d = PolicyDiff::default();
    for (k, np) in &n {
        match o.get(k) {
            None => d.added.push((*np).clone()),
            Some(op) if op.bsid != np.bsid || op.segment_list != np.segment_list => {
                d.replaced.push(((*op).clone(), (*np).clone()))
            }
            Some(_) => {}
        }
    }
    for (k, op) in &o {
        if !n.contains_key(k) {
            d.removed.push((*op).clone());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKER2: &str = "\
apiVersion: v1
kind: ConfigMap
metadata:
 name: srv6-config-worker2
 namespace: calico-vpp-dataplane
data:
 srv6: |
   ---
   localsids:
     DT4: \"fcdd::12aa:d460:b250:45:b04\"
     DT6: \"fcdd::12aa:d460:b250:45:b05\"
   node: worker2
   policies:
     -
       bsid: \"cafe::1c3\"
       node: \"fd11::1000\"
       segment_list:
         - \"fcff:4::1\"
         - \"fcff:3::1\"
         - \"fcdd::11aa:c11:b42f:f17e:a683\"
       traffic: IPv6
     -
       bsid: \"cafe::1c2\"
       node: \"fd11::1000\"
       segment_list:
         - \"fcff:4::1\"
         - \"fcff:3::1\"
         - \"fcdd::11aa:c11:b42f:f17e:a682\"
       traffic: IPv4
     -
       bsid: \"cafe::185\"
       node: \"fd10::1000\"
       segment_list:
         - \"fcff:2::1\"
         - \"fcff:3::1\"
         - \"fcdd::aa:34b8:247c:36da:db45\"
       traffic: IPv6
     -
       bsid: \"cafe::184\"
       node: \"fd10::1000\"
       segment_list:
         - \"fcff:2::1\"
         - \"fcff:3::1\"
         - \"fcdd::aa:34b8:247c:36da:db44\"
       traffic: IPv4
";

    fn v6(s: &str) -> V6Addr {
        s.parse().unwrap()
    }

    fn worker2() -> ConfigMapDoc {
        parse_configmap_file(WORKER2).unwrap().remove(0)
    }

    #[test]
    fn parses_manifest() {
        let d = worker2();
        assert_eq!(d.node, "worker2");
        assert_eq!(d.policies.len(), 4);
        assert_eq!(d.localsids.dt6, Some(v6("fcdd::12aa:d460:b250:45:b05")));
        assert_eq!(d.policy(v6("fd11::1000"), Traffic::IPv6).unwrap().segment_list.len(), 3);
    }

    #[test]
    fn egress_node_alias() {
        let text = "localsids:\n  DT4: \"fcdd::1\"\nnode: master\npolicies:\n  - egress_node: \"fd11::1000\"\n    bsid: \"cafe::1c3\"\n    segment_list:\n    - \"fcff:3::1\"\n    traffic: IPv6\n";
        let d = ConfigMapDoc::parse(text).unwrap();
        assert_eq!(d.policies[0].node, v6("fd11::1000"));
        assert!(d.to_yaml().contains("node: fd11::1000"));
    }

    #[test]
    fn duplicate_pair_rejected_with_path() {
        let mut d = worker2();
        d.policies[1].traffic = Traffic::IPv6;
        let err = d.validate().unwrap_err();
        assert!(matches!(&err, K8sError::Validation { path, .. } if path == "worker2.policies[1]"));
    }

    #[test]
    fn malformed_address_rejected() {
        let bad = WORKER2.replace("cafe::1c3", "cafe:::1c3");
        let err = parse_configmap_file(&bad).unwrap_err();
        assert!(matches!(&err, K8sError::Validation { path, .. } if path.starts_with("srv6-config-worker2")));
    }

    #[test]
    fn rerouted_worker2_policy_is_one_replace() {
        let old = worker2();
        let mut new = old.clone();
        new.policies[0].segment_list =
            vec![v6("fcff:7::1"), v6("fcff:2::1"), v6("fcff:3::1"), v6("fcdd::11aa:c11:b42f:f17e:a683")];
        let d = diff_policies(&old.policies, &new.policies);
        assert_eq!((d.added.len(), d.replaced.len(), d.removed.len()), (0, 1, 0));
        assert_eq!(d.to_string(), "0 added, 1 replaced, 0 removed");
        assert_eq!(diff_policies(&old.policies, &old.policies).to_string(), "0 changes");
        let d = diff_policies(&old.policies, &new.policies[1..]);
        assert_eq!((d.removed.len(), d.replaced.len()), (1, 0));
    }

    #[test]
    fn write_then_read_both_layouts() {
        for layout in [ConfigMapLayout::SingleMap, ConfigMapLayout::PerNode] {
            let mut s = KvStore::new();
            let d = worker2();
            let v1 = write_configmap(&mut s, layout, &d).unwrap();
            let mut other = d.clone();
            other.node = "master".into();
            write_configmap(&mut s, layout, &other).unwrap();
            let v3 = write_configmap(&mut s, layout, &d).unwrap();
            let (back, ver) = read_configmap(&s, layout, "worker2").unwrap().unwrap();
            assert_eq!(back, d);
            assert_eq!(ver, v3);
            assert!(v3 > v1);
            assert_eq!(read_configmap(&s, layout, "master").unwrap().unwrap().0.node, "master");
        }
    }

    #[test]
    fn render_round_trip() {
        let d = worker2();
        let text = render_configmap_file(std::slice::from_ref(&d), "calico-vpp-dataplane");
        assert_eq!(parse_configmap_file(&text).unwrap(), vec![d]);
    }
}
