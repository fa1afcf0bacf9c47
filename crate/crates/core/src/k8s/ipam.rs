// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::K8sError;
use crate::net::{Addr, Family, Prefix};

/// `kubernetes.io/hostname == 'node1'` selects one node; `all()` and
/// `!all()` leave the pool open to explicit requests from any node.
pub fn parse_selector(text: &str) -> Result<Option<String>, K8sError> {
    let t = text.trim();
    if t.is_empty() || t == "all()" || t == "!all()" {
        return Ok(None);
    }
    let bad = || K8sError::Selector(text.to_string());
    let (lhs, rhs) = t.split_once("==").ok_or_else(bad)?;
    if lhs.trim() != "kubernetes.io/hostname" {
        return Err(bad());
    }
    let rhs = rhs.trim();
    let name = rhs
        .strip_prefix('\'')
        .and_then(|r| r.strip_suffix('\''))
        .or_else(|| rhs.strip_prefix('"').and_then(|r| r.strip_suffix('"')))
        .ok_or_else(bad)?;
    if name.is_empty() {
        return Err(bad());
    }
    Ok(Some(name.to_string()))
}

pub fn default_block_size(f: Family) -> u8 {
    match f {
        Family::V4 => 26,
        Family::V6 => 122,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpPool {
    pub name: String,
    pub cidr: Prefix,
    pub block_size: u8,
    pub node_selector: Option<String>,
}

impl IpPool {
    pub fn new(
        name: &str,
        cidr: Prefix,
        block_size: Option<u8>,
        node_selector: Option<String>,
    ) -> Result<Self, K8sError> {
        let block_size = block_size.unwrap_or_else(|| default_block_size(cidr.family()));
        if block_size < cidr.len() || block_size > cidr.family().bits() {
            return Err(K8sError::BlockSize { pool: name.to_string(), block_size, cidr });
        }
        Ok(IpPool { name: name.to_string(), cidr, block_size, node_selector })
    }

    /// Addresses per block.
    pub fn block_len(&self) -> u128 {
        let shift = (self.cidr.family().bits() - self.block_size) as u32;
        1u128.checked_shl(shift).unwrap_or(u128::MAX)
    }

    pub fn block_count(&self) -> u128 {
        1u128.checked_shl((self.block_size - self.cidr.len()) as u32).unwrap_or(u128::MAX)
    }

    pub fn eligible(&self, node: &str) -> bool {
        self.node_selector.as_deref().is_none_or(|n| n == node)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct PoolState {
    next_block: u128,
    /// node -> (block index, addresses handed out) in carve order
    blocks: BTreeMap<String, Vec<(u128, u128)>>,
    handles: BTreeMap<String, Addr>,
}

/// Block-carving allocator over named pools. Requests carry a handle; the
/// same handle always yields the same address.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ipam {
    pools: BTreeMap<String, (IpPool, PoolState)>,
}

impl Ipam {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_pool(&mut self, pool: IpPool) -> Result<(), K8sError> {
        if self.pools.contains_key(&pool.name) {
            return Err(K8sError::DuplicatePool(pool.name));
        }
        self.pools.insert(pool.name.clone(), (pool, PoolState::default()));
        Ok(())
    }

    pub fn pool(&self, name: &str) -> Option<&IpPool> {
        self.pools.get(name).map(|(p, _)| p)
    }

    pub fn pools(&self) -> impl Iterator<Item = &IpPool> {
        self.pools.values().map(|(p, _)| p)
    }

    /// First pool of `family` whose selector names `node` exactly.
    pub fn node_pool(&self, node: &str, family: Family) -> Option<&IpPool> {
        self.pools().find(|p| p.cidr.family() == family && p.node_selector.as_deref() == Some(node))
    }

    pub fn allocate(&mut self, pool: &str, node: &str, handle: &str) -> Result<Addr, K8sError> {
        let (p, st) = self.pools.get_mut(pool).ok_or_else(|| K8sError::UnknownPool(pool.to_string()))?;
        if !p.eligible(node) {
            return Err(K8sError::NotEligible { pool: pool.to_string(), node: node.to_string() });
        }
        if let Some(a) = st.handles.get(handle) {
            return Ok(*a);
        }
        let per_block = p.block_len();
        let blocks = st.blocks.entry(node.to_string()).or_default();
        let slot = match blocks.iter_mut().find(|(_, used)| *used < per_block) {
            Some(slot) => slot,
            None => {
                if st.next_block >= p.block_count() {
                    return Err(K8sError::Exhausted(pool.to_string()));
                }
                blocks.push((st.next_block, 0));
                st.next_block += 1;
                blocks.last_mut().expect("just pushed")
            }
        };
        let index = slot.0 * per_block + slot.1;
        slot.1 += 1;
        let addr = p.cidr.nth(index).expect("index inside cidr");
        st.handles.insert(handle.to_string(), addr);
        Ok(addr)
    }

    pub fn allocated(&self, pool: &str) -> usize {
        self.pools.get(pool).map_or(0, |(_, st)| st.handles.len())
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PoolSpec {
    cidr: Prefix,
    #[serde(default)]
    block_size: Option<u8>,
    #[serde(default)]
    node_selector: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Meta {
    name: String,
}

#[derive(Debug, Deserialize)]
struct PoolManifest {
    kind: String,
    metadata: Meta,
    spec: PoolSpec,
}

/// Reads IPPool manifests given as a YAML list, a multi-document stream, or
/// both.
pub fn parse_ippools(text: &str) -> Result<Vec<IpPool>, K8sError> {
    let mut out = Vec::new();
    for doc in serde_yaml::Deserializer::from_str(text) {
        let v = serde_yaml::Value::deserialize(doc).map_err(|e| K8sError::Manifest(e.to_string()))?;
        let items = match v {
            serde_yaml::Value::Null => continue,
            serde_yaml::Value::Sequence(s) => s,
            other => vec![other],
        };
        for item in items {
            let m: PoolManifest = serde_yaml::from_value(item).map_err(|e| K8sError::Manifest(e.to_string()))?;
            if m.kind != "IPPool" {
                return Err(K8sError::Manifest(format!("expected kind IPPool, got {}", m.kind)));
            }
            let sel = m.spec.node_selector.as_deref().map(parse_selector).transpose()?.flatten();
            out.push(IpPool::new(&m.metadata.name, m.spec.cidr, m.spec.block_size, sel)?);
        }
    }
    Ok(out)
}
