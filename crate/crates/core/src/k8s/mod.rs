// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Cluster control analog: a versioned key-value store with polling
//! watches, IPAM pools, and the per-node SR policy document.

mod configmap;
mod ipam;
mod store;

pub use configmap::{
    diff_policies, parse_configmap_file, per_node_key, read_configmap, render_configmap_file, write_configmap,
    CmPolicy, ConfigMapDoc, ConfigMapLayout, LocalSids, PolicyDiff, Traffic, SINGLE_MAP_KEY,
};
pub use ipam::{default_block_size, parse_ippools, parse_selector, IpPool, Ipam};
pub use store::{Change, Entry, KvStore, WatchCost, WatchHandle};

use crate::net::Prefix;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum K8sError {
    #[error("pool {0} exhausted")]
    Exhausted(String),
    #[error("node {node} is not eligible for pool {pool}")]
    NotEligible { pool: String, node: String },
    #[error("unknown pool {0}")]
    UnknownPool(String),
    #[error("duplicate pool {0}")]
    DuplicatePool(String),
    #[error("pool {pool}: block size {block_size} does not fit {cidr}")]
    BlockSize { pool: String, block_size: u8, cidr: Prefix },
    #[error("unsupported node selector `{0}`")]
    Selector(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {msg}")]
    Validation { path: String, msg: String },
    #[error("snapshot: {0}")]
    Snapshot(String),
}
