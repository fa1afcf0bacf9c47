// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::K8sError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub value: String,
    pub version: u64,
}

/// Flat versioned key space. One store-wide counter orders every write.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KvStore {
    entries: BTreeMap<String, Entry>,
    version: u64,
}

impl KvStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `value` and returns its new version, even when the value is
    /// unchanged.
    pub fn put(&mut self, key: &str, value: impl Into<String>) -> u64 {
        self.version += 1;
        self.entries.insert(key.to_string(), Entry { value: value.into(), version: self.version });
        self.version
    }

    pub fn get(&self, key: &str) -> Option<(&str, u64)> {
        self.entries.get(key).map(|e| (e.value.as_str(), e.version))
    }

    pub fn version_of(&self, key: &str) -> u64 {
        self.entries.get(key).map_or(0, |e| e.version)
    }

    pub fn delete(&mut self, key: &str) -> bool {
        self.entries.remove(key).is_some()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn current_version(&self) -> u64 {
        self.version
    }

    pub fn snapshot(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn load(text: &str) -> Result<Self, K8sError> {
        serde_json::from_str(text).map_err(|e| K8sError::Snapshot(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchCost {
    pub polls: u64,
    pub scans: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Change {
    pub key: String,
    pub value: String,
    pub version: u64,
}

/// Poll-based watch over a fixed key set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatchHandle {
    last_seen: BTreeMap<String, u64>,
    pub poll_interval_ms: u64,
    cost: WatchCost,
}

impl WatchHandle {
    pub fn new<'a>(keys: impl IntoIterator<Item = &'a str>, poll_interval_ms: u64) -> Self {
        WatchHandle {
            last_seen: keys.into_iter().map(|k| (k.to_string(), 0)).collect(),
            poll_interval_ms,
            cost: WatchCost::default(),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.last_seen.keys().map(String::as_str)
    }

    /// Treats the current store contents as already seen, at no cost.
    pub fn mark_seen(&mut self, store: &KvStore) {
        for (key, seen) in self.last_seen.iter_mut() {
            *seen = store.version_of(key);
        }
    }

    pub fn cost(&self) -> WatchCost {
        self.cost
    }

    /// Every watched key whose version advanced since the last poll. Costs
    /// one poll unit plus one scan unit per returned document.
    pub fn poll(&mut self, store: &KvStore) -> Vec<Change> {
        self.cost.polls += 1;
        let mut out = Vec::new();
        for (key, seen) in self.last_seen.iter_mut() {
            if let Some((value, version)) = store.get(key) {
                if version > *seen {
                    *seen = version;
                    out.push(Change { key: key.clone(), value: value.to_string(), version });
                }
            }
        }
        self.cost.scans += out.len() as u64;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versions_strictly_increase() {
        let mut s = KvStore::new();
        let a = s.put("k", "x");
        let b = s.put("k", "x");
        let c = s.put("j", "y");
        assert!(a < b && b < c);
        assert_eq!(s.get("k"), Some(("x", b)));
    }

    #[test]
    fn poll_sees_each_write_once() {
        let mut s = KvStore::new();
        let mut w = WatchHandle::new(["k"], 1000);
        assert!(w.poll(&s).is_empty());
        s.put("k", "v1");
        s.put("other", "z");
        let got = w.poll(&s);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].value, "v1");
        assert!(w.poll(&s).is_empty());
        assert_eq!(w.cost(), WatchCost { polls: 3, scans: 1 });
    }

    #[test]
    fn coalesced_writes_return_latest() {
        let mut s = KvStore::new();
        let mut w = WatchHandle::new(["k"], 1000);
        s.put("k", "a");
        s.put("k", "b");
        let got = w.poll(&s);
        assert_eq!((got.len(), got[0].value.as_str()), (1, "b"));
    }

    #[test]
    fn snapshot_round_trip() {
        let mut s = KvStore::new();
        s.put("srv6-config-master", "node: master\n");
        s.put("a", "b");
        let back = KvStore::load(&s.snapshot()).unwrap();
        assert_eq!(back, s);
        assert!(matches!(KvStore::load("{"), Err(K8sError::Snapshot(_))));
    }
}
