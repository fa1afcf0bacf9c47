// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{encode_safi73, BgpError, SrPolicyUpdate, Step1Update};

/// Name of the external policy-injector peer.
pub const INJECTOR_PEER: &str = "srv6-pi";

/// Step 1 and step 2 travel on independent sessions, so a peer can see a
/// policy before the prefix it depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Unicast,
    SrPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BgpMessage {
    Step1(Step1Update),
    /// Encoded SAFI 73 UPDATE.
    SrPolicy(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub from: String,
    pub to: String,
    pub msg: BgpMessage,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BusStats {
    pub step1_sent: u64,
    pub step2_sent: u64,
    pub injected: u64,
    pub delivered: u64,
}

type SessionKey = (String, String, Channel);

/// Full mesh of sessions. FIFO within a session; the next session to deliver
/// is picked by a seeded RNG among non-empty ones.
#[derive(Debug, Clone)]
pub struct SessionBus {
    peers: BTreeSet<String>,
    injectors: BTreeMap<String, BTreeSet<String>>,
    sessions: BTreeMap<SessionKey, VecDeque<BgpMessage>>,
    rng: ChaCha8Rng,
    stats: BusStats,
    audit: Vec<String>,
}

impl SessionBus {
    pub fn new(seed: u64) -> Self {
        SessionBus {
            peers: BTreeSet::new(),
            injectors: BTreeMap::new(),
            sessions: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: BusStats::default(),
            audit: Vec::new(),
        }
    }

    pub fn add_peer(&mut self, name: &str) {
        self.peers.insert(name.to_string());
    }

    pub fn peers(&self) -> impl Iterator<Item = &str> {
        self.peers.iter().map(String::as_str)
    }

    /// Registers `injector` as an external peer of every listed cluster peer.
    pub fn register_injector<'a>(&mut self, injector: &str, targets: impl IntoIterator<Item = &'a str>) {
        self.injectors.entry(injector.to_string()).or_default().extend(targets.into_iter().map(str::to_string));
    }

    pub fn stats(&self) -> BusStats {
        self.stats
    }

    pub fn audit(&self) -> &[String] {
        &self.audit
    }

    fn enqueue(&mut self, from: &str, to: &str, ch: Channel, msg: BgpMessage) {
        self.sessions.entry((from.to_string(), to.to_string(), ch)).or_default().push_back(msg);
    }

    fn others(&self, from: &str) -> Vec<String> {
        self.peers.iter().filter(|p| *p != from).cloned().collect()
    }

    /// Step 1 to every other peer. Returns the number of copies queued.
    pub fn advertise_prefix(&mut self, from: &str, u: Step1Update) -> usize {
        let to = self.others(from);
        for t in &to {
            self.enqueue(from, t, Channel::Unicast, BgpMessage::Step1(u));
        }
        self.stats.step1_sent += to.len() as u64;
        to.len()
    }

    /// Step 2 to every other peer.
    pub fn advertise_policy(&mut self, from: &str, u: &SrPolicyUpdate) -> Result<usize, BgpError> {
        let bytes = encode_safi73(u)?;
        let to = self.others(from);
        for t in &to {
            self.enqueue(from, t, Channel::SrPolicy, BgpMessage::SrPolicy(bytes.clone()));
        }
        self.stats.step2_sent += to.len() as u64;
        Ok(to.len())
    }

    /// Step 2 from an external injector to `targets` (all peers it is
    /// registered with when `None`). Peers that have not registered the
    /// injector ignore it, and each ignored update is audited.
    pub fn inject_policy(
        &mut self,
        injector: &str,
        u: &SrPolicyUpdate,
        targets: Option<&[String]>,
    ) -> Result<usize, BgpError> {
        let bytes = encode_safi73(u)?;
        let registered = self.injectors.get(injector).cloned().unwrap_or_default();
        let wanted: Vec<String> = match targets {
            Some(t) => t.to_vec(),
            None => registered.iter().cloned().collect(),
        };
        let refused: Vec<&String> = wanted.iter().filter(|t| !registered.contains(*t)).collect();
        if registered.is_empty() || !refused.is_empty() {
            let to = if refused.is_empty() {
                "all".to_string()
            } else {
                refused.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")
            };
            self.audit
                .push(format!("ignored update from unregistered peer {injector} for {} at {to}", u.nlri.endpoint));
        }
        let targets: Vec<String> =
            wanted.into_iter().filter(|t| registered.contains(t) && self.peers.contains(t)).collect();
        for t in &targets {
            self.enqueue(injector, t, Channel::SrPolicy, BgpMessage::SrPolicy(bytes.clone()));
        }
        self.stats.injected += targets.len() as u64;
        Ok(targets.len())
    }

    pub fn in_flight(&self) -> usize {
        self.sessions.values().map(VecDeque::len).sum()
    }

    pub fn is_quiet(&self) -> bool {
        self.in_flight() == 0
    }

    /// Pops the head of one randomly chosen non-empty session.
    pub fn deliver_next(&mut self) -> Option<Delivery> {
        let ready: Vec<&SessionKey> = self.sessions.iter().filter(|(_, q)| !q.is_empty()).map(|(k, _)| k).collect();
        if ready.is_empty() {
            return None;
        }
        let key = ready[self.rng.gen_range(0..ready.len())].clone();
        let msg = self.sessions.get_mut(&key).and_then(VecDeque::pop_front).expect("non-empty session");
        self.stats.delivered += 1;
        Some(Delivery { from: key.0, to: key.1, msg })
    }
}
