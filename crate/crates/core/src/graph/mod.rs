// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Vector packet processing.
//!
//! A [`Graph`] is a set of named dispatch nodes. [`Graph::run_vector`] pushes
//! a whole vector through one node before any other node runs, sweeping the
//! nodes in insertion order until every packet has reached a terminal
//! outcome. [`Graph::run_scalar`] walks a single packet through the graph one
//! node at a time and serves as the reference for the vector path.

mod bench;
mod nodes;

use indexmap::IndexMap;

use crate::dataplane::{DropReason, NodeDataplane};
use crate::net::{InnerPacket, OuterPacket, V6Addr};

pub use bench::{bench_dispatch, bench_fixture, compare_dispatch, BenchReport, BenchRow};
pub use nodes::{
    standard_pipeline, EncapNode, Ip6LookupNode, LocalSidNode, RxNode, SteerNode, NODE_ENCAP, NODE_IP6_LOOKUP,
    NODE_LOCALSID, NODE_RX, NODE_STEER,
};

/// Largest frame handed to a single dispatch call.
pub const VECTOR_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum WorkPacket {
    Inner(InnerPacket),
    Outer(OuterPacket),
}

impl WorkPacket {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            WorkPacket::Inner(p) => p.encode(),
            WorkPacket::Outer(p) => p.encode(),
        }
    }
}

/// A packet plus the per-packet metadata nodes pass along.
#[derive(Debug, Clone)]
pub struct Buffer {
    pub index: usize,
    pub packet: WorkPacket,
    pub bsid: Option<V6Addr>,
}

/// Where a node sends a packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Next {
    Node(&'static str),
    Tx { via: String },
    Deliver { target: String, table_id: u32 },
    Drop(DropReason),
}

/// Terminal outcome of one packet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Outcome {
    Tx { via: String, packet: OuterPacket },
    Deliver { target: String, table_id: u32, packet: InnerPacket },
    Drop { reason: DropReason },
}

impl Outcome {
    /// Wire bytes of the emitted packet; empty for drops.
    pub fn bytes(&self) -> Vec<u8> {
        match self {
            Outcome::Tx { packet, .. } => packet.encode(),
            Outcome::Deliver { packet, .. } => packet.encode(),
            Outcome::Drop { .. } => Vec::new(),
        }
    }

    pub fn is_drop(&self) -> bool {
        matches!(self, Outcome::Drop { .. })
    }
}

pub trait GraphNode: Send {
    fn name(&self) -> &'static str;

    /// Successor node names this node may emit.
    fn next_nodes(&self) -> &'static [&'static str];

    /// Processes a frame of at most [`VECTOR_SIZE`] buffers, pushing one
    /// `(next, buffer)` pair per input buffer.
    fn dispatch(&mut self, dp: &mut NodeDataplane, frame: Vec<Buffer>, out: &mut Vec<(Next, Buffer)>);
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("graph has no entry node `{0}`")]
    MissingEntry(String),
    #[error("node `{from}` references unknown successor `{to}`")]
    UnknownSuccessor { from: String, to: String },
    #[error("packet vector must hold 1..=256 packets, got {0}")]
    VectorSize(usize),
    #[error("node `{0}` emitted the wrong number of buffers")]
    LostPacket(String),
    #[error("packets still in flight after {0} sweeps")]
    TooManySweeps(usize),
    #[error("benchmark needs at least one packet")]
    NoPackets,
    #[error("unsupported batch size {0}")]
    BatchSize(usize),
}

/// 1..=256 work items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketVector(Vec<WorkPacket>);

impl PacketVector {
    pub fn new(packets: Vec<WorkPacket>) -> Result<Self, GraphError> {
        if packets.is_empty() || packets.len() > VECTOR_SIZE {
            return Err(GraphError::VectorSize(packets.len()));
        }
        Ok(PacketVector(packets))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn packets(&self) -> &[WorkPacket] {
        &self.0
    }
}

/// Counters from the most recent vector run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub dispatch_calls: usize,
    pub max_frame: usize,
    pub sweeps: usize,
}

pub struct Graph {
    nodes: IndexMap<&'static str, Box<dyn GraphNode>>,
    entry: String,
    max_sweeps: usize,
    stats: RunStats,
}

impl Graph {
    pub fn new(entry: impl Into<String>) -> Self {
        Graph { nodes: IndexMap::new(), entry: entry.into(), max_sweeps: 64, stats: RunStats::default() }
    }

    /// Adds a node. Insertion order is the sweep order of the vector scheduler.
    pub fn with_node(mut self, node: impl GraphNode + 'static) -> Self {
        self.nodes.insert(node.name(), Box::new(node));
        self
    }

    pub fn node_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.nodes.keys().copied()
    }

    pub fn last_stats(&self) -> RunStats {
        self.stats
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !self.nodes.contains_key(self.entry.as_str()) {
            return Err(GraphError::MissingEntry(self.entry.clone()));
        }
        for node in self.nodes.values() {
            for succ in node.next_nodes() {
                if !self.nodes.contains_key(succ) {
                    return Err(GraphError::UnknownSuccessor { from: node.name().to_string(), to: succ.to_string() });
                }
            }
        }
        Ok(())
    }

    fn entry_index(&self) -> Result<usize, GraphError> {
        self.nodes.get_index_of(self.entry.as_str()).ok_or_else(|| GraphError::MissingEntry(self.entry.clone()))
    }

    fn resolve(&self, from: &str, to: &str) -> Result<usize, GraphError> {
        self.nodes
            .get_index_of(to)
            .ok_or_else(|| GraphError::UnknownSuccessor { from: from.to_string(), to: to.to_string() })
    }

    fn terminal(next: Next, buf: Buffer) -> Outcome {
        match (next, buf.packet) {
            (Next::Tx { via }, WorkPacket::Outer(packet)) => Outcome::Tx { via, packet },
            (Next::Deliver { target, table_id }, WorkPacket::Inner(packet)) => {
                Outcome::Deliver { target, table_id, packet }
            }
            (Next::Drop(reason), _) => Outcome::Drop { reason },
            // a node emitting a terminal with the wrong packet kind is a node bug
            (next, packet) => panic!("terminal {next:?} with packet {packet:?}"),
        }
    }

    /// Runs a vector node-at-a-time. Returns one outcome per input, in input order.
    pub fn run_vector(&mut self, dp: &mut NodeDataplane, v: PacketVector) -> Result<Vec<Outcome>, GraphError> {
        self.validate()?;
        let entry = self.entry_index()?;
        let n = v.len();
        let mut outcomes: Vec<Option<Outcome>> = vec![None; n];
        let mut pending: Vec<Vec<Buffer>> = (0..self.nodes.len()).map(|_| Vec::new()).collect();
        pending[entry] =
            v.0.into_iter().enumerate().map(|(index, packet)| Buffer { index, packet, bsid: None }).collect();
        let mut stats = RunStats::default();
        let mut out = Vec::with_capacity(VECTOR_SIZE);

        while pending.iter().any(|p| !p.is_empty()) {
            if stats.sweeps == self.max_sweeps {
                self.stats = stats;
                return Err(GraphError::TooManySweeps(self.max_sweeps));
            }
            stats.sweeps += 1;
            for idx in 0..self.nodes.len() {
                let mut queue = std::mem::take(&mut pending[idx]);
                while !queue.is_empty() {
                    let rest = if queue.len() > VECTOR_SIZE { queue.split_off(VECTOR_SIZE) } else { Vec::new() };
                    let frame = std::mem::replace(&mut queue, rest);
                    let frame_len = frame.len();
                    stats.dispatch_calls += 1;
                    stats.max_frame = stats.max_frame.max(frame_len);
                    let (name, node) = self.nodes.get_index_mut(idx).expect("index in range");
                    let name: &'static str = name;
                    out.clear();
                    node.dispatch(dp, frame, &mut out);
                    if out.len() != frame_len {
                        self.stats = stats;
                        return Err(GraphError::LostPacket(name.to_string()));
                    }
                    for (next, buf) in out.drain(..) {
                        match next {
                            Next::Node(to) => {
                                let succ = self.nodes.get_index_of(to).ok_or_else(|| GraphError::UnknownSuccessor {
                                    from: name.to_string(),
                                    to: to.to_string(),
                                })?;
                                pending[succ].push(buf);
                            }
                            terminal => {
                                let index = buf.index;
                                outcomes[index] = Some(Self::terminal(terminal, buf));
                            }
                        }
                    }
                }
            }
        }
        self.stats = stats;
        Ok(outcomes.into_iter().map(|o| o.expect("every packet reaches a terminal")).collect())
    }

    /// Walks one packet through the graph, one node at a time.
    pub fn run_scalar(&mut self, dp: &mut NodeDataplane, packet: WorkPacket) -> Result<Outcome, GraphError> {
        self.validate()?;
        let mut at = self.entry_index()?;
        let mut buf = Buffer { index: 0, packet, bsid: None };
        let mut out = Vec::with_capacity(1);
        let hop_bound = self.max_sweeps * self.nodes.len().max(1);
        for _ in 0..hop_bound {
            let (name, node) = self.nodes.get_index_mut(at).expect("index in range");
            let name: &'static str = name;
            out.clear();
            node.dispatch(dp, vec![buf], &mut out);
            let Some((next, next_buf)) = out.pop().filter(|_| out.is_empty()) else {
                return Err(GraphError::LostPacket(name.to_string()));
            };
            match next {
                Next::Node(to) => {
                    at = self.resolve(name, to)?;
                    buf = next_buf;
                }
                terminal => return Ok(Self::terminal(terminal, next_buf)),
            }
        }
        Err(GraphError::TooManySweeps(self.max_sweeps))
    }
}
