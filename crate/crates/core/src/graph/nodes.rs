// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::collections::HashMap;

use super::{Buffer, Graph, GraphNode, Next, WorkPacket};
use crate::dataplane::{Disposition, DropReason, FibResult, NodeDataplane};
use crate::net::{Addr, V6Addr};

pub const NODE_RX: &str = "rx";
pub const NODE_STEER: &str = "sr-steer";
pub const NODE_ENCAP: &str = "sr-h-encaps";
pub const NODE_IP6_LOOKUP: &str = "ip6-lookup";
pub const NODE_LOCALSID: &str = "srv6-localsid";

/// Tenant table holding the node's own pods.
const POD_TABLE: u32 = 0;

/// Splits pod traffic from underlay traffic.
pub struct RxNode;

impl GraphNode for RxNode {
    fn name(&self) -> &'static str {
        NODE_RX
    }

    fn next_nodes(&self) -> &'static [&'static str] {
        &[NODE_STEER, NODE_IP6_LOOKUP]
    }

    fn dispatch(&mut self, _dp: &mut NodeDataplane, frame: Vec<Buffer>, out: &mut Vec<(Next, Buffer)>) {
        for b in frame {
            let next = match b.packet {
                WorkPacket::Inner(_) => NODE_STEER,
                WorkPacket::Outer(_) => NODE_IP6_LOOKUP,
            };
            out.push((Next::Node(next), b));
        }
    }
}

/// Classifies pod packets: local pods are delivered directly, remote
/// destinations are matched against the steering table.
pub struct SteerNode {
    /// Memoize lookups per destination within one frame.
    pub cache: bool,
}

impl SteerNode {
    fn classify(dp: &NodeDataplane, dst: Addr) -> Result<V6Addr, Option<String>> {
        if let Some(target) = dp.tenant_lookup(POD_TABLE, dst) {
            return Err(Some(target.to_string()));
        }
        dp.steer_lookup(dst).ok_or(None)
    }
}

impl GraphNode for SteerNode {
    fn name(&self) -> &'static str {
        NODE_STEER
    }

    fn next_nodes(&self) -> &'static [&'static str] {
        &[NODE_ENCAP]
    }

    fn dispatch(&mut self, dp: &mut NodeDataplane, frame: Vec<Buffer>, out: &mut Vec<(Next, Buffer)>) {
        let mut memo: HashMap<Addr, Result<V6Addr, Option<String>>> = HashMap::new();
        for mut b in frame {
            let WorkPacket::Inner(inner) = &b.packet else {
                out.push((Next::Drop(DropReason::NoSteeringMatch), b));
                continue;
            };
            let dst = inner.dst();
            let decision = if self.cache {
                memo.entry(dst).or_insert_with(|| Self::classify(dp, dst)).clone()
            } else {
                Self::classify(dp, dst)
            };
            let next = match decision {
                Ok(bsid) => {
                    b.bsid = Some(bsid);
                    Next::Node(NODE_ENCAP)
                }
                Err(Some(target)) => Next::Deliver { target, table_id: POD_TABLE },
                Err(None) => Next::Drop(DropReason::NoSteeringMatch),
            };
            out.push((next, b));
        }
    }
}

/// H.Encaps with the policy selected by the steering node.
pub struct EncapNode;

impl GraphNode for EncapNode {
    fn name(&self) -> &'static str {
        NODE_ENCAP
    }

    fn next_nodes(&self) -> &'static [&'static str] {
        &[NODE_IP6_LOOKUP]
    }

    fn dispatch(&mut self, dp: &mut NodeDataplane, frame: Vec<Buffer>, out: &mut Vec<(Next, Buffer)>) {
        for mut b in frame {
            let encapped = match (&b.packet, b.bsid) {
                (WorkPacket::Inner(inner), Some(bsid)) => dp.h_encaps(inner, bsid).ok(),
                _ => None,
            };
            match encapped {
                Some(outer) => {
                    b.packet = WorkPacket::Outer(outer);
                    out.push((Next::Node(NODE_IP6_LOOKUP), b));
                }
                None => out.push((Next::Drop(DropReason::Encap), b)),
            }
        }
    }
}

/// IPv6 FIB lookup on the outer destination.
pub struct Ip6LookupNode;

impl GraphNode for Ip6LookupNode {
    fn name(&self) -> &'static str {
        NODE_IP6_LOOKUP
    }

    fn next_nodes(&self) -> &'static [&'static str] {
        &[NODE_LOCALSID]
    }

    fn dispatch(&mut self, dp: &mut NodeDataplane, frame: Vec<Buffer>, out: &mut Vec<(Next, Buffer)>) {
        for b in frame {
            let next = match &b.packet {
                WorkPacket::Outer(p) => match dp.fib_lookup(p.dst) {
                    FibResult::Local => Next::Node(NODE_LOCALSID),
                    FibResult::NextHop(via) => Next::Tx { via },
                    FibResult::None => Next::Drop(DropReason::NoRoute),
                },
                WorkPacket::Inner(_) => Next::Drop(DropReason::NoRoute),
            };
            out.push((next, b));
        }
    }
}

/// Executes local SID behaviors. Packets that still have segments go back to
/// the FIB lookup on the next sweep.
pub struct LocalSidNode;

impl GraphNode for LocalSidNode {
    fn name(&self) -> &'static str {
        NODE_LOCALSID
    }

    fn next_nodes(&self) -> &'static [&'static str] {
        &[NODE_IP6_LOOKUP]
    }

    fn dispatch(&mut self, dp: &mut NodeDataplane, frame: Vec<Buffer>, out: &mut Vec<(Next, Buffer)>) {
        for mut b in frame {
            let pkt = match &b.packet {
                WorkPacket::Outer(p) => p.clone(),
                WorkPacket::Inner(_) => {
                    out.push((Next::Drop(DropReason::NotLocalSid), b));
                    continue;
                }
            };
            let next = match dp.process_local(pkt) {
                Disposition::Forward(p) => {
                    b.packet = WorkPacket::Outer(p);
                    Next::Node(NODE_IP6_LOOKUP)
                }
                Disposition::ForwardVia(nh, p) => {
                    b.packet = WorkPacket::Outer(p);
                    Next::Tx { via: nh.to_string() }
                }
                Disposition::Deliver { inner, table_id, target } => {
                    b.packet = WorkPacket::Inner(inner);
                    Next::Deliver { target, table_id }
                }
                Disposition::Drop(reason) => Next::Drop(reason),
            };
            out.push((next, b));
        }
    }
}

/// rx → sr-steer → sr-h-encaps → ip6-lookup → srv6-localsid.
pub fn standard_pipeline(steer_cache: bool) -> Graph {
    Graph::new(NODE_RX)
        .with_node(RxNode)
        .with_node(SteerNode { cache: steer_cache })
        .with_node(EncapNode)
        .with_node(Ip6LookupNode)
        .with_node(LocalSidNode)
}
