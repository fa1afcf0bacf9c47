// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Deterministic SRv6 container-overlay simulator.
//!
//! Packet formats and addressing live in [`net`], per-element forwarding
//! state in [`dataplane`], batched dispatch in [`graph`], the routed
//! backbone in [`underlay`], and the two policy distribution paths in
//! [`bgp`] and [`k8s`]. [`agent`] ties them together per node and [`sim`]
//! drives a whole cluster.

pub mod agent;
pub mod bgp;
pub mod dataplane;
pub mod graph;
pub mod k8s;
pub mod net;
pub mod sim;
pub mod underlay;

pub use agent::{Agent, AgentConfig, AgentError, AgentMode, SegmentMode};
pub use dataplane::{Behavior, DataplaneDump, DataplaneError, DropReason, NodeDataplane, SrPolicyEntry, SteeringRule};
pub use net::{Addr, Family, InnerPacket, OuterPacket, Prefix, Srh, V4Addr, V6Addr};
pub use sim::{Scenario, SimError, Simulation};
