// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Inputs shared by the criterion benches.

use srv6_overlay::bgp::{PolicyNlri, SrPolicyUpdate};
use srv6_overlay::net::PROTO_IPV4;
use srv6_overlay::{Family, Srh, V6Addr};

/// SRH carrying `n` segments, fcff:1::1 through fcff:n::1.
pub fn srh(n: usize) -> Srh {
    let path: Vec<V6Addr> = (1..=n as u128).map(|i| V6Addr::from_bits(0xfcff_u128 << 112 | i << 96 | 1)).collect();
    Srh::for_path(PROTO_IPV4, &path).expect("1..=MAX_SEGMENTS segments")
}

/// The worker2 IPv4 policy from scenarios/full/policies.
pub fn worker2_v4_update() -> SrPolicyUpdate {
    let segs: Vec<V6Addr> = ["fcff:5::1", "fcff:7::1", "fcff:8::1", "fcdd::12aa:d460:b250:45:b04"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let nlri = PolicyNlri { distinguisher: 4, color: 94, endpoint: "fd12::1000".parse().unwrap() };
    SrPolicyUpdate::for_path(nlri, "cafe::4".parse().unwrap(), &segs, Family::V4).expect("valid policy")
}
