// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

//! Wall-clock throughput of scalar vs vector dispatch. Reported, never asserted.

use std::fmt::Write as _;
use std::time::Instant;

use super::{standard_pipeline, Graph, GraphError, Outcome, PacketVector, WorkPacket, VECTOR_SIZE};
use crate::dataplane::{NodeDataplane, SrPolicyEntry, SteeringRule};
use crate::net::{Addr, Family, InnerPacket, Prefix, V4Addr, V6Addr};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub batch: usize,
    pub packets: usize,
    pub seconds: f64,
    pub pps: f64,
    pub drops: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Vector pps over scalar pps, when both rows are present.
    pub fn ratio(&self) -> Option<f64> {
        let scalar = self.rows.iter().find(|r| r.batch == 1)?;
        let vector = self.rows.iter().find(|r| r.batch == VECTOR_SIZE)?;
        Some(vector.pps / scalar.pps)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch,packets,seconds,pps\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.6},{:.1}", r.batch, r.packets, r.seconds, r.pps);
        }
        out
    }
}

/// A headend with `tunnels` v4 destinations steered into two-segment policies,
/// plus a workload cycling over those destinations.
pub fn bench_fixture(tunnels: usize, n_packets: usize) -> (NodeDataplane, Vec<InnerPacket>) {
    let tunnels = tunnels.clamp(1, 4096);
    let mut dp = NodeDataplane::new();
    dp.set_encap_source("fd12::1000".parse().unwrap());
    dp.set_fib_route("::/0".parse().unwrap(), "uplink");
    let mut dsts = Vec::with_capacity(tunnels);
    for t in 0..tunnels {
        let bsid = V6Addr::from_bits(0xcafe_u128 << 112 | t as u128);
        let segs = vec![
            V6Addr::from_bits(0xfcff_0004_u128 << 96 | 1),
            V6Addr::from_bits(0xfcdd_u128 << 112 | 0x1000 | t as u128),
        ];
        dp.install_policy(SrPolicyEntry::new(bsid, segs, Family::V4).expect("non-empty")).expect("fresh");
        let base = 0xac10_0000_u32 | ((t as u32) << 6);
        let prefix = Prefix::new(Addr::V4(V4Addr::from_bits(base)), 26).expect("valid");
        dp.install_steering(SteeringRule { prefix, bsid }).expect("policy installed");
        dsts.push(V4Addr::from_bits(base + 1));
    }
    let src: Addr = "172.31.0.1".parse().unwrap();
    let packets = (0..n_packets)
        .map(|i| InnerPacket::echo(src, Addr::V4(dsts[i % dsts.len()]), vec![0u8; 56]).expect("same family"))
        .collect();
    (dp, packets)
}

/// Pushes `packets` through `g`, one at a time for `batch == 1`, else in
/// vectors of `batch`.
pub fn bench_dispatch(
    g: &mut Graph,
    dp: &mut NodeDataplane,
    packets: &[InnerPacket],
    batch: usize,
) -> Result<BenchRow, GraphError> {
    if packets.is_empty() {
        return Err(GraphError::NoPackets);
    }
    if batch == 0 || batch > VECTOR_SIZE {
        return Err(GraphError::BatchSize(batch));
    }
    let mut drops = 0;
    let start = Instant::now();
    if batch == 1 {
        for p in packets {
            let o = g.run_scalar(dp, WorkPacket::Inner(p.clone()))?;
            drops += matches!(o, Outcome::Drop { .. }) as usize;
        }
    } else {
        for chunk in packets.chunks(batch) {
            let v = PacketVector::new(chunk.iter().cloned().map(WorkPacket::Inner).collect())?;
            drops += g.run_vector(dp, v)?.iter().filter(|o| o.is_drop()).count();
        }
    }
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    Ok(BenchRow { batch, packets: packets.len(), seconds, pps: packets.len() as f64 / seconds, drops })
}

/// Scalar (batch 1) and vector (batch 256) runs of the standard encap pipeline.
pub fn compare_dispatch(n_packets: usize, tunnels: usize) -> Result<BenchReport, GraphError> {
    if n_packets == 0 {
        return Err(GraphError::NoPackets);
    }
    let mut rows = Vec::new();
    for batch in [1, VECTOR_SIZE] {
        let (mut dp, packets) = bench_fixture(tunnels, n_packets);
        let mut g = standard_pipeline(true);
        rows.push(bench_dispatch(&mut g, &mut dp, &packets, batch)?);
    }
    Ok(BenchReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_packets_rejected() {
        assert_eq!(compare_dispatch(0, 4), Err(GraphError::NoPackets));
        let (mut dp, _) = bench_fixture(1, 0);
        let mut g = standard_pipeline(true);
        assert_eq!(bench_dispatch(&mut g, &mut dp, &[], 1), Err(GraphError::NoPackets));
    }

    #[test]
    fn report_is_well_formed() {
        let r = compare_dispatch(2_000, 16).unwrap();
        let ratio = r.ratio().unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
        let csv = r.to_csv();
        assert!(csv.starts_with("batch,packets,seconds,pps\n1,2000,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn hundred_thousand_packets_without_drops() {
        let (mut dp, packets) = bench_fixture(64, 100_000);
        let mut g = standard_pipeline(true);
        assert_eq!(g.node_names().count(), 5);
        let row = bench_dispatch(&mut g, &mut dp, &packets, VECTOR_SIZE).unwrap();
        assert_eq!(row.packets, 100_000);
        assert_eq!(row.drops, 0);
    }
}
