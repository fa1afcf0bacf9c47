// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use srv6_overlay::graph::{bench_dispatch, bench_fixture, standard_pipeline, VECTOR_SIZE};

const PACKETS: usize = 4096;

fn dispatch(c: &mut Criterion) {
    let mut g = c.benchmark_group("encap_pipeline");
    g.throughput(Throughput::Elements(PACKETS as u64));
    for batch in [1, 32, VECTOR_SIZE] {
        let (mut dp, packets) = bench_fixture(16, PACKETS);
        let mut graph = standard_pipeline(true);
        g.bench_with_input(BenchmarkId::from_parameter(batch), &batch, |b, &batch| {
            b.iter(|| bench_dispatch(&mut graph, &mut dp, &packets, batch).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, dispatch);
criterion_main!(benches);
