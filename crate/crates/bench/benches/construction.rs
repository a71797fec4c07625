use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use wrs::*;
use wrs_bench::{distributions, label, table, worker_counts, SIZES};

fn sequential(c: &mut Criterion) {
    for dist in distributions() {
        let mut g = c.benchmark_group(label("build", dist));
        g.sample_size(10);
        for n in SIZES {
            let wt = table(dist, n);
            g.throughput(Throughput::Elements(n as u64));
            g.bench_with_input(BenchmarkId::new("vose", n), &wt, |b, wt| {
                b.iter(|| AliasTable::build_vose(black_box(wt)))
            });
            g.bench_with_input(BenchmarkId::new("sweep", n), &wt, |b, wt| {
                b.iter(|| AliasTable::build_sweep(black_box(wt)))
            });
        }
        g.finish();
    }
}

fn parallel(c: &mut Criterion) {
    let n = 1_000_000;
    for dist in distributions() {
        let wt = table(dist, n);
        let mut g = c.benchmark_group(label("build-par", dist));
        g.sample_size(10);
        g.throughput(Throughput::Elements(n as u64));
        for p in worker_counts() {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(p).build().unwrap();
            g.bench_with_input(BenchmarkId::new("psa", p), &wt, |b, wt| {
                b.iter(|| pool.install(|| AliasTable::build_psa(black_box(wt), p)))
            });
            g.bench_with_input(BenchmarkId::new("2lvl-classic", p), &wt, |b, wt| {
                b.iter(|| pool.install(|| TwoLevelTable::build(black_box(wt), p, LocalBuilder::Vose, p).unwrap()))
            });
            g.bench_with_input(BenchmarkId::new("2lvl-sweep", p), &wt, |b, wt| {
                b.iter(|| pool.install(|| TwoLevelTable::build(black_box(wt), p, LocalBuilder::Sweep, p).unwrap()))
            });
            g.bench_with_input(BenchmarkId::new("compressed", p), &wt, |b, wt| {
                b.iter(|| pool.install(|| CompressedTable::build(black_box(wt), p).unwrap()))
            });
            g.bench_with_input(BenchmarkId::new("grouped", p), &wt, |b, wt| {
                b.iter(|| pool.install(|| GroupedSampler::build(black_box(wt), p).unwrap()))
            });
            g.bench_with_input(BenchmarkId::new("subset", p), &wt, |b, wt| {
                b.iter(|| pool.install(|| SubsetSampler::build(black_box(wt), p).unwrap()))
            });
        }
        g.finish();
    }
}

criterion_group!(benches, sequential, parallel);
criterion_main!(benches);
