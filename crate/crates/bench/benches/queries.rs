use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use wrs::*;
use wrs_bench::{distributions, label, table, worker_counts, SEED};

const N: usize = 1_000_000;

fn single(c: &mut Criterion) {
    for dist in distributions() {
        let wt = table(dist, N);
        let alias = AliasTable::build_psa(&wt, 1);
        let two = TwoLevelTable::build(&wt, 1000, LocalBuilder::Sweep, 1).unwrap();
        let comp = CompressedTable::build(&wt, 1).unwrap();
        let mut g = c.benchmark_group(label("draw", dist));
        g.throughput(Throughput::Elements(1));
        let mut rng = RngStream::new(SEED, 1);
        g.bench_function("alias", |b| b.iter(|| alias.sample(&mut rng)));
        g.bench_function("2lvl", |b| b.iter(|| two.sample(&mut rng)));
        g.bench_function("compressed", |b| b.iter(|| comp.sample(&mut rng)));
        g.finish();
    }
}

fn batched(c: &mut Criterion) {
    let k = 1_000_000;
    let wt = table(Distribution::PowerLaw { s: 1.0 }, N);
    let alias = AliasTable::build_psa(&wt, 1);
    let mut g = c.benchmark_group("sample-many");
    g.sample_size(10);
    g.throughput(Throughput::Elements(k as u64));
    for p in worker_counts() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(p).build().unwrap();
        g.bench_with_input(BenchmarkId::new("alias", p), &p, |b, &p| {
            b.iter(|| pool.install(|| alias.sample_many(black_box(k), p, SEED)))
        });
    }
    g.finish();
}

fn output_sensitive(c: &mut Criterion) {
    for s in [1.0, 2.0] {
        let dist = Distribution::PowerLaw { s };
        let wt = table(dist, N);
        let gs = GroupedSampler::build(&wt, 1).unwrap();
        let mut g = c.benchmark_group(label("grouped", dist));
        g.sample_size(10);
        for k in [1_000u64, 100_000, 10_000_000] {
            g.throughput(Throughput::Elements(k));
            g.bench_with_input(BenchmarkId::new("with", k), &k, |b, &k| {
                let mut rng = RngStream::new(SEED, 2);
                b.iter(|| gs.sample_replacement(k, &mut rng, true))
            });
        }
        for k in [1_000usize, 100_000] {
            g.throughput(Throughput::Elements(k as u64));
            g.bench_with_input(BenchmarkId::new("without", k), &k, |b, &k| {
                let mut rng = RngStream::new(SEED, 3);
                b.iter(|| sample_no_replacement(&gs, k, &mut rng, 1).unwrap())
            });
        }
        g.finish();
    }
}

fn others(c: &mut Criterion) {
    let n = 100_000;
    let wt = table(Distribution::PowerLaw { s: 1.0 }, n);
    let mut g = c.benchmark_group("misc");
    g.sample_size(10);
    g.throughput(Throughput::Elements(n as u64));
    g.bench_function("permute", |b| {
        let mut rng = RngStream::new(SEED, 4);
        b.iter(|| weighted_permutation(&wt, &mut rng, 1))
    });

    // Power-law weights are at most 1, so they double as inclusion probabilities.
    let subset = SubsetSampler::build(&wt, 1).unwrap();
    g.bench_function("subset", |b| {
        let mut rng = RngStream::new(SEED, 5);
        b.iter(|| subset.sample(&mut rng, 1))
    });

    let batches = MiniBatch::round_robin(wt.weights(), 4, 1000);
    g.bench_function("reservoir", |b| {
        b.iter(|| {
            let mut rs = ReservoirSampler::new(1000, 4, SEED).unwrap();
            for batch in &batches {
                rs.process_batch(batch, 1).unwrap();
            }
            rs.len()
        })
    });
    g.finish();
}

criterion_group!(benches, single, batched, output_sensitive, others);
criterion_main!(benches);
