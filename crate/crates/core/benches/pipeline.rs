//! Sequential vs rayon for the two embarrassingly parallel workloads:
//! independent rounding trials and the brute-force oracle.

use barter_core::oracle::{
    brute_force_with, random_instance, BruteForceOptions, RandomSpec, RandomWeights,
};
use barter_core::par::PARALLEL_AVAILABLE;
use barter_core::verify::{run_trials_with, TrialConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn modes() -> Vec<(&'static str, bool)> {
    let mut m = vec![("sequential", false)];
    if PARALLEL_AVAILABLE {
        m.push(("parallel", true));
    }
    m
}

fn trials(c: &mut Criterion) {
    let spec = RandomSpec {
        agents: 6,
        items: 4,
        density: 0.5,
        values: (1, 6),
        caps: (1, 2),
        weights: RandomWeights::ItemValue,
    };
    let inst = random_instance(&spec, 3).unwrap();
    let mut group = c.benchmark_group("rounding_trials");
    group.sample_size(10);
    for (name, parallel) in modes() {
        let config = TrialConfig {
            parallel,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::new(name, 1000), |b| {
            b.iter(|| run_trials_with(black_box(&inst), 1000, 7, config).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let spec = RandomSpec {
        agents: 5,
        items: 4,
        density: 0.6,
        values: (1, 9),
        caps: (1, 1),
        weights: RandomWeights::Explicit,
    };
    // pick a seed with enough transfers to make the search non-trivial
    let inst = (0..)
        .map(|s| random_instance(&spec, s).unwrap())
        .find(|i| (18..=22).contains(&barter_core::oracle::transfer_count(i)))
        .unwrap();
    let mut group = c.benchmark_group("brute_force");
    group.sample_size(10);
    for (name, parallel) in modes() {
        let opts = BruteForceOptions {
            parallel,
            prune: false,
            ..Default::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| brute_force_with(black_box(&inst), opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trials, oracle);
criterion_main!(benches);
