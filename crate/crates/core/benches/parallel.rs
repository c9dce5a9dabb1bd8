//! Trial batches through the rayon path and the sequential fallback.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cpperturb::cbnorm::{cb_norm, NormOptions};
use cpperturb::par::{map_indexed, map_indexed_sequential};
use cpperturb::perturb::{near_auto_to_auto, PerturbOptions};
use cpperturb::random::derive_seed;
use cpperturb::trials::{norms_instance, samerange_instance};

fn samerange_trial(i: usize) -> f64 {
    let seed = derive_seed(7, 1, i as u64);
    let (phi, _) = samerange_instance(2 + i % 3, 1e-4, seed);
    near_auto_to_auto(&phi, 1e-4, &PerturbOptions::fast().with_seed(seed))
        .map(|p| p.distance.upper)
        .unwrap_or(f64::NAN)
}

fn norms_trial(i: usize) -> f64 {
    let seed = derive_seed(7, 2, i as u64);
    cb_norm(&norms_instance(i, seed), &NormOptions::fast().with_seed(seed))
        .map(|e| e.upper)
        .unwrap_or(f64::NAN)
}

fn bench_batches(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial_batch");
    group.sample_size(10).measurement_time(Duration::from_secs(5));
    for &count in &[8usize, 32] {
        group.bench_with_input(BenchmarkId::new("samerange/rayon", count), &count, |b, &n| {
            b.iter(|| black_box(map_indexed(n, samerange_trial)))
        });
        group.bench_with_input(BenchmarkId::new("samerange/sequential", count), &count, |b, &n| {
            b.iter(|| black_box(map_indexed_sequential(n, samerange_trial)))
        });
        group.bench_with_input(BenchmarkId::new("norms/rayon", count), &count, |b, &n| {
            b.iter(|| black_box(map_indexed(n, norms_trial)))
        });
        group.bench_with_input(BenchmarkId::new("norms/sequential", count), &count, |b, &n| {
            b.iter(|| black_box(map_indexed_sequential(n, norms_trial)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batches);
criterion_main!(benches);
