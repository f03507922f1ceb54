use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use housing_core::evt::{fit_gev, recovery_study, simulate_blocks, GevCoefficients, GevFitOptions};
use housing_core::fixtures;
use housing_core::par::Execution;
use housing_core::scenario::offset_sweep;
use housing_core::timeseries::month_end;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn gev_restarts(c: &mut Criterion) {
    let rows = fixtures::covariate_rows(month_end(2021, 1), month_end(2025, 12));
    let data = simulate_blocks(
        &GevCoefficients::POST_2020,
        &rows,
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    let init = GevCoefficients::moment_init(&data);
    let mut group = c.benchmark_group("fit_gev_10_restarts");
    group.sample_size(10);
    for (name, execution) in MODES {
        let options = GevFitOptions {
            execution,
            ..GevFitOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit_gev(black_box(&data), &init, &options).unwrap())
        });
    }
    group.finish();
}

fn recovery(c: &mut Criterion) {
    let rows = fixtures::covariate_rows(month_end(2021, 1), month_end(2025, 12));
    let seeds: Vec<u64> = (0..16).collect();
    let mut group = c.benchmark_group("recovery_study_16_seeds");
    group.sample_size(10);
    for (name, execution) in MODES {
        // Only the replicate loop switches mode. Restarts inside each fit stay sequential.
        let options = GevFitOptions {
            execution: Execution::Sequential,
            ..GevFitOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                recovery_study(
                    &GevCoefficients::POST_2020,
                    &rows,
                    black_box(&seeds),
                    None,
                    &options,
                    execution,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let baselines: Vec<f64> = (0..200).map(|i| 2.0 + 0.05 * i as f64).collect();
    let d_cpis: Vec<f64> = (1..=100).map(|i| 0.2 * i as f64).collect();
    let mut group = c.benchmark_group("offset_sweep_200x100");
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                offset_sweep(
                    &GevCoefficients::POST_2020,
                    black_box(&baselines),
                    &d_cpis,
                    execution,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, gev_restarts, recovery, sweep);
criterion_main!(benches);
