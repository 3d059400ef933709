//! Criterion benches comparing the sequential path against the rayon path
//! and timing the hot solver stages.

use cirsplice::config::ExperimentConfig;
use cirsplice::harness::{run_monte_carlo, run_trial, SharedDictionaries, TrialOptions};
use criterion::{criterion_group, criterion_main, Criterion};

fn small_config() -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.band_plan.num_bands = 6;
    config.band_plan.subcarriers_per_band = 17;
    config.tau_max_s = 40e-9;
    config.snr_db = vec![20.0];
    config.trials = 8;
    config.seed = 11;
    config
}

fn bench_single_trial(c: &mut Criterion) {
    let config = small_config();
    let setup = config.resolve().unwrap();
    let dicts = SharedDictionaries::build(&setup).unwrap();
    let options = TrialOptions::default();
    c.bench_function("trial/full_pipeline", |b| {
        b.iter(|| run_trial(&setup, &dicts, 20.0, config.seed, 0, options))
    });
}

fn bench_monte_carlo(c: &mut Criterion) {
    let config = small_config();
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_monte_carlo(&config, 1, TrialOptions::default()).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| run_monte_carlo(&config, 0, TrialOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_single_trial, bench_monte_carlo);
criterion_main!(benches);
