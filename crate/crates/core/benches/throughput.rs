//! Sequential vs thread-pool throughput for the three heavy stages.
//!
//! `cargo bench -p dispwig` runs both arms. With `--no-default-features` the
//! crate has no rayon and every arm is sequential.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dispwig::pipeline::{self, AnalysisOptions};
use dispwig::sim::{self, linear_eta_scan, linspace, ExperimentConfig};
use dispwig::wigner::{self, PhaseSpaceLattice};
use dispwig::{dataset, par, ComplexAmplitude};

fn config() -> ExperimentConfig {
    ExperimentConfig {
        signal_amplitude: ComplexAmplitude::real(0.67),
        probe_intensities: linspace(0.1, 1.5, 8),
        phase_steps: 16,
        eta_values: linear_eta_scan(0.31, 8),
        eta_max: 0.31,
        gain: 0.1,
        overlap: 0.7569,
        shots_per_point: 2000,
        electronic_noise_sd: 0.0,
        rng_seed: 11,
        piezo_jitter_sd: sim::DEFAULT_PIEZO_JITTER_SD,
    }
}

fn arms() -> Vec<(&'static str, Option<usize>)> {
    let mut v = vec![("sequential", Some(1))];
    if par::is_parallel() {
        v.push(("pool", None));
    }
    v
}

fn bench_simulate(c: &mut Criterion) {
    let cfg = config();
    let mut g = c.benchmark_group("generate_dataset");
    g.sample_size(10);
    for (name, workers) in arms() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                par::with_workers(workers, || sim::generate_dataset(black_box(&cfg)).unwrap())
            })
        });
    }
    g.finish();
}

fn bench_convolve(c: &mut Criterion) {
    let w = |b: ComplexAmplitude| wigner::theory_coherent(b, ComplexAmplitude::real(0.67));
    let lattice = PhaseSpaceLattice::from_fn(5.0, 0.025, w).unwrap();
    let mut g = c.benchmark_group("loss_convolve");
    g.sample_size(20);
    for (name, workers) in arms() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                par::with_workers(workers, || {
                    wigner::loss_convolve(black_box(&lattice), 0.31).unwrap()
                })
            })
        });
    }
    g.finish();
}

fn bench_analyze(c: &mut Criterion) {
    let data = sim::generate_dataset(&config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    dataset::write_dataset(&data, dir.path()).unwrap();
    let run = dataset::read_run(dir.path()).unwrap();
    let opts = AnalysisOptions::default();
    let mut g = c.benchmark_group("analyze_loaded");
    g.sample_size(10);
    for (name, workers) in arms() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                par::with_workers(workers, || {
                    pipeline::analyze_loaded(black_box(&run), &opts).unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_simulate, bench_convolve, bench_analyze);
criterion_main!(benches);
