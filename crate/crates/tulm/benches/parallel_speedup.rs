//! Parallel map kernels against their sequential reference semantics.
//!
//! Three hot paths fan out over the worker pool: the latent-variable sweep
//! inside the binomial sampler, the per-draw poststratification map, and the
//! replicate loop of the repeated-sampling study. Each benchmark runs the
//! same work through `par_*` and `seq_*` so the report shows the speedup
//! (or, on one core, the scheduling overhead) directly.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use tulm::evaluation::{
    build_population, informative_sample, run_study, EstimatorKind, GeneratorSpec, StudyConfig,
};
use tulm::parallel::{par_chunked_rng_map, par_map_indexed, seq_chunked_rng_map, seq_map_indexed};
use tulm::prediction::predict_gaussian_domains;
use tulm::rng::polya_gamma::PolyaGamma;
use tulm::rng::RngStream;

fn gaussian_spec(n_units: usize) -> GeneratorSpec {
    GeneratorSpec {
        n_units,
        n_areas: 4,
        n_weeks: 4,
        ..GeneratorSpec::default_gaussian()
    }
}

/// Latent-variable sweep shape: one Polya-Gamma draw per record.
fn bench_omega_sweep(c: &mut Criterion) {
    let n = 20_000;
    let stream = RngStream::new(501, 0);
    let lambda: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64) * 4.0 - 2.0).collect();
    let pg = PolyaGamma::new(1.0).unwrap();
    let draw = |i: usize, rng: &mut RngStream| pg.draw(lambda[i], rng);

    let mut group = c.benchmark_group("omega_sweep");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par_chunked_rng_map(&stream, n, draw)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(seq_chunked_rng_map(&stream, n, draw)))
    });
    group.finish();
}

/// Poststratified prediction: the per-draw map dominates.
fn bench_prediction(c: &mut Criterion) {
    let spec = gaussian_spec(4000);
    let mut rng = RngStream::new(502, 0);
    let pop = build_population(&spec, &mut rng).unwrap();
    let cells = pop.to_cells();
    let sample = informative_sample(&pop, 0.10, &mut rng).unwrap();
    let cfg = tulm::gtulm::GtulmConfig {
        n_iter: 300,
        n_burn: 100,
        ..Default::default()
    };
    let draws = tulm::gtulm::run_gtulm(&sample, &cfg, &mut RngStream::new(503, 0)).unwrap();
    let stream = RngStream::new(504, 0);

    let mut group = c.benchmark_group("prediction");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(predict_gaussian_domains(&draws, &cells, 0.05, &stream).unwrap()))
    });
    group.finish();
}

/// Whole replicate batch: sample, fit, predict, score per replicate.
fn bench_study_replicates(c: &mut Criterion) {
    let spec = gaussian_spec(1500);
    let mut rng = RngStream::new(505, 0);
    let pop = build_population(&spec, &mut rng).unwrap();
    let cfg = StudyConfig {
        n_replicates: 4,
        expected_frac: 0.10,
        estimators: vec![EstimatorKind::Direct, EstimatorKind::Tulm],
        gaussian: tulm::gtulm::GtulmConfig {
            n_iter: 120,
            n_burn: 40,
            ..Default::default()
        },
        ..Default::default()
    };
    let stream = RngStream::new(506, 0);

    let mut group = c.benchmark_group("study_replicates");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(run_study(&pop, &cfg, &stream).unwrap()))
    });
    group.finish();
}

/// Raw indexed map on a numeric kernel, the scheduling floor.
fn bench_indexed_map(c: &mut Criterion) {
    let n = 100_000;
    let f = |i: usize| {
        let x = i as f64 * 1e-4;
        (x.sin() * x.cos()).exp().ln_1p()
    };
    let mut group = c.benchmark_group("indexed_map");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par_map_indexed(n, f)))
    });
    group.bench_function("sequential", |b| {
        b.iter_batched(|| (), |_| black_box(seq_map_indexed(n, f)), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_omega_sweep,
    bench_prediction,
    bench_study_replicates,
    bench_indexed_map
);
criterion_main!(benches);
