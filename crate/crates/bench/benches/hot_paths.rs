use criterion::{black_box, criterion_group, criterion_main, Criterion};

use robustmsd::divergence::{kl_knn_estimate, KnnConfig};
use robustmsd::numerics::cholesky;
use robustmsd::sampling::{sample_mvn, tilt_weights};
use robustmsd::solver::{solve_inner, solve_period, SolverOptions};
use robustmsd_bench::{reference_model, reference_sample};

fn bench_tilt(c: &mut Criterion) {
    let sample = reference_sample(100_000, 1);
    let weights = [0.4, 0.3, 0.3];
    c.bench_function("tilt_weights_100k", |b| {
        b.iter(|| tilt_weights(black_box(&sample), black_box(&weights), black_box(0.02)))
    });
}

fn bench_inner(c: &mut Criterion) {
    let sample = reference_sample(50_000, 2);
    let weights = [0.4, 0.3, 0.3];
    c.bench_function("solve_inner_50k", |b| {
        b.iter(|| solve_inner(black_box(&sample), black_box(&weights), black_box(0.05)))
    });
}

fn bench_period(c: &mut Criterion) {
    let model = reference_model();
    let sample = reference_sample(20_000, 3);
    let mean_gross = sample.mean_gross();
    let options = SolverOptions::default();
    c.bench_function("solve_period_20k", |b| {
        b.iter(|| {
            solve_period(
                black_box(&sample),
                black_box(model.sigma()),
                3.0,
                0.05,
                0.0,
                black_box(&mean_gross),
                &options,
            )
        })
    });
}

fn bench_knn(c: &mut Criterion) {
    let model = reference_model();
    let nominal = sample_mvn(&model.gross_mean(), model.sigma(), 500, 4).unwrap();
    let alt = sample_mvn(&model.gross_mean(), model.sigma(), 500, 5).unwrap();
    let cfg = KnnConfig { k: 5, repeats: 1 };
    c.bench_function("knn_estimate_500", |b| {
        b.iter(|| kl_knn_estimate(black_box(nominal.draws()), black_box(alt.draws()), &cfg))
    });
}

fn bench_cholesky(c: &mut Criterion) {
    let model = reference_model();
    c.bench_function("cholesky_3x3", |b| {
        b.iter(|| cholesky(black_box(model.sigma())))
    });
}

criterion_group!(
    benches,
    bench_tilt,
    bench_inner,
    bench_period,
    bench_knn,
    bench_cholesky
);
criterion_main!(benches);
