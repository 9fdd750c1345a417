use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use scacsp_bench::{covariances, trials};
use scacsp_core::csp;
use scacsp_core::linalg::{self, RankTolerance};
use scacsp_core::multiclass;
use scacsp_core::preprocess::{butterworth_bandpass, BandpassSpec};
use scacsp_core::scatter::{self, SelectionMode};
use scacsp_core::{Method, PipelineConfig, PipelineModel, RestMode};

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("gen_sym_eig");
    for n in [8, 22, 64] {
        let set = trials(n, 2, 20, 4 * n, 1);
        let cov = covariances(&set);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cov, |b, cov| {
            b.iter(|| linalg::gen_sym_eig(black_box(&cov.class_means[0]), &cov.composite, RankTolerance::default()))
        });
    }
    group.finish();
}

fn binary_training(c: &mut Criterion) {
    let cov = covariances(&trials(22, 2, 72, 250, 2));
    let mut group = c.benchmark_group("binary_training_22ch");
    group.bench_function("csp", |b| b.iter(|| csp::csp_train(black_box(&cov), 3)));
    group.bench_function("scacsp", |b| b.iter(|| scatter::scacsp_binary_train(black_box(&cov), 3)));
    group.bench_function("strcsp", |b| b.iter(|| csp::strcsp_train(black_box(&cov), 3, 0.1, 0.01)));
    group.finish();
}

fn scatters(c: &mut Criterion) {
    let mut group = c.benchmark_group("scatter_matrices");
    group.sample_size(20);
    for n in [8, 22] {
        let cov = covariances(&trials(n, 4, 72, 250, 3));
        let v = scatter::vectorize_covariances(&cov);
        group.bench_with_input(BenchmarkId::from_parameter(n), &v, |b, v| {
            b.iter(|| scatter::scatter_matrices(black_box(v), RankTolerance::default()))
        });
    }
    group.finish();
}

fn multiclass_training(c: &mut Criterion) {
    let cov = covariances(&trials(22, 4, 72, 250, 4));
    let mut group = c.benchmark_group("multiclass_training_22ch");
    group.bench_function("scacsp", |b| {
        b.iter(|| scatter::scacsp_multi_train(black_box(&cov), 3, SelectionMode::LargestAbs))
    });
    group.bench_function("csp_ovr", |b| {
        b.iter(|| multiclass::multiclass_ovr_train(black_box(&cov), 3, RestMode::default(), true))
    });
    group.bench_function("csp_pw", |b| b.iter(|| multiclass::multiclass_pw_train(black_box(&cov), 3, true)));
    group.finish();
}

fn prediction(c: &mut Criterion) {
    let train = trials(22, 4, 40, 500, 5);
    let test = trials(22, 4, 10, 500, 6);
    let cov = covariances(&train);
    let mut group = c.benchmark_group("predict_40_trials_22ch");
    for method in [Method::Scacsp, Method::CspOvr, Method::CspPw] {
        let mut config = PipelineConfig::new(method);
        config.band = None;
        let model = PipelineModel::fit_default(&config, &cov).expect("fit");
        group.bench_function(method.name(), |b| {
            b.iter(|| {
                for x in &test.trials {
                    black_box(model.predict_trial(x).expect("predict"));
                }
            })
        });
    }
    group.finish();
}

fn filtering(c: &mut Criterion) {
    let set = trials(22, 1, 1, 1000, 7);
    let spec = BandpassSpec::motor_imagery(250.0);
    c.bench_function("bandpass_22ch_1000", |b| b.iter(|| butterworth_bandpass(black_box(&set.trials[0]), &spec)));
}

criterion_group!(benches, eigen, binary_training, scatters, multiclass_training, prediction, filtering);
criterion_main!(benches);
