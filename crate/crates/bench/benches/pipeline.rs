use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hypex_bench::{dataset, model};
use hypex_core::gbdt::train;
use hypex_core::{
    compute_stats, explain_importance, generate_counterexamples, CfConfig, ClassLabel, Classifier, DistanceProfile,
    PerturbationConfig, TrainConfig,
};

fn training(c: &mut Criterion) {
    let data = dataset();
    let config = TrainConfig {
        n_rounds: 20,
        ..TrainConfig::default()
    };
    let mut g = c.benchmark_group("train");
    g.sample_size(10);
    g.bench_function("20 rounds", |b| b.iter(|| train(black_box(&data), &config).unwrap()));
    g.finish();
}

fn prediction(c: &mut Criterion) {
    let data = dataset();
    let m = model(&data);
    let rows: Vec<&[f64]> = data.records().iter().take(1000).map(|r| r.values.as_slice()).collect();
    c.bench_function("predict 1000 records", |b| {
        b.iter(|| rows.iter().map(|x| m.predict_proba(black_box(x))[0]).sum::<f64>())
    });
}

fn explaining(c: &mut Criterion) {
    let data = dataset();
    let m = model(&data);
    let stats = compute_stats(&data).unwrap();
    let profile = DistanceProfile::new(data.schema(), &stats).unwrap();
    let query = data.records()[0].clone();
    let mut g = c.benchmark_group("explain");
    g.sample_size(10);
    g.bench_function("importance", |b| {
        let config = PerturbationConfig::default();
        b.iter(|| explain_importance(&m, data.schema(), &query, ClassLabel::NEGATIVE, &stats, &config).unwrap())
    });
    g.bench_function("counterexamples", |b| {
        let config = CfConfig {
            target_class: ClassLabel::HYPOTHYROID,
            ..CfConfig::default()
        };
        b.iter(|| generate_counterexamples(&m, &query, &config, &profile, &data).unwrap())
    });
    g.finish();
}

criterion_group!(benches, training, prediction, explaining);
criterion_main!(benches);
