use std::hint::black_box;

use acvsim_core::control::optimal_controller;
use acvsim_core::detection_prior::build_residual_model;
use acvsim_core::estimation::{steady_state_gain, FilterConfig};
use acvsim_core::harness::presets::preset;
use acvsim_core::harness::run::build_models;
use acvsim_core::harness::run_scenario;
use acvsim_core::{PlantParams, SensorBank};
use criterion::{criterion_group, criterion_main, Criterion};

fn models(c: &mut Criterion) {
    let bank = SensorBank::default();
    let p = PlantParams::default();
    let cfg = FilterConfig::default();
    c.bench_function("steady_state_gain", |b| {
        b.iter(|| steady_state_gain(black_box(&bank), &p, &cfg).unwrap())
    });
    let (k, _) = steady_state_gain(&bank, &p, &cfg).unwrap();
    c.bench_function("residual_model", |b| {
        b.iter(|| build_residual_model(black_box(&k), &bank, &p, 0.997).unwrap())
    });
    let s = preset("fig9").unwrap().resolve().unwrap();
    c.bench_function("bandit_models", |b| {
        b.iter(|| build_models(black_box(&s)).unwrap())
    });
}

fn controller(c: &mut Criterion) {
    let p = PlantParams::default();
    c.bench_function("optimal_controller", |b| {
        b.iter(|| optimal_controller(black_box(20.0), black_box(80.0), black_box(19.5), 0.0, &p))
    });
}

fn runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_100s");
    g.sample_size(20);
    for name in ["fig3", "fig9", "fig10"] {
        let mut s = preset(name).unwrap().resolve().unwrap();
        s.duration = 100.0;
        g.bench_function(name, |b| b.iter(|| run_scenario(black_box(&s)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, models, controller, runs);
criterion_main!(benches);
