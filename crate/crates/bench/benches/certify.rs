use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use twincert::baseline::{exact_epsilon, pgd_epsilon, AttackConfig, Dataset};
use twincert::certify::{certify_global, CertConfig};
use twincert::toy::{toy_domain, toy_network};
use twincert_bench::{dense_fixture, unit_box};

fn toy(c: &mut Criterion) {
    let net = toy_network();
    let cfg = CertConfig { refine_count: 999, ..CertConfig::new(toy_domain(), 0.1) };
    c.bench_function("certify/toy-W2-all", |b| b.iter(|| black_box(certify_global(&net, &cfg).unwrap())));
    c.bench_function("exact/toy", |b| b.iter(|| black_box(exact_epsilon(&net, &toy_domain(), 0.1, 0).unwrap())));
}

fn dense(c: &mut Criterion) {
    let mut group = c.benchmark_group("certify/dense-16x2");
    group.sample_size(10);
    let net = dense_fixture(4, 16, 2);
    for r in [0, 2, 4] {
        let cfg = CertConfig { refine_count: r, ..CertConfig::new(unit_box(4), 0.05) };
        group.bench_with_input(BenchmarkId::from_parameter(r), &cfg, |b, cfg| {
            b.iter(|| black_box(certify_global(&net, cfg).unwrap()))
        });
    }
    group.finish();
}

fn attack(c: &mut Criterion) {
    let net = dense_fixture(4, 16, 2);
    let data = Dataset { rows: (0..8).map(|k| vec![-0.8 + 0.2 * k as f64; 4]).collect() };
    c.bench_function("pgd/dense-16x2-8-samples", |b| {
        b.iter(|| black_box(pgd_epsilon(&net, &data, &unit_box(4), 0.05, 0, &AttackConfig::default()).unwrap()))
    });
}

criterion_group!(benches, toy, dense, attack);
criterion_main!(benches);
