use criterion::{black_box, criterion_group, criterion_main, Criterion};
use tnoisemod::analysis::average_bep_with;
use tnoisemod::analysis::quadrature::QuadratureOptions;
use tnoisemod::montecarlo::{simulate_ternary, Fading};
use tnoisemod::{conditional_bep, Complex64, LinkConfig};

fn cfg() -> LinkConfig {
    LinkConfig::new(200, 1.0, 1.0, 10.0, 12.0).unwrap()
}

fn analysis(c: &mut Criterion) {
    let cfg = cfg();
    c.bench_function("conditional_bep", |b| {
        b.iter(|| conditional_bep(black_box(Complex64::new(0.3, 0.1)), &cfg))
    });
    c.bench_function("average_bep", |b| {
        b.iter(|| average_bep_with(black_box(&cfg), &QuadratureOptions::default()).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let cfg = cfg();
    let mut group = c.benchmark_group("simulate_ternary");
    group.sample_size(10);
    group.bench_function("1k frames N=200", |b| {
        b.iter(|| simulate_ternary(&cfg, Fading::Rayleigh, 1_000, black_box(7), 0))
    });
    group.finish();
}

criterion_group!(benches, analysis, simulation);
criterion_main!(benches);
