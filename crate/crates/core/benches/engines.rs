use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use moran_core::engine::{estimate_fixation_with, EngineKind, EstimateConfig, Execution, LumpedMode, Target};
use moran_core::exact::{float_fixation_full, Initial};
use moran_core::graph::{build_star, SuperstarSpec};

fn batch(c: &mut Criterion) {
    let cases = [
        ("event S5_10,10", SuperstarSpec::new(5, 10, 10).unwrap(), EngineKind::EventDriven, LumpedMode::Auto, 200),
        ("lumped S5_20,20", SuperstarSpec::new(5, 20, 20).unwrap(), EngineKind::Lumped, LumpedMode::Stepwise, 200),
        ("accelerated S5_50,50", SuperstarSpec::new(5, 50, 50).unwrap(), EngineKind::Lumped, LumpedMode::Accelerated, 50),
    ];
    let mut group = c.benchmark_group("batch");
    group.sample_size(10);
    for (name, spec, engine, mode, runs) in cases {
        for (label, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            let mut config = EstimateConfig::new(runs, 7, engine);
            config.execution = execution;
            config.lumped_mode = mode;
            group.bench_with_input(BenchmarkId::new(name, label), &config, |b, config| {
                b.iter(|| estimate_fixation_with(&Target::Superstar(spec), 2.0, config).unwrap())
            });
        }
    }
    group.finish();
}

fn full_chain(c: &mut Criterion) {
    let mut group = c.benchmark_group("full chain float");
    group.sample_size(10);
    for n in [10usize, 14] {
        let g = build_star(n).unwrap();
        group.bench_with_input(BenchmarkId::new("star", n), &g, |b, g| {
            b.iter(|| float_fixation_full(g, 2.0, Initial::Uniform).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, batch, full_chain);
criterion_main!(benches);
