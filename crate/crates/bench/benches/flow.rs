use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use shapley_bench::fixture;
use shapley_core::analysis::{self, stability::OrbitId};
use shapley_core::flow::{self, Limits};
use shapley_core::jitter::{self, Big, Real};

fn simulate(c: &mut Criterion) {
    let (game, start) = fixture(0.3, 1);
    let lim = Limits { max_events: 1000, ..Default::default() };
    c.bench_function("simulate 1000 events", |b| b.iter(|| flow::simulate(&game, &start, &lim).unwrap()));
    c.bench_function("single step", |b| b.iter(|| flow::step(&game, &start).unwrap()));
}

fn analysis_checks(c: &mut Criterion) {
    let (game, _) = fixture(0.7, 0);
    c.bench_function("classify anti-Shapley", |b| {
        b.iter(|| analysis::classify_stability(&game, OrbitId::AntiShapley).unwrap())
    });
    c.bench_function("radial map", |b| b.iter(|| analysis::radial_map(&game).unwrap()));
}

fn jitter_model(c: &mut Criterion) {
    let model = analysis::game_jitter_model(0.5).unwrap();
    let z = [0.03, -0.01];
    c.bench_function("jitter map f64", |b| b.iter(|| jitter::jitter_map(&model, z).unwrap()));
    let zb = [Big::from_f64(z[0]), Big::from_f64(z[1])];
    c.bench_function("jitter map big", |b| {
        b.iter_batched(|| zb.clone(), |w| jitter::jitter_map_t(&model, &w).unwrap(), BatchSize::SmallInput)
    });
    c.bench_function("fixed points k=20..29", |b| b.iter(|| jitter::find_fixed_points(&model, 20, 29).unwrap()));
}

criterion_group!(benches, simulate, analysis_checks, jitter_model);
criterion_main!(benches);
