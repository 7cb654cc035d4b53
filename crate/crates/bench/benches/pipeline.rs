use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use xagent_bench::mission;
use xagent_core::agent::{infer_waypoints, run_baseline_sweep};
use xagent_core::causal::{run_experiment, CausalConfig, Description, DEFAULT_DESCRIPTION};
use xagent_core::optimize::SearchSpec;
use xagent_core::vision::dist;
use xagent_core::world::view;
use xagent_core::{Kernel, Position, WorldState};

fn vision(c: &mut Criterion) {
    let (map, _) = mission("mission1");
    let a = view(&map, Position::new(3.5, 2.5));
    let b = view(&map, Position::new(4.0, 2.5));
    let kernel = Kernel::default();
    c.bench_function("render_64x48", |bench| bench.iter(|| view(&map, black_box(Position::new(3.5, 2.5)))));
    c.bench_function("dist_sigma_1.5", |bench| bench.iter(|| dist(black_box(&a), black_box(&b), &kernel)));
}

fn agent(c: &mut Criterion) {
    let (map, demo) = mission("mission1");
    let spec = SearchSpec::default();
    let kernel = Kernel::default();
    let mut group = c.benchmark_group("agent");
    group.sample_size(10);
    group.bench_function("infer_waypoints_mission1", |bench| {
        bench.iter(|| infer_waypoints(&mut WorldState::new(map.clone()), &demo, &spec, &kernel).unwrap())
    });
    group.bench_function("baseline_sweep_mission1", |bench| {
        bench.iter(|| run_baseline_sweep(&mut WorldState::new(map.clone()), 10_000).unwrap())
    });
    group.finish();
}

fn causal(c: &mut Criterion) {
    let description: Description = DEFAULT_DESCRIPTION.parse().unwrap();
    let cfg = CausalConfig::default();
    let mut group = c.benchmark_group("causal");
    group.sample_size(10);
    group.bench_function("experiment_default", |bench| {
        bench.iter(|| run_experiment(&description, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, vision, agent, causal);
criterion_main!(benches);
