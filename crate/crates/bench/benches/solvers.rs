use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mapf_mmot_core::exact;
use mapf_mmot_core::instance::{generate_grid, Instance};
use mapf_mmot_core::project::{solve_p3, P3Params, RetentionPolicy};
use mapf_mmot_core::sinkhorn::{run, Sinkhorn, SinkhornParams};
use mapf_mmot_core::timeexp;
use std::hint::black_box;

fn grid(width: usize, density: f64, horizon: usize, seed: u64) -> Instance {
    let robots = ((width * width) as f64 * density).round() as usize;
    generate_grid(width, width, 0, robots.max(1), seed)
        .unwrap()
        .with_horizon(horizon)
}

fn bench_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("time_expanded_build");
    for width in [10usize, 20, 30] {
        let inst = grid(width, 0.05, 20, 7);
        group.bench_with_input(BenchmarkId::from_parameter(width * width), &inst, |b, inst| {
            b.iter(|| timeexp::build(black_box(inst), 20).unwrap())
        });
    }
    group.finish();
}

fn bench_exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_solve");
    group.sample_size(20);
    for width in [10usize, 15, 20] {
        let inst = grid(width, 0.05, 20, 11);
        group.bench_with_input(BenchmarkId::from_parameter(width * width), &inst, |b, inst| {
            b.iter(|| exact::solve_p1(black_box(inst), 20).unwrap())
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sinkhorn_sweep");
    for width in [10usize, 20, 30] {
        let inst = grid(width, 0.05, 20, 13);
        group.bench_with_input(BenchmarkId::from_parameter(width * width), &inst, |b, inst| {
            let mut solver = Sinkhorn::new(inst, 20, SinkhornParams::default()).unwrap();
            b.iter(|| solver.sweep().unwrap())
        });
    }
    group.finish();
}

fn bench_pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pruned_projection");
    group.sample_size(20);
    for width in [10usize, 15, 20] {
        let inst = grid(width, 0.05, 20, 17);
        let shadow = run(
            &inst,
            20,
            SinkhornParams {
                max_sweeps: 200,
                ..Default::default()
            },
        )
        .unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(width * width),
            &(inst, shadow),
            |b, (inst, shadow)| {
                b.iter(|| {
                    solve_p3(
                        black_box(inst),
                        black_box(shadow),
                        P3Params {
                            lambda: 0.0,
                            delta: 1e-6,
                            retention: RetentionPolicy::KeepFraction(0.4),
                        },
                    )
                    .unwrap()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_build, bench_exact, bench_sweep, bench_pipeline);
criterion_main!(benches);
