//! End-to-end and stage-level timings: the full pipeline on the shipped
//! constrained instance and on random models, the simplex core on dense
//! random programs, and value iteration on a mid-sized grid instance.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use flowlp::classify::{aggregate_value_iteration, default_sweep_budget, VI_TOL};
use flowlp::fixtures::{constrained_two_action, decay_interval, random_instance};
use flowlp::pipeline::{solve, SolveOptions};
use flowlp::rng::Stream;
use flowlp::simplex::{self, LpRow, Relation, SimplexOptions};
use flowlp::{build_mdp, Problem};

fn solve_default(problem: &Problem) {
    let report = solve(problem, &SolveOptions::default()).expect("pipeline succeeds");
    criterion::black_box(report.value);
}

fn bench_pipeline(c: &mut Criterion) {
    let constrained = constrained_two_action();
    c.bench_function("solve constrained two-action", |b| {
        b.iter(|| solve_default(&constrained))
    });

    let random = random_instance(11);
    c.bench_function("solve random instance", |b| b.iter(|| solve_default(&random)));

    let grid = decay_interval();
    c.bench_function("solve interval grid", |b| b.iter(|| solve_default(&grid)));
}

fn bench_value_iteration(c: &mut Criterion) {
    let mdp = build_mdp(&decay_interval()).unwrap();
    c.bench_function("value iteration on the interval grid", |b| {
        b.iter(|| {
            let w = aggregate_value_iteration(&mdp, VI_TOL, default_sweep_budget(&mdp));
            criterion::black_box(w.residual)
        })
    });
}

/// Dense feasible program with `n` variables, one equality tying the mass
/// to one and `n/4` random inequality budgets.
fn random_program(seed: u64, n: usize) -> (Vec<f64>, Vec<LpRow>) {
    let mut s = Stream::new(seed, 0);
    let objective: Vec<f64> = (0..n).map(|_| s.range(0.1, 5.0)).collect();
    let mut rows = vec![LpRow {
        coeffs: vec![1.0; n],
        rel: Relation::Eq,
        rhs: 1.0,
    }];
    for _ in 0..n / 4 {
        let coeffs: Vec<f64> = (0..n).map(|_| s.range(0.0, 2.0)).collect();
        rows.push(LpRow {
            coeffs,
            rel: Relation::Le,
            rhs: s.range(1.0, 3.0),
        });
    }
    (objective, rows)
}

fn bench_simplex(c: &mut Criterion) {
    for n in [16usize, 64] {
        c.bench_function(&format!("simplex on a dense {n}-column program"), |b| {
            b.iter_batched(
                || random_program(n as u64, n),
                |(objective, rows)| {
                    let out = simplex::solve(&objective, &rows, SimplexOptions::default())
                        .expect("program solves");
                    criterion::black_box(out)
                },
                BatchSize::SmallInput,
            )
        });
    }
}

criterion_group!(benches, bench_pipeline, bench_value_iteration, bench_simplex);
criterion_main!(benches);
