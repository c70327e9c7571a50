//! Built-in instances used across the test suite and shipped as JSON configs.
//!
//! Each constructor validates the instance it returns, so a fixture that
//! compiles is guaranteed to load.

use std::sync::Arc;

use crate::problem::{
    CostTerm, Domain, Flow, GradualRate, ImpulseCost, ImpulseMap, Problem, QuadratureConfig,
    ResetMap, State,
};
use crate::rng::Stream;

const THETA_01INF: [f64; 3] = [0.0, 1.0, f64::INFINITY];

fn finish(p: Problem) -> Problem {
    p.validate().expect("fixture must validate");
    p
}

/// Two labeled states, one action jumping everything to `s1`. Waiting at
/// `s0` burns cost at rate 1; an impulse costs 2. The optimal move is to
/// jump immediately and then wait forever, for a total cost of 2.
pub fn two_state_jump() -> Problem {
    finish(Problem {
        domain: Domain::Labels(vec!["s0".into(), "s1".into()]),
        actions: vec!["a".into()],
        flow: Flow::Identity,
        impulse_map: ImpulseMap::Table(vec![vec![1], vec![1]]),
        costs: vec![CostTerm {
            gradual: GradualRate::Table(vec![1.0, 0.0]),
            impulse: ImpulseCost::Constant(2.0),
        }],
        budgets: vec![],
        x0: State::Label(0),
        theta_grid: THETA_01INF.to_vec(),
        grid_points: None,
        quadrature: QuadratureConfig::default(),
    })
}

/// Two states and two actions with one budget constraint. Action `a1` is
/// expensive for the objective and free for the constraint; `a2` is the
/// reverse. The budget of 5 forces an even randomization between them,
/// giving an optimal value of 5 where every deterministic strategy pays 10.
pub fn constrained_two_action() -> Problem {
    finish(Problem {
        domain: Domain::Labels(vec!["s0".into(), "s1".into()]),
        actions: vec!["a1".into(), "a2".into()],
        flow: Flow::Identity,
        impulse_map: ImpulseMap::Table(vec![vec![1, 1], vec![1, 1]]),
        costs: vec![
            CostTerm {
                gradual: GradualRate::Table(vec![1.0, 0.0]),
                impulse: ImpulseCost::PerAction(vec![10.0, 0.0]),
            },
            CostTerm {
                gradual: GradualRate::Table(vec![0.0, 0.0]),
                impulse: ImpulseCost::PerAction(vec![0.0, 10.0]),
            },
        ],
        budgets: vec![5.0],
        x0: State::Label(0),
        theta_grid: THETA_01INF.to_vec(),
        grid_points: None,
        quadrature: QuadratureConfig::default(),
    })
}

/// Variant of [`constrained_two_action`] whose constraint cannot be met:
/// every column available from the start state carries positive constraint
/// cost, and the budget is 0.
pub fn constrained_infeasible() -> Problem {
    let mut p = constrained_two_action();
    p.costs[1] = CostTerm {
        gradual: GradualRate::Table(vec![1.0, 0.0]),
        impulse: ImpulseCost::PerAction(vec![10.0, 10.0]),
    };
    p.budgets = vec![0.0];
    finish(p)
}

/// Variant of [`constrained_two_action`] where the budget rules out every
/// impulse, leaving only the wait-forever strategy with infinite objective.
pub fn objective_infinite() -> Problem {
    let mut p = constrained_two_action();
    p.costs[1] = CostTerm {
        gradual: GradualRate::Table(vec![0.0, 0.0]),
        impulse: ImpulseCost::PerAction(vec![10.0, 10.0]),
    };
    finish(p)
}

/// Interval instance on `[0, 2]`: the state decays exponentially, waiting
/// costs at rate `x`, and the single impulse drops the state to 0 for 0.1.
/// From `x0 = 1` the best move is an immediate jump: value 0.1 exactly.
pub fn decay_interval() -> Problem {
    finish(Problem {
        domain: Domain::Interval { lo: 0.0, hi: 2.0 },
        actions: vec!["a".into()],
        flow: Flow::ExponentialDecay { rate: 1.0 },
        impulse_map: ImpulseMap::PerAction(vec![ResetMap::Target(0.0)]),
        costs: vec![CostTerm {
            gradual: GradualRate::Poly(vec![0.0, 1.0]),
            impulse: ImpulseCost::Constant(0.1),
        }],
        budgets: vec![],
        x0: State::Point(1.0),
        theta_grid: THETA_01INF.to_vec(),
        grid_points: Some(201),
        quadrature: QuadratureConfig::default(),
    })
}

/// Single zero-cost state: everything is free and every strategy is optimal.
pub fn zero_cost() -> Problem {
    finish(Problem {
        domain: Domain::Labels(vec!["s".into()]),
        actions: vec!["a".into()],
        flow: Flow::Identity,
        impulse_map: ImpulseMap::Table(vec![vec![0]]),
        costs: vec![CostTerm {
            gradual: GradualRate::Table(vec![0.0]),
            impulse: ImpulseCost::Constant(0.0),
        }],
        budgets: vec![],
        x0: State::Label(0),
        theta_grid: THETA_01INF.to_vec(),
        grid_points: None,
        quadrature: QuadratureConfig::default(),
    })
}

/// Linear drift toward the upper bound with running cost `x`; jumping back
/// to 0 costs 0.5.
pub fn drift_interval() -> Problem {
    finish(Problem {
        domain: Domain::Interval { lo: 0.0, hi: 2.0 },
        actions: vec!["a".into()],
        flow: Flow::LinearDrift { velocity: 1.0 },
        impulse_map: ImpulseMap::PerAction(vec![ResetMap::Target(0.0)]),
        costs: vec![CostTerm {
            gradual: GradualRate::Poly(vec![0.0, 1.0]),
            impulse: ImpulseCost::Constant(0.5),
        }],
        budgets: vec![],
        x0: State::Point(0.5),
        theta_grid: THETA_01INF.to_vec(),
        grid_points: Some(201),
        quadrature: QuadratureConfig::default(),
    })
}

/// Single state whose every move costs money and loops back on itself, so
/// the minimal total cost is infinite everywhere.
pub fn positive_cycle() -> Problem {
    finish(Problem {
        domain: Domain::Labels(vec!["s".into()]),
        actions: vec!["a".into()],
        flow: Flow::Identity,
        impulse_map: ImpulseMap::Table(vec![vec![0]]),
        costs: vec![CostTerm {
            gradual: GradualRate::Table(vec![1.0]),
            impulse: ImpulseCost::Constant(1.0),
        }],
        budgets: vec![],
        x0: State::Label(0),
        theta_grid: THETA_01INF.to_vec(),
        grid_points: None,
        quadrature: QuadratureConfig::default(),
    })
}

/// Tabulated flow whose table is not self-consistent: following it for
/// 1 + 1 time units disagrees with following it for 2. Used to exercise the
/// semigroup check's failure path.
pub fn broken_tabulated_flow() -> Problem {
    finish(Problem {
        domain: Domain::Labels(vec!["s0".into(), "s1".into()]),
        actions: vec!["a".into()],
        flow: Flow::Tabulated {
            times: vec![1.0, 2.0],
            map: vec![vec![1, 0], vec![1, 1]],
        },
        impulse_map: ImpulseMap::Table(vec![vec![1], vec![1]]),
        costs: vec![CostTerm {
            gradual: GradualRate::Table(vec![0.0, 0.0]),
            impulse: ImpulseCost::Constant(0.0),
        }],
        budgets: vec![],
        x0: State::Label(0),
        theta_grid: THETA_01INF.to_vec(),
        grid_points: None,
        quadrature: QuadratureConfig::default(),
    })
}

/// Decay flow with a quadratic running-cost rate; both the closed form and
/// quadrature apply, which the convergence tests compare.
pub fn decay_quadratic_rate() -> Problem {
    finish(Problem {
        domain: Domain::Interval { lo: 0.0, hi: 2.0 },
        actions: vec!["a".into()],
        flow: Flow::ExponentialDecay { rate: 0.7 },
        impulse_map: ImpulseMap::PerAction(vec![ResetMap::Target(0.0)]),
        costs: vec![CostTerm {
            gradual: GradualRate::Poly(vec![0.3, 1.0, 0.5]),
            impulse: ImpulseCost::Constant(0.0),
        }],
        budgets: vec![],
        x0: State::Point(1.0),
        theta_grid: THETA_01INF.to_vec(),
        grid_points: Some(201),
        quadrature: QuadratureConfig::default(),
    })
}

/// Unit-rate decay supplied as a custom routine, so no closed form is
/// available and every integral goes through quadrature.
pub fn decay_custom_flow() -> Problem {
    finish(Problem {
        domain: Domain::Interval { lo: 0.0, hi: 2.0 },
        actions: vec!["a".into()],
        flow: Flow::Custom(Arc::new(|x, t| x * (-t).exp())),
        impulse_map: ImpulseMap::PerAction(vec![ResetMap::Target(0.0)]),
        costs: vec![CostTerm {
            gradual: GradualRate::Poly(vec![0.0, 1.0]),
            impulse: ImpulseCost::Constant(0.1),
        }],
        budgets: vec![],
        x0: State::Point(1.0),
        theta_grid: THETA_01INF.to_vec(),
        grid_points: Some(201),
        quadrature: QuadratureConfig::default(),
    })
}

/// Seeded random finite instance for oracle cross-checks: identity flow,
/// 2–6 states, 1–3 actions, up to one budget pair, waiting times drawn from
/// a small menu. Sizes are capped so exhaustive strategy enumeration stays
/// cheap.
pub fn random_instance(seed: u64) -> Problem {
    let mut s = Stream::new(seed, 0);
    loop {
        let n_states = 2 + s.index(5);
        let n_actions = 1 + s.index(3);
        let mut theta_grid = vec![0.0];
        for t in [0.5, 1.0, 2.0] {
            if theta_grid.len() < 3 && s.next_f64() < 0.4 {
                theta_grid.push(t);
            }
        }
        theta_grid.push(f64::INFINITY);
        let n_pairs = n_actions * theta_grid.len();
        // Keep |pairs|^|states| small enough to enumerate outright.
        if (n_pairs as f64).powi(n_states as i32) > 2e5 {
            continue;
        }

        let labels = (0..n_states).map(|i| format!("s{i}")).collect();
        let actions = (0..n_actions).map(|i| format!("a{i}")).collect();
        let impulse_map =
            ImpulseMap::Table((0..n_states).map(|_| (0..n_actions).map(|_| s.index(n_states)).collect()).collect());

        let n_constraints = s.index(2);
        let mut costs = Vec::new();
        for _ in 0..=n_constraints {
            let gradual = (0..n_states)
                .map(|_| if s.next_f64() < 0.5 { 0.0 } else { s.range(0.1, 2.0) })
                .collect();
            let impulse = (0..n_states)
                .map(|_| {
                    (0..n_actions)
                        .map(|_| if s.next_f64() < 0.25 { 0.0 } else { s.range(0.0, 5.0) })
                        .collect()
                })
                .collect();
            costs.push(CostTerm {
                gradual: GradualRate::Table(gradual),
                impulse: ImpulseCost::Table(impulse),
            });
        }
        let budgets = (0..n_constraints).map(|_| s.range(1.0, 10.0)).collect();

        return finish(Problem {
            domain: Domain::Labels(labels),
            actions,
            flow: Flow::Identity,
            impulse_map,
            costs,
            budgets,
            x0: State::Label(0),
            theta_grid,
            grid_points: None,
            quadrature: QuadratureConfig::default(),
        });
    }
}

/// Like [`random_instance`], but with every budget stripped so only the
/// objective criterion remains.
pub fn random_unconstrained(seed: u64) -> Problem {
    let mut p = random_instance(seed);
    p.costs.truncate(1);
    p.budgets.clear();
    finish(p)
}
