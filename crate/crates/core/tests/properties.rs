//! Randomized property checks: flow algebra, cost-integral behaviour, the
//! compactified metric, and the measure/strategy round trip on generated
//! instances.

use proptest::prelude::*;

use flowlp::ext;
use flowlp::fixtures;
use flowlp::metric::{timed_distance, wrapped_unit_distance, TimedState};
use flowlp::problem::{Integration, Problem, State};
use flowlp::strategy::OccupationMeasure;
use flowlp::{
    aggregate_measure, aggregate_value_iteration, build_mdp, default_sweep_budget, disintegrate,
    exact_occupation, full_occupation, greedy_strategy, measure_costs, positive_cost_set,
    residuals, solve_occupation_lp, FullOccupation, LpOutcome, SimplexOptions, VI_TOL,
};

/// The parametric interval flows, each paired with a label for failure
/// messages.
fn interval_flows() -> Vec<(&'static str, Problem)> {
    vec![
        ("exponential-decay", fixtures::decay_interval()),
        ("linear-drift", fixtures::drift_interval()),
        ("custom-decay", fixtures::decay_custom_flow()),
    ]
}

/// Solved instance bundle shared by the measure round-trip properties.
struct Solved {
    problem: Problem,
    mdp: flowlp::FiniteMdp,
    vset: flowlp::PositiveCostSet,
    greedy: flowlp::DeterministicStrategy,
    weights: Vec<Vec<f64>>,
    value: f64,
}

fn solve_random(seed: u64) -> Option<Solved> {
    let problem = fixtures::random_instance(seed);
    let mdp = build_mdp(&problem).unwrap();
    let w = aggregate_value_iteration(&mdp, VI_TOL, default_sweep_budget(&mdp));
    let vset = positive_cost_set(&w, 1e-9);
    let greedy = greedy_strategy(&mdp, &w, &vset).unwrap();
    if !vset.contains(mdp.x0) {
        return None;
    }
    match solve_occupation_lp(&mdp, &vset, SimplexOptions::default()).unwrap() {
        LpOutcome::Optimal { weights, value, .. } => Some(Solved {
            problem,
            mdp,
            vset,
            greedy,
            weights,
            value,
        }),
        _ => None,
    }
}

proptest! {
    #[test]
    fn flows_fix_the_initial_point_at_time_zero(x in 0.0f64..=2.0) {
        for (name, p) in interval_flows() {
            let y = p.flow_eval(State::Point(x), 0.0).unwrap();
            prop_assert_eq!(y.point(), x, "{} moved at t = 0", name);
        }
    }

    #[test]
    fn flows_compose_over_time_splits(x in 0.0f64..=2.0, t in 0.0f64..=10.0, s in 0.0f64..=10.0) {
        for (name, p) in interval_flows() {
            let direct = p.flow_eval(State::Point(x), t + s).unwrap().point();
            let stage = p.flow_eval(State::Point(x), s).unwrap();
            let composed = p.flow_eval(stage, t).unwrap().point();
            prop_assert!(
                (direct - composed).abs() <= 1e-9,
                "{} violates composition at x={x} t={t} s={s}: {direct} vs {composed}",
                name
            );
        }
    }

    #[test]
    fn running_cost_grows_with_the_wait(x in 0.0f64..=2.0, a in 0.0f64..=10.0, b in 0.0f64..=10.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        for (name, p) in interval_flows() {
            let short = p.gradual_cost_integral(0, State::Point(x), lo).value;
            let long = p.gradual_cost_integral(0, State::Point(x), hi).value;
            prop_assert!(
                short <= long + 1e-12,
                "{} integral shrank from θ={lo} ({short}) to θ={hi} ({long})",
                name
            );
            let endless = p.gradual_cost_integral(0, State::Point(x), ext::INF).value;
            prop_assert!(long <= endless + 1e-12, "{} integral exceeds its θ=∞ value", name);
        }
    }

    #[test]
    fn trapezoid_error_shrinks_quadratically(x in 0.2f64..=2.0, theta in 0.5f64..=6.0) {
        let p = fixtures::decay_quadratic_rate();
        let exact = p
            .gradual_cost_integral_with(0, State::Point(x), theta, Integration::ClosedForm)
            .value;
        let err = |h: f64| {
            let q = p
                .gradual_cost_integral_with(0, State::Point(x), theta, Integration::Trapezoid { step: Some(h) })
                .value;
            (q - exact).abs()
        };
        let (e1, e2, e4) = (err(0.1), err(0.05), err(0.025));
        // Second order: quartering the step cuts the error by ~16; allow a
        // factor-of-two cushion and ignore errors at rounding level.
        prop_assert!(
            e4 <= e1 / 8.0 + 1e-12,
            "halving the step twice only got {e1} -> {e2} -> {e4} at x={x} θ={theta}"
        );
    }

    #[test]
    fn timed_metric_satisfies_the_axioms(
        raw in prop::collection::vec((0.0f64..=1.0, 0.0f64..=100.0, 0u8..4), 3)
    ) {
        let make = |&(x, t, kind): &(f64, f64, u8)| -> TimedState<f64> {
            match kind {
                0 => TimedState::rest(),
                1 => TimedState::at(0.0, x).unwrap(),
                _ => TimedState::at(t, x).unwrap(),
            }
        };
        let (a, b, c) = (make(&raw[0]), make(&raw[1]), make(&raw[2]));
        let base = wrapped_unit_distance;
        let dab = timed_distance(&a, &b, base);
        let dba = timed_distance(&b, &a, base);
        let dac = timed_distance(&a, &c, base);
        let dcb = timed_distance(&c, &b, base);
        prop_assert!(dab >= 0.0);
        prop_assert_eq!(dab, dba, "asymmetric distance");
        prop_assert_eq!(timed_distance(&a, &a, base), 0.0, "self-distance nonzero");
        prop_assert!(dab <= dac + dcb + 1e-12, "triangle violated: {dab} > {dac} + {dcb}");
        if dab <= 1e-12 {
            // Indiscernible points coincide: same rest status, and same
            // coordinates when ordinary (times equal via the compactified
            // gap, wrapped space equal via the scaled base term).
            prop_assert_eq!(a.is_rest(), b.is_rest());
        }
    }

    #[test]
    fn disintegration_reconstructs_the_measure(seed in 0u64..150) {
        if let Some(s) = solve_random(seed) {
            let sigma = disintegrate(&s.mdp, &s.vset, &s.weights, &s.greedy);
            for (vp, &x) in s.vset.indices().iter().enumerate() {
                let mass: f64 = s.weights[vp].iter().sum();
                if mass <= 0.0 {
                    continue;
                }
                for (k, &w) in s.weights[vp].iter().enumerate() {
                    let recon = sigma.rows[x][k] * mass;
                    prop_assert!(
                        (recon - w).abs() <= 1e-12 * mass.max(1.0),
                        "seed {seed}: row × mass = {recon} differs from weight {w} at state {x}"
                    );
                }
            }
        }
    }

    #[test]
    fn extracted_strategy_outperforms_its_source(seed in 0u64..150) {
        if let Some(s) = solve_random(seed) {
            let mu_costs = measure_costs(&s.mdp, &s.vset, &s.weights);
            prop_assert!((mu_costs[0] - s.value).abs() <= 1e-8 * s.value.abs().max(1.0));

            let sigma = disintegrate(&s.mdp, &s.vset, &s.weights, &s.greedy);
            let occ = exact_occupation(&s.mdp, &s.vset, &sigma).unwrap();
            let (masses, ow) = match &occ {
                OccupationMeasure::Finite { masses, weights } => (masses, weights),
                OccupationMeasure::Infinite => {
                    prop_assert!(false, "seed {seed}: optimal strategy has divergent visits");
                    unreachable!()
                }
            };

            // Componentwise outperformance of the source measure.
            let perf = measure_costs(&s.mdp, &s.vset, ow);
            for (j, (p, m)) in perf.iter().zip(&mu_costs).enumerate() {
                prop_assert!(
                    *p <= m + 1e-8,
                    "seed {seed}: criterion {j} regressed from {m} to {p}"
                );
            }

            // Weak duality: the strategy's exact occupation is feasible for
            // the program, so its objective cannot undercut the optimum.
            prop_assert!(perf[0] >= s.value - 1e-8, "seed {seed}: duality violated");

            // Per-state mass can only shrink in the round trip.
            for (vp, m) in masses.iter().enumerate() {
                let src: f64 = s.weights[vp].iter().sum();
                prop_assert!(
                    *m <= src + 1e-8,
                    "seed {seed}: state mass grew from {src} to {m}"
                );
            }

            // The exact occupation satisfies the balance rows it was solved from.
            let res = residuals(&s.mdp, &s.vset, ow);
            prop_assert!(res.max() <= 1e-8, "seed {seed}: residuals {res:?}");
        }
    }

    #[test]
    fn paused_mass_matches_the_waiting_times(seed in 0u64..60) {
        if let Some(s) = solve_random(seed) {
            let atoms = match full_occupation(&s.mdp, &s.vset, &s.weights, &s.greedy) {
                FullOccupation::Finite { atoms } => atoms,
                FullOccupation::Infinite { .. } => return Ok(()),
            };
            let h = 1e-3;
            let eta = aggregate_measure(&s.problem, &s.mdp, &atoms, h, 10.0);
            let expected: f64 = atoms
                .iter()
                .filter(|(_, k, _)| s.mdp.pairs.theta(*k).is_finite())
                .map(|(_, k, w)| s.mdp.pairs.theta(*k) * w)
                .sum();
            let total: f64 = atoms.iter().map(|(_, _, w)| w).sum();
            prop_assert!(
                (eta.paused_mass_finite - expected).abs() <= h * total,
                "seed {seed}: paused mass {} vs Σθ·μ {expected} (allowance {})",
                eta.paused_mass_finite,
                h * total
            );
        }
    }
}
