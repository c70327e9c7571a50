//! Trajectory simulation of a stationary strategy on the reduced MDP, and
//! Monte Carlo estimation of its performance vector.
//!
//! Randomness is counter-based: the draw for step `s` of run `r` under seed
//! `q` depends only on `(q, r, s)`, so runs are reproducible individually
//! and independent of each other regardless of execution order.

use crate::ext;
use crate::mdp::FiniteMdp;
use crate::problem::Problem;
use crate::rng;
use crate::strategy::StationaryStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The trajectory entered the cemetery.
    Absorbed,
    /// The next wait would cross the time horizon.
    TimeHorizon,
    /// The impulse budget was spent.
    ImpulseLimit,
}

impl Termination {
    pub fn describe(&self) -> &'static str {
        match self {
            Termination::Absorbed => "reached the cemetery",
            Termination::TimeHorizon => "time-horizon limit",
            Termination::ImpulseLimit => "impulse-count limit",
        }
    }
}

/// One decision epoch: wait `theta` at `from`, apply `action` (absent when
/// waiting forever), land at `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub from: usize,
    pub theta: f64,
    pub action: Option<usize>,
    pub to: usize,
    /// Cost paid this epoch, one entry per criterion.
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    /// Total cost per criterion, tail included.
    pub totals: Vec<f64>,
    /// Running cost accrued between the last record and the horizon, when
    /// the horizon cut a wait short; no record is emitted for that stretch.
    pub tail: Option<Vec<f64>>,
    pub seed: u64,
    pub run: u64,
    /// Time consumed by the emitted records.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationLimits {
    pub horizon: f64,
    pub max_impulses: usize,
}

impl Default for SimulationLimits {
    fn default() -> Self {
        SimulationLimits {
            horizon: ext::INF,
            max_impulses: 1000,
        }
    }
}

/// Samples an index from a probability row using one uniform draw.
fn sample_row(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left the cumulative sum a hair under 1: take the last
    // positive entry.
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

/// Runs one trajectory of `strategy` from the MDP's start state.
///
/// A wait that would cross the horizon is not taken: the run stops with the
/// running cost accrued up to the horizon reported in `tail`, leaving the
/// records exactly the epochs that completed. The instance itself is needed
/// for that one computation — the cut-short wait ends at a time the cost
/// tables never tabulated.
pub fn simulate(
    problem: &Problem,
    mdp: &FiniteMdp,
    strategy: &StationaryStrategy,
    seed: u64,
    run: u64,
    limits: SimulationLimits,
) -> Trace {
    let n_criteria = mdp.n_criteria();
    let mut records = Vec::new();
    let mut totals = vec![0.0; n_criteria];
    let mut x = mdp.x0;
    let mut elapsed = 0.0f64;
    let mut impulses = 0usize;
    let mut step = 0u64;

    let (termination, tail) = loop {
        if mdp.is_cemetery(x) {
            break (Termination::Absorbed, None);
        }
        let k = sample_row(&strategy.rows[x], rng::uniform(seed, run, step));
        step += 1;
        let theta = mdp.pairs.theta(k);
        let remaining = limits.horizon - elapsed;
        if theta > remaining {
            // Accrue the gradual cost of the cut-short wait; the impulse
            // never happens, so no record is emitted.
            let tail: Vec<f64> = (0..n_criteria)
                .map(|j| problem.gradual_cost_integral(j, mdp.states[x], remaining).value)
                .collect();
            for (t, inc) in totals.iter_mut().zip(&tail) {
                *t += inc;
            }
            break (Termination::TimeHorizon, Some(tail));
        }
        let increments: Vec<f64> = (0..n_criteria).map(|j| mdp.cost[j][x][k]).collect();
        let to = mdp.next[x][k];
        for (t, inc) in totals.iter_mut().zip(&increments) {
            *t += inc;
        }
        records.push(TraceRecord {
            step: records.len(),
            from: x,
            theta,
            action: if theta.is_finite() { Some(mdp.pairs.action(k)) } else { None },
            to,
            increments,
        });
        elapsed += theta;
        x = to;
        if theta.is_finite() {
            impulses += 1;
            if impulses >= limits.max_impulses && !mdp.is_cemetery(x) {
                break (Termination::ImpulseLimit, None);
            }
        }
    };

    Trace {
        records,
        termination,
        totals,
        tail,
        seed,
        run,
        elapsed,
    }
}

/// Monte Carlo performance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub values: Vec<f64>,
    /// Sample standard errors; zero for a single run.
    pub stderrs: Vec<f64>,
    pub runs: u64,
    /// Runs stopped by the horizon or the impulse budget.
    pub truncated_runs: u64,
}

/// Averages run totals over `runs` trajectories with per-run counter seeds.
pub fn monte_carlo_values(
    problem: &Problem,
    mdp: &FiniteMdp,
    strategy: &StationaryStrategy,
    seed: u64,
    runs: u64,
    limits: SimulationLimits,
) -> McEstimate {
    assert!(runs >= 1, "at least one run required");
    let n_criteria = mdp.n_criteria();
    let mut sums = vec![0.0f64; n_criteria];
    let mut sq_sums = vec![0.0f64; n_criteria];
    let mut truncated = 0u64;
    let mut any_infinite = vec![false; n_criteria];

    for r in 0..runs {
        let trace = simulate(problem, mdp, strategy, seed, r, limits);
        if trace.termination != Termination::Absorbed {
            truncated += 1;
        }
        for j in 0..n_criteria {
            let t = trace.totals[j];
            if t.is_finite() {
                sums[j] += t;
                sq_sums[j] += t * t;
            } else {
                any_infinite[j] = true;
            }
        }
    }

    let n = runs as f64;
    let values: Vec<f64> = (0..n_criteria)
        .map(|j| if any_infinite[j] { ext::INF } else { sums[j] / n })
        .collect();
    let stderrs: Vec<f64> = (0..n_criteria)
        .map(|j| {
            if any_infinite[j] {
                return ext::INF;
            }
            if runs < 2 {
                return 0.0;
            }
            let mean = sums[j] / n;
            let var = ((sq_sums[j] - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();

    McEstimate {
        values,
        stderrs,
        runs,
        truncated_runs: truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{aggregate_value_iteration, default_sweep_budget, greedy_strategy, positive_cost_set, VI_TOL};
    use crate::fixtures;
    use crate::lp::{solve_occupation_lp, LpOutcome};
    use crate::mdp::build_mdp;
    use crate::simplex::SimplexOptions;
    use crate::strategy::{disintegrate, StationaryStrategy};

    fn optimal_strategy(p: Problem) -> (Problem, FiniteMdp, StationaryStrategy) {
        let mdp = build_mdp(&p).unwrap();
        let w = aggregate_value_iteration(&mdp, VI_TOL, default_sweep_budget(&mdp));
        let vset = positive_cost_set(&w, 1e-9);
        let greedy = greedy_strategy(&mdp, &w, &vset).unwrap();
        let weights = match solve_occupation_lp(&mdp, &vset, SimplexOptions::default()).unwrap() {
            LpOutcome::Optimal { weights, .. } => weights,
            other => panic!("expected optimum, got {other:?}"),
        };
        let sigma = disintegrate(&mdp, &vset, &weights, &greedy);
        (p, mdp, sigma)
    }

    #[test]
    fn deterministic_trace_jumps_then_rests() {
        let (p, mdp, sigma) = optimal_strategy(fixtures::two_state_jump());
        let trace = simulate(&p, &mdp, &sigma, 7, 0, SimulationLimits::default());
        assert_eq!(trace.termination, Termination::Absorbed);
        assert_eq!(trace.records.len(), 2);
        let r0 = &trace.records[0];
        assert_eq!((r0.from, r0.theta, r0.action, r0.to), (0, 0.0, Some(0), 1));
        assert_eq!(r0.increments, vec![2.0]);
        let r1 = &trace.records[1];
        assert_eq!((r1.from, r1.action, r1.to), (1, None, mdp.cemetery()));
        assert!(r1.theta.is_infinite());
        assert_eq!(trace.totals, vec![2.0]);
        assert!(trace.tail.is_none());
    }

    #[test]
    fn successor_consistency_holds_along_traces() {
        let (p, mdp, sigma) = optimal_strategy(fixtures::constrained_two_action());
        for run in 0..50 {
            let trace = simulate(&p, &mdp, &sigma, 11, run, SimulationLimits::default());
            let mut at = mdp.x0;
            for rec in &trace.records {
                assert_eq!(rec.from, at);
                let k = mdp.pairs.index(
                    mdp.pairs.thetas.iter().position(|t| *t == rec.theta).unwrap(),
                    rec.action.unwrap_or(0),
                );
                assert_eq!(rec.to, mdp.next[rec.from][k]);
                at = rec.to;
            }
        }
    }

    #[test]
    fn same_seed_reproduces_and_runs_differ() {
        let (p, mdp, sigma) = optimal_strategy(fixtures::constrained_two_action());
        let a = simulate(&p, &mdp, &sigma, 3, 5, SimulationLimits::default());
        let b = simulate(&p, &mdp, &sigma, 3, 5, SimulationLimits::default());
        assert_eq!(a, b);
        let totals: Vec<f64> = (0..64)
            .map(|r| simulate(&p, &mdp, &sigma, 3, r, SimulationLimits::default()).totals[0])
            .collect();
        assert!(totals.iter().any(|t| *t == 10.0) && totals.iter().any(|t| *t == 0.0));
    }

    #[test]
    fn horizon_truncates_without_a_partial_record() {
        let (p, mdp, sigma) = optimal_strategy(fixtures::two_state_jump());
        let limits = SimulationLimits {
            horizon: 5.0,
            max_impulses: 1000,
        };
        let trace = simulate(&p, &mdp, &sigma, 1, 0, limits);
        assert_eq!(trace.termination, Termination::TimeHorizon);
        // Only the initial jump is recorded; the endless wait at s1 is cut.
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.tail, Some(vec![0.0]));
        assert_eq!(trace.totals, vec![2.0]);
    }

    #[test]
    fn impulse_budget_stops_free_loops() {
        let p = fixtures::zero_cost();
        let mdp = build_mdp(&p).unwrap();
        // The zero-cost state loops on (θ=0, a) forever.
        let sigma = StationaryStrategy {
            rows: vec![vec![1.0, 0.0, 0.0]],
        };
        let limits = SimulationLimits {
            horizon: ext::INF,
            max_impulses: 5,
        };
        let trace = simulate(&p, &mdp, &sigma, 1, 0, limits);
        assert_eq!(trace.termination, Termination::ImpulseLimit);
        assert_eq!(trace.records.len(), 5);
        assert_eq!(trace.totals, vec![0.0]);
    }

    #[test]
    fn monte_carlo_concentrates_on_the_lp_value() {
        let (p, mdp, sigma) = optimal_strategy(fixtures::constrained_two_action());
        let est = monte_carlo_values(&p, &mdp, &sigma, 42, 2000, SimulationLimits::default());
        assert_eq!(est.truncated_runs, 0);
        // Objective totals are a fair coin over {10, 0}: mean 5, sd 5.
        assert!((est.values[0] - 5.0).abs() < 4.0 * est.stderrs[0] + 1e-12);
        assert!((est.stderrs[0] - 5.0 / (2000.0f64).sqrt()).abs() < 0.02);
        assert!((est.values[0] + est.values[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_estimator_has_zero_stderr() {
        let (p, mdp, sigma) = optimal_strategy(fixtures::two_state_jump());
        let est = monte_carlo_values(&p, &mdp, &sigma, 9, 16, SimulationLimits::default());
        assert_eq!(est.values, vec![2.0]);
        assert_eq!(est.stderrs, vec![0.0]);
        let single = monte_carlo_values(&p, &mdp, &sigma, 9, 1, SimulationLimits::default());
        assert_eq!(single.stderrs, vec![0.0]);
    }
}
