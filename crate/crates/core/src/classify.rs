//! Aggregate cost classification: the minimal total cost summed across all
//! criteria, the set of states where that cost is positive, and the greedy
//! zero-cost continuation strategy on the complement.
//!
//! Value iteration runs from below — `w_0 ≡ 0`, Jacobi sweeps — so each
//! iterate is a lower bound and the limit is the minimal nonnegative fixed
//! point, the one the infimum over strategies selects. States of infinite
//! value are identified up front by graph reachability and pinned at ∞;
//! without that, no finite sweep count reveals them. Convergence is exact
//! (residual 0.0) after finitely many sweeps, but a cycle that is cheaper
//! per lap than its cheapest exit is climbed one lap per sweep until it
//! prices itself out, so the sweep budget must cover cost ratios, not just
//! the state count.

use crate::error::{Error, Result};
use crate::ext;
use crate::mdp::FiniteMdp;

/// Minimal aggregate (all criteria summed) cost-to-go per state.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCost {
    /// One value in `[0, ∞]` per non-cemetery state.
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Max change during the final sweep; exactly 0.0 on convergence.
    pub residual: f64,
    pub converged: bool,
}

impl AggregateCost {
    /// Value with the cemetery folded in at 0.
    pub fn at(&self, mdp: &FiniteMdp, idx: usize) -> f64 {
        if mdp.is_cemetery(idx) {
            0.0
        } else {
            self.values[idx]
        }
    }
}

/// States whose minimal aggregate cost exceeds `tol`; the linear program is
/// posed on exactly these states.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveCostSet {
    /// Membership flag per non-cemetery state.
    pub members: Vec<bool>,
    pub tol: f64,
}

impl PositiveCostSet {
    pub fn contains(&self, idx: usize) -> bool {
        idx < self.members.len() && self.members[idx]
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.members.len()).filter(|i| self.members[*i]).collect()
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|m| **m).count()
    }
}

/// A pair choice per non-cemetery state.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicStrategy {
    pub choice: Vec<usize>,
}

/// Marks states whose minimal total cost under `arc_cost` is infinite.
///
/// A state has finite cost iff it can reach, through arcs of finite cost,
/// either the cemetery or a cycle whose arcs all cost exactly zero (walking
/// such a cycle forever adds nothing). Everything else accumulates cost
/// without bound.
fn infinite_cost_states(mdp: &FiniteMdp, arc_cost: &dyn Fn(usize, usize) -> f64) -> Vec<bool> {
    let n = mdp.n_states();
    let n_pairs = mdp.pairs.len();

    // Greatest set of states with an outgoing zero-cost arc staying inside
    // the set: the states from which an endless free walk exists.
    let mut zero_recurrent = vec![true; n];
    loop {
        let mut changed = false;
        for x in 0..n {
            if !zero_recurrent[x] {
                continue;
            }
            let keeps = (0..n_pairs).any(|k| {
                let y = mdp.next[x][k];
                arc_cost(x, k) == 0.0 && !mdp.is_cemetery(y) && zero_recurrent[y]
            });
            if !keeps {
                zero_recurrent[x] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Backward closure: finite-cost arcs into the target set.
    let mut finite = zero_recurrent;
    loop {
        let mut changed = false;
        for x in 0..n {
            if finite[x] {
                continue;
            }
            let reaches = (0..n_pairs).any(|k| {
                let y = mdp.next[x][k];
                arc_cost(x, k) < ext::INF && (mdp.is_cemetery(y) || finite[y])
            });
            if reaches {
                finite[x] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    finite.iter().map(|f| !f).collect()
}

/// Default stopping tolerance for the Bellman residual. Sweeps stabilize
/// exactly on these finite instances, so anything strictly positive works;
/// this guards only against costs of freakishly mismatched scales.
pub const VI_TOL: f64 = 1e-12;

/// Default sweep budget for a model: generous enough for desk-scale
/// instances, bounded enough to prevent hangs.
pub fn default_sweep_budget(mdp: &FiniteMdp) -> usize {
    10 * mdp.n_states() * mdp.pairs.len() + 1000
}

/// Value iteration for the minimal total cost across all criteria, from
/// below.
pub fn aggregate_value_iteration(mdp: &FiniteMdp, tol: f64, max_iter: usize) -> AggregateCost {
    value_iteration_impl(mdp, &|x, k| mdp.aggregate_cost(x, k), tol, max_iter)
}

/// Value iteration for the minimal scalarized cost `Σ_j weights[j]·cost_j`,
/// with the convention that a zero weight silences even an infinite cost.
pub fn weighted_value_iteration(
    mdp: &FiniteMdp,
    weights: &[f64],
    tol: f64,
    max_iter: usize,
) -> AggregateCost {
    assert_eq!(weights.len(), mdp.n_criteria(), "one weight per criterion");
    assert!(weights.iter().all(|w| *w >= 0.0 && !w.is_nan()));
    let arc = |x: usize, k: usize| -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(j, w)| ext::mul(*w, mdp.cost[j][x][k]))
            .sum()
    };
    value_iteration_impl(mdp, &arc, tol, max_iter)
}

fn value_iteration_impl(
    mdp: &FiniteMdp,
    arc_cost: &dyn Fn(usize, usize) -> f64,
    tol: f64,
    max_iter: usize,
) -> AggregateCost {
    assert!(tol > 0.0, "tol must be positive");
    assert!(max_iter >= 1, "max_iter must be ≥ 1");
    let n = mdp.n_states();
    let n_pairs = mdp.pairs.len();
    let infinite = infinite_cost_states(mdp, arc_cost);

    let mut w: Vec<f64> = infinite
        .iter()
        .map(|inf| if *inf { ext::INF } else { 0.0 })
        .collect();
    let mut next_w = w.clone();

    let mut iterations = 0;
    let mut residual = 0.0f64;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        residual = 0.0;
        for x in 0..n {
            if infinite[x] {
                continue;
            }
            let mut best = ext::INF;
            for k in 0..n_pairs {
                let y = mdp.next[x][k];
                let tail = if mdp.is_cemetery(y) { 0.0 } else { w[y] };
                let cand = arc_cost(x, k) + tail;
                if cand < best {
                    best = cand;
                }
            }
            let delta = ext::residual(best, w[x]);
            if delta > residual {
                residual = delta;
            }
            next_w[x] = best;
        }
        std::mem::swap(&mut w, &mut next_w);
        if residual < tol {
            converged = true;
            break;
        }
    }

    AggregateCost {
        values: w,
        iterations,
        residual,
        converged,
    }
}

/// States with aggregate cost above `tol`.
pub fn positive_cost_set(w: &AggregateCost, tol: f64) -> PositiveCostSet {
    assert!(tol >= 0.0, "tol must be nonnegative");
    PositiveCostSet {
        members: w.values.iter().map(|v| *v > tol).collect(),
        tol,
    }
}

/// Greedy strategy for the aggregate cost: at each state the pair minimizing
/// immediate aggregate cost plus cost-to-go, ties resolved to the lowest
/// pair index.
///
/// On states outside the positive set the chosen pair must itself be free
/// and must stay outside the set; both facts follow from the fixed-point
/// property, so a violation indicates a numerics bug and is reported as an
/// assertion failure rather than silently accepted.
pub fn greedy_strategy(
    mdp: &FiniteMdp,
    w: &AggregateCost,
    vset: &PositiveCostSet,
) -> Result<DeterministicStrategy> {
    let n = mdp.n_states();
    let n_pairs = mdp.pairs.len();
    let mut choice = Vec::with_capacity(n);

    for x in 0..n {
        let mut best_k = 0;
        let mut best = ext::INF;
        for k in 0..n_pairs {
            let cand = mdp.aggregate_cost(x, k) + w.at(mdp, mdp.next[x][k]);
            if cand < best {
                best = cand;
                best_k = k;
            }
        }
        if !vset.contains(x) {
            let k = best_k;
            if mdp.aggregate_cost(x, k) > vset.tol {
                return Err(Error::Assertion(format!(
                    "greedy pair at zero-cost state {} pays {} > {}",
                    mdp.state_name(x),
                    mdp.aggregate_cost(x, k),
                    vset.tol
                )));
            }
            let y = mdp.next[x][k];
            if !mdp.is_cemetery(y) && vset.contains(y) {
                return Err(Error::Assertion(format!(
                    "greedy pair at zero-cost state {} re-enters the positive set at {}",
                    mdp.state_name(x),
                    mdp.state_name(y)
                )));
            }
        }
        choice.push(best_k);
    }

    Ok(DeterministicStrategy { choice })
}
