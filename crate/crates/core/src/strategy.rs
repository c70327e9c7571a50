//! From occupation measures to strategies and back.
//!
//! An optimal measure disintegrates into a stationary randomized strategy:
//! at each positive-mass state the pair distribution is the normalized
//! measure row, and everywhere else the greedy zero-cost pair is used. The
//! reverse direction computes the exact expected visit counts of a
//! stationary strategy by solving the linear system `(I − Pᵀ)m = e_{x0}`
//! restricted to the positive-cost set, guarding first against strategies
//! that keep mass circulating inside the set forever.

use crate::classify::{DeterministicStrategy, PositiveCostSet};
use crate::error::{Error, Result};
use crate::lp::{measure_costs, residuals, LpResiduals};
use crate::mdp::FiniteMdp;

/// Randomized stationary strategy: one pair distribution per non-cemetery
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryStrategy {
    pub rows: Vec<Vec<f64>>,
}

impl StationaryStrategy {
    pub fn dirac(mdp: &FiniteMdp, f: &DeterministicStrategy) -> Self {
        let rows = f
            .choice
            .iter()
            .map(|&k| {
                let mut row = vec![0.0; mdp.pairs.len()];
                row[k] = 1.0;
                row
            })
            .collect();
        StationaryStrategy { rows }
    }

    /// Transition probability x → y inside the ordinary states.
    pub fn step_prob(&self, mdp: &FiniteMdp, x: usize, y: usize) -> f64 {
        self.rows[x]
            .iter()
            .enumerate()
            .filter(|(k, _)| mdp.next[x][*k] == y)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Expected visit-count measure of a strategy over the positive-cost set.
#[derive(Debug, Clone, PartialEq)]
pub enum OccupationMeasure {
    Finite {
        /// Visit mass per position of the set.
        masses: Vec<f64>,
        /// `weights[v_position][pair]` = mass × row probability.
        weights: Vec<Vec<f64>>,
    },
    /// The strategy traps mass inside the set; expected visits diverge.
    Infinite,
}

/// Builds the stationary strategy of an occupation-measure solution:
/// normalized measure rows where mass is positive, the greedy pair elsewhere.
pub fn disintegrate(
    mdp: &FiniteMdp,
    vset: &PositiveCostSet,
    weights: &[Vec<f64>],
    greedy: &DeterministicStrategy,
) -> StationaryStrategy {
    let v_states = vset.indices();
    let n_pairs = mdp.pairs.len();
    let mut rows = Vec::with_capacity(mdp.n_states());
    for x in 0..mdp.n_states() {
        let from_measure = v_states.iter().position(|s| *s == x).and_then(|vp| {
            let mass: f64 = weights[vp].iter().sum();
            if mass > 0.0 {
                Some(weights[vp].iter().map(|w| w / mass).collect::<Vec<f64>>())
            } else {
                None
            }
        });
        rows.push(from_measure.unwrap_or_else(|| {
            let mut row = vec![0.0; n_pairs];
            row[greedy.choice[x]] = 1.0;
            row
        }));
    }
    StationaryStrategy { rows }
}

/// True when, under the strategy's support, some state reachable from `x0`
/// inside the set cannot reach the outside at all.
fn support_traps_mass(mdp: &FiniteMdp, vset: &PositiveCostSet, strategy: &StationaryStrategy) -> bool {
    let n = mdp.n_states();
    // States that can leave the set through a support arc.
    let mut escapes = vec![false; n];
    loop {
        let mut changed = false;
        for x in 0..n {
            if escapes[x] || !vset.contains(x) {
                continue;
            }
            let can = strategy.rows[x].iter().enumerate().any(|(k, p)| {
                if *p <= 0.0 {
                    return false;
                }
                let y = mdp.next[x][k];
                mdp.is_cemetery(y) || !vset.contains(y) || escapes[y]
            });
            if can {
                escapes[x] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // Forward reachability from x0 through support arcs inside the set.
    if !vset.contains(mdp.x0) {
        return false;
    }
    let mut reach = vec![false; n];
    let mut stack = vec![mdp.x0];
    reach[mdp.x0] = true;
    while let Some(x) = stack.pop() {
        if !escapes[x] {
            return true;
        }
        for (k, p) in strategy.rows[x].iter().enumerate() {
            let y = mdp.next[x][k];
            if *p > 0.0 && !mdp.is_cemetery(y) && vset.contains(y) && !reach[y] {
                reach[y] = true;
                stack.push(y);
            }
        }
    }
    false
}

/// Set states reachable from `x0` through positive-probability arcs staying
/// inside the set. Mass never visits the rest, so divergence checks and the
/// visit-count system are confined to this subset.
fn support_reachable(mdp: &FiniteMdp, vset: &PositiveCostSet, strategy: &StationaryStrategy) -> Vec<usize> {
    let mut reach = vec![false; mdp.n_states()];
    if !vset.contains(mdp.x0) {
        return Vec::new();
    }
    reach[mdp.x0] = true;
    let mut stack = vec![mdp.x0];
    while let Some(x) = stack.pop() {
        for (k, p) in strategy.rows[x].iter().enumerate() {
            let y = mdp.next[x][k];
            if *p > 0.0 && !mdp.is_cemetery(y) && vset.contains(y) && !reach[y] {
                reach[y] = true;
                stack.push(y);
            }
        }
    }
    (0..mdp.n_states()).filter(|x| reach[*x]).collect()
}

/// Power-iteration estimate of the spectral radius of the set-internal
/// transition matrix over the states mass can actually visit.
fn spectral_radius_estimate(mdp: &FiniteMdp, vset: &PositiveCostSet, strategy: &StationaryStrategy) -> f64 {
    let states = support_reachable(mdp, vset, strategy);
    let nv = states.len();
    if nv == 0 {
        return 0.0;
    }
    let mut p = vec![vec![0.0f64; nv]; nv];
    for (i, &x) in states.iter().enumerate() {
        for (k, &prob) in strategy.rows[x].iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            let y = mdp.next[x][k];
            if let Some(j) = states.iter().position(|s| *s == y) {
                p[i][j] += prob;
            }
        }
    }
    let mut v = vec![1.0 / nv as f64; nv];
    let mut rate = 0.0;
    for _ in 0..200 {
        let mut next = vec![0.0; nv];
        for i in 0..nv {
            for j in 0..nv {
                next[j] += v[i] * p[i][j];
            }
        }
        let norm: f64 = next.iter().sum();
        if norm == 0.0 {
            return 0.0;
        }
        rate = norm / v.iter().sum::<f64>();
        v = next;
        // Renormalize so long products neither overflow nor vanish.
        let scale = 1.0 / norm;
        for x in v.iter_mut() {
            *x *= scale;
        }
    }
    rate
}

/// Solves `(I − Pᵀ)m = e_{x0}` on the reachable part of the positive-cost
/// set by Gaussian elimination with partial pivoting; unreachable set
/// states carry mass zero.
fn visit_masses(mdp: &FiniteMdp, vset: &PositiveCostSet, strategy: &StationaryStrategy) -> Result<Vec<f64>> {
    let states = support_reachable(mdp, vset, strategy);
    let nv = states.len();
    let mut a = vec![vec![0.0f64; nv + 1]; nv];
    for (i, &x) in states.iter().enumerate() {
        a[i][i] += 1.0;
        // Column j feeds row of its successor: m(y) -= Σ_x m(x) P(x, y).
        for (k, &prob) in strategy.rows[x].iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            let y = mdp.next[x][k];
            if let Some(j) = states.iter().position(|s| *s == y) {
                a[j][i] -= prob;
            }
        }
        a[i][nv] = 0.0;
    }
    if let Some(i0) = states.iter().position(|s| *s == mdp.x0) {
        a[i0][nv] = 1.0;
    }

    for col in 0..nv {
        let pivot_row = (col..nv)
            .max_by(|r1, r2| a[*r1][col].abs().total_cmp(&a[*r2][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-12 {
            return Err(Error::Assertion(format!(
                "singular visit-count system at column {col} despite a subcritical strategy"
            )));
        }
        a.swap(col, pivot_row);
        let inv = 1.0 / a[col][col];
        for r in (col + 1)..nv {
            let factor = a[r][col] * inv;
            if factor == 0.0 {
                continue;
            }
            for c in col..=nv {
                a[r][c] -= factor * a[col][c];
            }
        }
    }
    let mut m = vec![0.0; nv];
    for row in (0..nv).rev() {
        let mut acc = a[row][nv];
        for c in (row + 1)..nv {
            acc -= a[row][c] * m[c];
        }
        m[row] = acc / a[row][row];
    }
    let v_states = vset.indices();
    let mut out = vec![0.0; v_states.len()];
    for (value, &x) in m.iter().zip(&states) {
        let vp = v_states.iter().position(|s| *s == x).expect("reachable states lie in the set");
        out[vp] = *value;
    }
    Ok(out)
}

/// Exact expected visit counts of a stationary strategy on the
/// positive-cost set, or [`OccupationMeasure::Infinite`] when the strategy
/// never lets mass out.
pub fn exact_occupation(
    mdp: &FiniteMdp,
    vset: &PositiveCostSet,
    strategy: &StationaryStrategy,
) -> Result<OccupationMeasure> {
    let trapped = support_traps_mass(mdp, vset, strategy);
    let radius = spectral_radius_estimate(mdp, vset, strategy);
    let supercritical = radius >= 1.0 - 1e-10;
    debug_assert_eq!(
        trapped, supercritical,
        "graph and spectral divergence checks disagree (radius {radius})"
    );
    if trapped || supercritical {
        return Ok(OccupationMeasure::Infinite);
    }
    let masses = visit_masses(mdp, vset, strategy)?;
    if masses.iter().any(|m| *m > 1e12) {
        return Ok(OccupationMeasure::Infinite);
    }
    let v_states = vset.indices();
    let weights = masses
        .iter()
        .zip(&v_states)
        .map(|(m, &x)| strategy.rows[x].iter().map(|p| m * p).collect())
        .collect();
    Ok(OccupationMeasure::Finite { masses, weights })
}

/// Expected cost of each criterion under a strategy, through its exact
/// occupation on the positive-cost set. Outside the set the greedy
/// continuation is free, so the restriction loses nothing.
pub fn evaluate_performance(
    mdp: &FiniteMdp,
    vset: &PositiveCostSet,
    strategy: &StationaryStrategy,
) -> Result<Option<Vec<f64>>> {
    match exact_occupation(mdp, vset, strategy)? {
        OccupationMeasure::Finite { weights, .. } => Ok(Some(measure_costs(mdp, vset, &weights))),
        OccupationMeasure::Infinite => Ok(None),
    }
}

/// Componentwise comparison of performance vectors: `a` outperforms `b`
/// when it is at most `b` on every criterion.
pub fn outperforms(a: &[f64], b: &[f64]) -> bool {
    assert_eq!(a.len(), b.len(), "performance vectors must align");
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Bundle of checks certifying an occupation-measure solution: feasibility
/// residuals, agreement between the measure's expected objective and the
/// reported value, and budget compliance.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub lp_value: f64,
    pub performance: Vec<f64>,
    pub residuals: LpResiduals,
    pub tol: f64,
    pub ok: bool,
    pub failures: Vec<String>,
}

pub fn validate_optimality_certificate(
    mdp: &FiniteMdp,
    vset: &PositiveCostSet,
    weights: &[Vec<f64>],
    lp_value: f64,
    tol: f64,
) -> Certificate {
    let res = residuals(mdp, vset, weights);
    let performance = measure_costs(mdp, vset, weights);
    let mut failures = Vec::new();
    if res.max() > tol {
        failures.push(format!("feasibility residual {} exceeds {tol}", res.max()));
    }
    if (performance[0] - lp_value).abs() > tol {
        failures.push(format!(
            "objective recomputation {} differs from reported value {lp_value}",
            performance[0]
        ));
    }
    for (j, d) in mdp.budgets.iter().enumerate() {
        if performance[j + 1] > d + tol {
            failures.push(format!(
                "criterion {} spends {} over budget {d}",
                j + 1,
                performance[j + 1]
            ));
        }
    }
    Certificate {
        lp_value,
        performance,
        residuals: res,
        tol,
        ok: failures.is_empty(),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{aggregate_value_iteration, default_sweep_budget, greedy_strategy, positive_cost_set, VI_TOL};
    use crate::ext;
    use crate::fixtures;
    use crate::lp::{solve_occupation_lp, LpOutcome};
    use crate::mdp::build_mdp;
    use crate::problem::Problem;
    use crate::simplex::SimplexOptions;

    struct Solved {
        mdp: FiniteMdp,
        vset: PositiveCostSet,
        greedy: DeterministicStrategy,
        weights: Vec<Vec<f64>>,
        value: f64,
    }

    fn solve(p: &Problem) -> Solved {
        let mdp = build_mdp(p).unwrap();
        let w = aggregate_value_iteration(&mdp, VI_TOL, default_sweep_budget(&mdp));
        let vset = positive_cost_set(&w, 1e-9);
        let greedy = greedy_strategy(&mdp, &w, &vset).unwrap();
        let (weights, value) =
            match solve_occupation_lp(&mdp, &vset, SimplexOptions::default()).unwrap() {
                LpOutcome::Optimal { weights, value, .. } => (weights, value),
                other => panic!("expected optimum, got {other:?}"),
            };
        Solved {
            mdp,
            vset,
            greedy,
            weights,
            value,
        }
    }

    #[test]
    fn disintegration_normalizes_positive_rows_and_fills_greedy() {
        let s = solve(&fixtures::constrained_two_action());
        let sigma = disintegrate(&s.mdp, &s.vset, &s.weights, &s.greedy);
        assert_eq!(sigma.rows[0], vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
        // s1 is outside the set: greedy pair (∞, a1).
        let mut expected = vec![0.0; 6];
        expected[s.mdp.pairs.index(2, 0)] = 1.0;
        assert_eq!(sigma.rows[1], expected);
    }

    #[test]
    fn occupation_roundtrip_recovers_lp_weights() {
        let s = solve(&fixtures::constrained_two_action());
        let sigma = disintegrate(&s.mdp, &s.vset, &s.weights, &s.greedy);
        match exact_occupation(&s.mdp, &s.vset, &sigma).unwrap() {
            OccupationMeasure::Finite { masses, weights } => {
                assert_eq!(masses, vec![1.0]);
                assert_eq!(weights, s.weights);
            }
            OccupationMeasure::Infinite => panic!("unexpected divergence"),
        }
    }

    #[test]
    fn performance_matches_lp_value_and_budget() {
        let s = solve(&fixtures::constrained_two_action());
        let sigma = disintegrate(&s.mdp, &s.vset, &s.weights, &s.greedy);
        let perf = evaluate_performance(&s.mdp, &s.vset, &sigma).unwrap().unwrap();
        assert_eq!(perf, vec![5.0, 5.0]);
        assert_eq!(perf[0], s.value);
    }

    #[test]
    fn certificate_accepts_the_solver_output() {
        let s = solve(&fixtures::constrained_two_action());
        let cert = validate_optimality_certificate(&s.mdp, &s.vset, &s.weights, s.value, 1e-9);
        assert!(cert.ok, "failures: {:?}", cert.failures);
        assert_eq!(cert.performance, vec![5.0, 5.0]);
    }

    #[test]
    fn certificate_flags_budget_violation() {
        let s = solve(&fixtures::constrained_two_action());
        // Shift all mass to the constraint-heavy column.
        let mut bad = s.weights.clone();
        bad[0] = vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let cert = validate_optimality_certificate(&s.mdp, &s.vset, &bad, s.value, 1e-9);
        assert!(!cert.ok);
        assert!(cert.failures.iter().any(|f| f.contains("over budget")));
    }

    #[test]
    fn trapping_strategy_reports_infinite_occupation() {
        let p = fixtures::positive_cycle();
        let mdp = build_mdp(&p).unwrap();
        let w = aggregate_value_iteration(&mdp, VI_TOL, 50);
        let vset = positive_cost_set(&w, 1e-9);
        // Always impulse immediately: the single state loops on itself.
        let sigma = StationaryStrategy {
            rows: vec![vec![1.0, 0.0, 0.0]],
        };
        assert_eq!(
            exact_occupation(&mdp, &vset, &sigma).unwrap(),
            OccupationMeasure::Infinite
        );
        assert_eq!(evaluate_performance(&mdp, &vset, &sigma).unwrap(), None);
    }

    #[test]
    fn grid_instance_zero_mass_rows_use_greedy_ties() {
        let s = solve(&fixtures::decay_interval());
        let sigma = disintegrate(&s.mdp, &s.vset, &s.weights, &s.greedy);
        // At grid value 0.1 jumping and waiting tie exactly; the lower pair
        // index (jump now) wins.
        assert_eq!(sigma.rows[10][s.mdp.pairs.index(0, 0)], 1.0);
        // Below the impulse price waiting forever is strictly better.
        assert_eq!(sigma.rows[5][s.mdp.pairs.index(2, 0)], 1.0);
        // The start state carries the measure's own row.
        assert_eq!(sigma.rows[100][s.mdp.pairs.index(0, 0)], 1.0);
    }

    #[test]
    fn outperforms_is_componentwise() {
        assert!(outperforms(&[1.0, 2.0], &[1.0, 3.0]));
        assert!(outperforms(&[1.0, 2.0], &[1.0, 2.0]));
        assert!(!outperforms(&[1.0, 4.0], &[2.0, 3.0]));
        assert!(outperforms(&[1.0, 2.0], &[ext::INF, 2.0]));
    }
}
