//! The occupation-measure linear program on the positive-cost states.
//!
//! Variables are masses `μ(x, (θ, a))` for `x` in the positive-cost set V.
//! Balance rows conserve mass along transitions that stay inside V (the
//! start state injects one unit), budget rows cap each constraint
//! criterion, and the objective is the expected criterion-0 cost. Columns
//! with infinite cost cannot carry mass in any finite-value solution and
//! are removed up front.
//!
//! An infeasible program still leaves two readings apart: no strategy at
//! all satisfies the budgets, or some strategy does but only at infinite
//! objective cost — possibly by circulating forever, which no finite mass
//! assignment represents. The tie is broken by reapplying the whole
//! reduction to the budgeted criteria alone: their own positive-cost set,
//! their own zero-objective program. That program is feasible exactly when
//! a budget-respecting strategy exists.

use std::fmt;

use crate::classify::{self, PositiveCostSet};
use crate::error::Result;
use crate::ext;
use crate::mdp::FiniteMdp;
use crate::simplex::{self, LpRow, Relation, SimplexOptions, SimplexOutcome};

/// Why a column was removed in preprocessing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DropReason {
    /// Objective cost is infinite; the column may still satisfy budgets.
    InfiniteObjective,
    /// Cost of the given constraint criterion is infinite while its budget
    /// is finite, so the column can never carry mass.
    InfiniteConstraint(usize),
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::InfiniteObjective => write!(f, "infinite objective cost"),
            DropReason::InfiniteConstraint(j) => {
                write!(f, "infinite cost on budgeted criterion {j}")
            }
        }
    }
}

/// Assembled program, ready for the simplex and for text dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationLp {
    /// Global state indices forming V, ascending.
    pub v_states: Vec<usize>,
    /// Kept columns as `(position_in_v_states, pair_index)`, in scan order.
    pub columns: Vec<(usize, usize)>,
    pub dropped: Vec<(usize, usize, DropReason)>,
    pub objective: Vec<f64>,
    /// Balance equalities first, then one `≤` row per finite budget.
    pub rows: Vec<LpRow>,
}

/// Outcome of solving the occupation program.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        /// `weights[v_position][pair]`, zero on dropped columns.
        weights: Vec<Vec<f64>>,
        value: f64,
        pivots: usize,
    },
    /// No mass assignment meets balance and budgets, even allowing columns
    /// of infinite objective cost.
    Infeasible { infeasibility: f64 },
    /// Budgets are satisfiable, but only through columns whose objective
    /// cost is infinite.
    ObjectiveInfinite,
}

/// Independent feasibility residuals of a weight matrix, recomputed from
/// the MDP tables rather than the assembled rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpResiduals {
    /// Worst absolute balance violation across V states.
    pub balance: f64,
    /// Worst budget overshoot across constraint criteria.
    pub budget: f64,
    /// Most negative weight, as a positive number.
    pub negativity: f64,
}

impl LpResiduals {
    pub fn max(&self) -> f64 {
        self.balance.max(self.budget).max(self.negativity)
    }
}

/// Builds the program. With `readmit_infinite_objective` the columns
/// dropped for infinite objective cost come back (used by the feasibility
/// probe); columns with infinite cost on a finitely-budgeted criterion stay
/// out unconditionally.
pub fn build_restricted_lp(
    mdp: &FiniteMdp,
    vset: &PositiveCostSet,
    readmit_infinite_objective: bool,
) -> OccupationLp {
    let v_states = vset.indices();
    let n_pairs = mdp.pairs.len();
    let finite_budgets: Vec<usize> = (1..mdp.n_criteria())
        .filter(|j| mdp.budgets[j - 1] < ext::INF)
        .collect();

    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    for (vp, &x) in v_states.iter().enumerate() {
        for k in 0..n_pairs {
            let constraint_hit = finite_budgets
                .iter()
                .find(|j| mdp.cost[**j][x][k] >= ext::INF);
            if let Some(j) = constraint_hit {
                dropped.push((vp, k, DropReason::InfiniteConstraint(*j)));
                continue;
            }
            if mdp.cost[0][x][k] >= ext::INF {
                if readmit_infinite_objective {
                    columns.push((vp, k));
                } else {
                    dropped.push((vp, k, DropReason::InfiniteObjective));
                }
                continue;
            }
            columns.push((vp, k));
        }
    }

    // Objective on readmitted columns is irrelevant (the probe only asks
    // for feasibility); zero keeps the row finite.
    let objective: Vec<f64> = columns
        .iter()
        .map(|&(vp, k)| {
            let c = mdp.cost[0][v_states[vp]][k];
            if c < ext::INF {
                c
            } else {
                0.0
            }
        })
        .collect();

    let mut rows = Vec::new();
    for (row_vp, &row_state) in v_states.iter().enumerate() {
        let coeffs = columns
            .iter()
            .map(|&(vp, k)| {
                let own = (vp == row_vp) as i32 as f64;
                let inflow = (mdp.next[v_states[vp]][k] == row_state) as i32 as f64;
                own - inflow
            })
            .collect();
        rows.push(LpRow {
            coeffs,
            rel: Relation::Eq,
            rhs: if row_state == mdp.x0 { 1.0 } else { 0.0 },
        });
    }
    for &j in &finite_budgets {
        let coeffs = columns
            .iter()
            .map(|&(vp, k)| {
                let c = mdp.cost[j][v_states[vp]][k];
                if c < ext::INF {
                    c
                } else {
                    0.0
                }
            })
            .collect();
        rows.push(LpRow {
            coeffs,
            rel: Relation::Le,
            rhs: mdp.budgets[j - 1],
        });
    }

    OccupationLp {
        v_states,
        columns,
        dropped,
        objective,
        rows,
    }
}

/// Decides whether any strategy satisfies the budgets, by solving the
/// zero-objective program of the budgeted criteria on their own
/// positive-cost set. Strategies that circulate forever at zero budgeted
/// cost fall outside that set and are covered by the start-state shortcut.
fn budgets_satisfiable(mdp: &FiniteMdp, tol_v: f64, opts: SimplexOptions) -> Result<bool> {
    let weights: Vec<f64> = (0..mdp.n_criteria())
        .map(|j| {
            if j >= 1 && mdp.budgets[j - 1] < ext::INF {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if weights.iter().all(|w| *w == 0.0) {
        return Ok(true);
    }

    let wc = classify::weighted_value_iteration(
        mdp,
        &weights,
        classify::VI_TOL,
        classify::default_sweep_budget(mdp),
    );
    let vc = classify::positive_cost_set(&wc, tol_v);
    if !vc.contains(mdp.x0) {
        return Ok(true);
    }

    let probe = build_restricted_lp(mdp, &vc, true);
    let zeros = vec![0.0; probe.objective.len()];
    match simplex::solve(&zeros, &probe.rows, opts)? {
        SimplexOutcome::Optimal { .. } => Ok(true),
        SimplexOutcome::Infeasible { .. } => Ok(false),
    }
}

/// Solves the occupation program. An infeasible program downgrades to
/// `ObjectiveInfinite` when the budgets alone are satisfiable.
pub fn solve_occupation_lp(
    mdp: &FiniteMdp,
    vset: &PositiveCostSet,
    opts: SimplexOptions,
) -> Result<LpOutcome> {
    let lp = build_restricted_lp(mdp, vset, false);
    match simplex::solve(&lp.objective, &lp.rows, opts)? {
        SimplexOutcome::Optimal { x, objective, pivots } => {
            let mut weights = vec![vec![0.0; mdp.pairs.len()]; lp.v_states.len()];
            for (col, &(vp, k)) in lp.columns.iter().enumerate() {
                weights[vp][k] = x[col];
            }
            Ok(LpOutcome::Optimal {
                weights,
                value: objective,
                pivots,
            })
        }
        SimplexOutcome::Infeasible { infeasibility } => {
            if budgets_satisfiable(mdp, vset.tol, opts)? {
                Ok(LpOutcome::ObjectiveInfinite)
            } else {
                Ok(LpOutcome::Infeasible { infeasibility })
            }
        }
    }
}

/// Recomputes feasibility residuals of a weight matrix straight from the
/// MDP tables.
pub fn residuals(mdp: &FiniteMdp, vset: &PositiveCostSet, weights: &[Vec<f64>]) -> LpResiduals {
    let v_states = vset.indices();
    let n_pairs = mdp.pairs.len();

    let mut negativity = 0.0f64;
    for row in weights {
        for &w in row {
            if w < 0.0 {
                negativity = negativity.max(-w);
            }
        }
    }

    let mut balance = 0.0f64;
    for &x in &v_states {
        let own: f64 = weights[v_states.iter().position(|s| *s == x).unwrap()]
            .iter()
            .sum();
        let mut inflow = 0.0;
        for (vp, &y) in v_states.iter().enumerate() {
            for k in 0..n_pairs {
                if mdp.next[y][k] == x {
                    inflow += weights[vp][k];
                }
            }
        }
        let rhs = if x == mdp.x0 { 1.0 } else { 0.0 };
        balance = balance.max((own - inflow - rhs).abs());
    }

    let mut budget = 0.0f64;
    for j in 1..mdp.n_criteria() {
        let d = mdp.budgets[j - 1];
        if d >= ext::INF {
            continue;
        }
        let mut spent = 0.0;
        for (vp, &x) in v_states.iter().enumerate() {
            for k in 0..n_pairs {
                spent += ext::mul(mdp.cost[j][x][k], weights[vp][k]);
            }
        }
        budget = budget.max(spent - d);
    }
    budget = budget.max(0.0);

    LpResiduals {
        balance,
        budget,
        negativity,
    }
}

/// Expected cost of every criterion under a weight matrix.
pub fn measure_costs(mdp: &FiniteMdp, vset: &PositiveCostSet, weights: &[Vec<f64>]) -> Vec<f64> {
    let v_states = vset.indices();
    (0..mdp.n_criteria())
        .map(|j| {
            let mut total = 0.0;
            for (vp, &x) in v_states.iter().enumerate() {
                for (k, &w) in weights[vp].iter().enumerate() {
                    total += ext::mul(mdp.cost[j][x][k], w);
                }
            }
            total
        })
        .collect()
}

/// Human-readable text form of the assembled program.
pub fn render_lp(mdp: &FiniteMdp, lp: &OccupationLp) -> String {
    let col_name = |vp: usize, k: usize| {
        format!(
            "mu[{}, ({}, {})]",
            mdp.state_name(lp.v_states[vp]),
            ext::display(mdp.pairs.theta(k)),
            mdp.pairs.action_name(k)
        )
    };
    let mut out = String::new();
    out.push_str("minimize\n");
    let terms: Vec<String> = lp
        .columns
        .iter()
        .enumerate()
        .map(|(c, &(vp, k))| format!("{}*{}", lp.objective[c], col_name(vp, k)))
        .collect();
    out.push_str("  ");
    let objective_line = if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    };
    out.push_str(&objective_line);
    out.push_str("\nsubject to\n");
    let n_balance = lp.v_states.len();
    for (r, row) in lp.rows.iter().enumerate() {
        let label = if r < n_balance {
            format!("balance[{}]", mdp.state_name(lp.v_states[r]))
        } else {
            format!("budget[{}]", r - n_balance + 1)
        };
        let body: Vec<String> = row
            .coeffs
            .iter()
            .zip(&lp.columns)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, &(vp, k))| format!("{}*{}", c, col_name(vp, k)))
            .collect();
        let rel = match row.rel {
            Relation::Eq => "=",
            Relation::Le => "<=",
        };
        out.push_str(&format!(
            "  {label}: {} {rel} {}\n",
            if body.is_empty() { "0".to_string() } else { body.join(" + ") },
            row.rhs
        ));
    }
    if !lp.dropped.is_empty() {
        out.push_str("dropped columns\n");
        for &(vp, k, reason) in &lp.dropped {
            out.push_str(&format!("  {}: {reason}\n", col_name(vp, k)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{aggregate_value_iteration, default_sweep_budget, positive_cost_set, VI_TOL};
    use crate::fixtures;
    use crate::mdp::build_mdp;
    use crate::problem::Problem;

    fn solve_fixture(p: &Problem) -> (FiniteMdp, PositiveCostSet, LpOutcome) {
        let m = build_mdp(p).unwrap();
        let w = aggregate_value_iteration(&m, VI_TOL, default_sweep_budget(&m));
        let v = positive_cost_set(&w, 1e-9);
        let out = solve_occupation_lp(&m, &v, SimplexOptions::default()).unwrap();
        (m, v, out)
    }

    #[test]
    fn two_state_program_puts_unit_mass_on_immediate_jump() {
        let (m, v, out) = solve_fixture(&fixtures::two_state_jump());
        match out {
            LpOutcome::Optimal { weights, value, .. } => {
                assert_eq!(value, 2.0);
                assert_eq!(weights[0][m.pairs.index(0, 0)], 1.0);
                let res = residuals(&m, &v, &weights);
                assert_eq!(res.max(), 0.0);
                assert_eq!(measure_costs(&m, &v, &weights), vec![2.0]);
            }
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn constrained_program_randomizes_between_actions() {
        let (m, v, out) = solve_fixture(&fixtures::constrained_two_action());
        match out {
            LpOutcome::Optimal { weights, value, .. } => {
                assert_eq!(value, 5.0);
                assert_eq!(weights[0][m.pairs.index(0, 0)], 0.5);
                assert_eq!(weights[0][m.pairs.index(0, 1)], 0.5);
                assert_eq!(weights[0][m.pairs.index(1, 0)], 0.0);
                assert_eq!(weights[0][m.pairs.index(1, 1)], 0.0);
                let res = residuals(&m, &v, &weights);
                assert_eq!(res.max(), 0.0);
                assert_eq!(measure_costs(&m, &v, &weights), vec![5.0, 5.0]);
            }
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn infinite_objective_columns_are_dropped_but_listed() {
        let p = fixtures::constrained_two_action();
        let m = build_mdp(&p).unwrap();
        let w = aggregate_value_iteration(&m, VI_TOL, 50);
        let v = positive_cost_set(&w, 1e-9);
        let lp = build_restricted_lp(&m, &v, false);
        assert_eq!(lp.columns.len(), 4);
        assert_eq!(lp.dropped.len(), 2);
        assert!(lp
            .dropped
            .iter()
            .all(|(_, _, r)| *r == DropReason::InfiniteObjective));
        let text = render_lp(&m, &lp);
        assert!(text.contains("minimize"));
        assert!(text.contains("balance[s0]"));
        assert!(text.contains("budget[1]"));
        assert!(text.contains("dropped columns"));
        assert!(text.contains("mu[s0, (inf, a1)]: infinite objective cost"));
    }

    #[test]
    fn decay_program_value_is_the_impulse_price() {
        let (m, _, out) = solve_fixture(&fixtures::decay_interval());
        match out {
            LpOutcome::Optimal { weights, value, .. } => {
                assert_eq!(value, 0.1);
                // All mass sits on the immediate jump at the start state.
                let vp = (0..weights.len())
                    .find(|vp| weights[*vp].iter().any(|w| *w > 0.0))
                    .unwrap();
                assert_eq!(weights[vp][m.pairs.index(0, 0)], 1.0);
            }
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn exhausted_budget_with_positive_columns_is_infeasible() {
        let (_, _, out) = solve_fixture(&fixtures::constrained_infeasible());
        match out {
            LpOutcome::Infeasible { infeasibility } => assert!(infeasibility > 0.5),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn budget_blocking_every_impulse_is_objective_infinite() {
        let (_, _, out) = solve_fixture(&fixtures::objective_infinite());
        assert_eq!(out, LpOutcome::ObjectiveInfinite);
    }

    #[test]
    fn positive_cycle_is_objective_infinite() {
        let (_, _, out) = solve_fixture(&fixtures::positive_cycle());
        assert_eq!(out, LpOutcome::ObjectiveInfinite);
    }

    #[test]
    fn empty_positive_set_solves_trivially() {
        let (_, _, out) = solve_fixture(&fixtures::zero_cost());
        match out {
            LpOutcome::Optimal { value, weights, .. } => {
                assert_eq!(value, 0.0);
                assert!(weights.is_empty());
            }
            other => panic!("expected optimum, got {other:?}"),
        }
    }
}
