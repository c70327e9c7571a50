//! Independent cross-checks for the optimizer.
//!
//! Three oracles that share no code with the simplex path: brute-force
//! enumeration of deterministic maps (each evaluated by walking its orbit),
//! Lagrangian lower bounds from scalarized value iteration, and an upper
//! bound from two-point mixtures of enumerated maps. `crosscheck` confronts
//! the program's outcome with all of them and reports any contradiction.

use std::collections::HashSet;

use crate::classify::{weighted_value_iteration, VI_TOL};
use crate::error::{Error, Result};
use crate::ext;
use crate::lp::LpOutcome;
use crate::mdp::FiniteMdp;

/// Slack applied when testing a cost total against its budget, absorbing
/// integration round-off in the cost tables.
const BUDGET_SLACK: f64 = 1e-9;

/// At most this many distinct finite performance vectors enter the
/// pairwise mixture search; beyond it the search keeps the cheapest and the
/// least constrained halves, which can only loosen the bound.
const MIXTURE_CAP: usize = 600;

/// Result of evaluating every deterministic map from the start state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationReport {
    pub evaluated: u64,
    /// Maps whose constraint totals fit inside every finite budget.
    pub feasible_count: u64,
    /// Smallest objective total among feasible maps; infinite when the only
    /// feasible maps cost infinitely much, meaningless when none exist.
    pub best_value: f64,
    /// Lexicographically first map attaining `best_value`.
    pub best_map: Option<Vec<usize>>,
    /// Distinct cost totals `(objective, constraints...)` across all maps.
    pub performances: Vec<Vec<f64>>,
}

impl EnumerationReport {
    pub fn feasible_exists(&self) -> bool {
        self.feasible_count > 0
    }
}

/// Cost totals of one deterministic map, by walking its orbit from the
/// start state until the cemetery or a revisit. A revisit closes a cycle;
/// any criterion paying a positive amount per lap totals to infinity.
fn evaluate_map(mdp: &FiniteMdp, map: &[usize]) -> Vec<f64> {
    let n_criteria = mdp.n_criteria();
    let mut totals = vec![0.0f64; n_criteria];
    let mut first_visit = vec![usize::MAX; mdp.n_states()];
    let mut path: Vec<usize> = Vec::new();

    let mut x = mdp.x0;
    loop {
        if mdp.is_cemetery(x) {
            break;
        }
        if first_visit[x] != usize::MAX {
            for j in 0..n_criteria {
                let lap: f64 = path[first_visit[x]..]
                    .iter()
                    .map(|&z| mdp.cost[j][z][map[z]])
                    .sum();
                if lap > 0.0 {
                    totals[j] = ext::INF;
                }
            }
            break;
        }
        first_visit[x] = path.len();
        path.push(x);
        let k = map[x];
        for j in 0..n_criteria {
            totals[j] += mdp.cost[j][x][k];
        }
        x = mdp.next[x][k];
    }

    totals
}

fn within_budgets(perf: &[f64], budgets: &[f64]) -> bool {
    budgets
        .iter()
        .enumerate()
        .all(|(j, d)| perf[j + 1] <= d + BUDGET_SLACK)
}

/// Walks every deterministic map. Errs with a guard when the map count
/// exceeds `cap`.
pub fn enumerate_deterministic(mdp: &FiniteMdp, cap: u64) -> Result<EnumerationReport> {
    let n = mdp.n_states();
    let n_pairs = mdp.pairs.len();

    let mut total: u128 = 1;
    for _ in 0..n {
        total = total.saturating_mul(n_pairs as u128);
        if total > cap as u128 {
            return Err(Error::Guard(format!(
                "{n_pairs}^{n} deterministic maps exceed the enumeration cap of {cap}"
            )));
        }
    }

    let mut report = EnumerationReport {
        evaluated: 0,
        feasible_count: 0,
        best_value: ext::INF,
        best_map: None,
        performances: Vec::new(),
    };
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut map = vec![0usize; n];

    loop {
        let perf = evaluate_map(mdp, &map);
        report.evaluated += 1;

        if within_budgets(&perf, &mdp.budgets) {
            report.feasible_count += 1;
            if perf[0] < report.best_value || report.best_map.is_none() {
                report.best_value = perf[0];
                report.best_map = Some(map.clone());
            }
        }
        if seen.insert(perf.iter().map(|v| v.to_bits()).collect()) {
            report.performances.push(perf);
        }

        let mut i = 0;
        loop {
            if i == n {
                return Ok(report);
            }
            map[i] += 1;
            if map[i] < n_pairs {
                break;
            }
            map[i] = 0;
            i += 1;
        }
    }
}

/// Lower bounds from scalarized value iteration over a grid of multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianScan {
    /// Largest bound found; a certified floor under every feasible value.
    pub best_bound: f64,
    pub best_lambda: Vec<f64>,
    pub evaluated: usize,
}

fn multiplier_ladder(exponents: &[i32]) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(exponents.iter().map(|k| 2.0f64.powi(*k)))
        .collect()
}

/// Multiplier grid: a geometric ladder per finitely-budgeted constraint,
/// thinned until the full product stays within 1000 points; constraints
/// with an infinite budget are never dualized and keep multiplier zero.
pub fn default_lambda_grid(budgets: &[f64]) -> Vec<Vec<f64>> {
    let dims: Vec<usize> = (0..budgets.len())
        .filter(|j| budgets[*j] < ext::INF)
        .collect();
    if dims.is_empty() {
        return vec![vec![0.0; budgets.len()]];
    }

    let ladders = [
        multiplier_ladder(&[-6, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6]),
        multiplier_ladder(&[-4, -2, -1, 0, 1, 2, 4]),
        multiplier_ladder(&[-2, 0, 2]),
        multiplier_ladder(&[0]),
    ];
    let ladder = ladders
        .iter()
        .find(|l| (l.len() as u128).saturating_pow(dims.len() as u32) <= 1000)
        .unwrap_or(&ladders[3]);

    let mut grid = Vec::new();
    let mut odometer = vec![0usize; dims.len()];
    'outer: loop {
        let mut lambda = vec![0.0; budgets.len()];
        for (pos, &j) in dims.iter().enumerate() {
            lambda[j] = ladder[odometer[pos]];
        }
        grid.push(lambda);

        let mut i = 0;
        loop {
            if i == dims.len() {
                break 'outer;
            }
            odometer[i] += 1;
            if odometer[i] < ladder.len() {
                break;
            }
            odometer[i] = 0;
            i += 1;
        }
    }
    grid
}

/// For each multiplier vector λ ≥ 0, the scalarized optimum minus the
/// weighted budgets bounds every feasible value from below; the scan keeps
/// the best such bound.
pub fn lagrangian_scan(mdp: &FiniteMdp, grid: &[Vec<f64>], max_iter: usize) -> LagrangianScan {
    let mut best_bound = -ext::INF;
    let mut best_lambda = Vec::new();
    let mut evaluated = 0;

    for lambda in grid {
        let mut weights = Vec::with_capacity(mdp.n_criteria());
        weights.push(1.0);
        weights.extend_from_slice(lambda);
        let w = weighted_value_iteration(mdp, &weights, VI_TOL, max_iter);
        evaluated += 1;

        let v0 = w.at(mdp, mdp.x0);
        let bound = if v0 == ext::INF {
            ext::INF
        } else {
            let penalty: f64 = lambda
                .iter()
                .zip(&mdp.budgets)
                .map(|(l, d)| ext::mul(*l, *d))
                .sum();
            v0 - penalty
        };
        if bound > best_bound {
            best_bound = bound;
            best_lambda = lambda.clone();
        }
    }

    LagrangianScan {
        best_bound,
        best_lambda,
        evaluated,
    }
}

/// Cheapest objective over single maps and two-point mixtures of maps that
/// satisfy the budgets; infinite when nothing qualifies. For at most one
/// finite budget this search is exhaustive over mixed strategies.
pub fn mixture_upper_bound(performances: &[Vec<f64>], budgets: &[f64]) -> f64 {
    let mut ub = ext::INF;
    for perf in performances {
        if within_budgets(perf, budgets) && perf[0] < ub {
            ub = perf[0];
        }
    }

    let finite_dims: Vec<usize> = (0..budgets.len())
        .filter(|j| budgets[*j] < ext::INF)
        .collect();
    let mut mixable: Vec<&Vec<f64>> = performances
        .iter()
        .filter(|p| p[0] < ext::INF && finite_dims.iter().all(|j| p[j + 1] < ext::INF))
        .collect();
    if mixable.len() > MIXTURE_CAP {
        let mut by_objective = mixable.clone();
        by_objective.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let excess = |p: &Vec<f64>| -> f64 {
            finite_dims
                .iter()
                .map(|j| (p[j + 1] - budgets[*j]).max(0.0))
                .sum()
        };
        let mut by_excess = mixable.clone();
        by_excess.sort_by(|a, b| excess(a).total_cmp(&excess(b)));

        let mut kept: Vec<&Vec<f64>> = Vec::new();
        let mut taken: HashSet<usize> = HashSet::new();
        for p in by_objective
            .iter()
            .take(MIXTURE_CAP / 2)
            .chain(by_excess.iter().take(MIXTURE_CAP / 2))
        {
            let key = *p as *const Vec<f64> as usize;
            if taken.insert(key) {
                kept.push(p);
            }
        }
        mixable = kept;
    }

    // Feasible mixing weights α on the first map form an interval; the
    // objective is linear in α, so its minimum sits at an endpoint.
    for (i, u) in mixable.iter().enumerate() {
        for v in &mixable[i + 1..] {
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            let mut empty = false;
            for &j in &finite_dims {
                let du = u[j + 1] - v[j + 1];
                let rhs = budgets[j] - v[j + 1];
                if du == 0.0 {
                    if v[j + 1] > budgets[j] + BUDGET_SLACK {
                        empty = true;
                        break;
                    }
                } else if du > 0.0 {
                    hi = hi.min(rhs / du);
                } else {
                    lo = lo.max(rhs / du);
                }
            }
            if empty || lo > hi {
                continue;
            }
            for alpha in [lo, hi] {
                let obj = alpha * u[0] + (1.0 - alpha) * v[0];
                if obj < ub {
                    ub = obj;
                }
            }
        }
    }

    ub
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosscheckOptions {
    /// Enumeration is skipped (with a note) above this many maps.
    pub enum_cap: u64,
    /// Value-iteration sweep budget; 0 picks the default for the model.
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for CrosscheckOptions {
    fn default() -> Self {
        CrosscheckOptions {
            enum_cap: 10_000_000,
            max_iter: 0,
            tol: 1e-6,
        }
    }
}

/// Outcome of confronting the program's answer with the oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckReport {
    pub enumeration: Option<EnumerationReport>,
    pub enumeration_skipped: Option<String>,
    pub lagrangian: LagrangianScan,
    pub lower_bound: f64,
    /// Best feasible mixture objective; infinite when none was found.
    pub upper_bound: f64,
    /// Program value under scrutiny: the optimum, infinity when only
    /// infinitely-expensive strategies are feasible, absent when infeasible.
    pub lp_value: Option<f64>,
    /// Contradictions; empty means the answer survived every oracle.
    pub failures: Vec<String>,
    /// Informational remarks that do not affect the verdict.
    pub notes: Vec<String>,
    pub consistent: bool,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol
}

/// Checks a program outcome against enumeration, Lagrangian bounds and
/// mixture bounds. Never overturns the answer; it only reports whether any
/// oracle contradicts it.
pub fn crosscheck(
    mdp: &FiniteMdp,
    outcome: &LpOutcome,
    opts: CrosscheckOptions,
) -> CrosscheckReport {
    let max_iter = if opts.max_iter == 0 {
        crate::classify::default_sweep_budget(mdp)
    } else {
        opts.max_iter
    };
    let tol = opts.tol;
    let n_finite_budgets = mdp.budgets.iter().filter(|d| **d < ext::INF).count();

    let (enumeration, enumeration_skipped) = match enumerate_deterministic(mdp, opts.enum_cap) {
        Ok(report) => (Some(report), None),
        Err(err) => (None, Some(err.to_string())),
    };
    let lagrangian = lagrangian_scan(mdp, &default_lambda_grid(&mdp.budgets), max_iter);
    let lower_bound = lagrangian.best_bound;
    let upper_bound = enumeration
        .as_ref()
        .map(|e| mixture_upper_bound(&e.performances, &mdp.budgets))
        .unwrap_or(ext::INF);

    let lp_value = match outcome {
        LpOutcome::Optimal { value, .. } => Some(*value),
        LpOutcome::ObjectiveInfinite => Some(ext::INF),
        LpOutcome::Infeasible { .. } => None,
    };

    let mut failures = Vec::new();
    let mut notes = Vec::new();

    match lp_value {
        None => {
            if let Some(e) = &enumeration {
                if e.feasible_exists() {
                    failures.push(format!(
                        "program reports infeasible, yet {} deterministic maps satisfy the budgets",
                        e.feasible_count
                    ));
                }
                if upper_bound < ext::INF {
                    failures.push(format!(
                        "program reports infeasible, yet a feasible mixture achieves {}",
                        ext::display(upper_bound)
                    ));
                }
            } else {
                notes.push("infeasibility not independently confirmed: enumeration skipped".into());
            }
        }
        Some(v) => {
            if v + tol < lower_bound {
                failures.push(format!(
                    "value {} sits below the Lagrangian lower bound {}",
                    ext::display(v),
                    ext::display(lower_bound)
                ));
            }
            if let Some(e) = &enumeration {
                if v == ext::INF {
                    if upper_bound < ext::INF {
                        failures.push(format!(
                            "program reports an infinite optimum, yet a feasible mixture achieves \
                             {}",
                            ext::display(upper_bound)
                        ));
                    } else if !e.feasible_exists() {
                        if n_finite_budgets <= 1 {
                            failures.push(
                                "program reports an infinite optimum, yet no feasible map or \
                                 mixture exists"
                                    .into(),
                            );
                        } else {
                            notes.push(format!(
                                "infinite optimum not confirmed feasible; the pairwise search is \
                                 not exhaustive with {n_finite_budgets} budgeted constraints"
                            ));
                        }
                    }
                } else if upper_bound < ext::INF {
                    if v > upper_bound + tol {
                        failures.push(format!(
                            "value {} exceeds the mixture upper bound {}",
                            ext::display(v),
                            ext::display(upper_bound)
                        ));
                    }
                } else if n_finite_budgets <= 1 {
                    failures.push(format!(
                        "finite value {} but no feasible map or two-point mixture exists, which \
                         is exhaustive with {} budgeted constraints",
                        ext::display(v),
                        n_finite_budgets
                    ));
                } else {
                    notes.push(format!(
                        "no feasible two-point mixture found; the pairwise search is not \
                         exhaustive with {n_finite_budgets} budgeted constraints"
                    ));
                }
                if n_finite_budgets == 0 && !close(v, e.best_value, tol) {
                    failures.push(format!(
                        "unconstrained value {} differs from the enumerated optimum {}",
                        ext::display(v),
                        ext::display(e.best_value)
                    ));
                }
            } else if n_finite_budgets == 0 {
                if !close(v, lower_bound, tol) {
                    failures.push(format!(
                        "unconstrained value {} differs from the value-iteration optimum {}",
                        ext::display(v),
                        ext::display(lower_bound)
                    ));
                }
            } else {
                notes.push("upper bound unavailable: enumeration skipped".into());
            }
        }
    }

    let consistent = failures.is_empty();
    CrosscheckReport {
        enumeration,
        enumeration_skipped,
        lagrangian,
        lower_bound,
        upper_bound,
        lp_value,
        failures,
        notes,
        consistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{aggregate_value_iteration, default_sweep_budget, positive_cost_set, VI_TOL};
    use crate::fixtures;
    use crate::lp::solve_occupation_lp;
    use crate::mdp::build_mdp;
    use crate::simplex::SimplexOptions;

    fn solve(p: &crate::problem::Problem) -> (FiniteMdp, LpOutcome) {
        let m = build_mdp(p).unwrap();
        let w = aggregate_value_iteration(&m, VI_TOL, default_sweep_budget(&m));
        assert!(w.converged);
        let v = positive_cost_set(&w, 1e-9);
        let out = solve_occupation_lp(&m, &v, SimplexOptions::default()).unwrap();
        (m, out)
    }

    #[test]
    fn two_state_enumeration() {
        let m = build_mdp(&fixtures::two_state_jump()).unwrap();
        let e = enumerate_deterministic(&m, 1_000).unwrap();
        assert_eq!(e.evaluated, 9);
        assert_eq!(e.feasible_count, 9);
        assert_eq!(e.best_value, 2.0);
        assert_eq!(e.best_map, Some(vec![0, 2]));
    }

    #[test]
    fn two_state_crosscheck() {
        let (m, out) = solve(&fixtures::two_state_jump());
        let rep = crosscheck(&m, &out, CrosscheckOptions::default());
        assert!(rep.consistent, "failures: {:?}", rep.failures);
        assert_eq!(rep.lower_bound, 2.0);
        assert_eq!(rep.upper_bound, 2.0);
        assert_eq!(rep.lp_value, Some(2.0));
    }

    #[test]
    fn constrained_enumeration_and_bounds() {
        let m = build_mdp(&fixtures::constrained_two_action()).unwrap();
        let e = enumerate_deterministic(&m, 1_000).unwrap();
        assert_eq!(e.evaluated, 36);
        assert!(e.feasible_exists());
        assert_eq!(e.best_value, 10.0);

        let scan = lagrangian_scan(&m, &default_lambda_grid(&m.budgets), default_sweep_budget(&m));
        assert_eq!(scan.best_bound, 5.0);
        assert_eq!(scan.best_lambda, vec![1.0]);

        assert_eq!(mixture_upper_bound(&e.performances, &m.budgets), 5.0);
    }

    #[test]
    fn constrained_crosscheck_sandwich() {
        let (m, out) = solve(&fixtures::constrained_two_action());
        let rep = crosscheck(&m, &out, CrosscheckOptions::default());
        assert!(rep.consistent, "failures: {:?}", rep.failures);
        assert_eq!(rep.lp_value, Some(5.0));
        assert_eq!(rep.lower_bound, 5.0);
        assert_eq!(rep.upper_bound, 5.0);
    }

    #[test]
    fn infeasible_crosscheck() {
        let (m, out) = solve(&fixtures::constrained_infeasible());
        assert!(matches!(out, LpOutcome::Infeasible { .. }));
        let rep = crosscheck(&m, &out, CrosscheckOptions::default());
        assert!(rep.consistent, "failures: {:?}", rep.failures);
        let e = rep.enumeration.unwrap();
        assert_eq!(e.feasible_count, 0);
        assert_eq!(rep.upper_bound, ext::INF);
    }

    #[test]
    fn objective_infinite_crosscheck() {
        let (m, out) = solve(&fixtures::objective_infinite());
        assert_eq!(out, LpOutcome::ObjectiveInfinite);
        let rep = crosscheck(&m, &out, CrosscheckOptions::default());
        assert!(rep.consistent, "failures: {:?}", rep.failures);
        let e = rep.enumeration.as_ref().unwrap();
        assert!(e.feasible_exists());
        assert_eq!(e.best_value, ext::INF);
        assert_eq!(rep.upper_bound, ext::INF);
    }

    #[test]
    fn looping_crosscheck() {
        let (m, out) = solve(&fixtures::positive_cycle());
        assert_eq!(out, LpOutcome::ObjectiveInfinite);
        let rep = crosscheck(&m, &out, CrosscheckOptions::default());
        assert!(rep.consistent, "failures: {:?}", rep.failures);
        assert_eq!(rep.lower_bound, ext::INF);
    }

    #[test]
    fn free_instance_crosscheck() {
        let (m, out) = solve(&fixtures::zero_cost());
        let rep = crosscheck(&m, &out, CrosscheckOptions::default());
        assert!(rep.consistent, "failures: {:?}", rep.failures);
        assert_eq!(rep.lp_value, Some(0.0));
        assert_eq!(rep.lower_bound, 0.0);
    }

    #[test]
    fn guard_skips_enumeration_but_value_iteration_still_checks() {
        let (m, out) = solve(&fixtures::decay_interval());
        let rep = crosscheck(&m, &out, CrosscheckOptions::default());
        assert!(rep.enumeration.is_none());
        assert!(rep.enumeration_skipped.is_some());
        assert!(rep.consistent, "failures: {:?}", rep.failures);
        assert!((rep.lower_bound - 0.1).abs() <= 1e-12);
    }

    #[test]
    fn guard_error_names_the_cap() {
        let m = build_mdp(&fixtures::decay_interval()).unwrap();
        let err = enumerate_deterministic(&m, 10_000_000).unwrap_err();
        assert!(err.to_string().contains("10000000"));
    }

    #[test]
    fn mixture_interval_endpoints() {
        let perfs = vec![vec![10.0, 0.0], vec![0.0, 10.0], vec![1.0, 10.0]];
        assert_eq!(mixture_upper_bound(&perfs, &[5.0]), 5.0);
        assert_eq!(mixture_upper_bound(&perfs, &[0.0]), 10.0);
        assert_eq!(mixture_upper_bound(&perfs, &[ext::INF]), 0.0);
        assert_eq!(mixture_upper_bound(&[], &[5.0]), ext::INF);
    }

    #[test]
    fn lambda_grid_shapes() {
        assert_eq!(default_lambda_grid(&[]), vec![Vec::<f64>::new()]);
        assert_eq!(default_lambda_grid(&[5.0]).len(), 14);
        assert_eq!(default_lambda_grid(&[ext::INF]), vec![vec![0.0]]);
        let three = default_lambda_grid(&[1.0, 2.0, 3.0]);
        assert!(three.len() <= 1000);
        assert!(three.contains(&vec![0.0, 0.0, 0.0]));
        assert!(three.contains(&vec![1.0, 1.0, 1.0]));
        let mixed = default_lambda_grid(&[1.0, ext::INF]);
        assert_eq!(mixed.len(), 14);
        assert!(mixed.iter().all(|l| l[1] == 0.0));
    }

    #[test]
    fn random_instances_survive_crosscheck() {
        for seed in 0..30 {
            let p = fixtures::random_instance(seed);
            let (m, out) = solve(&p);
            let rep = crosscheck(&m, &out, CrosscheckOptions::default());
            assert!(
                rep.consistent,
                "seed {seed}: failures {:?}, notes {:?}, outcome {:?}",
                rep.failures, rep.notes, out
            );
        }
    }
}
