//! The end-to-end solve pipeline: classify, restrict, optimize, extract,
//! certify — plus the report documents it produces.
//!
//! The machine-readable document deliberately omits wall-clock timings so
//! that identical inputs produce byte-identical bytes; the human table
//! includes them.

use std::time::Instant;

use serde_json::{json, Value};

use crate::classify::{
    aggregate_value_iteration, default_sweep_budget, greedy_strategy, positive_cost_set,
    AggregateCost, DeterministicStrategy, PositiveCostSet, VI_TOL,
};
use crate::error::Result;
use crate::ext;
use crate::lp::{self, solve_occupation_lp, LpOutcome};
use crate::mdp::{build_mdp, FiniteMdp};
use crate::problem::Problem;
use crate::simplex::SimplexOptions;
use crate::strategy::{
    disintegrate, exact_occupation, validate_optimality_certificate, Certificate,
    OccupationMeasure, StationaryStrategy,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Certificate tolerance: residuals, objective agreement, budget slack.
    pub tol: f64,
    /// Threshold defining the positive-cost set.
    pub tol_v: f64,
    /// Value-iteration sweep budget; 0 picks `10·|states|·|pairs| + 1000`.
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            tol_v: 1e-9,
            max_iter: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// No strategy satisfies the budgets.
    Infeasible,
    /// The budgets are satisfiable, but only at infinite objective cost.
    ObjectiveInfinite,
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::ObjectiveInfinite => "objective-infinite",
        }
    }
}

/// Everything the solve pipeline produced, kept around so downstream
/// commands (simulation, verification, measure aggregation) can reuse the
/// built model and extracted strategy without repeating work.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Optimal value; absent when infeasible, infinite when only
    /// infinitely expensive strategies satisfy the budgets.
    pub value: Option<f64>,
    /// Set when the start state already admits cost-free continuation and
    /// no program had to be solved.
    pub shortcut: bool,
    pub aggregate: AggregateCost,
    pub vset: PositiveCostSet,
    pub fstar: DeterministicStrategy,
    /// Optimal measure weights `[v_position][pair]`, when one exists.
    pub weights: Option<Vec<Vec<f64>>>,
    pub strategy: Option<StationaryStrategy>,
    pub occupation: Option<OccupationMeasure>,
    /// Exact cost vector `(V_0, …, V_J)` of the extracted strategy.
    pub performance: Option<Vec<f64>>,
    pub certificate: Option<Certificate>,
    pub infeasibility: Option<f64>,
    pub pivots: usize,
    pub mdp: FiniteMdp,
    /// Stage wall-clock seconds; rendered in the human table only.
    pub timings: Vec<(&'static str, f64)>,
}

fn lap(mark: &mut Instant) -> f64 {
    let dt = mark.elapsed().as_secs_f64();
    *mark = Instant::now();
    dt
}

/// Runs the full pipeline on a validated problem.
pub fn solve(problem: &Problem, opts: &SolveOptions) -> Result<SolveReport> {
    let mut timings = Vec::new();
    let mut mark = Instant::now();

    let mdp = build_mdp(problem)?;
    timings.push(("build_mdp", lap(&mut mark)));

    let sweeps = if opts.max_iter == 0 {
        default_sweep_budget(&mdp)
    } else {
        opts.max_iter
    };
    let aggregate = aggregate_value_iteration(&mdp, VI_TOL, sweeps);
    let vset = positive_cost_set(&aggregate, opts.tol_v);
    let fstar = greedy_strategy(&mdp, &aggregate, &vset)?;
    timings.push(("classify", lap(&mut mark)));

    let shortcut = !vset.contains(mdp.x0);
    let (status, value, weights, pivots, infeasibility) = if shortcut {
        // Cost-free continuation exists from the start state, so the zero
        // measure is optimal and trivially inside every budget.
        let zero = vec![vec![0.0; mdp.pairs.len()]; vset.count()];
        (SolveStatus::Optimal, Some(0.0), Some(zero), 0, None)
    } else {
        match solve_occupation_lp(&mdp, &vset, SimplexOptions::default())? {
            LpOutcome::Optimal {
                weights,
                value,
                pivots,
            } => (
                SolveStatus::Optimal,
                Some(value),
                Some(weights),
                pivots,
                None,
            ),
            LpOutcome::Infeasible { infeasibility } => {
                (SolveStatus::Infeasible, None, None, 0, Some(infeasibility))
            }
            LpOutcome::ObjectiveInfinite => {
                (SolveStatus::ObjectiveInfinite, Some(ext::INF), None, 0, None)
            }
        }
    };
    timings.push(("lp", lap(&mut mark)));

    let mut strategy = None;
    let mut occupation = None;
    let mut performance = None;
    let mut certificate = None;
    if let (Some(w), Some(v)) = (&weights, value) {
        let sigma = disintegrate(&mdp, &vset, w, &fstar);
        let occ = exact_occupation(&mdp, &vset, &sigma)?;
        performance = match &occ {
            OccupationMeasure::Finite { weights: ow, .. } => {
                Some(lp::measure_costs(&mdp, &vset, ow))
            }
            OccupationMeasure::Infinite => None,
        };
        certificate = Some(validate_optimality_certificate(&mdp, &vset, w, v, opts.tol));
        strategy = Some(sigma);
        occupation = Some(occ);
    }
    timings.push(("extract", lap(&mut mark)));

    Ok(SolveReport {
        status,
        value,
        shortcut,
        aggregate,
        vset,
        fstar,
        weights,
        strategy,
        occupation,
        performance,
        certificate,
        infeasibility,
        pivots,
        mdp,
        timings,
    })
}

/// Spells a pair index the way reports do: `(θ, action)` with `θ = ∞`
/// written `inf`.
pub fn pair_name(mdp: &FiniteMdp, k: usize) -> String {
    format!(
        "({}, {})",
        ext::display(mdp.pairs.theta(k)),
        mdp.pairs.action_name(k)
    )
}

/// Formats with 12 significant digits, the report-wide convention.
pub fn sig12(x: f64) -> String {
    if x.is_infinite() {
        return "inf".to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let scale = x.abs().log10().floor() as i32;
    let digits = (11 - scale).max(0) as usize;
    format!("{x:.digits$}")
}

/// The machine-readable solve document. Key order is alphabetical (the
/// JSON map is a sorted map), floats render shortest-roundtrip, and no
/// wall-clock data enters — identical inputs give identical bytes.
pub fn solve_document(report: &SolveReport) -> Value {
    let mdp = &report.mdp;

    let mut strategy_rows = serde_json::Map::new();
    if let Some(strategy) = &report.strategy {
        for (x, row) in strategy.rows.iter().enumerate() {
            let mut choices = serde_json::Map::new();
            for (k, p) in row.iter().enumerate() {
                if *p > 0.0 {
                    choices.insert(pair_name(mdp, k), json!(p));
                }
            }
            strategy_rows.insert(mdp.state_name(x).to_string(), Value::Object(choices));
        }
    }

    let mut fstar = serde_json::Map::new();
    for (x, &k) in report.fstar.choice.iter().enumerate() {
        fstar.insert(mdp.state_name(x).to_string(), json!(pair_name(mdp, k)));
    }

    let v_members: Vec<Value> = report
        .vset
        .indices()
        .iter()
        .map(|&x| json!(mdp.state_name(x)))
        .collect();

    let occupation = match &report.occupation {
        Some(OccupationMeasure::Finite { masses, .. }) => {
            let mut per_state = serde_json::Map::new();
            for (vp, &x) in report.vset.indices().iter().enumerate() {
                per_state.insert(mdp.state_name(x).to_string(), json!(masses[vp]));
            }
            json!({"kind": "finite", "masses": per_state})
        }
        Some(OccupationMeasure::Infinite) => json!({"kind": "infinite"}),
        None => Value::Null,
    };

    let certificate = report.certificate.as_ref().map(|c| {
        json!({
            "ok": c.ok,
            "failures": c.failures,
            "tol": c.tol,
            "residuals": {
                "balance": c.residuals.balance,
                "budget": c.residuals.budget,
                "negativity": c.residuals.negativity,
            },
        })
    });

    let slacks: Option<Vec<Value>> = report.performance.as_ref().map(|perf| {
        mdp.budgets
            .iter()
            .enumerate()
            .map(|(j, d)| ext::to_json(d - perf[j + 1]))
            .collect()
    });

    json!({
        "status": report.status.label(),
        "value": report.value.map(ext::to_json),
        "shortcut": report.shortcut,
        "value_iteration": {
            "iterations": report.aggregate.iterations,
            "residual": report.aggregate.residual,
            "converged": report.aggregate.converged,
        },
        "positive_set": {
            "size": report.vset.count(),
            "tol": report.vset.tol,
            "members": v_members,
        },
        "projection": {
            "cell": mdp.projection.cell,
            "max_displacement": mdp.projection.max_displacement,
            "x0_displacement": mdp.projection.x0_displacement,
        },
        "truncated_costs": mdp.truncated_costs,
        "pivots": report.pivots,
        "infeasibility": report.infeasibility,
        "strategy": if report.strategy.is_some() { Value::Object(strategy_rows) } else { Value::Null },
        "continuation": Value::Object(fstar),
        "performance": report.performance.as_ref().map(|p| {
            p.iter().map(|v| ext::to_json(*v)).collect::<Vec<_>>()
        }),
        "budgets": mdp.budgets.iter().map(|d| ext::to_json(*d)).collect::<Vec<_>>(),
        "slacks": slacks,
        "occupation": occupation,
        "certificate": certificate,
    })
}

/// The human-readable solve table.
pub fn render_solve_report(report: &SolveReport) -> String {
    let mdp = &report.mdp;
    let mut out = String::new();
    let mut line = |label: &str, text: String| {
        out.push_str(&format!("{label:<18} {text}\n"));
    };

    line("status", report.status.label().to_string());
    match report.value {
        Some(v) => line("value", sig12(v)),
        None => line("value", "-".to_string()),
    }
    if report.shortcut {
        line(
            "shortcut",
            "start state admits cost-free continuation; nothing to optimize".to_string(),
        );
    }
    if let Some(inf) = report.infeasibility {
        line("infeasibility", sig12(inf));
    }
    line(
        "positive set",
        format!(
            "{} of {} states (tol {})",
            report.vset.count(),
            mdp.n_states(),
            report.vset.tol
        ),
    );
    line(
        "value iteration",
        format!(
            "{} sweeps, residual {}{}",
            report.aggregate.iterations,
            sig12(report.aggregate.residual),
            if report.aggregate.converged {
                ""
            } else {
                " (not converged)"
            }
        ),
    );
    line("simplex pivots", report.pivots.to_string());

    if let Some(strategy) = &report.strategy {
        for (x, row) in strategy.rows.iter().enumerate() {
            let picks: Vec<String> = row
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(k, p)| format!("{}: {}", pair_name(mdp, k), sig12(*p)))
                .collect();
            if row.iter().filter(|p| **p > 0.0).count() > 1 || report.vset.contains(x) {
                line(
                    &format!("strategy {}", mdp.state_name(x)),
                    picks.join(", "),
                );
            }
        }
    }
    if let Some(perf) = &report.performance {
        for (j, v) in perf.iter().enumerate() {
            let budget = if j == 0 {
                String::new()
            } else {
                let d = mdp.budgets[j - 1];
                format!(" (budget {}, slack {})", ext::display(d), sig12(d - v))
            };
            line(&format!("V_{j}"), format!("{}{budget}", sig12(*v)));
        }
    }
    if let Some(cert) = &report.certificate {
        if cert.ok {
            line("certificate", "certified".to_string());
        } else {
            line("certificate", format!("FAILED: {}", cert.failures.join("; ")));
        }
        line(
            "residuals",
            format!(
                "balance {}, budget {}, negativity {}",
                sig12(cert.residuals.balance),
                sig12(cert.residuals.budget),
                sig12(cert.residuals.negativity)
            ),
        );
    }
    if mdp.projection.cell > 0.0 {
        line(
            "projection",
            format!(
                "cell {}, max displacement {}, x0 displacement {}",
                sig12(mdp.projection.cell),
                sig12(mdp.projection.max_displacement),
                sig12(mdp.projection.x0_displacement)
            ),
        );
    }
    if mdp.truncated_costs {
        line(
            "warning",
            "some θ = ∞ cost integrals were truncated at the quadrature horizon".to_string(),
        );
    }
    let stages: Vec<String> = report
        .timings
        .iter()
        .map(|(name, secs)| format!("{name} {secs:.3}s"))
        .collect();
    line("timings", stages.join(", "));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn constrained_pipeline_end_to_end() {
        let report = solve(&fixtures::constrained_two_action(), &SolveOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.value, Some(5.0));
        assert!(!report.shortcut);
        let cert = report.certificate.as_ref().unwrap();
        assert!(cert.ok, "{:?}", cert.failures);
        let perf = report.performance.as_ref().unwrap();
        assert!((perf[0] - 5.0).abs() <= 1e-9);
        assert!(perf[1] <= 5.0 + 1e-9);

        let strategy = report.strategy.as_ref().unwrap();
        let row = &strategy.rows[0];
        assert!((row[0] - 0.5).abs() <= 1e-9, "row {row:?}");
        assert!((row[1] - 0.5).abs() <= 1e-9, "row {row:?}");
    }

    #[test]
    fn zero_cost_start_takes_the_shortcut() {
        let report = solve(&fixtures::zero_cost(), &SolveOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.value, Some(0.0));
        assert!(report.shortcut);
        assert!(report.certificate.as_ref().unwrap().ok);
        assert_eq!(report.performance.as_ref().unwrap(), &vec![0.0]);
    }

    #[test]
    fn infeasible_instance_reports_status() {
        let report = solve(&fixtures::constrained_infeasible(), &SolveOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Infeasible);
        assert_eq!(report.value, None);
        assert!(report.infeasibility.unwrap() > 0.0);
        assert!(report.strategy.is_none());
    }

    #[test]
    fn objective_infinite_instance_reports_status() {
        let report = solve(&fixtures::objective_infinite(), &SolveOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::ObjectiveInfinite);
        assert_eq!(report.value, Some(ext::INF));
    }

    #[test]
    fn documents_are_deterministic() {
        let a = solve(&fixtures::constrained_two_action(), &SolveOptions::default()).unwrap();
        let b = solve(&fixtures::constrained_two_action(), &SolveOptions::default()).unwrap();
        let da = serde_json::to_string_pretty(&solve_document(&a)).unwrap();
        let db = serde_json::to_string_pretty(&solve_document(&b)).unwrap();
        assert_eq!(da, db);
        assert!(da.contains("\"status\": \"optimal\""));
        assert!(!da.contains("timing"), "machine document must omit timings");
    }

    #[test]
    fn document_spells_infinity_as_token() {
        let report = solve(&fixtures::two_state_jump(), &SolveOptions::default()).unwrap();
        let doc = solve_document(&report);
        assert_eq!(doc["status"], "optimal");
        assert_eq!(doc["value"], json!(2.0));
        assert_eq!(doc["continuation"]["s1"], json!("(inf, a)"));
    }

    #[test]
    fn interval_instance_solves_to_the_impulse_cost() {
        let report = solve(&fixtures::decay_interval(), &SolveOptions::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        let v = report.value.unwrap();
        assert!((v - 0.1).abs() <= 1e-3, "value {v}");
        assert!(report.certificate.as_ref().unwrap().ok);
        // The optimal move is an immediate jump to the origin.
        let strategy = report.strategy.as_ref().unwrap();
        let row = &strategy.rows[report.mdp.x0];
        assert_eq!(row[0], 1.0, "row {row:?}");
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(5.0), "5.00000000000");
        assert_eq!(sig12(0.1), "0.100000000000");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(ext::INF), "inf");
        assert_eq!(sig12(123456.0), "123456.000000");
    }
}
