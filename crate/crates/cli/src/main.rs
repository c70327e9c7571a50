//! Command-line driver: loads an instance document, runs the requested
//! pipeline stage and prints a table or machine-readable report.
//!
//! Exit codes: 0 on success, 2 when the instance has no finite optimum
//! (infeasible budgets or an unavoidably infinite objective), 64 for usage
//! and config errors, 70 when an internal consistency check fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use flowlp::pipeline::{render_solve_report, solve, solve_document, SolveOptions, SolveStatus};
use flowlp::{
    aggregate_measure, build_restricted_lp, convergence_selftest, crosscheck, full_occupation,
    load_problem, metric_selftest, monte_carlo_values, render_lp, sig12, simulate, CrosscheckOptions,
    Error, FullOccupation, LpOutcome, SimulationLimits, SolveReport, Trace,
};

const EXIT_NO_OPTIMUM: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_INTERNAL: u8 = 70;

#[derive(Parser)]
#[command(
    name = "flowlp",
    version,
    about = "Budget-constrained impulse-control solver over occupation-measure programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance end to end and print the report.
    Solve(SolveArgs),
    /// Simulate the optimal strategy; print a trace or Monte-Carlo estimates.
    Simulate(SimulateArgs),
    /// Check the solved value against brute-force oracles.
    Verify(VerifyArgs),
    /// Print the aggregate-cost table, set membership and continuation map.
    Classify(ClassifyArgs),
    /// Print the time-aggregated presence measure as delimited text.
    Aggregate(AggregateArgs),
    /// Run the metric axiom and convergence self-tests.
    MetricSelftest(MetricArgs),
}

#[derive(Args)]
struct PipelineOpts {
    /// Certificate tolerance for residuals, value agreement and budgets.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Strict-positivity threshold defining the positive-cost set.
    #[arg(long = "tol-v", default_value_t = 1e-9)]
    tol_v: f64,
    /// Value-iteration sweep budget; 0 picks one from the model size.
    #[arg(long = "max-iter", default_value_t = 0)]
    max_iter: usize,
}

impl PipelineOpts {
    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            tol_v: self.tol_v,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance document (JSON).
    config: PathBuf,
    #[command(flatten)]
    pipeline: PipelineOpts,
    /// Write the machine-readable report here.
    #[arg(long = "json-out")]
    json_out: Option<PathBuf>,
    /// Write the assembled linear program as text here.
    #[arg(long = "dump-lp")]
    dump_lp: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Instance document (JSON).
    config: PathBuf,
    #[command(flatten)]
    pipeline: PipelineOpts,
    /// Base seed of the counter-based generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectories to run; one prints its trace, more print estimates.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Stop a run after this many impulses.
    #[arg(long = "max-impulses", default_value_t = 1000)]
    max_impulses: usize,
    /// Stop a run when its elapsed time would cross this horizon.
    #[arg(long, default_value_t = f64::INFINITY)]
    horizon: f64,
    /// Write the machine-readable trace or estimates here.
    #[arg(long = "json-out")]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Instance document (JSON).
    config: PathBuf,
    #[command(flatten)]
    pipeline: PipelineOpts,
    /// Skip enumeration above this many deterministic maps.
    #[arg(long = "enum-cap", default_value_t = 10_000_000)]
    enum_cap: u64,
    /// Write the machine-readable oracle report here.
    #[arg(long = "json-out")]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Instance document (JSON).
    config: PathBuf,
    #[command(flatten)]
    pipeline: PipelineOpts,
    /// Write the machine-readable table here.
    #[arg(long = "json-out")]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Instance document (JSON).
    config: PathBuf,
    #[command(flatten)]
    pipeline: PipelineOpts,
    /// Scan limit for endless waits.
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
}

#[derive(Args)]
struct MetricArgs {
    /// Seed of the sampling streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random triples for the axiom checks.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Sequences per convergence regime.
    #[arg(long, default_value_t = 100)]
    sequences: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is a
            // usage error under this tool's exit-code contract.
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(match err {
                Error::Assertion(_) | Error::DegeneratePivot { .. } => EXIT_INTERNAL,
                _ => EXIT_USAGE,
            })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::MetricSelftest(args) => cmd_metric(args),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

fn write_json(path: &Path, document: &serde_json::Value) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(document).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

fn status_exit(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::Optimal => ExitCode::SUCCESS,
        SolveStatus::Infeasible | SolveStatus::ObjectiveInfinite => ExitCode::from(EXIT_NO_OPTIMUM),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, Error> {
    let problem = load_problem(&args.config)?;
    let report = solve(&problem, &args.pipeline.solve_options())?;
    print!("{}", render_solve_report(&report));
    if let Some(path) = &args.json_out {
        write_json(path, &solve_document(&report))?;
    }
    if let Some(path) = &args.dump_lp {
        let lp = build_restricted_lp(&report.mdp, &report.vset, false);
        write_text(path, &render_lp(&report.mdp, &lp))?;
    }
    Ok(status_exit(report.status))
}

/// Solves and insists on an extracted strategy, the common entry of the
/// trajectory-level commands.
fn solve_for_strategy(
    config: &Path,
    opts: &PipelineOpts,
) -> Result<Result<SolveReport, ExitCode>, Error> {
    let problem = load_problem(config)?;
    let report = solve(&problem, &opts.solve_options())?;
    if report.strategy.is_none() {
        println!("status {}", report.status.label());
        println!("no strategy to work with: the instance has no finite optimum");
        return Ok(Err(status_exit(report.status)));
    }
    Ok(Ok(report))
}

fn trace_lines(report: &SolveReport, trace: &Trace) -> String {
    let mdp = &report.mdp;
    let mut out = String::new();
    for r in &trace.records {
        let action = match r.action {
            Some(a) => mdp.pairs.actions[a].clone(),
            None => "-".to_string(),
        };
        let to = if mdp.is_cemetery(r.to) {
            "-".to_string()
        } else {
            mdp.state_name(r.to).to_string()
        };
        let costs: Vec<String> = r.increments.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step + 1,
            mdp.state_name(r.from),
            flowlp::ext::display(r.theta),
            action,
            to,
            costs.join(",")
        ));
    }
    out
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, Error> {
    let report = match solve_for_strategy(&args.config, &args.pipeline)? {
        Ok(report) => report,
        Err(code) => return Ok(code),
    };
    let problem = load_problem(&args.config)?;
    let strategy = report.strategy.as_ref().expect("checked above");
    let limits = SimulationLimits {
        horizon: args.horizon,
        max_impulses: args.max_impulses,
    };

    if args.runs <= 1 {
        let trace = simulate(&problem, &report.mdp, strategy, args.seed, 0, limits);
        print!("{}", trace_lines(&report, &trace));
        println!("# termination: {}", trace.termination.describe());
        let totals: Vec<String> = trace.totals.iter().map(|t| sig12(*t)).collect();
        println!("# totals: {}", totals.join(", "));
        if let Some(path) = &args.json_out {
            let records: Vec<serde_json::Value> = trace
                .records
                .iter()
                .map(|r| {
                    let to = if report.mdp.is_cemetery(r.to) {
                        serde_json::Value::Null
                    } else {
                        json!(report.mdp.state_name(r.to))
                    };
                    json!({
                        "step": r.step + 1,
                        "from": report.mdp.state_name(r.from),
                        "theta": flowlp::ext::to_json(r.theta),
                        "action": r.action.map(|a| report.mdp.pairs.actions[a].clone()),
                        "to": to,
                        "increments": r.increments,
                    })
                })
                .collect();
            write_json(
                path,
                &json!({
                    "seed": trace.seed,
                    "records": records,
                    "termination": trace.termination.describe(),
                    "totals": trace.totals,
                    "tail": trace.tail,
                }),
            )?;
        }
    } else {
        let mc = monte_carlo_values(&problem, &report.mdp, strategy, args.seed, args.runs, limits);
        for (j, (v, se)) in mc.values.iter().zip(&mc.stderrs).enumerate() {
            println!("V_{j} estimate {} stderr {}", sig12(*v), sig12(*se));
        }
        println!("runs {} truncated {}", mc.runs, mc.truncated_runs);
        if let Some(path) = &args.json_out {
            write_json(
                path,
                &json!({
                    "seed": args.seed,
                    "values": mc.values,
                    "stderrs": mc.stderrs,
                    "runs": mc.runs,
                    "truncated_runs": mc.truncated_runs,
                }),
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    let problem = load_problem(&args.config)?;
    let report = solve(&problem, &args.pipeline.solve_options())?;

    // Present the pipeline answer to the oracles in program terms; the
    // shortcut case is an optimal zero-value measure.
    let outcome = match (&report.status, &report.weights) {
        (SolveStatus::Optimal, Some(w)) => LpOutcome::Optimal {
            weights: w.clone(),
            value: report.value.unwrap_or(0.0),
            pivots: report.pivots,
        },
        (SolveStatus::ObjectiveInfinite, _) => LpOutcome::ObjectiveInfinite,
        _ => LpOutcome::Infeasible {
            infeasibility: report.infeasibility.unwrap_or(0.0),
        },
    };
    let check = crosscheck(
        &report.mdp,
        &outcome,
        CrosscheckOptions {
            enum_cap: args.enum_cap,
            max_iter: args.pipeline.max_iter,
            tol: args.pipeline.tol.max(1e-6),
        },
    );

    let line = |label: &str, text: String| println!("{label:<18} {text}");
    line("program status", report.status.label().to_string());
    match report.value {
        Some(v) => line("program value", sig12(v)),
        None => line("program value", "-".to_string()),
    }
    match &check.enumeration {
        Some(e) => {
            line("maps evaluated", e.evaluated.to_string());
            line("maps feasible", e.feasible_count.to_string());
            line("deterministic best", sig12(e.best_value));
        }
        None => line(
            "enumeration",
            check.enumeration_skipped.clone().unwrap_or_default(),
        ),
    }
    line("lower bound", sig12(check.lower_bound));
    line("upper bound", sig12(check.upper_bound));
    for note in &check.notes {
        line("note", note.clone());
    }
    for failure in &check.failures {
        line("contradiction", failure.clone());
    }
    line(
        "verdict",
        if check.consistent { "pass" } else { "fail" }.to_string(),
    );

    if let Some(path) = &args.json_out {
        write_json(
            path,
            &json!({
                "status": report.status.label(),
                "value": report.value.map(flowlp::ext::to_json),
                "maps_evaluated": check.enumeration.as_ref().map(|e| e.evaluated),
                "maps_feasible": check.enumeration.as_ref().map(|e| e.feasible_count),
                "deterministic_best": check.enumeration.as_ref().map(|e| flowlp::ext::to_json(e.best_value)),
                "enumeration_skipped": check.enumeration_skipped,
                "lower_bound": flowlp::ext::to_json(check.lower_bound),
                "upper_bound": flowlp::ext::to_json(check.upper_bound),
                "notes": check.notes,
                "failures": check.failures,
                "verdict": if check.consistent { "pass" } else { "fail" },
            }),
        )?;
    }

    Ok(if check.consistent {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INTERNAL)
    })
}

fn cmd_classify(args: ClassifyArgs) -> Result<ExitCode, Error> {
    let problem = load_problem(&args.config)?;
    let report = solve(&problem, &args.pipeline.solve_options())?;
    let mdp = &report.mdp;

    println!("{:<18} {:<16} {:<6} continuation", "state", "w", "in V");
    for x in 0..mdp.n_states() {
        println!(
            "{:<18} {:<16} {:<6} {}",
            mdp.state_name(x),
            sig12(report.aggregate.at(mdp, x)),
            if report.vset.contains(x) { "yes" } else { "no" },
            flowlp::pair_name(mdp, report.fstar.choice[x]),
        );
    }
    println!(
        "value iteration: {} sweeps, residual {}{}",
        report.aggregate.iterations,
        sig12(report.aggregate.residual),
        if report.aggregate.converged {
            ""
        } else {
            " (not converged)"
        }
    );

    if let Some(path) = &args.json_out {
        let rows: Vec<serde_json::Value> = (0..mdp.n_states())
            .map(|x| {
                json!({
                    "state": mdp.state_name(x),
                    "w": flowlp::ext::to_json(report.aggregate.at(mdp, x)),
                    "in_v": report.vset.contains(x),
                    "continuation": flowlp::pair_name(mdp, report.fstar.choice[x]),
                })
            })
            .collect();
        write_json(
            path,
            &json!({
                "rows": rows,
                "iterations": report.aggregate.iterations,
                "residual": report.aggregate.residual,
                "converged": report.aggregate.converged,
            }),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Sampling step of the aggregated measure; one hundredth keeps the scan
/// cheap while resolving every waiting time in the shipped instances.
const AGGREGATE_STEP: f64 = 0.01;

fn cmd_aggregate(args: AggregateArgs) -> Result<ExitCode, Error> {
    let report = match solve_for_strategy(&args.config, &args.pipeline)? {
        Ok(report) => report,
        Err(code) => return Ok(code),
    };
    let problem = load_problem(&args.config)?;
    let weights = report.weights.as_ref().expect("optimal status implies weights");

    let atoms = match full_occupation(&report.mdp, &report.vset, weights, &report.fstar) {
        FullOccupation::Finite { atoms } => atoms,
        FullOccupation::Infinite { looping_state } => {
            println!(
                "# visit counts diverge: the free continuation loops at state {}",
                report.mdp.state_name(looping_state)
            );
            return Ok(ExitCode::SUCCESS);
        }
    };
    let eta = aggregate_measure(&problem, &report.mdp, &atoms, AGGREGATE_STEP, args.horizon);

    println!("kind,state,action,mass");
    let mdp = &report.mdp;
    for (x, row) in eta.impulse.iter().enumerate() {
        for (a, m) in row.iter().enumerate() {
            if *m > 0.0 {
                println!("impulse,{},{},{}", mdp.state_name(x), mdp.pairs.actions[a], m);
            }
        }
    }
    for (x, m) in eta.paused.iter().enumerate() {
        if *m > 0.0 {
            println!("paused,{},,{}", mdp.state_name(x), m);
        }
    }
    if eta.truncated {
        println!(
            "# endless waits truncated at horizon {}: {} of the paused mass",
            eta.horizon,
            sig12(eta.paused_mass_truncated)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_metric(args: MetricArgs) -> Result<ExitCode, Error> {
    let axioms = metric_selftest(args.samples, args.seed);
    let regimes = convergence_selftest(args.sequences, args.seed);

    let line = |label: &str, text: String| println!("{label:<26} {text}");
    line("samples", axioms.samples.to_string());
    line("endpoint error", format!("{:e}", axioms.endpoint_error));
    line("max symmetry violation", format!("{:e}", axioms.max_symmetry_violation));
    line("max triangle violation", format!("{:e}", axioms.max_triangle_violation));
    line("max identity violation", format!("{:e}", axioms.max_identity_violation));
    line("min distinct distance", format!("{:e}", axioms.min_distinct_distance));
    line("sequences per regime", regimes.sequences.to_string());
    line("max rest error", format!("{:e}", regimes.max_rest_error));
    line("max final to rest", format!("{:e}", regimes.max_final_to_rest));
    line("max final finite", format!("{:e}", regimes.max_final_finite));
    line("min separation", format!("{:e}", regimes.min_separation));
    line(
        "verdict",
        if axioms.pass && regimes.pass { "pass" } else { "fail" }.to_string(),
    );

    Ok(if axioms.pass && regimes.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INTERNAL)
    })
}
