//! Deterministic impulse control on a finite horizon-free model: a flow
//! drifts through the state space, impulses relocate it at a price, and a
//! vector of running costs is accumulated. The solver reduces each problem
//! to a finite total-cost decision model, restricts it to the states where
//! cost is unavoidable, solves an occupation-measure linear program under
//! the budget constraints, and extracts a stationary randomized strategy
//! together with an optimality certificate.

pub mod aggregate;
pub mod classify;
pub mod config;
pub mod error;
pub mod ext;
pub mod fixtures;
pub mod lp;
pub mod mdp;
pub mod metric;
pub mod pipeline;
pub mod problem;
pub mod rng;
pub mod simplex;
pub mod simulate;
pub mod strategy;
pub mod verify;

pub use aggregate::{aggregate_measure, full_occupation, AggregatedMeasure, FullOccupation};
pub use classify::{
    aggregate_value_iteration, default_sweep_budget, greedy_strategy, positive_cost_set,
    weighted_value_iteration, AggregateCost, DeterministicStrategy, PositiveCostSet, VI_TOL,
};
pub use config::{load_problem, problem_from_json, problem_from_str};
pub use error::{Error, Result};
pub use lp::{
    build_restricted_lp, measure_costs, render_lp, residuals, solve_occupation_lp, LpOutcome,
    LpResiduals, OccupationLp,
};
pub use mdp::{build_mdp, ActionGrid, FiniteMdp, ProjectionReport};
pub use metric::{
    bounded_metric, compactify, convergence_selftest, metric_selftest, timed_distance,
    wrapped_unit_distance, ConvergenceCheck, MetricSelfTest, TimedState,
};
pub use pipeline::{
    pair_name, render_solve_report, sig12, solve, solve_document, SolveOptions, SolveReport,
    SolveStatus,
};
pub use problem::{
    CostTerm, Domain, Flow, GradualRate, ImpulseCost, ImpulseMap, Problem, QuadratureConfig,
    ResetMap, State,
};
pub use simplex::SimplexOptions;
pub use simulate::{
    monte_carlo_values, simulate, McEstimate, SimulationLimits, Termination, Trace, TraceRecord,
};
pub use strategy::{
    disintegrate, evaluate_performance, exact_occupation, outperforms,
    validate_optimality_certificate, Certificate, OccupationMeasure, StationaryStrategy,
};
pub use verify::{
    crosscheck, default_lambda_grid, enumerate_deterministic, lagrangian_scan,
    mixture_upper_bound, CrosscheckOptions, CrosscheckReport, EnumerationReport, LagrangianScan,
};
