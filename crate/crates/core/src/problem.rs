//! Impulse-control problem primitives: the state domain, the flow moving the
//! state between impulses, the impulse reset map, and the running/impulse
//! cost structure.
//!
//! Two families of instances are supported. Finite instances have labeled
//! states, identity or tabulated flows, and tabulated costs. Interval
//! instances live on `[lo, hi] ⊂ ℝ` with parametric flows (identity,
//! exponential decay, clipped linear drift, or a caller-supplied routine)
//! and polynomial running-cost rates.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ext;
use crate::rng::Stream;

/// State domain: a finite label set or a closed real interval.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Labels(Vec<String>),
    Interval { lo: f64, hi: f64 },
}

impl Domain {
    pub fn is_finite(&self) -> bool {
        matches!(self, Domain::Labels(_))
    }

    /// Distance between two states: discrete on labels, absolute on points.
    pub fn distance(&self, a: State, b: State) -> f64 {
        match (a, b) {
            (State::Label(i), State::Label(j)) => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            (State::Point(x), State::Point(y)) => (x - y).abs(),
            _ => 1.0,
        }
    }

    pub fn contains(&self, x: State) -> bool {
        match (self, x) {
            (Domain::Labels(l), State::Label(i)) => i < l.len(),
            (Domain::Interval { lo, hi }, State::Point(p)) => p.is_finite() && *lo <= p && p <= *hi,
            _ => false,
        }
    }

    pub fn clip(&self, p: f64) -> f64 {
        match self {
            Domain::Interval { lo, hi } => p.clamp(*lo, *hi),
            Domain::Labels(_) => p,
        }
    }
}

/// A point of the state space, before any cemetery is added.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum State {
    /// Index into the label list of a finite domain.
    Label(usize),
    /// Coordinate in an interval domain.
    Point(f64),
}

impl State {
    pub fn point(self) -> f64 {
        match self {
            State::Point(p) => p,
            State::Label(_) => panic!("labeled state used where a point was required"),
        }
    }

    pub fn label(self) -> usize {
        match self {
            State::Label(i) => i,
            State::Point(_) => panic!("point state used where a label was required"),
        }
    }
}

/// Evaluation routine for flows supplied through the library interface
/// rather than the config format.
pub type CustomFlow = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Deterministic motion of the uncontrolled state.
#[derive(Clone)]
pub enum Flow {
    /// φ(x, t) = x.
    Identity,
    /// Step evolution on a finite label set: `map[x][k]` is the state
    /// reached from `x` at `times[k]`; the state holds its last value
    /// between and beyond tabulated times. Composition is only meaningful
    /// on the tabulated grid.
    Tabulated { times: Vec<f64>, map: Vec<Vec<usize>> },
    /// φ(x, t) = x·e^{−rate·t}, clipped to the interval.
    ExponentialDecay { rate: f64 },
    /// φ(x, t) = x + velocity·t, clipped to the interval.
    LinearDrift { velocity: f64 },
    /// Caller-supplied routine on an interval domain; results are clipped.
    Custom(CustomFlow),
}

impl fmt::Debug for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flow::Identity => write!(f, "Identity"),
            Flow::Tabulated { times, .. } => write!(f, "Tabulated({} times)", times.len()),
            Flow::ExponentialDecay { rate } => write!(f, "ExponentialDecay(rate={rate})"),
            Flow::LinearDrift { velocity } => write!(f, "LinearDrift(v={velocity})"),
            Flow::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Running-cost rate for one criterion.
#[derive(Debug, Clone, PartialEq)]
pub enum GradualRate {
    /// One nonnegative rate per labeled state.
    Table(Vec<f64>),
    /// Polynomial coefficients in ascending degree, nonnegative on the interval.
    Poly(Vec<f64>),
}

impl GradualRate {
    pub fn eval(&self, x: State) -> f64 {
        match (self, x) {
            (GradualRate::Table(t), State::Label(i)) => t[i],
            (GradualRate::Poly(c), State::Point(p)) => horner(c, p),
            _ => panic!("gradual rate incompatible with state kind"),
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Antiderivative coefficients of a polynomial (constant term 0).
fn poly_antiderivative(coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    for (k, c) in coeffs.iter().enumerate() {
        out.push(c / (k as f64 + 1.0));
    }
    out
}

/// Impulse-cost structure for one criterion, evaluated at the pre-impulse
/// state and the chosen impulse.
#[derive(Debug, Clone, PartialEq)]
pub enum ImpulseCost {
    Constant(f64),
    /// One value per action, independent of the state.
    PerAction(Vec<f64>),
    /// `table[state][action]` on a finite domain.
    Table(Vec<Vec<f64>>),
}

impl ImpulseCost {
    pub fn eval(&self, x: State, action: usize) -> f64 {
        match self {
            ImpulseCost::Constant(c) => *c,
            ImpulseCost::PerAction(v) => v[action],
            ImpulseCost::Table(t) => t[x.label()][action],
        }
    }
}

/// One criterion: a running rate plus an impulse cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTerm {
    pub gradual: GradualRate,
    pub impulse: ImpulseCost,
}

/// Where the state jumps when an impulse is applied.
#[derive(Debug, Clone, PartialEq)]
pub enum ImpulseMap {
    /// `map[state][action]` on a finite domain.
    Table(Vec<Vec<usize>>),
    /// One reset rule per action on an interval domain.
    PerAction(Vec<ResetMap>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResetMap {
    /// Jump to a fixed target point.
    Target(f64),
    /// Jump to `scale·x + shift`, clipped to the interval.
    Affine { scale: f64, shift: f64 },
}

/// Numerical-integration settings for running costs without a closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    /// Step is `rel_step·θ`, capped at `abs_step_cap`.
    pub rel_step: f64,
    pub abs_step_cap: f64,
    /// Truncation horizon for θ = ∞.
    pub horizon: f64,
    /// Tail rate above this at the horizon is reported as an infinite integral.
    pub tail_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_step: 1e-3,
            abs_step_cap: 1e-2,
            horizon: 50.0,
            tail_tol: 1e-12,
        }
    }
}

/// Integration route selector for running costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integration {
    /// Closed form when the flow/rate pair admits one, quadrature otherwise.
    Auto,
    /// Closed form only; panics in tests if unavailable.
    ClosedForm,
    /// Composite trapezoid with an optional explicit step.
    Trapezoid { step: Option<f64> },
}

/// Result of a running-cost integral over `[0, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Set when a θ = ∞ integral was truncated at the quadrature horizon.
    pub truncated: bool,
}

impl Integral {
    fn exact(value: f64) -> Self {
        Integral {
            value,
            truncated: false,
        }
    }
}

/// Report of a semigroup-property check over sampled `(x, t, s)` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupReport {
    pub max_violation: f64,
    pub pass: bool,
    pub samples: usize,
}

/// Complete impulse-control instance.
///
/// Immutable after construction; every operation on it is pure, so values
/// can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct Problem {
    pub domain: Domain,
    pub actions: Vec<String>,
    pub flow: Flow,
    pub impulse_map: ImpulseMap,
    /// Criteria `j = 0..=J`; index 0 is the objective.
    pub costs: Vec<CostTerm>,
    /// Budgets for `j = 1..=J`.
    pub budgets: Vec<f64>,
    pub x0: State,
    /// Waiting-time grid; must contain 0 and ∞.
    pub theta_grid: Vec<f64>,
    /// Number of grid points used to discretize an interval domain.
    pub grid_points: Option<usize>,
    pub quadrature: QuadratureConfig,
}

impl Problem {
    /// Number of constraint criteria (excludes the objective).
    pub fn constraint_count(&self) -> usize {
        self.budgets.len()
    }

    /// Checks structural invariants; every constructor path funnels through here.
    pub fn validate(&self) -> Result<()> {
        if self.costs.len() != self.budgets.len() + 1 {
            return Err(Error::config(
                "costs",
                format!(
                    "expected {} cost terms for {} budgets, found {}",
                    self.budgets.len() + 1,
                    self.budgets.len(),
                    self.costs.len()
                ),
            ));
        }
        if let Some(d) = self.budgets.iter().find(|d| !(**d >= 0.0)) {
            return Err(Error::config("budgets", format!("budget {d} is negative")));
        }
        if self.budgets.iter().any(|d| !d.is_finite()) {
            return Err(Error::config(
                "budgets",
                "budgets must be finite; drop the criterion to leave it unconstrained",
            ));
        }
        if self.actions.is_empty() {
            return Err(Error::config("actions", "action set is empty"));
        }
        self.validate_theta_grid()?;
        match (&self.domain, self.grid_points) {
            (Domain::Labels(_), Some(_)) => {
                return Err(Error::config(
                    "discretization",
                    "finite label domains take no grid size",
                ))
            }
            (Domain::Interval { .. }, n) => {
                if n.map_or(true, |n| n < 2) {
                    return Err(Error::config(
                        "discretization",
                        "interval domains need a grid of at least 2 points",
                    ));
                }
            }
            (Domain::Labels(_), None) => {}
        }
        self.validate_domain_shapes()?;
        if !self.domain.contains(self.x0) {
            return Err(Error::config("x0", "initial state outside the state space"));
        }
        Ok(())
    }

    fn validate_theta_grid(&self) -> Result<()> {
        let g = &self.theta_grid;
        if !g.contains(&0.0) {
            return Err(Error::config("theta_grid", "grid must contain 0"));
        }
        if !g.iter().any(|t| t.is_infinite()) {
            return Err(Error::config("theta_grid", "grid must contain \"inf\""));
        }
        if g.iter().any(|t| *t < 0.0 || t.is_nan()) {
            return Err(Error::config("theta_grid", "waiting times must be nonnegative"));
        }
        if g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "theta_grid",
                "waiting times must be strictly increasing",
            ));
        }
        Ok(())
    }

    fn validate_domain_shapes(&self) -> Result<()> {
        match &self.domain {
            Domain::Labels(labels) => {
                let n = labels.len();
                if n == 0 {
                    return Err(Error::config("states", "label set is empty"));
                }
                match &self.flow {
                    Flow::Identity => {}
                    Flow::Tabulated { times, map } => {
                        if times.is_empty()
                            || times.iter().any(|t| !(*t > 0.0) || !t.is_finite())
                            || times.windows(2).any(|w| w[0] >= w[1])
                        {
                            return Err(Error::config(
                                "flow.times",
                                "tabulated times must be finite, positive, strictly increasing",
                            ));
                        }
                        if map.len() != n || map.iter().any(|row| row.len() != times.len()) {
                            return Err(Error::config(
                                "flow.map",
                                "tabulated map must be |states| × |times|",
                            ));
                        }
                        if map.iter().flatten().any(|s| *s >= n) {
                            return Err(Error::config("flow.map", "entry outside the state set"));
                        }
                    }
                    other => {
                        return Err(Error::config(
                            "flow",
                            format!("{other:?} flow requires an interval domain"),
                        ))
                    }
                }
                match &self.impulse_map {
                    ImpulseMap::Table(map) => {
                        if map.len() != n || map.iter().any(|row| row.len() != self.actions.len()) {
                            return Err(Error::config(
                                "impulse_map",
                                "table must be |states| × |actions|",
                            ));
                        }
                        if map.iter().flatten().any(|s| *s >= n) {
                            return Err(Error::config("impulse_map", "target outside the state set"));
                        }
                    }
                    ImpulseMap::PerAction(_) => {
                        return Err(Error::config(
                            "impulse_map",
                            "finite domains use a state × action table",
                        ))
                    }
                }
                for (j, term) in self.costs.iter().enumerate() {
                    match &term.gradual {
                        GradualRate::Table(t) => {
                            if t.len() != n {
                                return Err(Error::config(
                                    format!("costs[{j}].gradual"),
                                    "table length must equal |states|",
                                ));
                            }
                            if t.iter().any(|c| !(*c >= 0.0)) {
                                return Err(Error::config(
                                    format!("costs[{j}].gradual"),
                                    "rates must be nonnegative",
                                ));
                            }
                        }
                        GradualRate::Poly(_) => {
                            return Err(Error::config(
                                format!("costs[{j}].gradual"),
                                "finite domains use tabulated rates",
                            ))
                        }
                    }
                    self.validate_impulse_cost(j, n)?;
                }
            }
            Domain::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::config("states", "interval must be finite with lo < hi"));
                }
                match &self.flow {
                    Flow::Identity | Flow::Custom(_) => {}
                    Flow::ExponentialDecay { rate } => {
                        if !(*rate >= 0.0) {
                            return Err(Error::config("flow.rate", "decay rate must be ≥ 0"));
                        }
                    }
                    Flow::LinearDrift { velocity } => {
                        if !velocity.is_finite() {
                            return Err(Error::config("flow.velocity", "velocity must be finite"));
                        }
                    }
                    Flow::Tabulated { .. } => {
                        return Err(Error::config(
                            "flow",
                            "tabulated flows require a finite label domain",
                        ))
                    }
                }
                match &self.impulse_map {
                    ImpulseMap::PerAction(resets) => {
                        if resets.len() != self.actions.len() {
                            return Err(Error::config(
                                "impulse_map",
                                "one reset rule per action required",
                            ));
                        }
                        for r in resets {
                            if let ResetMap::Target(t) = r {
                                if !(*lo <= *t && *t <= *hi) {
                                    return Err(Error::config(
                                        "impulse_map",
                                        format!("target {t} outside [{lo}, {hi}]"),
                                    ));
                                }
                            }
                        }
                    }
                    ImpulseMap::Table(_) => {
                        return Err(Error::config(
                            "impulse_map",
                            "interval domains use per-action reset rules",
                        ))
                    }
                }
                for (j, term) in self.costs.iter().enumerate() {
                    match &term.gradual {
                        GradualRate::Poly(coeffs) => {
                            // Nonnegativity probed on a fixed sample grid.
                            for k in 0..=1000 {
                                let x = lo + (hi - lo) * k as f64 / 1000.0;
                                if horner(coeffs, x) < 0.0 {
                                    return Err(Error::config(
                                        format!("costs[{j}].gradual"),
                                        format!("rate is negative at x = {x}"),
                                    ));
                                }
                            }
                        }
                        GradualRate::Table(_) => {
                            return Err(Error::config(
                                format!("costs[{j}].gradual"),
                                "interval domains use polynomial rates",
                            ))
                        }
                    }
                    self.validate_impulse_cost(j, usize::MAX)?;
                }
            }
        }
        Ok(())
    }

    fn validate_impulse_cost(&self, j: usize, n_states: usize) -> Result<()> {
        let field = format!("costs[{j}].impulse");
        match &self.costs[j].impulse {
            ImpulseCost::Constant(c) => {
                if !(*c >= 0.0) {
                    return Err(Error::config(field, "impulse cost must be nonnegative"));
                }
            }
            ImpulseCost::PerAction(v) => {
                if v.len() != self.actions.len() {
                    return Err(Error::config(field, "one impulse cost per action required"));
                }
                if v.iter().any(|c| !(*c >= 0.0)) {
                    return Err(Error::config(field, "impulse costs must be nonnegative"));
                }
            }
            ImpulseCost::Table(t) => {
                if n_states == usize::MAX {
                    return Err(Error::config(field, "interval domains cannot tabulate by state"));
                }
                if t.len() != n_states || t.iter().any(|row| row.len() != self.actions.len()) {
                    return Err(Error::config(field, "table must be |states| × |actions|"));
                }
                if t.iter().flatten().any(|c| !(*c >= 0.0)) {
                    return Err(Error::config(field, "impulse costs must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    /// Evaluates the flow at time `t ∈ [0, ∞]`.
    ///
    /// `t = ∞` asks for the long-run limit, which exists for every built-in
    /// kind (decay and drift settle on a fixed point once clipped; tabulated
    /// flows hold their last value) but not for custom routines.
    pub fn flow_eval(&self, x: State, t: f64) -> Result<State> {
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!("state {x:?} outside the state space")));
        }
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain(format!("time {t} outside [0, ∞]")));
        }
        if t == 0.0 {
            return Ok(x);
        }
        match &self.flow {
            Flow::Identity => Ok(x),
            Flow::Tabulated { times, map } => {
                let i = x.label();
                // Largest tabulated time ≤ t; the state holds between entries.
                let k = times.partition_point(|tk| *tk <= t);
                Ok(if k == 0 {
                    x
                } else {
                    State::Label(map[i][k - 1])
                })
            }
            Flow::ExponentialDecay { rate } => {
                let p = x.point();
                let v = if t.is_infinite() {
                    if *rate == 0.0 {
                        p
                    } else {
                        0.0
                    }
                } else {
                    p * (-rate * t).exp()
                };
                Ok(State::Point(self.domain.clip(v)))
            }
            Flow::LinearDrift { velocity } => {
                let p = x.point();
                let v = if t.is_infinite() {
                    match velocity.partial_cmp(&0.0) {
                        Some(std::cmp::Ordering::Greater) => f64::INFINITY,
                        Some(std::cmp::Ordering::Less) => f64::NEG_INFINITY,
                        _ => p,
                    }
                } else {
                    p + velocity * t
                };
                Ok(State::Point(self.domain.clip(v)))
            }
            Flow::Custom(eval) => {
                if t.is_infinite() {
                    return Err(Error::Domain(
                        "t = ∞ limit is not available for custom flows".into(),
                    ));
                }
                Ok(State::Point(self.domain.clip(eval(x.point(), t))))
            }
        }
    }

    /// Samples `(x, t, s)` triples and reports the worst composition defect
    /// `distance(φ(x, t+s), φ(φ(x, s), t))`.
    ///
    /// Tabulated flows are only constrained on their own time grid, so for
    /// them the pairs `(t, s)` are drawn from grid times whose sum is again
    /// a grid time.
    pub fn check_semigroup(&self, sample_count: usize, tol: f64, seed: u64) -> Result<SemigroupReport> {
        assert!(sample_count >= 1, "sample_count must be ≥ 1");
        assert!(tol > 0.0, "tol must be positive");
        let mut stream = Stream::new(seed, 0);
        let mut max_violation = 0.0f64;
        let mut used = 0usize;

        let grid_pairs: Option<Vec<(f64, f64)>> = match &self.flow {
            Flow::Tabulated { times, .. } => {
                let mut pts = vec![0.0];
                pts.extend_from_slice(times);
                let mut pairs = Vec::new();
                for &t in &pts {
                    for &s in &pts {
                        let sum = t + s;
                        if pts.iter().any(|p| (p - sum).abs() <= 1e-12) {
                            pairs.push((t, s));
                        }
                    }
                }
                Some(pairs)
            }
            _ => None,
        };

        for _ in 0..sample_count {
            let (x, t, s) = match &self.domain {
                Domain::Labels(labels) => {
                    let x = State::Label(stream.index(labels.len()));
                    match &grid_pairs {
                        Some(pairs) => {
                            if pairs.is_empty() {
                                break;
                            }
                            let (t, s) = pairs[stream.index(pairs.len())];
                            (x, t, s)
                        }
                        None => (x, stream.range(0.0, 10.0), stream.range(0.0, 10.0)),
                    }
                }
                Domain::Interval { lo, hi } => (
                    State::Point(stream.range(*lo, *hi)),
                    stream.range(0.0, 10.0),
                    stream.range(0.0, 10.0),
                ),
            };
            let direct = self.flow_eval(x, t + s)?;
            let composed = self.flow_eval(self.flow_eval(x, s)?, t)?;
            max_violation = max_violation.max(self.domain.distance(direct, composed));
            used += 1;
        }

        Ok(SemigroupReport {
            max_violation,
            pass: max_violation <= tol,
            samples: used,
        })
    }

    /// Running cost accumulated along the flow: `∫_{[0,θ)} rate_j(φ(x, u)) du`.
    pub fn gradual_cost_integral(&self, j: usize, x: State, theta: f64) -> Integral {
        self.gradual_cost_integral_with(j, x, theta, Integration::Auto)
    }

    /// Same integral with an explicit route, used by the convergence checks.
    pub fn gradual_cost_integral_with(
        &self,
        j: usize,
        x: State,
        theta: f64,
        route: Integration,
    ) -> Integral {
        assert!(j < self.costs.len(), "criterion index out of range");
        assert!(theta >= 0.0, "theta must be in [0, ∞]");
        if theta == 0.0 {
            return Integral::exact(0.0);
        }
        match route {
            Integration::Auto => self
                .closed_form_integral(j, x, theta)
                .unwrap_or_else(|| self.trapezoid_integral(j, x, theta, None)),
            Integration::ClosedForm => self
                .closed_form_integral(j, x, theta)
                .expect("no closed form for this flow/rate pair"),
            Integration::Trapezoid { step } => self.trapezoid_integral(j, x, theta, step),
        }
    }

    /// Exact integral when the flow/rate pair admits one; `None` for custom flows.
    fn closed_form_integral(&self, j: usize, x: State, theta: f64) -> Option<Integral> {
        let rate = &self.costs[j].gradual;
        match &self.flow {
            Flow::Identity => {
                let r = rate.eval(x);
                Some(Integral::exact(ext::mul(r, theta)))
            }
            Flow::Tabulated { times, map } => {
                let table = match rate {
                    GradualRate::Table(t) => t,
                    GradualRate::Poly(_) => unreachable!("validated"),
                };
                // Piecewise-constant path: breakpoints at 0 and each tabulated time.
                let mut total = 0.0;
                let mut state = x.label();
                let mut start = 0.0;
                for (k, &tk) in times.iter().enumerate() {
                    if tk >= theta {
                        break;
                    }
                    total += table[state] * (tk - start);
                    state = map[x.label()][k];
                    start = tk;
                }
                if theta.is_infinite() {
                    if table[state] > 0.0 {
                        return Some(Integral::exact(f64::INFINITY));
                    }
                    Some(Integral::exact(total))
                } else {
                    total += table[state] * (theta - start);
                    Some(Integral::exact(total))
                }
            }
            Flow::ExponentialDecay { rate: c } => {
                let coeffs = match rate {
                    GradualRate::Poly(p) => p,
                    GradualRate::Table(_) => unreachable!("validated"),
                };
                if *c == 0.0 {
                    let r = horner(coeffs, x.point());
                    return Some(Integral::exact(ext::mul(r, theta)));
                }
                let p0 = x.point();
                // Time at which the decaying path exits the interval, if ever.
                let exit = self.decay_exit_time(p0, *c);
                Some(Integral::exact(self.piecewise_parametric_integral(
                    theta,
                    exit,
                    |t| {
                        // ∫_0^t Σ_k a_k p0^k e^{−ckt'} dt'
                        let mut acc = 0.0;
                        for (k, a) in coeffs.iter().enumerate() {
                            if k == 0 {
                                acc += a * t;
                            } else {
                                let ck = c * k as f64;
                                acc += a * p0.powi(k as i32) * (1.0 - (-ck * t).exp()) / ck;
                            }
                        }
                        acc
                    },
                    |t| {
                        // t → ∞ limit of the integral above.
                        if coeffs.first().copied().unwrap_or(0.0) > 0.0 {
                            return f64::INFINITY;
                        }
                        let mut acc = 0.0;
                        for (k, a) in coeffs.iter().enumerate().skip(1) {
                            acc += a * p0.powi(k as i32) / (c * k as f64);
                        }
                        let _ = t;
                        acc
                    },
                    |b| horner(coeffs, b),
                )))
            }
            Flow::LinearDrift { velocity: v } => {
                let coeffs = match rate {
                    GradualRate::Poly(p) => p,
                    GradualRate::Table(_) => unreachable!("validated"),
                };
                if *v == 0.0 {
                    let r = horner(coeffs, x.point());
                    return Some(Integral::exact(ext::mul(r, theta)));
                }
                let p0 = x.point();
                let (lo, hi) = match self.domain {
                    Domain::Interval { lo, hi } => (lo, hi),
                    _ => unreachable!("validated"),
                };
                let exit = if *v > 0.0 { (hi - p0) / v } else { (lo - p0) / v };
                let anti = poly_antiderivative(coeffs);
                Some(Integral::exact(self.piecewise_parametric_integral(
                    theta,
                    exit.max(0.0),
                    |t| (horner(&anti, p0 + v * t) - horner(&anti, p0)) / v,
                    |_| f64::INFINITY, // never hit: exit is always finite for v ≠ 0
                    |b| horner(coeffs, b),
                )))
            }
            Flow::Custom(_) => None,
        }
    }

    /// Splits `[0, θ)` at the interval-exit time `exit`; before it the path is
    /// the unclipped parametric curve, after it the state sits on the boundary.
    fn piecewise_parametric_integral(
        &self,
        theta: f64,
        exit: f64,
        pre: impl Fn(f64) -> f64,
        pre_limit: impl Fn(f64) -> f64,
        rate_at: impl Fn(f64) -> f64,
    ) -> f64 {
        let boundary = |t: f64| self.flow_at_boundary(t);
        if theta <= exit {
            if theta.is_infinite() {
                return pre_limit(theta);
            }
            return pre(theta);
        }
        let head = pre(exit);
        let b = boundary(exit);
        let tail_rate = rate_at(b);
        head + ext::mul(tail_rate, theta - exit)
    }

    /// Boundary value reached when a monotone parametric flow exits the interval.
    fn flow_at_boundary(&self, exit: f64) -> f64 {
        match (&self.flow, &self.domain) {
            (Flow::ExponentialDecay { .. }, Domain::Interval { lo, hi }) => {
                // Decay moves toward 0; the exit boundary is whichever bound
                // blocks the approach.
                if *lo > 0.0 {
                    *lo
                } else if *hi < 0.0 {
                    *hi
                } else {
                    let _ = exit;
                    0.0
                }
            }
            (Flow::LinearDrift { velocity }, Domain::Interval { lo, hi }) => {
                if *velocity > 0.0 {
                    *hi
                } else {
                    *lo
                }
            }
            _ => unreachable!(),
        }
    }

    /// Time at which `p0·e^{−ct}` leaves the interval, `∞` if it never does.
    fn decay_exit_time(&self, p0: f64, c: f64) -> f64 {
        let (lo, hi) = match self.domain {
            Domain::Interval { lo, hi } => (lo, hi),
            _ => unreachable!("validated"),
        };
        if lo <= 0.0 && 0.0 <= hi {
            return f64::INFINITY;
        }
        if lo > 0.0 {
            // p0 ≥ lo > 0 decays down to lo.
            (p0 / lo).ln() / c
        } else {
            // p0 ≤ hi < 0 rises toward hi.
            (p0 / hi).ln() / c
        }
    }

    fn trapezoid_integral(&self, j: usize, x: State, theta: f64, step: Option<f64>) -> Integral {
        let rate = &self.costs[j].gradual;
        let q = &self.quadrature;
        let eval = |u: f64| -> f64 {
            let s = self
                .flow_eval(x, u)
                .expect("flow evaluation inside the domain");
            rate.eval(s)
        };
        if theta.is_infinite() {
            let t = q.horizon;
            let inner = self.finite_trapezoid(&eval, t, step);
            let tail = eval(t);
            if tail > q.tail_tol {
                return Integral {
                    value: f64::INFINITY,
                    truncated: false,
                };
            }
            return Integral {
                value: inner,
                truncated: true,
            };
        }
        Integral::exact(self.finite_trapezoid(&eval, theta, step))
    }

    fn finite_trapezoid(&self, eval: &dyn Fn(f64) -> f64, theta: f64, step: Option<f64>) -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        let q = &self.quadrature;
        let h = step.unwrap_or_else(|| (q.rel_step * theta).min(q.abs_step_cap));
        let n = (theta / h).ceil().max(1.0) as usize;
        let h = theta / n as f64;
        let mut acc = 0.5 * (eval(0.0) + eval(theta));
        for k in 1..n {
            acc += eval(h * k as f64);
        }
        acc * h
    }
}
