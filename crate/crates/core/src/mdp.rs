//! Reduction of an impulse-control instance to a finite total-cost MDP.
//!
//! States are the instance's own labels, or the points of a uniform grid
//! over an interval domain, plus one absorbing costless cemetery at the
//! last index. Actions are pairs `(θ, a)` of a waiting time from the grid
//! and an impulse; `θ = ∞` means "never intervene again" and leads to the
//! cemetery. Transitions are deterministic: wait along the flow, apply the
//! impulse reset, and (on interval domains) snap the landing point to the
//! nearest grid point.

use crate::error::{Error, Result};
use crate::problem::{Domain, ImpulseMap, Problem, ResetMap, State};

/// The `(θ, a)` pair set in θ-major order: all impulses for the first
/// waiting time, then all impulses for the second, and so on, with θ = ∞
/// last. Tie-breaking by pair index therefore prefers shorter waits and,
/// within a wait, lower impulse indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    pub thetas: Vec<f64>,
    pub actions: Vec<String>,
}

impl ActionGrid {
    pub fn len(&self) -> usize {
        self.thetas.len() * self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Decomposes a pair index into `(theta_index, action_index)`.
    pub fn split(&self, k: usize) -> (usize, usize) {
        (k / self.actions.len(), k % self.actions.len())
    }

    pub fn index(&self, theta_idx: usize, action_idx: usize) -> usize {
        theta_idx * self.actions.len() + action_idx
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.thetas[self.split(k).0]
    }

    pub fn action(&self, k: usize) -> usize {
        self.split(k).1
    }

    pub fn action_name(&self, k: usize) -> &str {
        &self.actions[self.split(k).1]
    }
}

/// Grid-projection diagnostics for interval domains; all zeros on finite
/// label domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionReport {
    /// Grid spacing.
    pub cell: f64,
    /// Worst distance between a continuous landing point and its grid image.
    pub max_displacement: f64,
    /// Distance moved when snapping the initial state onto the grid.
    pub x0_displacement: f64,
}

impl ProjectionReport {
    fn exact() -> Self {
        ProjectionReport {
            cell: 0.0,
            max_displacement: 0.0,
            x0_displacement: 0.0,
        }
    }
}

/// Finite total-cost MDP produced by [`build_mdp`].
///
/// The cemetery is index `states.len()` and has no rows of its own: it is
/// absorbing and costless by construction, so every table in here covers
/// ordinary states only.
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    /// Concrete state values, cemetery excluded.
    pub states: Vec<State>,
    /// Display names aligned with `states`.
    pub state_names: Vec<String>,
    pub pairs: ActionGrid,
    /// `cost[j][x][k]`: criterion `j` paid at state `x` under pair `k`;
    /// entries live in `[0, ∞]`.
    pub cost: Vec<Vec<Vec<f64>>>,
    /// `next[x][k]`: successor index, possibly the cemetery.
    pub next: Vec<Vec<usize>>,
    pub budgets: Vec<f64>,
    pub x0: usize,
    pub projection: ProjectionReport,
    /// Set when any cost entry came from a truncated θ = ∞ quadrature.
    pub truncated_costs: bool,
}

impl FiniteMdp {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn cemetery(&self) -> usize {
        self.states.len()
    }

    pub fn is_cemetery(&self, idx: usize) -> bool {
        idx == self.states.len()
    }

    /// Criteria count including the objective.
    pub fn n_criteria(&self) -> usize {
        self.cost.len()
    }

    pub fn state_name(&self, idx: usize) -> &str {
        if self.is_cemetery(idx) {
            "Δ"
        } else {
            &self.state_names[idx]
        }
    }

    /// Total cost across all criteria for one state/pair cell; the quantity
    /// minimized by the aggregate value iteration.
    pub fn aggregate_cost(&self, x: usize, k: usize) -> f64 {
        self.cost.iter().map(|c| c[x][k]).sum()
    }

    /// Index of the grid point nearest to a state value (the state itself
    /// on label domains).
    pub fn project_state(&self, s: State) -> usize {
        match s {
            State::Label(i) => i,
            State::Point(z) => {
                let lo = self.states[0].point();
                project(lo, self.projection.cell, self.states.len(), z)
            }
        }
    }
}

/// Uniform grid point `i` of `n` over `[lo, hi]`. Written so endpoint and
/// midpoint values come out bit-exact where the arithmetic allows (for
/// example 1.0 on a 201-point grid over [0, 2]).
pub fn grid_point(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    lo + (hi - lo) * (i as f64) / ((n - 1) as f64)
}

/// Nearest grid index for a point, ties resolved to the lower index.
fn project(lo: f64, cell: f64, n: usize, z: f64) -> usize {
    let u = (z - lo) / cell;
    let base = u.floor();
    let frac = u - base;
    let mut i = if frac > 0.5 { base + 1.0 } else { base };
    if i < 0.0 {
        i = 0.0;
    }
    let i = i as usize;
    i.min(n - 1)
}

/// Builds the finite MDP for an instance: enumerates states, evaluates the
/// flow and reset maps, integrates running costs along each wait, and
/// records how much grid projection moved any landing point.
pub fn build_mdp(problem: &Problem) -> Result<FiniteMdp> {
    problem.validate()?;
    let pairs = ActionGrid {
        thetas: problem.theta_grid.clone(),
        actions: problem.actions.clone(),
    };

    let (states, state_names, proj): (Vec<State>, Vec<String>, Option<(f64, f64, usize)>) =
        match &problem.domain {
            Domain::Labels(labels) => (
                (0..labels.len()).map(State::Label).collect(),
                labels.clone(),
                None,
            ),
            Domain::Interval { lo, hi } => {
                let n = problem.grid_points.expect("validated");
                let pts: Vec<f64> = (0..n).map(|i| grid_point(*lo, *hi, i, n)).collect();
                let names = pts.iter().map(|p| format!("{p}")).collect();
                let cell = (hi - lo) / (n - 1) as f64;
                (
                    pts.into_iter().map(State::Point).collect(),
                    names,
                    Some((*lo, cell, n)),
                )
            }
        };

    let n_states = states.len();
    let n_pairs = pairs.len();
    let n_criteria = problem.costs.len();
    let cemetery = n_states;

    let mut cost = vec![vec![vec![0.0f64; n_pairs]; n_states]; n_criteria];
    let mut next = vec![vec![cemetery; n_pairs]; n_states];
    let mut truncated = false;
    let mut max_disp = 0.0f64;

    for (xi, &x) in states.iter().enumerate() {
        for k in 0..n_pairs {
            let theta = pairs.theta(k);
            let action = pairs.action(k);
            for j in 0..n_criteria {
                let integral = problem.gradual_cost_integral(j, x, theta);
                truncated |= integral.truncated;
                let mut c = integral.value;
                if theta.is_finite() {
                    let landed = problem.flow_eval(x, theta)?;
                    c += problem.costs[j].impulse.eval(landed, action);
                }
                cost[j][xi][k] = c;
            }
            if theta.is_finite() {
                let landed = problem.flow_eval(x, theta)?;
                let target = apply_reset(problem, landed, action);
                next[xi][k] = match (&proj, target) {
                    (None, State::Label(i)) => i,
                    (Some((lo, cell, n)), State::Point(z)) => {
                        let i = project(*lo, *cell, *n, z);
                        let snapped = states[i].point();
                        max_disp = max_disp.max((z - snapped).abs());
                        i
                    }
                    _ => unreachable!("reset stays within the domain kind"),
                };
            }
        }
    }

    let (x0, x0_disp) = match (&proj, problem.x0) {
        (None, State::Label(i)) => (i, 0.0),
        (Some((lo, cell, n)), State::Point(z)) => {
            let i = project(*lo, *cell, *n, z);
            (i, (z - states[i].point()).abs())
        }
        _ => unreachable!("validated"),
    };

    let projection = match proj {
        None => ProjectionReport::exact(),
        Some((_, cell, _)) => {
            if x0_disp > cell {
                return Err(Error::GridTooCoarse(format!(
                    "initial state moved {x0_disp} under projection, more than one cell {cell}"
                )));
            }
            ProjectionReport {
                cell,
                max_displacement: max_disp,
                x0_displacement: x0_disp,
            }
        }
    };

    Ok(FiniteMdp {
        states,
        state_names,
        pairs,
        cost,
        next,
        budgets: problem.budgets.clone(),
        x0,
        projection,
        truncated_costs: truncated,
    })
}

fn apply_reset(problem: &Problem, landed: State, action: usize) -> State {
    match &problem.impulse_map {
        ImpulseMap::Table(map) => State::Label(map[landed.label()][action]),
        ImpulseMap::PerAction(resets) => {
            let z = match resets[action] {
                ResetMap::Target(t) => t,
                ResetMap::Affine { scale, shift } => scale * landed.point() + shift,
            };
            State::Point(problem.domain.clip(z))
        }
    }
}
