//! Time-aggregated presence measure of a solved instance.
//!
//! The occupation measure lives on decision epochs; this module converts it
//! into a measure over `state × (action ∪ {paused})` describing where the
//! trajectory actually spends its time. Each epoch `(x, θ, a)` of weight
//! `w` contributes an impulse atom of mass `w` at the pre-impulse landing
//! point, and `w·h` of "paused" mass at every flow sample `φ(x, i·h)` with
//! `i·h < θ`. Endless waits are scanned up to the reporting horizon and
//! flagged as truncated.

use crate::classify::{DeterministicStrategy, PositiveCostSet};
use crate::mdp::FiniteMdp;
use crate::problem::Problem;

/// Occupation atoms extended beyond the positive-cost set by following the
/// greedy continuation until absorption.
#[derive(Debug, Clone, PartialEq)]
pub enum FullOccupation {
    Finite {
        /// `(state, pair, weight)` in state-major order.
        atoms: Vec<(usize, usize, f64)>,
    },
    /// The greedy continuation loops forever outside the positive-cost set,
    /// so expected visit counts diverge there.
    Infinite { looping_state: usize },
}

/// Extends positive-set occupation weights with the mass that exits into
/// the greedy continuation.
pub fn full_occupation(
    mdp: &FiniteMdp,
    vset: &PositiveCostSet,
    weights: &[Vec<f64>],
    greedy: &DeterministicStrategy,
) -> FullOccupation {
    let v_states = vset.indices();
    let n = mdp.n_states();
    let mut atoms: Vec<(usize, usize, f64)> = Vec::new();
    let mut pending = vec![0.0f64; n];

    for (vp, &x) in v_states.iter().enumerate() {
        for (k, &w) in weights[vp].iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            atoms.push((x, k, w));
            let y = mdp.next[x][k];
            if !mdp.is_cemetery(y) && !vset.contains(y) {
                pending[y] += w;
            }
        }
    }
    if !vset.contains(mdp.x0) {
        pending[mdp.x0] += 1.0;
    }

    // Mass drains along the single greedy successor; any mass still moving
    // after n rounds is caught in a loop.
    let mut emitted = vec![0.0f64; n];
    for _ in 0..=n {
        if pending.iter().all(|m| *m == 0.0) {
            break;
        }
        let mut next_pending = vec![0.0f64; n];
        for (z, &m) in pending.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            emitted[z] += m;
            let y = mdp.next[z][greedy.choice[z]];
            if !mdp.is_cemetery(y) {
                next_pending[y] += m;
            }
        }
        pending = next_pending;
    }
    if let Some(z) = (0..n).find(|z| pending[*z] > 0.0) {
        return FullOccupation::Infinite { looping_state: z };
    }

    for (z, &m) in emitted.iter().enumerate() {
        if m > 0.0 {
            atoms.push((z, greedy.choice[z], m));
        }
    }
    atoms.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    FullOccupation::Finite { atoms }
}

/// Presence measure over states: impulse atoms by action, plus the sampled
/// "paused" mass.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedMeasure {
    /// `impulse[state][action]`: mass of impulses applied at that landing
    /// point.
    pub impulse: Vec<Vec<f64>>,
    /// Paused (flowing) mass per state, sampled on the `h`-grid.
    pub paused: Vec<f64>,
    /// Paused mass from finite waits inside the horizon.
    pub paused_mass_finite: f64,
    /// Paused mass from waits cut at the horizon.
    pub paused_mass_truncated: f64,
    pub truncated: bool,
    pub h: f64,
    pub horizon: f64,
}

/// Builds the aggregated measure from occupation atoms.
///
/// `h` is the flow sampling step and `horizon` the scan limit for endless
/// waits; the paused mass of a finite wait `θ` matches `θ` times its weight
/// to within one sample step.
pub fn aggregate_measure(
    problem: &Problem,
    mdp: &FiniteMdp,
    atoms: &[(usize, usize, f64)],
    h: f64,
    horizon: f64,
) -> AggregatedMeasure {
    assert!(h > 0.0 && h.is_finite(), "sampling step must be positive");
    assert!(horizon > 0.0, "horizon must be positive");
    let n = mdp.n_states();
    let n_actions = mdp.pairs.actions.len();
    let mut impulse = vec![vec![0.0f64; n_actions]; n];
    let mut paused = vec![0.0f64; n];
    let mut mass_finite = 0.0f64;
    let mut mass_truncated = 0.0f64;
    let mut truncated = false;

    for &(x, k, w) in atoms {
        let theta = mdp.pairs.theta(k);
        let state = mdp.states[x];
        let cut = theta > horizon;
        if cut {
            truncated = true;
        }
        let stop = theta.min(horizon);
        let mut i = 0u64;
        loop {
            let u = i as f64 * h;
            if u >= stop {
                break;
            }
            let z = problem
                .flow_eval(state, u)
                .expect("flow evaluation stays inside the domain");
            paused[mdp.project_state(z)] += w * h;
            if cut {
                mass_truncated += w * h;
            } else {
                mass_finite += w * h;
            }
            i += 1;
        }
        if theta.is_finite() {
            let landed = problem
                .flow_eval(state, theta)
                .expect("flow evaluation stays inside the domain");
            impulse[mdp.project_state(landed)][mdp.pairs.action(k)] += w;
        }
    }

    AggregatedMeasure {
        impulse,
        paused,
        paused_mass_finite: mass_finite,
        paused_mass_truncated: mass_truncated,
        truncated,
        h,
        horizon,
    }
}
