//! Metric on time-extended states with the time axis compactified to
//! `[0, 1]`.
//!
//! Times live in `[0, ∞]` and are folded through `g(s) = 1/(1 + 1/s)`,
//! which maps 0 to 0 and ∞ to 1 — written in exactly that form so IEEE
//! division produces both endpoint values without special-casing. States
//! pair a time with a point of the underlying space, where "no point"
//! stands for the absorbing rest reached only at time ∞.

use crate::error::{Error, Result};
use crate::ext;

/// Compactified time coordinate: monotone from `[0, ∞]` onto `[0, 1]`.
pub fn compactify(s: f64) -> f64 {
    assert!(s >= 0.0, "time must be in [0, ∞], got {s}");
    1.0 / (1.0 + 1.0 / s)
}

/// A point of the time-extended space. `state` is `None` exactly at the
/// absorbing rest, which is only reachable with `time = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedState<T> {
    pub time: f64,
    pub state: Option<T>,
}

impl<T> TimedState<T> {
    /// An ordinary point at a finite-or-infinite time.
    pub fn at(time: f64, state: T) -> Result<Self> {
        if !(time >= 0.0) {
            return Err(Error::Domain(format!("time {time} outside [0, ∞]")));
        }
        if time.is_infinite() {
            return Err(Error::Domain(
                "time ∞ is reserved for the absorbing rest".into(),
            ));
        }
        Ok(TimedState {
            time,
            state: Some(state),
        })
    }

    /// The absorbing rest.
    pub fn rest() -> Self {
        TimedState {
            time: f64::INFINITY,
            state: None,
        }
    }

    pub fn is_rest(&self) -> bool {
        self.state.is_none()
    }
}

/// Distance between timed states: the base distance scaled down as either
/// time grows, plus the gap between compactified times. The base term
/// vanishes when either side is the absorbing rest.
pub fn timed_distance<T>(
    a: &TimedState<T>,
    b: &TimedState<T>,
    base: impl Fn(&T, &T) -> f64,
) -> f64 {
    let ga = compactify(a.time);
    let gb = compactify(b.time);
    let spatial = match (&a.state, &b.state) {
        (Some(x), Some(y)) => base(x, y),
        _ => 0.0,
    };
    spatial * (1.0 - ga.max(gb)) + (ga - gb).abs()
}

/// Squashes an arbitrary metric into one bounded by 2, preserving the
/// topology: `ρ ↦ 2ρ/(1+ρ)`.
pub fn bounded_metric<T>(base: impl Fn(&T, &T) -> f64) -> impl Fn(&T, &T) -> f64 {
    move |x, y| {
        let d = base(x, y);
        2.0 * d / (1.0 + d)
    }
}

/// Distance on the unit interval with the endpoints glued: the circle
/// metric, bounded by 1/2. The self-tests use it as their base space.
pub fn wrapped_unit_distance(x: &f64, y: &f64) -> f64 {
    let d = (x - y).abs();
    d.min(1.0 - d)
}

/// Diagnostics of the built-in metric checks run by the self-test command.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSelfTest {
    pub samples: usize,
    pub endpoint_error: f64,
    pub max_symmetry_violation: f64,
    pub max_triangle_violation: f64,
    pub max_identity_violation: f64,
    /// Smallest distance among constructed pairs that differ in time, in
    /// space, or by involving the rest; must stay strictly positive.
    pub min_distinct_distance: f64,
    pub pass: bool,
}

/// Exercises the metric axioms on sampled timed states over the unit
/// interval with the wrapped (circle) base metric, plus the exactness of
/// the time compactification at its endpoints.
pub fn metric_selftest(samples: usize, seed: u64) -> MetricSelfTest {
    use crate::rng::Stream;
    assert!(samples >= 1);
    let mut stream = Stream::new(seed, 0);
    let draw = |s: &mut Stream| -> TimedState<f64> {
        match s.index(4) {
            0 => TimedState::rest(),
            1 => TimedState::at(0.0, s.range(0.0, 1.0)).unwrap(),
            2 => TimedState::at(s.range(0.0, 4.0), s.range(0.0, 1.0)).unwrap(),
            _ => TimedState::at(s.range(0.0, 100.0), s.range(0.0, 1.0)).unwrap(),
        }
    };
    let base = wrapped_unit_distance;

    let endpoint_error = compactify(0.0)
        .abs()
        .max((compactify(f64::INFINITY) - 1.0).abs());

    let mut sym = 0.0f64;
    let mut tri = 0.0f64;
    let mut ident = 0.0f64;
    for _ in 0..samples {
        let (x, y, z) = (draw(&mut stream), draw(&mut stream), draw(&mut stream));
        let dxy = timed_distance(&x, &y, &base);
        let dyx = timed_distance(&y, &x, &base);
        let dxz = timed_distance(&x, &z, &base);
        let dzy = timed_distance(&z, &y, &base);
        sym = sym.max((dxy - dyx).abs());
        tri = tri.max(dxy - (dxz + dzy));
        ident = ident.max(timed_distance(&x, &x, &base));
    }

    // Distinct points must be separated: differing space at equal time,
    // differing time at equal space, and anything against the rest.
    let probes = [
        (
            TimedState::at(1.0, 0.2).unwrap(),
            TimedState::at(1.0, 0.7).unwrap(),
        ),
        (
            TimedState::at(0.5, 0.4).unwrap(),
            TimedState::at(2.5, 0.4).unwrap(),
        ),
        (TimedState::at(3.0, 0.9).unwrap(), TimedState::rest()),
        (TimedState::at(0.0, 0.0).unwrap(), TimedState::rest()),
    ];
    let min_distinct = probes
        .iter()
        .map(|(a, b)| timed_distance(a, b, base))
        .fold(ext::INF, f64::min);

    let pass =
        endpoint_error == 0.0 && sym == 0.0 && tri <= 1e-12 && ident == 0.0 && min_distinct > 0.0;
    MetricSelfTest {
        samples,
        endpoint_error,
        max_symmetry_violation: sym,
        max_triangle_violation: tri,
        max_identity_violation: ident,
        min_distinct_distance: min_distinct,
        pass,
    }
}

/// Diagnostics of the convergence characterization: sequences with time
/// marching to ∞ approach the rest regardless of their space coordinate,
/// while sequences with bounded times converge exactly when both
/// coordinates do.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCheck {
    /// Sequences sampled per regime.
    pub sequences: usize,
    /// Worst |distance-to-rest − 1/(1+t)| over diverging-time sequences.
    pub max_rest_error: f64,
    /// Worst final distance to the rest after the time blow-up.
    pub max_final_to_rest: f64,
    /// Worst final distance for sequences converging to a finite point.
    pub max_final_finite: f64,
    /// Smallest distance kept by the non-convergent control sequences.
    pub min_separation: f64,
    pub pass: bool,
}

/// Samples `sequences` runs of each regime and the two non-convergent
/// controls, all on the wrapped unit interval.
pub fn convergence_selftest(sequences: usize, seed: u64) -> ConvergenceCheck {
    use crate::rng::Stream;
    assert!(sequences >= 1);
    let base = wrapped_unit_distance;
    let wrap = |x: f64| x - x.floor();

    let mut max_rest_error = 0.0f64;
    let mut max_final_to_rest = 0.0f64;
    let mut max_final_finite = 0.0f64;
    let mut min_separation = ext::INF;

    for run in 0..sequences {
        let mut s = Stream::new(seed, run as u64);

        // Time marching to ∞ along a geometric schedule, space wandering
        // arbitrarily: distance to the rest is exactly 1 − g(t).
        let t0 = s.range(0.1, 5.0);
        let mut last = ext::INF;
        for n in 0..45 {
            let t = t0 * 2.0f64.powi(n);
            let p = TimedState::at(t, s.range(0.0, 1.0)).unwrap();
            let d = timed_distance(&p, &TimedState::rest(), base);
            max_rest_error = max_rest_error.max((d - 1.0 / (1.0 + t)).abs());
            assert!(d <= last, "distance to rest must fall as time grows");
            last = d;
        }
        max_final_to_rest = max_final_to_rest.max(last);

        // Both coordinates converging to a finite limit point.
        let t_star = s.range(0.0, 10.0);
        let x_star = s.range(0.0, 1.0);
        let limit = TimedState::at(t_star, x_star).unwrap();
        let dt = s.range(0.1, 2.0);
        let dx = s.range(0.05, 0.4);
        let mut final_d = ext::INF;
        for n in 0..45 {
            let shrink = 2.0f64.powi(-n);
            let p = TimedState::at(t_star + dt * shrink, wrap(x_star + dx * shrink)).unwrap();
            final_d = timed_distance(&p, &limit, base);
        }
        max_final_finite = max_final_finite.max(final_d);

        // Control: space keeps oscillating while time settles — the
        // sequence must stay separated from its would-be limit.
        for n in (5..45).step_by(2) {
            let shrink = 2.0f64.powi(-n);
            let p = TimedState::at(t_star + dt * shrink, wrap(x_star + 0.25)).unwrap();
            min_separation = min_separation.min(timed_distance(&p, &limit, base));
        }

        // Control: space settles but time converges to the wrong value.
        for n in 5..45 {
            let shrink = 2.0f64.powi(-n);
            let p = TimedState::at(t_star + 1.0 + dt * shrink, x_star).unwrap();
            min_separation = min_separation.min(timed_distance(&p, &limit, base));
        }
    }

    // Times stay below 11 in the finite regime, so 1 − max(g) ≥ 1/12 and
    // the oscillating control keeps distance ≥ 0.25/12; the wrong-time
    // control keeps at least the compactified gap over [t*, t*+1].
    let pass = max_rest_error <= 1e-12
        && max_final_to_rest <= 1e-12
        && max_final_finite <= 1e-9
        && min_separation >= 0.005;
    ConvergenceCheck {
        sequences,
        max_rest_error,
        max_final_to_rest,
        max_final_finite,
        min_separation,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compactified_endpoints_are_exact() {
        assert_eq!(compactify(0.0), 0.0);
        assert_eq!(compactify(f64::INFINITY), 1.0);
        assert_eq!(compactify(1.0), 0.5);
    }

    #[test]
    fn compactification_is_monotone() {
        let mut last = -1.0;
        for s in [0.0, 1e-9, 0.1, 0.5, 1.0, 3.0, 100.0, 1e12, f64::INFINITY] {
            let g = compactify(s);
            assert!(g > last || (g == 0.0 && last < 0.0), "not monotone at {s}");
            assert!((0.0..=1.0).contains(&g));
            last = g;
        }
    }

    #[test]
    fn rest_state_requires_infinite_time() {
        assert!(TimedState::at(f64::INFINITY, 1.0).is_err());
        assert!(TimedState::at(-1.0, 1.0).is_err());
        let rest: TimedState<f64> = TimedState::rest();
        assert!(rest.is_rest());
        assert!(rest.time.is_infinite());
    }

    #[test]
    fn distance_to_rest_ignores_space() {
        let base = |x: &f64, y: &f64| (x - y).abs();
        let rest = TimedState::rest();
        let a = TimedState::at(1.0, 0.25).unwrap();
        let b = TimedState::at(1.0, 0.75).unwrap();
        // Both sit at compactified time 0.5; rest sits at 1.
        assert_eq!(timed_distance(&a, &rest, base), 0.5);
        assert_eq!(timed_distance(&b, &rest, base), 0.5);
        assert_eq!(timed_distance(&rest, &rest, base), 0.0);
    }

    #[test]
    fn same_time_distance_scales_the_base_metric() {
        let base = |x: &f64, y: &f64| (x - y).abs();
        let a = TimedState::at(1.0, 0.0).unwrap();
        let b = TimedState::at(1.0, 1.0).unwrap();
        // Scale factor 1 − g(1) = 0.5.
        assert_eq!(timed_distance(&a, &b, base), 0.5);
        let c = TimedState::at(0.0, 0.0).unwrap();
        let d = TimedState::at(0.0, 1.0).unwrap();
        assert_eq!(timed_distance(&c, &d, base), 1.0);
    }

    #[test]
    fn bounded_metric_stays_under_two() {
        let b = bounded_metric(|x: &f64, y: &f64| (x - y).abs());
        assert_eq!(b(&0.0, &0.0), 0.0);
        assert_eq!(b(&0.0, &1.0), 1.0);
        assert!(b(&0.0, &1e9) < 2.0);
    }

    #[test]
    fn selftest_passes() {
        let report = metric_selftest(2000, 11);
        assert!(report.pass, "{report:?}");
        assert_eq!(report.endpoint_error, 0.0);
        assert!(report.min_distinct_distance > 0.0);
    }

    #[test]
    fn wrapped_distance_glues_the_endpoints() {
        assert_eq!(wrapped_unit_distance(&0.0, &1.0), 0.0);
        assert_eq!(wrapped_unit_distance(&0.125, &0.875), 0.25);
        assert_eq!(wrapped_unit_distance(&0.25, &0.5), 0.25);
        assert_eq!(wrapped_unit_distance(&0.0, &0.5), 0.5);
    }

    #[test]
    fn convergence_regimes_pass() {
        let report = convergence_selftest(100, 7);
        assert!(report.pass, "{report:?}");
        assert!(report.max_final_finite <= 1e-9);
        assert!(report.min_separation >= 0.005);
    }
}
