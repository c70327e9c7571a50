//! Arithmetic helpers on the extended half-line `[0, ∞]`.
//!
//! Costs, waiting times and aggregate values all live in `[0, ∞]`,
//! represented as `f64` with `f64::INFINITY` as the top element. Plain
//! `f64` addition already satisfies `finite + ∞ = ∞`; the one rule that
//! needs help is `0 · ∞ = 0`, which shows up when integrating a measure
//! against a cost table.

pub const INF: f64 = f64::INFINITY;

/// Product on `[0, ∞]` with the measure-theoretic convention `0 · ∞ = 0`.
pub fn mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Absolute difference that treats `∞ − ∞` as no change.
pub fn residual(a: f64, b: f64) -> f64 {
    if a.is_infinite() && b.is_infinite() {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Renders a value of `[0, ∞]` the way the config format spells it.
pub fn display(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

/// Extended-real to JSON: finite values stay numbers, `∞` becomes `"inf"`.
pub fn to_json(x: f64) -> serde_json::Value {
    if x.is_infinite() {
        serde_json::Value::String("inf".to_string())
    } else {
        serde_json::json!(x)
    }
}
