//! Loading problem instances from their JSON document form.
//!
//! A document has sections `states`, `actions`, `flow`, `impulse_map`,
//! `costs`, `budgets`, `x0` and `theta_grid`, plus `discretization` for
//! interval domains and an optional `quadrature` override. Waiting times
//! are numbers or the token `"inf"`; budgets are finite numbers.
//! Malformed documents are rejected with the path of the offending field;
//! syntactically broken ones with the parser's line/column position.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::ext;
use crate::problem::{
    CostTerm, Domain, Flow, GradualRate, ImpulseCost, ImpulseMap, Problem, QuadratureConfig,
    ResetMap, State,
};

/// A value paired with its document path, so every rejection can name the
/// exact field.
#[derive(Clone, Copy)]
struct Node<'a> {
    path: &'a str,
    value: &'a Value,
}

/// Owned variant used when descending into children.
struct Child<'a> {
    path: String,
    value: &'a Value,
}

impl<'a> Child<'a> {
    fn node(&self) -> Node<'_> {
        Node {
            path: &self.path,
            value: self.value,
        }
    }
}

impl<'a> Node<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        let location = if self.path.is_empty() { "document" } else { self.path };
        Error::config(location, message)
    }

    fn object(&self, allowed: &[&str]) -> Result<&'a serde_json::Map<String, Value>> {
        let map = self
            .value
            .as_object()
            .ok_or_else(|| self.err("expected an object"))?;
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(self.err(format!(
                    "unknown field `{key}`; expected one of {}",
                    allowed
                        .iter()
                        .map(|a| format!("`{a}`"))
                        .collect::<Vec<_>>()
                        .join(", ")
                )));
            }
        }
        Ok(map)
    }

    fn get(&self, key: &str) -> Result<Child<'a>> {
        self.opt(key)
            .ok_or_else(|| self.err(format!("missing required field `{key}`")))
    }

    fn opt(&self, key: &str) -> Option<Child<'a>> {
        let map = self.value.as_object()?;
        map.get(key).map(|value| Child {
            path: self.join(key),
            value,
        })
    }

    fn join(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn items(&self) -> Result<Vec<Child<'a>>> {
        let arr = self
            .value
            .as_array()
            .ok_or_else(|| self.err("expected an array"))?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(i, value)| Child {
                path: format!("{}[{i}]", self.path),
                value,
            })
            .collect())
    }

    fn string(&self) -> Result<&'a str> {
        self.value
            .as_str()
            .ok_or_else(|| self.err("expected a string"))
    }

    fn number(&self) -> Result<f64> {
        self.value
            .as_f64()
            .ok_or_else(|| self.err("expected a number"))
    }

    /// A number or the token `"inf"`.
    fn extended(&self) -> Result<f64> {
        match self.value {
            Value::String(s) if s == "inf" => Ok(ext::INF),
            Value::Number(_) => self.number(),
            _ => Err(self.err("expected a number or \"inf\"")),
        }
    }

    fn size(&self) -> Result<usize> {
        self.value
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| self.err("expected a nonnegative integer"))
    }

    fn numbers(&self) -> Result<Vec<f64>> {
        self.items()?.iter().map(|c| c.node().number()).collect()
    }
}

/// Resolves a label string against the declared state list.
fn label_index(node: Node<'_>, labels: &[String]) -> Result<usize> {
    let name = node.string()?;
    labels
        .iter()
        .position(|l| l == name)
        .ok_or_else(|| node.err(format!("unknown state label `{name}`")))
}

fn parse_states(node: Node<'_>) -> Result<Domain> {
    node.object(&["labels", "interval"])?;
    match (node.opt("labels"), node.opt("interval")) {
        (Some(labels), None) => {
            let names: Result<Vec<String>> = labels
                .node()
                .items()?
                .iter()
                .map(|c| c.node().string().map(str::to_string))
                .collect();
            Ok(Domain::Labels(names?))
        }
        (None, Some(interval)) => {
            let n = interval.node();
            n.object(&["lo", "hi"])?;
            Ok(Domain::Interval {
                lo: n.get("lo")?.node().number()?,
                hi: n.get("hi")?.node().number()?,
            })
        }
        _ => Err(node.err("exactly one of `labels` or `interval` is required")),
    }
}

fn parse_flow(node: Node<'_>, labels: Option<&[String]>) -> Result<Flow> {
    let kind = node.get("type")?;
    match kind.node().string()? {
        "identity" => {
            node.object(&["type"])?;
            Ok(Flow::Identity)
        }
        "tabulated" => {
            node.object(&["type", "times", "map"])?;
            let labels = labels
                .ok_or_else(|| node.err("tabulated flows require a labeled state space"))?;
            let times = node.get("times")?.node().numbers()?;
            let map: Result<Vec<Vec<usize>>> = node
                .get("map")?
                .node()
                .items()?
                .iter()
                .map(|row| {
                    row.node()
                        .items()?
                        .iter()
                        .map(|c| label_index(c.node(), labels))
                        .collect()
                })
                .collect();
            Ok(Flow::Tabulated { times, map: map? })
        }
        "exponential-decay" => {
            node.object(&["type", "rate"])?;
            Ok(Flow::ExponentialDecay {
                rate: node.get("rate")?.node().number()?,
            })
        }
        "linear-drift" => {
            node.object(&["type", "velocity"])?;
            Ok(Flow::LinearDrift {
                velocity: node.get("velocity")?.node().number()?,
            })
        }
        other => Err(node.err(format!(
            "unknown flow type `{other}`; expected `identity`, `tabulated`, \
             `exponential-decay` or `linear-drift`"
        ))),
    }
}

fn parse_impulse_map(node: Node<'_>, labels: Option<&[String]>, n_actions: usize) -> Result<ImpulseMap> {
    let kind = node.get("type")?;
    match kind.node().string()? {
        "table" => {
            node.object(&["type", "targets"])?;
            let labels =
                labels.ok_or_else(|| node.err("table maps require a labeled state space"))?;
            let rows: Result<Vec<Vec<usize>>> = node
                .get("targets")?
                .node()
                .items()?
                .iter()
                .map(|row| {
                    row.node()
                        .items()?
                        .iter()
                        .map(|c| label_index(c.node(), labels))
                        .collect()
                })
                .collect();
            Ok(ImpulseMap::Table(rows?))
        }
        "per-action" => {
            node.object(&["type", "resets"])?;
            let resets: Result<Vec<ResetMap>> = node
                .get("resets")?
                .node()
                .items()?
                .iter()
                .map(|c| parse_reset(c.node()))
                .collect();
            let resets = resets?;
            if resets.len() != n_actions {
                return Err(node.err(format!(
                    "expected one reset per action ({n_actions}), found {}",
                    resets.len()
                )));
            }
            Ok(ImpulseMap::PerAction(resets))
        }
        other => Err(node.err(format!(
            "unknown impulse map type `{other}`; expected `table` or `per-action`"
        ))),
    }
}

fn parse_reset(node: Node<'_>) -> Result<ResetMap> {
    let kind = node.get("type")?;
    match kind.node().string()? {
        "target" => {
            node.object(&["type", "point"])?;
            Ok(ResetMap::Target(node.get("point")?.node().number()?))
        }
        "affine" => {
            node.object(&["type", "scale", "shift"])?;
            Ok(ResetMap::Affine {
                scale: node.get("scale")?.node().number()?,
                shift: node.get("shift")?.node().number()?,
            })
        }
        other => Err(node.err(format!(
            "unknown reset type `{other}`; expected `target` or `affine`"
        ))),
    }
}

fn parse_gradual(node: Node<'_>) -> Result<GradualRate> {
    let kind = node.get("type")?;
    match kind.node().string()? {
        "table" => {
            node.object(&["type", "rates"])?;
            Ok(GradualRate::Table(node.get("rates")?.node().numbers()?))
        }
        "poly" => {
            node.object(&["type", "coeffs"])?;
            Ok(GradualRate::Poly(node.get("coeffs")?.node().numbers()?))
        }
        other => Err(node.err(format!(
            "unknown gradual rate type `{other}`; expected `table` or `poly`"
        ))),
    }
}

fn parse_impulse_cost(node: Node<'_>) -> Result<ImpulseCost> {
    let kind = node.get("type")?;
    match kind.node().string()? {
        "constant" => {
            node.object(&["type", "value"])?;
            Ok(ImpulseCost::Constant(node.get("value")?.node().number()?))
        }
        "per-action" => {
            node.object(&["type", "values"])?;
            Ok(ImpulseCost::PerAction(node.get("values")?.node().numbers()?))
        }
        "table" => {
            node.object(&["type", "values"])?;
            let rows: Result<Vec<Vec<f64>>> = node
                .get("values")?
                .node()
                .items()?
                .iter()
                .map(|row| row.node().numbers())
                .collect();
            Ok(ImpulseCost::Table(rows?))
        }
        other => Err(node.err(format!(
            "unknown impulse cost type `{other}`; expected `constant`, `per-action` or `table`"
        ))),
    }
}

fn parse_quadrature(node: Node<'_>) -> Result<QuadratureConfig> {
    node.object(&["rel_step", "abs_step_cap", "horizon", "tail_tol"])?;
    let mut q = QuadratureConfig::default();
    if let Some(c) = node.opt("rel_step") {
        q.rel_step = c.node().number()?;
    }
    if let Some(c) = node.opt("abs_step_cap") {
        q.abs_step_cap = c.node().number()?;
    }
    if let Some(c) = node.opt("horizon") {
        q.horizon = c.node().number()?;
    }
    if let Some(c) = node.opt("tail_tol") {
        q.tail_tol = c.node().number()?;
    }
    Ok(q)
}

/// Builds a validated problem from a parsed JSON document.
pub fn problem_from_json(document: &Value) -> Result<Problem> {
    let root = Node {
        path: "",
        value: document,
    };
    root.object(&[
        "states",
        "actions",
        "flow",
        "impulse_map",
        "costs",
        "budgets",
        "x0",
        "theta_grid",
        "discretization",
        "quadrature",
    ])?;

    let domain = parse_states(root.get("states")?.node())?;
    let labels: Option<Vec<String>> = match &domain {
        Domain::Labels(l) => Some(l.clone()),
        Domain::Interval { .. } => None,
    };

    let actions_node = root.get("actions")?;
    let actions: Result<Vec<String>> = actions_node
        .node()
        .items()?
        .iter()
        .map(|c| c.node().string().map(str::to_string))
        .collect();
    let actions = actions?;

    let flow = parse_flow(root.get("flow")?.node(), labels.as_deref())?;
    let impulse_map = parse_impulse_map(
        root.get("impulse_map")?.node(),
        labels.as_deref(),
        actions.len(),
    )?;

    let costs: Result<Vec<CostTerm>> = root
        .get("costs")?
        .node()
        .items()?
        .iter()
        .map(|c| {
            let n = c.node();
            n.object(&["gradual", "impulse"])?;
            Ok(CostTerm {
                gradual: parse_gradual(n.get("gradual")?.node())?,
                impulse: parse_impulse_cost(n.get("impulse")?.node())?,
            })
        })
        .collect();
    let costs = costs?;

    let budgets: Result<Vec<f64>> = root
        .get("budgets")?
        .node()
        .items()?
        .iter()
        .map(|c| c.node().number())
        .collect();
    let budgets = budgets?;

    let x0_node = root.get("x0")?;
    let x0 = match &labels {
        Some(l) => State::Label(label_index(x0_node.node(), l)?),
        None => State::Point(x0_node.node().number()?),
    };

    // The waiting-time grid may sit at top level or inside `discretization`,
    // but not both.
    let disc = root.opt("discretization");
    let mut grid_points = None;
    let mut disc_theta = None;
    if let Some(d) = &disc {
        let n = d.node();
        n.object(&["grid_points", "theta_grid"])?;
        if let Some(g) = n.opt("grid_points") {
            grid_points = Some(g.node().size()?);
        }
        if let Some(t) = n.opt("theta_grid") {
            disc_theta = Some(t);
        }
    }
    let theta_node = match (root.opt("theta_grid"), disc_theta) {
        (Some(t), None) => t,
        (None, Some(t)) => t,
        (Some(t), Some(_)) => {
            return Err(t
                .node()
                .err("waiting-time grid given both here and under `discretization`"))
        }
        (None, None) => return Err(root.err("missing required field `theta_grid`")),
    };
    let theta_grid: Result<Vec<f64>> = theta_node
        .node()
        .items()?
        .iter()
        .map(|c| c.node().extended())
        .collect();

    let quadrature = match root.opt("quadrature") {
        Some(q) => parse_quadrature(q.node())?,
        None => QuadratureConfig::default(),
    };

    let problem = Problem {
        domain,
        actions,
        flow,
        impulse_map,
        costs,
        budgets,
        x0,
        theta_grid: theta_grid?,
        grid_points,
        quadrature,
    };
    problem.validate()?;
    Ok(problem)
}

/// Parses a document from text; syntax errors carry line/column positions.
pub fn problem_from_str(text: &str) -> Result<Problem> {
    let document: Value = serde_json::from_str(text).map_err(|e| {
        Error::config(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    problem_from_json(&document)
}

/// Reads and parses a document from disk.
pub fn load_problem(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    problem_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn location(err: Error) -> String {
        match err {
            Error::Config { location, .. } => location,
            other => panic!("expected a config error, got {other}"),
        }
    }

    fn jump_document() -> Value {
        serde_json::json!({
            "states": {"labels": ["s0", "s1"]},
            "actions": ["a"],
            "flow": {"type": "identity"},
            "impulse_map": {"type": "table", "targets": [["s1"], ["s1"]]},
            "costs": [
                {"gradual": {"type": "table", "rates": [1.0, 0.0]},
                 "impulse": {"type": "constant", "value": 2.0}}
            ],
            "budgets": [],
            "x0": "s0",
            "theta_grid": [0, 1, "inf"]
        })
    }

    #[test]
    fn loads_a_labeled_instance() {
        let p = problem_from_json(&jump_document()).unwrap();
        assert_eq!(p.domain, Domain::Labels(vec!["s0".into(), "s1".into()]));
        assert_eq!(p.x0, State::Label(0));
        assert_eq!(p.theta_grid, vec![0.0, 1.0, ext::INF]);
        assert_eq!(p.impulse_map, ImpulseMap::Table(vec![vec![1], vec![1]]));
        assert_eq!(p.grid_points, None);
    }

    #[test]
    fn loads_an_interval_instance_with_discretization() {
        let doc = serde_json::json!({
            "states": {"interval": {"lo": 0.0, "hi": 2.0}},
            "actions": ["a"],
            "flow": {"type": "exponential-decay", "rate": 1.0},
            "impulse_map": {"type": "per-action", "resets": [{"type": "target", "point": 0.0}]},
            "costs": [
                {"gradual": {"type": "poly", "coeffs": [0.0, 1.0]},
                 "impulse": {"type": "constant", "value": 0.1}}
            ],
            "budgets": [],
            "x0": 1.0,
            "discretization": {"grid_points": 201, "theta_grid": [0, 1, "inf"]}
        });
        let p = problem_from_json(&doc).unwrap();
        assert_eq!(p.grid_points, Some(201));
        assert_eq!(p.theta_grid, vec![0.0, 1.0, ext::INF]);
        assert_eq!(p.x0, State::Point(1.0));
    }

    #[test]
    fn budgets_must_be_finite_numbers() {
        let mut doc = jump_document();
        doc["costs"] = serde_json::json!([
            {"gradual": {"type": "table", "rates": [1.0, 0.0]},
             "impulse": {"type": "constant", "value": 2.0}},
            {"gradual": {"type": "table", "rates": [0.0, 0.0]},
             "impulse": {"type": "constant", "value": 1.0}}
        ]);
        doc["budgets"] = serde_json::json!([4.0]);
        let p = problem_from_json(&doc).unwrap();
        assert_eq!(p.budgets, vec![4.0]);

        doc["budgets"] = serde_json::json!(["inf"]);
        let err = problem_from_json(&doc).unwrap_err();
        assert_eq!(location(err), "budgets[0]");
    }

    #[test]
    fn unknown_field_is_named() {
        let mut doc = jump_document();
        doc["flow"] = serde_json::json!({"type": "identity", "speed": 3});
        let err = problem_from_json(&doc).unwrap_err();
        assert_eq!(location(err), "flow");
    }

    #[test]
    fn unknown_label_is_located() {
        let mut doc = jump_document();
        doc["impulse_map"]["targets"][1][0] = serde_json::json!("s9");
        let err = problem_from_json(&doc).unwrap_err();
        assert_eq!(location(err), "impulse_map.targets[1][0]");
    }

    #[test]
    fn wrong_scalar_kind_is_located() {
        let mut doc = jump_document();
        doc["costs"][0]["impulse"]["value"] = serde_json::json!("two");
        let err = problem_from_json(&doc).unwrap_err();
        assert_eq!(location(err), "costs[0].impulse.value");
    }

    #[test]
    fn duplicated_theta_grid_is_rejected() {
        let mut doc = jump_document();
        doc["discretization"] = serde_json::json!({"theta_grid": [0, "inf"]});
        let err = problem_from_json(&doc).unwrap_err();
        assert_eq!(location(err), "theta_grid");
    }

    #[test]
    fn missing_section_is_named() {
        let mut doc = jump_document();
        doc.as_object_mut().unwrap().remove("actions");
        let err = problem_from_json(&doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`actions`"), "{msg}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = problem_from_str("{\n  \"states\": [,]\n}").unwrap_err();
        assert!(location(err).starts_with("line 2"), "wrong location");
    }

    #[test]
    fn validation_runs_after_parsing() {
        let mut doc = jump_document();
        doc["theta_grid"] = serde_json::json!([0, 1]);
        let err = problem_from_json(&doc).unwrap_err();
        assert!(err.to_string().contains("inf"));
        assert_eq!(location(err), "theta_grid");
    }
}
