//! JSON renderings of toolkit results, and the progress-loop file format.
//!
//! A loop file is a JSON array of sets, each an array of formula strings:
//! `[["psi", "!a"], ["a"]]`.

use progloop_core::closure::FormulaSet;
use progloop_core::formula::{parse_formula, FormulaError};
use progloop_core::progress::{ProgressLoop, TraceNode, TraceStep};
use progloop_core::rational::format_rational;
use progloop_core::{PathFormula, Rational};
use serde_json::{json, Value};

pub fn rational(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

pub fn formula_set<'a>(xs: impl IntoIterator<Item = &'a progloop_core::StateFormula>) -> Value {
    xs.into_iter().map(|f| Value::String(f.to_string())).collect()
}

pub fn path_set<'a>(xs: impl IntoIterator<Item = &'a PathFormula>) -> Value {
    xs.into_iter().map(|f| Value::String(f.to_string())).collect()
}

pub fn progress_loop(l: &ProgressLoop) -> Value {
    l.sets.iter().map(formula_set).collect()
}

pub fn trace(node: &TraceNode) -> Value {
    let mut v = json!({
        "state": node.state,
        "x": formula_set(&node.x),
        "measure": node.measure,
        "b": node.b,
        "bound": node.bound.to_string(),
        "size": node.size,
    });
    match &node.step {
        TraceStep::Bottom => {
            v["step"] = json!("bottom");
        }
        TraceStep::Loop { progress_loop: l, delta, epsilon, targets, children } => {
            v["step"] = json!("loop");
            v["loop"] = progress_loop(l);
            v["delta"] = formula_set(delta);
            v["epsilon"] = rational(epsilon);
            v["targets"] = targets
                .iter()
                .map(|(name, alpha)| json!({"state": name, "alpha": rational(alpha)}))
                .collect();
            v["children"] = children.iter().map(trace).collect();
        }
    }
    v
}

/// Indented one-line-per-level rendering.
pub fn trace_text(node: &TraceNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let kind = match &node.step {
        TraceStep::Bottom => "bottom".to_string(),
        TraceStep::Loop { progress_loop: l, epsilon, .. } => {
            format!("loop of {} sets, epsilon {}", l.len(), format_rational(epsilon))
        }
    };
    out.push_str(&format!(
        "{}{}: measure {}, b {}, {} states (bound {}), {}\n",
        pad, node.state, node.measure, node.b, node.size, node.bound, kind
    ));
    if let TraceStep::Loop { children, .. } = &node.step {
        for ch in children {
            trace_text(ch, depth + 1, out);
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoopFileError {
    #[error("malformed loop JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("set {set}: {source}")]
    Formula { set: usize, source: FormulaError },
}

pub fn parse_loop(text: &str) -> Result<ProgressLoop, LoopFileError> {
    let raw: Vec<Vec<String>> = serde_json::from_str(text)?;
    let sets = raw
        .iter()
        .enumerate()
        .map(|(i, set)| {
            set.iter()
                .map(|f| parse_formula(f).map_err(|source| LoopFileError::Formula { set: i, source }))
                .collect::<Result<FormulaSet, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProgressLoop::new(sets))
}
