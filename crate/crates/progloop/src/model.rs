//! JSON and DOT forms of a chain.
//!
//! ```json
//! {"states":[{"id":"s","ap":[]},{"id":"t","ap":["a"]}],
//!  "edges":[{"from":"s","to":"t","p":"1"},{"from":"t","to":"s","p":"3/5"}]}
//! ```
//!
//! Probabilities are strings so they stay exact.

use std::fmt::Write as _;
use std::path::Path;

use progloop_core::markov::ChainError;
use progloop_core::rational::{format_rational, parse_rational, RationalError};
use progloop_core::MarkovChain;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: Vec<StateEntry>,
    pub edges: Vec<EdgeEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub id: String,
    #[serde(default)]
    pub ap: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub from: String,
    pub to: String,
    pub p: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("edge {from} -> {to}: {source}")]
    Probability { from: String, to: String, source: RationalError },
    #[error("invalid chain: {0}")]
    Chain(#[from] ChainError),
}

impl ModelFile {
    pub fn from_chain(m: &MarkovChain) -> Self {
        let states = m
            .states()
            .map(|s| StateEntry { id: m.name(s).into(), ap: m.labels(s).iter().cloned().collect() })
            .collect();
        let edges = m
            .states()
            .flat_map(|s| {
                m.successors(s).iter().map(move |(t, p)| EdgeEntry {
                    from: m.name(s).into(),
                    to: m.name(*t).into(),
                    p: format_rational(p),
                })
            })
            .collect();
        ModelFile { states, edges }
    }

    /// Builds and validates the chain.
    pub fn to_chain(&self) -> Result<MarkovChain, ModelError> {
        let mut b = MarkovChain::builder();
        for s in &self.states {
            b.add_state(&s.id, s.ap.iter().map(String::as_str));
        }
        for e in &self.edges {
            let p = parse_rational(&e.p).map_err(|source| ModelError::Probability {
                from: e.from.clone(),
                to: e.to.clone(),
                source,
            })?;
            b.add_edge(&e.from, &e.to, p);
        }
        Ok(b.build()?)
    }
}

pub fn parse_model(text: &str) -> Result<MarkovChain, ModelError> {
    serde_json::from_str::<ModelFile>(text)?.to_chain()
}

pub fn read_model(path: &Path) -> Result<MarkovChain, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    parse_model(&text)
}

pub fn model_to_json(m: &MarkovChain) -> String {
    serde_json::to_string_pretty(&ModelFile::from_chain(m)).expect("plain data serialises")
}

/// Graphviz digraph; node labels carry the propositions, edge labels the
/// exact probabilities.
pub fn to_dot(m: &MarkovChain) -> String {
    let mut out = String::from("digraph chain {\n");
    for s in m.states() {
        let aps: Vec<&str> = m.labels(s).iter().map(String::as_str).collect();
        let _ =
            writeln!(out, "  {:?} [label={:?}];", m.name(s), format!("{}\n{{{}}}", m.name(s), aps.join(",")));
    }
    for s in m.states() {
        for (t, p) in m.successors(s) {
            let _ = writeln!(out, "  {:?} -> {:?} [label={:?}];", m.name(s), m.name(*t), format_rational(p));
        }
    }
    out.push_str("}\n");
    out
}
