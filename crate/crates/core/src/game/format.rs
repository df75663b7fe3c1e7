//! JSON game file format.
//!
//! ```text
//! {"states":[
//! {"id":0,"kind":"p1","reward":0.0,"edges":[{"to":1}]},
//! {"id":1,"kind":"prob","reward":1.0,"edges":[{"to":0,"prob":0.5},{"to":1,"prob":0.5}]}
//! ],
//! "variables":[{"name":"x","domain_size":2}],
//! "meta":{}}
//! ```
//!
//! `variables` is optional; when present every state carries an `assignment`
//! array with one value per variable. [`serialize_game`] writes one state per
//! line; that layout is the canonical form and parses back byte-identically.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{validate, GameBuilder, GameError, GameGraph, StateKind, Violation, ViolationKind};
use crate::partition::{Variable, VariableSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEntry {
    pub id: usize,
    pub kind: StateKind,
    pub reward: f64,
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub states: Vec<StateEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<Variable>>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

impl GameFile {
    /// Converts to a validated graph, reporting file-level and graph-level
    /// violations together.
    pub fn into_graph(self) -> Result<GameGraph, GameError> {
        let mut violations = Vec::new();
        let schema = match self.variables {
            Some(vars) => Some(VariableSchema::new(vars)?),
            None => None,
        };
        let edge_count = self.states.iter().map(|s| s.edges.len()).sum();
        let mut b = GameBuilder::with_capacity(self.states.len(), edge_count);
        for (pos, st) in self.states.iter().enumerate() {
            if st.id != pos {
                violations.push(Violation {
                    state: pos,
                    kind: ViolationKind::IdMismatch { id: st.id },
                });
            }
            let is_prob = st.kind == StateKind::Probabilistic;
            for e in &st.edges {
                match (is_prob, e.prob) {
                    (true, None) => violations.push(Violation {
                        state: pos,
                        kind: ViolationKind::MissingProbability { to: e.to },
                    }),
                    (false, Some(_)) => violations.push(Violation {
                        state: pos,
                        kind: ViolationKind::UnexpectedProbability { to: e.to },
                    }),
                    _ => {}
                }
            }
            b.add_state(
                st.kind,
                st.reward,
                st.edges.iter().map(|e| (e.to, e.prob.unwrap_or(0.0))),
            );
            if let Some(schema) = &schema {
                let code = match &st.assignment {
                    Some(values) => match schema.encode(values) {
                        Ok(code) => code,
                        Err(err) => {
                            violations.push(Violation {
                                state: pos,
                                kind: ViolationKind::BadAssignment(err.to_string()),
                            });
                            0
                        }
                    },
                    None => {
                        violations.push(Violation {
                            state: pos,
                            kind: ViolationKind::BadAssignment("missing assignment".into()),
                        });
                        0
                    }
                };
                b.push_code(code);
            }
        }
        if let Some(schema) = schema {
            b.set_schema(schema);
        }
        b.set_meta(self.meta);
        if let Err(mut more) = validate(&b) {
            if !violations.is_empty() {
                // placeholder codes from bad assignments would be reported twice
                more.retain(|v| !matches!(v.kind, ViolationKind::DuplicateAssignment { .. }));
            }
            violations.extend(more);
        }
        if !violations.is_empty() {
            violations.sort_by_key(|v| v.state);
            return Err(GameError::Invalid(violations));
        }
        b.build()
    }

    pub fn from_graph(graph: &GameGraph) -> Self {
        let declared = graph.has_declared_schema();
        let states = (0..graph.num_states())
            .map(|s| state_entry(graph, s, declared))
            .collect();
        GameFile {
            states,
            variables: declared.then(|| graph.schema().variables().to_vec()),
            meta: graph.meta().clone(),
        }
    }
}

fn state_entry(graph: &GameGraph, s: usize, declared: bool) -> StateEntry {
    let is_prob = graph.kind(s) == StateKind::Probabilistic;
    StateEntry {
        id: s,
        kind: graph.kind(s),
        reward: graph.reward(s),
        edges: graph
            .successors(s)
            .iter()
            .zip(graph.probs(s))
            .map(|(&to, &p)| EdgeEntry {
                to: to as usize,
                prob: is_prob.then_some(p),
            })
            .collect(),
        assignment: declared.then(|| graph.schema().decode(graph.code(s))),
    }
}

pub fn parse_game(text: &str) -> Result<GameGraph, GameError> {
    let file: GameFile = serde_json::from_str(text).map_err(|e| GameError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    file.into_graph()
}

/// Canonical serialization: one state object per line.
pub fn serialize_game(graph: &GameGraph) -> String {
    let declared = graph.has_declared_schema();
    let mut out = String::with_capacity(graph.num_states() * 64);
    out.push_str("{\"states\":[\n");
    for s in 0..graph.num_states() {
        let entry = state_entry(graph, s, declared);
        out.push_str(&serde_json::to_string(&entry).expect("state entries always serialize"));
        out.push_str(if s + 1 < graph.num_states() { ",\n" } else { "\n" });
    }
    out.push(']');
    if declared {
        let vars = serde_json::to_string(graph.schema().variables()).expect("serializable");
        let _ = write!(out, ",\n\"variables\":{vars}");
    }
    if !graph.meta().is_null() {
        let meta = serde_json::to_string(graph.meta()).expect("serializable");
        let _ = write!(out, ",\n\"meta\":{meta}");
    }
    out.push_str("}\n");
    out
}
