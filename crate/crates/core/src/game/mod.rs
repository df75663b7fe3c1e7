//! Turn-based stochastic game graphs.
//!
//! A [`GameGraph`] is stored in compressed sparse row form: the successors of
//! state `s` are `targets[offsets[s]..offsets[s + 1]]`, and for probabilistic
//! states the parallel `probs` slice carries the transition probabilities.
//! Graphs are validated on construction and immutable afterwards.

mod format;
mod solve;
mod validate;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::partition::{PartitionError, VariableSchema};

pub use format::{parse_game, serialize_game, EdgeEntry, GameFile, StateEntry};
pub use solve::{
    exact_discounted_oracle, pre, pre_into, relative_value_iteration, value_iteration_discounted,
    CertifiedValuation, DivergenceVerdict, ORACLE_RESIDUAL,
};
pub(crate) use solve::{exact_threshold, extremes, step};
pub use validate::{validate, Violation, ViolationKind, PROB_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateKind {
    #[serde(rename = "p1")]
    Player1,
    #[serde(rename = "p2")]
    Player2,
    #[serde(rename = "prob")]
    Probabilistic,
}

/// Dense state index into a [`GameGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl From<usize> for StateId {
    fn from(index: usize) -> Self {
        StateId(index)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GameError {
    #[error("game graph is invalid: {}", summarize(.0))]
    Invalid(Vec<Violation>),
    #[error("valuation has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no convergence after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Schema(#[from] PartitionError),
}

fn summarize(violations: &[Violation]) -> String {
    let shown: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
    if violations.len() > shown.len() {
        format!("{} (and {} more)", shown.join("; "), violations.len() - shown.len())
    } else {
        shown.join("; ")
    }
}

/// Unvalidated game under construction.
///
/// Probabilities passed with edges of player states are ignored.
#[derive(Debug, Clone, Default)]
pub struct GameBuilder {
    pub(crate) kinds: Vec<StateKind>,
    pub(crate) rewards: Vec<f64>,
    pub(crate) offsets: Vec<usize>,
    /// Edge targets; indices beyond `u32` saturate and fail validation.
    pub(crate) targets: Vec<u32>,
    pub(crate) probs: Vec<f64>,
    pub(crate) schema: Option<VariableSchema>,
    pub(crate) codes: Vec<u64>,
    pub(crate) meta: serde_json::Value,
}

impl GameBuilder {
    pub fn new() -> Self {
        Self {
            offsets: vec![0],
            ..Default::default()
        }
    }

    pub fn with_capacity(states: usize, edges: usize) -> Self {
        let mut offsets = Vec::with_capacity(states + 1);
        offsets.push(0);
        Self {
            kinds: Vec::with_capacity(states),
            rewards: Vec::with_capacity(states),
            offsets,
            targets: Vec::with_capacity(edges),
            probs: Vec::with_capacity(edges),
            ..Default::default()
        }
    }

    pub fn num_states(&self) -> usize {
        self.kinds.len()
    }

    /// Appends a state and returns its index.
    pub fn add_state<I>(&mut self, kind: StateKind, reward: f64, edges: I) -> usize
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let id = self.kinds.len();
        self.kinds.push(kind);
        self.rewards.push(reward);
        for (to, p) in edges {
            self.targets.push(u32::try_from(to).unwrap_or(u32::MAX));
            self.probs
                .push(if kind == StateKind::Probabilistic { p } else { 0.0 });
        }
        self.offsets.push(self.targets.len());
        id
    }

    /// Appends a player state with the given successors.
    pub fn add_player(&mut self, kind: StateKind, reward: f64, succ: &[usize]) -> usize {
        self.add_state(kind, reward, succ.iter().map(|&t| (t, 0.0)))
    }

    /// Declares a variable schema; every state then needs a code via
    /// [`GameBuilder::set_code`] or [`GameBuilder::push_code`].
    pub fn set_schema(&mut self, schema: VariableSchema) {
        self.schema = Some(schema);
    }

    pub fn push_code(&mut self, code: u64) {
        self.codes.push(code);
    }

    pub fn set_code(&mut self, state: usize, code: u64) {
        if self.codes.len() <= state {
            self.codes.resize(state + 1, 0);
        }
        self.codes[state] = code;
    }

    pub fn set_meta(&mut self, meta: serde_json::Value) {
        self.meta = meta;
    }

    pub fn build(self) -> Result<GameGraph, GameError> {
        if let Err(violations) = validate(&self) {
            return Err(GameError::Invalid(violations));
        }
        let GameBuilder {
            kinds,
            rewards,
            offsets,
            targets,
            mut probs,
            schema,
            codes,
            meta,
        } = self;
        for s in 0..kinds.len() {
            if kinds[s] == StateKind::Probabilistic {
                let row = &mut probs[offsets[s]..offsets[s + 1]];
                let sum: f64 = row.iter().sum();
                // Only drift beyond a few ulps is corrected, so a renormalized
                // row stays fixed under a second build.
                if (sum - 1.0).abs() > 4.0 * f64::EPSILON {
                    row.iter_mut().for_each(|p| *p /= sum);
                }
            }
        }
        let n = kinds.len();
        let (schema, codes, declared) = match schema {
            Some(schema) => (schema, codes, true),
            None => (VariableSchema::indexed(n), (0..n as u64).collect(), false),
        };
        Ok(GameGraph {
            kinds,
            rewards,
            offsets,
            targets,
            probs,
            schema,
            codes: codes.into(),
            declared_schema: declared,
            meta,
        })
    }
}

/// Validated turn-based stochastic game graph with state rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct GameGraph {
    kinds: Vec<StateKind>,
    rewards: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
    schema: VariableSchema,
    codes: Arc<[u64]>,
    declared_schema: bool,
    meta: serde_json::Value,
}

impl GameGraph {
    pub fn num_states(&self) -> usize {
        self.kinds.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn kind(&self, s: usize) -> StateKind {
        self.kinds[s]
    }

    #[inline]
    pub fn reward(&self, s: usize) -> f64 {
        self.rewards[s]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    #[inline]
    pub fn successors(&self, s: usize) -> &[u32] {
        &self.targets[self.offsets[s]..self.offsets[s + 1]]
    }

    /// Transition probabilities of `s`, parallel to [`GameGraph::successors`].
    /// Only meaningful for probabilistic states.
    #[inline]
    pub fn probs(&self, s: usize) -> &[f64] {
        &self.probs[self.offsets[s]..self.offsets[s + 1]]
    }

    pub fn schema(&self) -> &VariableSchema {
        &self.schema
    }

    /// Whether the schema was declared, as opposed to the index fallback.
    pub fn has_declared_schema(&self) -> bool {
        self.declared_schema
    }

    #[inline]
    pub fn code(&self, s: usize) -> u64 {
        self.codes[s]
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub(crate) fn shared_codes(&self) -> Arc<[u64]> {
        Arc::clone(&self.codes)
    }

    pub fn meta(&self) -> &serde_json::Value {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: serde_json::Value) {
        self.meta = meta;
    }

    pub fn is_mdp(&self) -> bool {
        !self.kinds.contains(&StateKind::Player2)
    }

    /// `M = max_s |r(s)|`.
    pub fn max_abs_reward(&self) -> f64 {
        self.rewards.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    pub fn min_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Reverse adjacency in CSR form: `(offsets, sources)`.
    pub fn predecessors(&self) -> (Vec<usize>, Vec<u32>) {
        let n = self.num_states();
        let mut counts = vec![0usize; n + 1];
        for &t in &self.targets {
            counts[t as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut sources = vec![0u32; self.targets.len()];
        for s in 0..n {
            for &t in self.successors(s) {
                sources[fill[t as usize]] = s as u32;
                fill[t as usize] += 1;
            }
        }
        (offsets, sources)
    }

    /// Sub-game induced by `states` (ascending, distinct). Edges leaving the
    /// set are dropped; every state must keep at least one successor and
    /// probabilistic states must keep all of theirs.
    ///
    /// Returns the sub-game and the original index of each of its states.
    pub fn induced_subgraph(&self, states: &[usize]) -> Result<(GameGraph, Vec<usize>), GameError> {
        let mut local = vec![usize::MAX; self.num_states()];
        for (i, &s) in states.iter().enumerate() {
            local[s] = i;
        }
        let mut builder = GameBuilder::with_capacity(states.len(), states.len() * 2);
        for &s in states {
            let edges: Vec<(usize, f64)> = self
                .successors(s)
                .iter()
                .zip(self.probs(s))
                .filter(|(&t, _)| local[t as usize] != usize::MAX)
                .map(|(&t, &p)| (local[t as usize], p))
                .collect();
            if self.kind(s) == StateKind::Probabilistic && edges.len() != self.successors(s).len() {
                return Err(GameError::BadParameter(format!(
                    "probabilistic state {s} leaves the induced set"
                )));
            }
            builder.add_state(self.kind(s), self.reward(s), edges);
        }
        if self.declared_schema {
            builder.set_schema(self.schema.clone());
            for &s in states {
                builder.push_code(self.codes[s]);
            }
        }
        Ok((builder.build()?, states.to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_roundtrip_accessors() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 1.0, &[1, 2]);
        b.add_state(StateKind::Probabilistic, 0.0, [(0, 0.25), (2, 0.75)]);
        b.add_player(StateKind::Player2, -2.0, &[2]);
        let g = b.build().unwrap();
        assert_eq!(g.num_states(), 3);
        assert_eq!(g.num_transitions(), 5);
        assert_eq!(g.successors(1), &[0, 2]);
        assert_eq!(g.probs(1), &[0.25, 0.75]);
        assert_eq!(g.max_abs_reward(), 2.0);
        assert!(!g.is_mdp());
        let (offs, srcs) = g.predecessors();
        let preds_of_2: Vec<u32> = srcs[offs[2]..offs[3]].to_vec();
        assert_eq!(preds_of_2, vec![0, 1, 2]);
    }

    #[test]
    fn small_drift_is_renormalized() {
        let mut b = GameBuilder::new();
        b.add_state(StateKind::Probabilistic, 0.0, [(0, 0.5 + 1e-11), (1, 0.5)]);
        b.add_player(StateKind::Player1, 0.0, &[1]);
        let g = b.build().unwrap();
        let sum: f64 = g.probs(0).iter().sum();
        assert!((sum - 1.0).abs() <= 4.0 * f64::EPSILON);
        // already-normalized rows are left untouched
        let again = {
            let mut b = GameBuilder::new();
            b.add_state(StateKind::Probabilistic, 0.0, [(0, g.probs(0)[0]), (1, g.probs(0)[1])]);
            b.add_player(StateKind::Player1, 0.0, &[1]);
            b.build().unwrap()
        };
        assert_eq!(again.probs(0), g.probs(0));
    }

    #[test]
    fn induced_subgraph_drops_exits() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 0.0, &[1, 2]);
        b.add_player(StateKind::Player1, 1.0, &[0]);
        b.add_player(StateKind::Player1, 2.0, &[2]);
        let g = b.build().unwrap();
        let (sub, map) = g.induced_subgraph(&[0, 1]).unwrap();
        assert_eq!(map, vec![0, 1]);
        assert_eq!(sub.successors(0), &[1]);
        assert_eq!(sub.reward(1), 1.0);
    }
}
