use std::fmt;

use super::{GameBuilder, StateKind};

/// Absolute tolerance on the probability sum of a probabilistic state.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    DanglingEdge { to: usize },
    EmptySuccessorSet,
    BadDistribution { sum: f64 },
    NegativeProbability { prob: f64 },
    DuplicateTarget { to: usize },
    NonFiniteReward,
    MissingProbability { to: usize },
    UnexpectedProbability { to: usize },
    IdMismatch { id: usize },
    BadAssignment(String),
    DuplicateAssignment { other: usize },
}

/// A broken model rule at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.state;
        match &self.kind {
            ViolationKind::DanglingEdge { to } => write!(f, "state {s}: edge to missing state {to}"),
            ViolationKind::EmptySuccessorSet => write!(f, "state {s}: no outgoing edge"),
            ViolationKind::BadDistribution { sum } => {
                write!(f, "state {s}: probabilities sum to {sum}")
            }
            ViolationKind::NegativeProbability { prob } => {
                write!(f, "state {s}: probability {prob} is not positive")
            }
            ViolationKind::DuplicateTarget { to } => write!(f, "state {s}: duplicate edge to {to}"),
            ViolationKind::NonFiniteReward => write!(f, "state {s}: reward is not finite"),
            ViolationKind::MissingProbability { to } => {
                write!(f, "state {s}: edge to {to} lacks a probability")
            }
            ViolationKind::UnexpectedProbability { to } => {
                write!(f, "state {s}: player edge to {to} carries a probability")
            }
            ViolationKind::IdMismatch { id } => write!(f, "state at position {s} has id {id}"),
            ViolationKind::BadAssignment(msg) => write!(f, "state {s}: {msg}"),
            ViolationKind::DuplicateAssignment { other } => {
                write!(f, "state {s}: assignment already used by state {other}")
            }
        }
    }
}

/// Checks the structural model rules and returns every violation found.
pub fn validate(game: &GameBuilder) -> Result<(), Vec<Violation>> {
    let n = game.kinds.len();
    let mut out = Vec::new();
    for s in 0..n {
        let lo = game.offsets[s];
        let hi = game.offsets[s + 1];
        let mut push = |kind| out.push(Violation { state: s, kind });
        if !game.rewards[s].is_finite() {
            push(ViolationKind::NonFiniteReward);
        }
        if lo == hi {
            push(ViolationKind::EmptySuccessorSet);
            continue;
        }
        let row = &game.targets[lo..hi];
        for (i, &to) in row.iter().enumerate() {
            let to = to as usize;
            if to >= n {
                push(ViolationKind::DanglingEdge { to });
            }
            if row[..i].iter().any(|&earlier| earlier as usize == to) {
                push(ViolationKind::DuplicateTarget { to });
            }
        }
        if game.kinds[s] == StateKind::Probabilistic {
            let row = &game.probs[lo..hi];
            let mut ok = true;
            for &p in row {
                if !(p > 0.0) || !p.is_finite() {
                    push(ViolationKind::NegativeProbability { prob: p });
                    ok = false;
                }
            }
            let sum: f64 = row.iter().sum();
            if ok && (sum - 1.0).abs() > PROB_TOLERANCE {
                push(ViolationKind::BadDistribution { sum });
            }
        }
    }
    if let Some(schema) = &game.schema {
        if game.codes.len() != n {
            out.push(Violation {
                state: game.codes.len().min(n),
                kind: ViolationKind::BadAssignment(format!(
                    "{} codes for {} states",
                    game.codes.len(),
                    n
                )),
            });
        } else {
            let mut owner = std::collections::HashMap::with_capacity(n);
            for (s, &code) in game.codes.iter().enumerate() {
                let decoded = schema.decode(code);
                let in_range = schema.total_bits() == 64 || code >> schema.total_bits() == 0;
                if !in_range || schema.encode(&decoded).ok() != Some(code) {
                    out.push(Violation {
                        state: s,
                        kind: ViolationKind::BadAssignment(format!("code {code:#x} outside schema")),
                    });
                    continue;
                }
                if let Some(&other) = owner.get(&code) {
                    out.push(Violation {
                        state: s,
                        kind: ViolationKind::DuplicateAssignment { other },
                    });
                } else {
                    owner.insert(code, s);
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
