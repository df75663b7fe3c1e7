use serde_json::json;

use super::{check, generator_meta, Fields, ModelCounts, ModelKind};
use crate::error::Result;
use crate::game::{GameBuilder, GameGraph, StateKind};
use crate::partition::{Variable, VariableSchema};

/// Machine replacement `⟨w, t⟩` with wear level `0 ≤ w < n` and time
/// `0 ≤ t ≤ tm`.
///
/// A working machine earns `earn_slope·w/(n − 1)` per step. Keeping it
/// leaves `w` unchanged with probability 0.7 and lowers it by one with 0.3;
/// replacing goes through a shared state per time step that costs
/// `replace_cost` and restores `w = n − 1`. States at `tm` absorb and keep
/// earning.
#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    pub n: u64,
    pub tm: u64,
    pub replace_cost: f64,
    pub earn_slope: f64,
}

pub const KEEP_PROBABILITY: f64 = 0.7;

impl Default for Machine {
    fn default() -> Self {
        Self {
            n: 63,
            tm: 63,
            replace_cost: 0.5,
            earn_slope: 1.0,
        }
    }
}

const CORE: u64 = 0;
const KEEP: u64 = 1;
const REPLACE: u64 = 2;

impl Machine {
    pub fn new(n: u64, tm: u64) -> Self {
        Self {
            n,
            tm,
            ..Self::default()
        }
    }

    pub(super) fn from_fields(f: &mut Fields<'_>) -> Result<Self> {
        let d = Self::default();
        let m = Self {
            n: f.get("n", d.n)?,
            tm: f.get("tm", d.tm)?,
            replace_cost: f.get("replace_cost", d.replace_cost)?,
            earn_slope: f.get("earn_slope", d.earn_slope)?,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.n >= 2, || format!("machine: n = {} < 2", self.n))?;
        check(self.tm >= 1, || "machine: tm must be positive".into())?;
        check(self.n < 1 << 24 && self.tm < 1 << 24, || "machine: dimensions too large".into())
    }

    /// `⟨w, t⟩` cells, a keep state per cell before `tm`, and one replace
    /// state per time step.
    pub fn counts(&self) -> ModelCounts {
        let core = self.n * (self.tm + 1);
        ModelCounts {
            core,
            total: core + self.n * self.tm + self.tm,
        }
    }

    pub fn core_state(&self, w: u64, t: u64) -> usize {
        (self.tm + w * (2 * self.tm + 1) + 2 * t) as usize
    }

    fn keep_state(&self, w: u64, t: u64) -> usize {
        self.core_state(w, t) + 1
    }

    fn replace_state(&self, t: u64) -> usize {
        t as usize
    }

    pub fn generate(&self) -> Result<GameGraph> {
        self.validate()?;
        let counts = self.counts();
        let top = self.n - 1;
        let schema = VariableSchema::new(vec![
            Variable::new("role", 3),
            Variable::new("w", self.n),
            Variable::new("t", self.tm + 1),
        ])?;
        let mut b = GameBuilder::with_capacity(counts.total as usize, (3 * counts.total) as usize);
        for t in 0..self.tm {
            b.add_player(StateKind::Player1, -self.replace_cost, &[self.core_state(top, t + 1)]);
            b.push_code(schema.encode(&[REPLACE, top, t])?);
        }
        for w in 0..self.n {
            let earn = self.earn_slope * w as f64 / top as f64;
            for t in 0..=self.tm {
                if t == self.tm {
                    b.add_player(StateKind::Player1, earn, &[self.core_state(w, t)]);
                    b.push_code(schema.encode(&[CORE, w, t])?);
                    continue;
                }
                b.add_player(StateKind::Player1, earn, &[self.keep_state(w, t), self.replace_state(t)]);
                b.push_code(schema.encode(&[CORE, w, t])?);
                if w == 0 {
                    b.add_state(StateKind::Probabilistic, 0.0, [(self.core_state(0, t + 1), 1.0)]);
                } else {
                    b.add_state(
                        StateKind::Probabilistic,
                        0.0,
                        [
                            (self.core_state(w, t + 1), KEEP_PROBABILITY),
                            (self.core_state(w - 1, t + 1), 1.0 - KEEP_PROBABILITY),
                        ],
                    );
                }
                b.push_code(schema.encode(&[KEEP, w, t])?);
            }
        }
        b.set_schema(schema);
        b.set_meta(generator_meta(
            ModelKind::Machine,
            json!({
                "n": self.n,
                "tm": self.tm,
                "replace_cost": self.replace_cost,
                "earn_slope": self.earn_slope,
            }),
            None,
            counts,
            json!({ "w_keep": 1, "w_replace": top, "t": 1 }),
        ));
        Ok(b.build()?)
    }
}
