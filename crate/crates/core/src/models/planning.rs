use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{check, generator_meta, Fields, ModelCounts, ModelKind};
use crate::error::Result;
use crate::game::{GameBuilder, GameGraph, StateKind};
use crate::partition::{Variable, VariableSchema};

const MOVES: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Robot on an `n × n` grid with `m` randomly placed mines.
///
/// Each cell is a player-1 state choosing one of four move intents. An
/// intent reaches the neighbouring cell (itself at the border) with
/// probability `1 − p(x, y)` and the absorbing sink otherwise, where
/// `p(x, y) = min(Σ 1/(1 + d)², p_max)` over Manhattan distances `d` to the
/// mines. Cells with `(x + y) mod charge_period = 0` earn `charge_reward`,
/// all other cells cost `move_cost`.
#[derive(Debug, Clone, PartialEq)]
pub struct Planning {
    pub n: u64,
    pub mines: u64,
    pub p_max: f64,
    pub charge_period: u64,
    pub charge_reward: f64,
    pub move_cost: f64,
    pub seed: u64,
}

impl Default for Planning {
    fn default() -> Self {
        Self {
            n: 16,
            mines: 40,
            p_max: 0.9,
            charge_period: 7,
            charge_reward: 1.0,
            move_cost: 0.05,
            seed: 0,
        }
    }
}

impl Planning {
    pub fn new(n: u64, mines: u64, seed: u64) -> Self {
        Self {
            n,
            mines,
            seed,
            ..Self::default()
        }
    }

    pub(super) fn from_fields(f: &mut Fields<'_>, seed: u64) -> Result<Self> {
        let d = Self::default();
        let n = f.get("n", d.n)?;
        let m = Self {
            n,
            mines: f.get("m", d.mines.min((n * n).saturating_sub(1)))?,
            p_max: f.get("p_max", d.p_max)?,
            charge_period: f.get("charge_period", d.charge_period)?,
            charge_reward: f.get("charge_reward", d.charge_reward)?,
            move_cost: f.get("move_cost", d.move_cost)?,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.n >= 2, || format!("planning: n = {} < 2", self.n))?;
        check(self.n <= 1 << 15, || format!("planning: n = {} too large", self.n))?;
        check(self.mines < self.n * self.n, || {
            format!("planning: m = {} must be below n² = {}", self.mines, self.n * self.n)
        })?;
        check((0.0..1.0).contains(&self.p_max), || format!("planning: p_max = {} outside [0, 1)", self.p_max))?;
        check(self.charge_period >= 1, || "planning: charge_period must be positive".into())
    }

    /// Grid cells plus the sink; the four intents per cell come on top.
    pub fn counts(&self) -> ModelCounts {
        let cells = self.n * self.n;
        ModelCounts {
            core: cells + 1,
            total: 5 * cells + 1,
        }
    }

    /// Cells holding a mine, ascending by `x·n + y`.
    pub fn mine_cells(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut cells: Vec<u64> = sample(&mut rng, (self.n * self.n) as usize, self.mines as usize)
            .into_iter()
            .map(|c| c as u64)
            .collect();
        cells.sort_unstable();
        cells
    }

    /// Sink probability of every cell, indexed by `x·n + y`.
    pub fn failure_probabilities(&self) -> Vec<f64> {
        let n = self.n;
        let mines: Vec<(i64, i64)> = self
            .mine_cells()
            .into_iter()
            .map(|c| ((c / n) as i64, (c % n) as i64))
            .collect();
        let mut p = Vec::with_capacity((n * n) as usize);
        for x in 0..n as i64 {
            for y in 0..n as i64 {
                let sum: f64 = mines
                    .iter()
                    .map(|&(mx, my)| {
                        let d = ((x - mx).abs() + (y - my).abs()) as f64;
                        1.0 / ((1.0 + d) * (1.0 + d))
                    })
                    .sum();
                p.push(sum.min(self.p_max));
            }
        }
        p
    }

    pub fn cell_reward(&self, x: u64, y: u64) -> f64 {
        if (x + y) % self.charge_period == 0 {
            self.charge_reward
        } else {
            -self.move_cost
        }
    }

    /// Index of the cell state at `(x, y)`; its intents follow it.
    pub fn cell_state(&self, x: u64, y: u64) -> usize {
        (1 + 5 * (x * self.n + y)) as usize
    }

    pub fn generate(&self) -> Result<GameGraph> {
        self.validate()?;
        let n = self.n;
        let counts = self.counts();
        let p = self.failure_probabilities();
        let schema = VariableSchema::new(vec![
            Variable::new("sink", 2),
            Variable::new("dir", 5),
            Variable::new("x", n),
            Variable::new("y", n),
        ])?;
        let mut b = GameBuilder::with_capacity(counts.total as usize, (13 * n * n + 1) as usize);
        b.add_player(StateKind::Player1, 0.0, &[0]);
        b.push_code(schema.encode(&[1, 0, 0, 0])?);
        for x in 0..n {
            for y in 0..n {
                let cell = self.cell_state(x, y);
                let intents: Vec<usize> = (1..=4).map(|d| cell + d).collect();
                b.add_player(StateKind::Player1, self.cell_reward(x, y), &intents);
                b.push_code(schema.encode(&[0, 0, x, y])?);
                let fail = p[(x * n + y) as usize];
                for (d, &(dx, dy)) in MOVES.iter().enumerate() {
                    let tx = x as i64 + dx;
                    let ty = y as i64 + dy;
                    let target = if (0..n as i64).contains(&tx) && (0..n as i64).contains(&ty) {
                        self.cell_state(tx as u64, ty as u64)
                    } else {
                        cell
                    };
                    if fail > 0.0 {
                        b.add_state(StateKind::Probabilistic, 0.0, [(target, 1.0 - fail), (0, fail)]);
                    } else {
                        b.add_state(StateKind::Probabilistic, 0.0, [(target, 1.0)]);
                    }
                    b.push_code(schema.encode(&[0, d as u64 + 1, x, y])?);
                }
            }
        }
        b.set_schema(schema);
        b.set_meta(generator_meta(
            ModelKind::Planning,
            json!({
                "n": n,
                "m": self.mines,
                "p_max": self.p_max,
                "charge_period": self.charge_period,
                "charge_reward": self.charge_reward,
                "move_cost": self.move_cost,
            }),
            Some(self.seed),
            counts,
            json!({ "x": 1, "y": 1 }),
        ));
        Ok(b.build()?)
    }
}
