use serde_json::json;

use super::{check, generator_meta, Fields, ModelCounts, ModelKind};
use crate::error::Result;
use crate::game::{GameBuilder, GameGraph, StateKind};
use crate::partition::{Variable, VariableSchema};

/// Automobile inventory `⟨n, t⟩` over `0 ≤ n ≤ n_max`, `0 ≤ t ≤ t_max`.
///
/// At `t < t_max` the controller either skips or manufactures `nc` cars
/// (capped at `n_max`, paying `cost` per car). Then `sold` is drawn
/// uniformly from `[sold_min, sold_max]` clipped to the stock, and the
/// state moves to `⟨n − sold, t + 1⟩`. The sale state carries the expected
/// income `price·E[sold]`. States at `t_max` absorb with reward 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Inventory {
    pub n_max: u64,
    pub t_max: u64,
    pub nc: u64,
    pub sold_min: u64,
    pub sold_max: u64,
    pub price: f64,
    pub cost: f64,
}

impl Default for Inventory {
    fn default() -> Self {
        Self {
            n_max: 63,
            t_max: 63,
            nc: 4,
            sold_min: 0,
            sold_max: 3,
            price: 1.0,
            cost: 0.6,
        }
    }
}

/// Role of a state within one `⟨n, t⟩` cell.
const CORE: u64 = 0;
const MANUFACTURE: u64 = 1;
const SALE: u64 = 2;

impl Inventory {
    pub fn new(n_max: u64, t_max: u64) -> Self {
        Self {
            n_max,
            t_max,
            ..Self::default()
        }
    }

    pub(super) fn from_fields(f: &mut Fields<'_>) -> Result<Self> {
        let d = Self::default();
        let m = Self {
            n_max: f.get("n_max", d.n_max)?,
            t_max: f.get("t_max", d.t_max)?,
            nc: f.get("nc", d.nc)?,
            sold_min: f.get("sold_min", d.sold_min)?,
            sold_max: f.get("sold_max", d.sold_max)?,
            price: f.get("price", d.price)?,
            cost: f.get("cost", d.cost)?,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.sold_min <= self.sold_max, || {
            format!("inventory: sold_min = {} above sold_max = {}", self.sold_min, self.sold_max)
        })?;
        check(self.sold_max <= self.n_max, || {
            format!("inventory: sold_max = {} above n_max = {}", self.sold_max, self.n_max)
        })?;
        check(self.n_max < 1 << 24 && self.t_max < 1 << 24, || "inventory: dimensions too large".into())
    }

    /// `⟨n, t⟩` cells, plus a manufacture and a sale state per cell before
    /// `t_max`.
    pub fn counts(&self) -> ModelCounts {
        let core = (self.n_max + 1) * (self.t_max + 1);
        ModelCounts {
            core,
            total: core + 2 * (self.n_max + 1) * self.t_max,
        }
    }

    fn id(&self, n: u64, t: u64, role: u64) -> usize {
        (n * (3 * self.t_max + 1) + 3 * t + role) as usize
    }

    pub fn core_state(&self, n: u64, t: u64) -> usize {
        self.id(n, t, CORE)
    }

    pub fn generate(&self) -> Result<GameGraph> {
        self.validate()?;
        let counts = self.counts();
        let schema = VariableSchema::new(vec![
            Variable::new("role", 3),
            Variable::new("n", self.n_max + 1),
            Variable::new("t", self.t_max + 1),
        ])?;
        let spread = self.sold_max - self.sold_min + 1;
        let mut b = GameBuilder::with_capacity(counts.total as usize, (counts.total * (1 + spread) / 2) as usize);
        for n in 0..=self.n_max {
            for t in 0..=self.t_max {
                if t == self.t_max {
                    b.add_player(StateKind::Player1, 0.0, &[self.id(n, t, CORE)]);
                    b.push_code(schema.encode(&[CORE, n, t])?);
                    continue;
                }
                b.add_player(
                    StateKind::Player1,
                    0.0,
                    &[self.id(n, t, SALE), self.id(n, t, MANUFACTURE)],
                );
                b.push_code(schema.encode(&[CORE, n, t])?);
                let stocked = (n + self.nc).min(self.n_max);
                b.add_player(
                    StateKind::Player1,
                    -self.cost * (stocked - n) as f64,
                    &[self.id(stocked, t, SALE)],
                );
                b.push_code(schema.encode(&[MANUFACTURE, n, t])?);
                let lo = self.sold_min.min(n);
                let hi = self.sold_max.min(n);
                let p = 1.0 / (hi - lo + 1) as f64;
                let expected = (lo + hi) as f64 / 2.0;
                b.add_state(
                    StateKind::Probabilistic,
                    self.price * expected,
                    (lo..=hi).map(|sold| (self.id(n - sold, t + 1, CORE), p)),
                );
                b.push_code(schema.encode(&[SALE, n, t])?);
            }
        }
        b.set_schema(schema);
        b.set_meta(generator_meta(
            ModelKind::Inventory,
            json!({
                "n_max": self.n_max,
                "t_max": self.t_max,
                "nc": self.nc,
                "sold_min": self.sold_min,
                "sold_max": self.sold_max,
                "price": self.price,
                "cost": self.cost,
            }),
            None,
            counts,
            json!({ "n": self.sold_max.max(self.nc), "t": 1 }),
        ));
        Ok(b.build()?)
    }
}
