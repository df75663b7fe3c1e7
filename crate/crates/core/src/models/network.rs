use serde_json::json;

use super::{check, generator_meta, Fields, ModelCounts, ModelKind};
use crate::error::{MlaError, Result};
use crate::game::{GameBuilder, GameGraph, StateKind};
use crate::partition::{Variable, VariableSchema};

/// Slotted shared channel: `n_comp` computers each send `M − 1` packets.
///
/// A core state is `⟨pk_1, …, pk_n, busy, t⟩` with `0 ≤ pk_i ≤ M − 1`.
/// On a free channel the controller lets nobody send, lets one computer
/// with packets left send (through an arrival state worth 1), or lets two
/// or more send at once. A collision loses the packets and backs off for
/// one or two idle frames with equal probability; a busy channel forces an
/// idle frame. States at `t_max` absorb with reward 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub n_comp: u64,
    pub m: u64,
    pub t_max: u64,
    pub cap: u64,
}

pub const DEFAULT_CAP: u64 = 1 << 24;

impl Default for Network {
    fn default() -> Self {
        Self {
            n_comp: 2,
            m: 4,
            t_max: 16,
            cap: DEFAULT_CAP,
        }
    }
}

const CORE: u64 = 0;
const ARRIVAL: u64 = 1;
const COLLISION: u64 = 2;

impl Network {
    pub fn new(n_comp: u64, m: u64, t_max: u64) -> Self {
        Self {
            n_comp,
            m,
            t_max,
            cap: DEFAULT_CAP,
        }
    }

    pub(super) fn from_fields(f: &mut Fields<'_>) -> Result<Self> {
        let d = Self::default();
        let m = Self {
            n_comp: f.get("n_comp", d.n_comp)?,
            m: f.get("M", d.m)?,
            t_max: f.get("t_max", d.t_max)?,
            cap: f.get("cap", d.cap)?,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.n_comp >= 1, || "network: n_comp must be positive".into())?;
        check(self.m >= 1, || "network: M must be positive".into())?;
        check(self.t_max >= 1, || "network: t_max must be positive".into())?;
        let states = self.total_states();
        match states {
            Some(s) if s <= self.cap => Ok(()),
            _ => Err(MlaError::StateSpaceTooLarge {
                states: states.unwrap_or(u64::MAX),
                cap: self.cap,
            }),
        }
    }

    fn packet_vectors(&self) -> Option<u64> {
        self.m.checked_pow(u32::try_from(self.n_comp).ok()?)
    }

    fn total_states(&self) -> Option<u64> {
        self.packet_vectors()?.checked_mul(self.t_max.checked_mul(4)?.checked_add(2)?)
    }

    /// Core states `pk × busy × t`; an arrival state per `t ≥ 1` and a
    /// collision state per `t < t_max` come on top. Saturates on overflow.
    pub fn counts(&self) -> ModelCounts {
        let pk = self.packet_vectors().unwrap_or(u64::MAX);
        ModelCounts {
            core: pk.saturating_mul(2 * (self.t_max + 1)),
            total: self.total_states().unwrap_or(u64::MAX),
        }
    }

    fn block(&self) -> u64 {
        4 * self.t_max + 2
    }

    /// First state of frame `t` inside a packet-vector block.
    fn frame(&self, t: u64) -> u64 {
        3 * t + t.saturating_sub(1)
    }

    fn id(&self, pk: u64, busy: u64, t: u64) -> usize {
        (pk * self.block() + self.frame(t) + busy) as usize
    }

    fn arrival(&self, pk: u64, t: u64) -> usize {
        debug_assert!(t >= 1);
        (pk * self.block() + self.frame(t) + 2) as usize
    }

    fn collision(&self, pk: u64, t: u64) -> usize {
        debug_assert!(t < self.t_max);
        (pk * self.block() + self.frame(t) + 2 + u64::from(t >= 1)) as usize
    }

    /// Index of core state `⟨pk, busy, t⟩`, with `pk` given per computer.
    pub fn core_state(&self, pk: &[u64], busy: bool, t: u64) -> usize {
        let index = pk.iter().fold(0, |acc, &p| acc * self.m + p);
        self.id(index, u64::from(busy), t)
    }

    pub fn generate(&self) -> Result<GameGraph> {
        self.validate()?;
        let counts = self.counts();
        let n = self.n_comp as usize;
        let mut vars = vec![Variable::new("role", 3), Variable::new("busy", 2)];
        vars.extend((1..=n).map(|i| Variable::new(format!("pk{i}"), self.m)));
        vars.push(Variable::new("t", self.t_max + 1));
        let schema = VariableSchema::new(vars)?;
        let vectors = counts.total / self.block();
        let mut b = GameBuilder::with_capacity(counts.total as usize, (counts.total * (n as u64 + 3) / 2) as usize);
        let mut pk = vec![0u64; n];
        let mut assignment = vec![0u64; n + 3];
        let mut succ = Vec::with_capacity(n + 2);
        for index in 0..vectors {
            let mut rest = index;
            for i in (0..n).rev() {
                pk[i] = rest % self.m;
                rest /= self.m;
            }
            assignment[2..n + 2].copy_from_slice(&pk);
            let mut code = |busy: u64, t: u64, role: u64| {
                assignment[0] = role;
                assignment[1] = busy;
                assignment[n + 2] = t;
                schema.encode(&assignment)
            };
            let pending = pk.iter().filter(|&&p| p + 1 < self.m).count();
            for t in 0..=self.t_max {
                if t == self.t_max {
                    for busy in 0..2 {
                        b.add_player(StateKind::Player1, 0.0, &[self.id(index, busy, t)]);
                        b.push_code(code(busy, t, CORE)?);
                    }
                    b.add_player(StateKind::Player1, 1.0, &[self.id(index, 0, t)]);
                    b.push_code(code(0, t, ARRIVAL)?);
                    continue;
                }
                succ.clear();
                succ.push(self.id(index, 0, t + 1));
                let mut stride = 1;
                for i in (0..n).rev() {
                    if pk[i] + 1 < self.m {
                        succ.push(self.arrival(index + stride, t + 1));
                    }
                    stride *= self.m;
                }
                if pending >= 2 {
                    succ.push(self.collision(index, t));
                }
                b.add_player(StateKind::Player1, 0.0, &succ);
                b.push_code(code(0, t, CORE)?);
                b.add_player(StateKind::Player1, 0.0, &[self.id(index, 0, t + 1)]);
                b.push_code(code(1, t, CORE)?);
                if t >= 1 {
                    b.add_player(StateKind::Player1, 1.0, &[self.id(index, 0, t)]);
                    b.push_code(code(0, t, ARRIVAL)?);
                }
                let once = self.id(index, 1, t + 1);
                let twice = self.id(index, 1, (t + 2).min(self.t_max));
                if once == twice {
                    b.add_state(StateKind::Probabilistic, 0.0, [(once, 1.0)]);
                } else {
                    b.add_state(StateKind::Probabilistic, 0.0, [(once, 0.5), (twice, 0.5)]);
                }
                b.push_code(code(0, t, COLLISION)?);
            }
        }
        b.set_schema(schema);
        b.set_meta(generator_meta(
            ModelKind::Network,
            json!({ "n_comp": self.n_comp, "M": self.m, "t_max": self.t_max, "cap": self.cap }),
            None,
            counts,
            json!({ "pk": 1, "t": 2 }),
        ));
        Ok(b.build()?)
    }
}
