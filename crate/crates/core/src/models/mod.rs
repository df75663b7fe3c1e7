//! Generators for the benchmark MDPs: robot planning on a mined grid,
//! automobile inventory, machine replacement and a slotted network protocol.
//!
//! Rewards sit on states, so action rewards (manufacturing cost, sale
//! income, delivered packets) live on intermediate states. Every generator
//! reports its core state count (the model's own state tuple) next to the
//! total count of the emitted graph.

mod inventory;
mod machine;
mod network;
mod planning;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{MlaError, Result};
use crate::game::GameGraph;

pub use inventory::Inventory;
pub use machine::Machine;
pub use network::Network;
pub use planning::Planning;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Planning,
    Inventory,
    Machine,
    Network,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Planning,
        ModelKind::Inventory,
        ModelKind::Machine,
        ModelKind::Network,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Planning => "planning",
            ModelKind::Inventory => "inventory",
            ModelKind::Machine => "machine",
            ModelKind::Network => "network",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = MlaError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| MlaError::ParamOutOfRange(format!("unknown model `{s}`")))
    }
}

/// Model name, raw `key=value` parameters and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub values: BTreeMap<String, String>,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            values: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.values.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Adds a parameter given as `key=value`.
    pub fn push_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| MlaError::ParamOutOfRange(format!("expected key=value, got `{assignment}`")))?;
        self.values.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn build(&self) -> Result<Model> {
        let mut fields = Fields::new(&self.values);
        let model = match self.kind {
            ModelKind::Planning => Model::Planning(Planning::from_fields(&mut fields, self.seed)?),
            ModelKind::Inventory => Model::Inventory(Inventory::from_fields(&mut fields)?),
            ModelKind::Machine => Model::Machine(Machine::from_fields(&mut fields)?),
            ModelKind::Network => Model::Network(Network::from_fields(&mut fields)?),
        };
        fields.finish(self.kind)?;
        Ok(model)
    }
}

/// Core and total state counts of a generated model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCounts {
    pub core: u64,
    pub total: u64,
}

/// A fully parameterized model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Planning(Planning),
    Inventory(Inventory),
    Machine(Machine),
    Network(Network),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Planning(_) => ModelKind::Planning,
            Model::Inventory(_) => ModelKind::Inventory,
            Model::Machine(_) => ModelKind::Machine,
            Model::Network(_) => ModelKind::Network,
        }
    }

    /// Closed-form state counts, without building the graph.
    pub fn counts(&self) -> ModelCounts {
        match self {
            Model::Planning(m) => m.counts(),
            Model::Inventory(m) => m.counts(),
            Model::Machine(m) => m.counts(),
            Model::Network(m) => m.counts(),
        }
    }

    pub fn generate(&self) -> Result<GameGraph> {
        match self {
            Model::Planning(m) => m.generate(),
            Model::Inventory(m) => m.generate(),
            Model::Machine(m) => m.generate(),
            Model::Network(m) => m.generate(),
        }
    }
}

/// Builds and generates in one step.
pub fn generate(params: &ModelParams) -> Result<GameGraph> {
    params.build()?.generate()
}

/// Typed access to raw parameters; leftover keys are an error.
pub(crate) struct Fields<'a> {
    values: &'a BTreeMap<String, String>,
    used: Vec<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(values: &'a BTreeMap<String, String>) -> Self {
        Self { values, used: Vec::new() }
    }

    pub(crate) fn get<T: FromStr>(&mut self, key: &'a str, default: T) -> Result<T> {
        self.used.push(key);
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| MlaError::ParamOutOfRange(format!("{key}: cannot parse `{raw}`"))),
        }
    }

    fn finish(self, kind: ModelKind) -> Result<()> {
        match self.values.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(MlaError::ParamOutOfRange(format!("{kind} has no parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

pub(crate) fn check(ok: bool, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(MlaError::ParamOutOfRange(message()))
    }
}

/// The `meta.generator` block attached to every generated graph.
pub(crate) fn generator_meta(
    kind: ModelKind,
    params: serde_json::Value,
    seed: Option<u64>,
    counts: ModelCounts,
    locality: serde_json::Value,
) -> serde_json::Value {
    json!({
        "generator": {
            "model": kind.name(),
            "params": params,
            "seed": seed,
            "core_states": counts.core,
            "total_states": counts.total,
            "locality": locality,
        }
    })
}
