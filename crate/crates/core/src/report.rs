//! Machine-readable run reports, one JSON object per line.
//!
//! Every report carries the same keys; fields that do not apply to a run
//! are `null`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::discounted::DiscountedSolution;
use crate::game::GameGraph;
use crate::longrun::{LongRunReport, MdpLongRunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub model: Option<String>,
    /// `discounted` or `average`.
    pub objective: String,
    /// `vi` or `mla`.
    pub engine: String,
    pub states: usize,
    pub core_states: Option<u64>,
    pub transitions: usize,
    pub time_ms: f64,
    /// Per-state values held: `|S|` for vi, `2|R| + max|x|` for mla.
    pub space_metric: usize,
    pub peak_space_metric: Option<usize>,
    pub regions: Option<usize>,
    pub rounds: Option<usize>,
    pub bounds_gap_max: Option<f64>,
    /// `ok`, `fallback`, `no_convergence` or `cross_check_failed`.
    pub status: String,
    pub c_lo: Option<f64>,
    pub c_hi: Option<f64>,
    pub probes: Option<usize>,
    pub mecs: Option<usize>,
    pub bounds_dump: Option<String>,
}

pub const REPORT_KEYS: [&str; 18] = [
    "model",
    "objective",
    "engine",
    "states",
    "core_states",
    "transitions",
    "time_ms",
    "space_metric",
    "peak_space_metric",
    "regions",
    "rounds",
    "bounds_gap_max",
    "status",
    "c_lo",
    "c_hi",
    "probes",
    "mecs",
    "bounds_dump",
];

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl RunReport {
    /// A report for `graph` with every optional field empty.
    pub fn new(graph: &GameGraph, objective: &str, engine: &str) -> Self {
        let meta = graph.meta().get("generator");
        Self {
            model: meta
                .and_then(|g| g.get("model"))
                .and_then(|m| m.as_str())
                .map(str::to_string),
            objective: objective.to_string(),
            engine: engine.to_string(),
            states: graph.num_states(),
            core_states: meta.and_then(|g| g.get("core_states")).and_then(|c| c.as_u64()),
            transitions: graph.num_transitions(),
            time_ms: 0.0,
            space_metric: graph.num_states(),
            peak_space_metric: None,
            regions: None,
            rounds: None,
            bounds_gap_max: None,
            status: "ok".to_string(),
            c_lo: None,
            c_hi: None,
            probes: None,
            mecs: None,
            bounds_dump: None,
        }
    }

    pub fn discounted_vi(graph: &GameGraph, sweeps: usize, elapsed: Duration) -> Self {
        Self {
            time_ms: millis(elapsed),
            rounds: Some(sweeps),
            ..Self::new(graph, "discounted", "vi")
        }
    }

    pub fn discounted_mla(graph: &GameGraph, sol: &DiscountedSolution, dump: bool) -> Self {
        Self {
            time_ms: millis(sol.elapsed),
            space_metric: sol.space_metric(),
            peak_space_metric: Some(sol.peak_space_metric()),
            regions: Some(sol.tree.num_regions()),
            rounds: Some(sol.rounds),
            bounds_gap_max: Some(sol.max_gap()),
            status: sol.status.as_str().to_string(),
            bounds_dump: dump.then(|| sol.tree.dump(&sol.lower, &sol.upper)),
            ..Self::new(graph, "discounted", "mla")
        }
    }

    pub fn average(graph: &GameGraph, engine: &str, r: &LongRunReport) -> Self {
        Self {
            time_ms: millis(r.elapsed),
            space_metric: r.space_metric,
            regions: Some(r.regions),
            rounds: Some(r.refinements),
            bounds_gap_max: Some(r.width()),
            status: if r.used_fallback { "fallback" } else { "ok" }.to_string(),
            c_lo: Some(r.c_lo),
            c_hi: Some(r.c_hi),
            probes: Some(r.probes + r.concrete_probes),
            ..Self::new(graph, "average", engine)
        }
    }

    pub fn average_mdp(graph: &GameGraph, r: &MdpLongRunReport) -> Self {
        let lo = r.lower.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            time_ms: millis(r.elapsed),
            space_metric: r.space_metric,
            regions: Some(r.regions),
            rounds: Some(r.refinements),
            bounds_gap_max: Some(r.max_gap()),
            c_lo: Some(lo),
            c_hi: Some(hi),
            probes: Some(r.probes),
            mecs: Some(r.mecs.len()),
            ..Self::new(graph, "average", "mla")
        }
    }

    pub fn with_status(mut self, status: &str) -> Self {
        self.status = status.to_string();
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameBuilder, StateKind};

    #[test]
    fn every_key_is_emitted() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 1.0, &[0]);
        let g = b.build().unwrap();
        let line = RunReport::new(&g, "discounted", "vi").to_json_line();
        let value: serde_json::Value = serde_json::from_str(&line).unwrap();
        let keys: Vec<&str> = value.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected = REPORT_KEYS.to_vec();
        expected.sort_unstable();
        assert_eq!(keys, expected);
        assert!(value["c_lo"].is_null());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 1.0, &[0]);
        let g = b.build().unwrap();
        let mut value: serde_json::Value = serde_json::to_value(RunReport::new(&g, "average", "mla")).unwrap();
        value["extra"] = 1.into();
        assert!(serde_json::from_value::<RunReport>(value).is_err());
    }
}
