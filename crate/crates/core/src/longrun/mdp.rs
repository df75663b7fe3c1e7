use std::time::{Duration, Instant};

use super::{mec_decomposition, mla_longrun, LongRunConfig};
use crate::error::{MlaError, Result};
use crate::game::{step, GameBuilder, GameGraph, StateKind};

/// Long-run interval of one maximal end component.
#[derive(Debug, Clone, PartialEq)]
pub struct MecBounds {
    pub states: Vec<usize>,
    pub lo: f64,
    pub hi: f64,
}

/// Per-state long-run bounds of an MDP.
#[derive(Debug, Clone)]
pub struct MdpLongRunReport {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub mecs: Vec<MecBounds>,
    pub probes: usize,
    pub refinements: usize,
    /// Largest region count over the per-component solves.
    pub regions: usize,
    pub space_metric: usize,
    pub elapsed: Duration,
}

impl MdpLongRunReport {
    pub fn max_gap(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .fold(0.0f64, |m, (lo, hi)| m.max(hi - lo))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuotientStart {
    /// Start at the smallest terminal value; iterates approach from below.
    Below,
    /// Start at the largest terminal value; iterates approach from above.
    Above,
}

/// Maximal expected terminal value in an MDP whose only end components are
/// the pinned terminal states.
///
/// Runs `v <- Pre(v)` with terminals held at their values until a sweep
/// changes nothing by more than `eps`. Starting below (above) every fixpoint
/// value, the iterates increase (decrease) monotonically, so the result is a
/// lower (upper) bound whatever `eps` is.
pub fn quotient_reach_value(
    quotient: &GameGraph,
    terminals: &[(usize, f64)],
    start: QuotientStart,
    eps: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    let n = quotient.num_states();
    if terminals.is_empty() {
        return Err(MlaError::ParamOutOfRange("quotient has no terminal state".into()));
    }
    let mut pinned = vec![None; n];
    for &(s, value) in terminals {
        pinned[s] = Some(value);
    }
    let init = match start {
        QuotientStart::Below => terminals.iter().map(|t| t.1).fold(f64::INFINITY, f64::min),
        QuotientStart::Above => terminals.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max),
    };
    let mut v: Vec<f64> = pinned.iter().map(|p| p.unwrap_or(init)).collect();
    let mut next = v.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        residual = 0.0;
        for s in 0..n {
            if pinned[s].is_none() {
                next[s] = step(quotient, s, |t| v[t]);
                residual = residual.max((next[s] - v[s]).abs());
            }
        }
        std::mem::swap(&mut v, &mut next);
        if residual <= eps {
            return Ok(v);
        }
    }
    Err(crate::game::GameError::NoConvergence {
        sweeps: max_sweeps,
        residual,
    }
    .into())
}

/// Quotient of an MDP by its maximal end components.
///
/// Every component becomes one player-1 node whose choices are the edges
/// leaving the component from its player states plus a move to a fresh
/// absorbing node that stands for staying in the component forever.
/// Returns the quotient, the node of every original state, and the
/// absorbing node of every component.
fn quotient(mdp: &GameGraph, mec_of: &[Option<usize>], mecs: usize) -> Result<(GameGraph, Vec<usize>, Vec<usize>)> {
    let n = mdp.num_states();
    let mut node = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if mec_of[s].is_none() {
            node[s] = next;
            next += 1;
        }
    }
    let mec_node: Vec<usize> = (next..next + mecs).collect();
    let stay_node: Vec<usize> = (next + mecs..next + 2 * mecs).collect();
    for s in 0..n {
        if let Some(m) = mec_of[s] {
            node[s] = mec_node[m];
        }
    }
    let mut exits: Vec<Vec<usize>> = vec![Vec::new(); mecs];
    for (m, exits) in exits.iter_mut().enumerate() {
        exits.push(stay_node[m]);
    }
    for s in 0..n {
        if let Some(m) = mec_of[s] {
            if mdp.kind(s) == StateKind::Player1 {
                for &t in mdp.successors(s) {
                    let target = node[t as usize];
                    if mec_of[t as usize] != Some(m) && !exits[m].contains(&target) {
                        exits[m].push(target);
                    }
                }
            }
        }
    }
    let mut b = GameBuilder::with_capacity(next + 2 * mecs, mdp.num_transitions() + 2 * mecs);
    for s in 0..n {
        if mec_of[s].is_some() {
            continue;
        }
        // merge edges that land in the same component
        let mut edges: Vec<(usize, f64)> = Vec::new();
        for (&t, &p) in mdp.successors(s).iter().zip(mdp.probs(s)) {
            let target = node[t as usize];
            match edges.iter_mut().find(|e| e.0 == target) {
                Some(e) => e.1 += p,
                None => edges.push((target, p)),
            }
        }
        b.add_state(mdp.kind(s), 0.0, edges);
    }
    for exits in &exits {
        b.add_player(StateKind::Player1, 0.0, exits);
    }
    for &stay in &stay_node {
        b.add_player(StateKind::Player1, 0.0, &[stay]);
    }
    Ok((b.build()?, node, stay_node))
}

/// Long-run values of an MDP: solve each maximal end component on its own,
/// then take the best expected component value the controller can reach.
pub fn solve_mdp_longrun(mdp: &GameGraph, config: &LongRunConfig) -> Result<MdpLongRunReport> {
    config.validate()?;
    let start = Instant::now();
    let mecs = mec_decomposition(mdp)?;
    let mut mec_of = vec![None; mdp.num_states()];
    let mut bounds = Vec::with_capacity(mecs.len());
    let (mut probes, mut refinements, mut regions, mut space_metric) = (0, 0, 0, 0);
    for (m, mec) in mecs.iter().enumerate() {
        for &s in &mec.states {
            mec_of[s] = Some(m);
        }
        let sub = mec.subgraph(mdp)?;
        let report = mla_longrun(&sub, config)?;
        probes += report.probes + report.concrete_probes;
        refinements += report.refinements;
        regions = regions.max(report.regions);
        space_metric = space_metric.max(report.space_metric);
        bounds.push(MecBounds {
            states: mec.states.clone(),
            lo: report.c_lo,
            hi: report.c_hi,
        });
    }
    let (q, node, stay) = quotient(mdp, &mec_of, mecs.len())?;
    let lo_terms: Vec<(usize, f64)> = stay.iter().zip(&bounds).map(|(&s, b)| (s, b.lo)).collect();
    let hi_terms: Vec<(usize, f64)> = stay.iter().zip(&bounds).map(|(&s, b)| (s, b.hi)).collect();
    let scale = bounds.iter().fold(0.0f64, |m, b| m.max(b.lo.abs()).max(b.hi.abs()));
    let eps = (config.eps_abs * 1e-4).max(1e-12 * scale);
    let sweeps = 10_000_000;
    let q_lo = quotient_reach_value(&q, &lo_terms, QuotientStart::Below, eps, sweeps)?;
    let q_hi = quotient_reach_value(&q, &hi_terms, QuotientStart::Above, eps, sweeps)?;
    Ok(MdpLongRunReport {
        lower: node.iter().map(|&i| q_lo[i]).collect(),
        upper: node.iter().map(|&i| q_hi[i]).collect(),
        mecs: bounds,
        probes,
        refinements,
        regions,
        space_metric,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_terminals_propagate() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 0.0, &[1, 2]);
        b.add_player(StateKind::Player1, 0.0, &[1]);
        b.add_player(StateKind::Player1, 0.0, &[2]);
        let q = b.build().unwrap();
        let v = quotient_reach_value(&q, &[(1, 2.0), (2, 2.0)], QuotientStart::Below, 1e-12, 100).unwrap();
        assert_eq!(v, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn split_to_terminals_averages() {
        let mut b = GameBuilder::new();
        b.add_state(StateKind::Probabilistic, 0.0, [(1, 0.5), (2, 0.5)]);
        b.add_player(StateKind::Player1, 0.0, &[1]);
        b.add_player(StateKind::Player1, 0.0, &[2]);
        let q = b.build().unwrap();
        let v = quotient_reach_value(&q, &[(1, 0.0), (2, 10.0)], QuotientStart::Above, 1e-12, 100).unwrap();
        assert_eq!(v[0], 5.0);
    }

    #[test]
    fn start_picks_the_better_component() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 0.0, &[1, 2]);
        b.add_player(StateKind::Player1, 1.0, &[1]);
        b.add_player(StateKind::Player1, 3.0, &[2]);
        let g = b.build().unwrap();
        let r = solve_mdp_longrun(&g, &LongRunConfig::default()).unwrap();
        assert_eq!(r.mecs.len(), 2);
        assert!(r.lower[0] <= 3.0 && 3.0 <= r.upper[0]);
        assert!(r.upper[0] - r.lower[0] <= 0.01);
    }

    #[test]
    fn component_may_leave_for_a_better_one() {
        // {0, 1} is a component worth 1 whose state 1 can also move to the
        // absorbing state 2 worth 4
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 1.0, &[1]);
        b.add_player(StateKind::Player1, 1.0, &[0, 2]);
        b.add_player(StateKind::Player1, 4.0, &[2]);
        let g = b.build().unwrap();
        let r = solve_mdp_longrun(&g, &LongRunConfig::default()).unwrap();
        for s in 0..3 {
            assert!(r.lower[s] <= 4.0 && 4.0 <= r.upper[s], "state {s}");
        }
    }
}
