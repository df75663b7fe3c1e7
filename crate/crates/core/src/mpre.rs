//! Predecessor operators that read values outside one region through
//! region summaries.
//!
//! [`mpre`] works on a full valuation and summarizes foreign regions by the
//! max or min of their states; it exists to state the operator laws. The
//! solvers only use [`mprex`] and [`mprex_at`], which take the values of a
//! single region plus one number per region.

use crate::error::{MlaError, Result};
use crate::game::{GameGraph, StateId};
use crate::partition::{PartitionTree, RegionId, RegionValuation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HMode {
    Max,
    Min,
}

impl HMode {
    #[inline]
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            HMode::Max => a.max(b),
            HMode::Min => a.min(b),
        }
    }

    #[inline]
    pub fn identity(self) -> f64 {
        match self {
            HMode::Max => f64::NEG_INFINITY,
            HMode::Min => f64::INFINITY,
        }
    }

    pub fn summarize<I: IntoIterator<Item = f64>>(self, values: I) -> f64 {
        values.into_iter().fold(self.identity(), |acc, v| self.combine(acc, v))
    }
}

fn check_full(graph: &GameGraph, v: &[f64]) -> Result<()> {
    if v.len() != graph.num_states() {
        return Err(MlaError::DimensionMismatch {
            expected: graph.num_states(),
            got: v.len(),
        });
    }
    Ok(())
}

/// `h` over the values of every region.
pub fn region_summaries(tree: &PartitionTree, h: HMode, v: &[f64]) -> Vec<f64> {
    (0..tree.num_regions())
        .map(|i| h.summarize(tree.states_at(i).iter().map(|&s| v[s as usize])))
        .collect()
}

/// `v(t)` if `t` shares a region with `s`, else `h` over `t`'s region.
pub fn g_aux(tree: &PartitionTree, s: StateId, h: HMode, v: &[f64], t: StateId) -> f64 {
    let xt = tree.region_index_of(t.index());
    if xt == tree.region_index_of(s.index()) {
        v[t.index()]
    } else {
        h.summarize(tree.states_at(xt).iter().map(|&q| v[q as usize]))
    }
}

/// Pre with foreign successors read through [`g_aux`].
pub fn mpre(graph: &GameGraph, h: HMode, v: &[f64], tree: &PartitionTree) -> Result<Vec<f64>> {
    check_full(graph, v)?;
    let summary = region_summaries(tree, h, v);
    Ok((0..graph.num_states())
        .map(|s| {
            let xs = tree.region_index_of(s);
            crate::game::step(graph, s, |t| {
                let xt = tree.region_index_of(t);
                if xt == xs {
                    v[t]
                } else {
                    summary[xt]
                }
            })
        })
        .collect())
}

/// `v_x(t)` if `t` shares a region with `s`, else `u` of `t`'s region.
pub fn ghat_aux(tree: &PartitionTree, s: StateId, v_x: &[f64], u: &RegionValuation, t: StateId) -> Result<f64> {
    let xt = tree.region_index_of(t.index());
    if xt == tree.region_index_of(s.index()) {
        v_x.get(tree.local_index_of(t.index()))
            .copied()
            .ok_or(MlaError::ForeignStateInRegionLookup { state: t.index() })
    } else {
        Ok(u.values()[xt])
    }
}

/// One predecessor step at `s` (a state of region `xi`) reading the local
/// values `v_x` inside the region and `u` outside it.
#[inline]
pub fn mprex_at(graph: &GameGraph, tree: &PartitionTree, xi: usize, s: usize, v_x: &[f64], u: &[f64]) -> f64 {
    crate::game::step(graph, s, |t| {
        let xt = tree.region_index_of(t);
        if xt == xi {
            v_x[tree.local_index_of(t)]
        } else {
            u[xt]
        }
    })
}

/// [`mprex_at`] over every state of region `x`, in the region's state order.
pub fn mprex(
    graph: &GameGraph,
    x: RegionId,
    v_x: &[f64],
    tree: &PartitionTree,
    u: &RegionValuation,
) -> Result<Vec<f64>> {
    let states = tree.states_of(x)?;
    if v_x.len() != states.len() {
        return Err(MlaError::DimensionMismatch {
            expected: states.len(),
            got: v_x.len(),
        });
    }
    if u.len() != tree.num_regions() {
        return Err(MlaError::DimensionMismatch {
            expected: tree.num_regions(),
            got: u.len(),
        });
    }
    Ok(states
        .iter()
        .map(|&s| mprex_at(graph, tree, x.index(), s as usize, v_x, u.values()))
        .collect())
}
