//! Long-run average objectives.
//!
//! [`mla_longrun`] brackets the uniform long-run value `v*` by bisection on a
//! constant `c`: relative value iteration `v <- r - c + Pre(v)` diverges to
//! +inf when `c < v*` and to -inf when `c > v*`. Divergence is probed on the
//! region level by [`check_divergence`], refining the partition whenever
//! neither the pessimistic nor the optimistic probe is decisive.

mod mdp;
mod mec;
mod reach;

use std::time::{Duration, Instant};

use crate::error::{MlaError, Result};
use crate::game::{extremes, relative_value_iteration, DivergenceVerdict, GameGraph};
use crate::mpre::{mprex_at, HMode};
use crate::partition::{
    default_depth, initial_partition, split_regions_ratio, BoundRole, PartitionError, PartitionTree, RegionId,
    RegionValuation,
};

pub use mdp::{quotient_reach_value, solve_mdp_longrun, MdpLongRunReport, MecBounds, QuotientStart};
pub use mec::{mec_decomposition, EndComponent};
pub use reach::{check_uniform_value, positive_reach_set, Player};

#[derive(Debug, Clone)]
pub struct LongRunConfig {
    pub eps_abs: f64,
    /// Steps per divergence probe.
    pub k: usize,
    /// Fraction of regions split when a probe is undecided.
    pub ratio: f64,
    pub initial_depth: Option<u32>,
    /// Cap on probes, counting every bisection step and every retry.
    pub max_bisection_steps: usize,
    /// Largest probe length the concrete fallback doubles up to.
    pub max_k: usize,
}

impl Default for LongRunConfig {
    fn default() -> Self {
        Self {
            eps_abs: 0.01,
            k: 100,
            ratio: 0.1,
            initial_depth: None,
            max_bisection_steps: 10_000,
            max_k: 1 << 16,
        }
    }
}

impl LongRunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_abs > 0.0) {
            return Err(MlaError::ParamOutOfRange(format!("eps_abs {} must be positive", self.eps_abs)));
        }
        if self.k == 0 {
            return Err(MlaError::ParamOutOfRange("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(PartitionError::BadRatio(self.ratio).into());
        }
        Ok(())
    }
}

/// Result of [`mla_longrun`].
#[derive(Debug, Clone)]
pub struct LongRunReport {
    pub c_lo: f64,
    pub c_hi: f64,
    pub regions: usize,
    pub space_metric: usize,
    /// Pairs of divergence probes run on the abstraction.
    pub probes: usize,
    pub refinements: usize,
    /// Probes run by the concrete fallback.
    pub concrete_probes: usize,
    pub used_fallback: bool,
    pub elapsed: Duration,
}

impl LongRunReport {
    pub fn width(&self) -> f64 {
        self.c_hi - self.c_lo
    }

    pub fn contains(&self, value: f64) -> bool {
        self.c_lo <= value && value <= self.c_hi
    }
}

fn check_regions(tree: &PartitionTree, u: &RegionValuation) -> Result<()> {
    if u.len() != tree.num_regions() {
        return Err(PartitionError::ValuationSize {
            expected: tree.num_regions(),
            got: u.len(),
        }
        .into());
    }
    Ok(())
}

/// `k + 1` steps of `v(s) <- r(s) - c + MPrex(v, R, u)(s)` over the states of
/// region `xi`, from `u(xi)`. Returns the `h` summary.
fn mag_iter2_at(
    graph: &GameGraph,
    tree: &PartitionTree,
    xi: usize,
    u: &[f64],
    c: f64,
    h: HMode,
    k: usize,
    cur: &mut Vec<f64>,
    next: &mut Vec<f64>,
) -> f64 {
    let states = tree.states_at(xi);
    cur.clear();
    cur.resize(states.len(), u[xi]);
    next.clear();
    next.resize(states.len(), 0.0);
    for _ in 0..=k {
        for (i, &s) in states.iter().enumerate() {
            let s = s as usize;
            next[i] = graph.reward(s) - c + mprex_at(graph, tree, xi, s, cur, u);
        }
        std::mem::swap(cur, next);
    }
    h.summarize(cur.iter().copied())
}

/// Magnified relative value iteration of one region against frozen region
/// values `u`.
pub fn mag_iter2(
    graph: &GameGraph,
    tree: &PartitionTree,
    x: RegionId,
    u: &RegionValuation,
    c: f64,
    h: HMode,
    k: usize,
) -> Result<f64> {
    let xi = tree.check(x)?;
    check_regions(tree, u)?;
    Ok(mag_iter2_at(graph, tree, xi, u.values(), c, h, k, &mut Vec::new(), &mut Vec::new()))
}

/// Region-level relative value iteration: `k + 1` sweeps of [`mag_iter2`]
/// over all regions from `c` everywhere, each sweep reading the previous
/// one. The verdict compares the final region values against `c`.
pub fn check_divergence(
    graph: &GameGraph,
    tree: &PartitionTree,
    c: f64,
    h: HMode,
    k: usize,
) -> (DivergenceVerdict, RegionValuation) {
    let role = match h {
        HMode::Max => BoundRole::Upper,
        HMode::Min => BoundRole::Lower,
    };
    let regions = tree.num_regions();
    let mut v = vec![c; regions];
    let mut out = vec![0.0; regions];
    let mut cur = Vec::with_capacity(tree.max_region_size());
    let mut next = Vec::with_capacity(tree.max_region_size());
    for _ in 0..=k {
        for (xi, slot) in out.iter_mut().enumerate() {
            *slot = mag_iter2_at(graph, tree, xi, &v, c, h, k, &mut cur, &mut next);
        }
        std::mem::swap(&mut v, &mut out);
    }
    let (min, max) = extremes(&v);
    (DivergenceVerdict::from_extremes(min, max, c), RegionValuation::new(role, v))
}

/// Bisection on the long-run value of a game with a uniform value.
///
/// Starts from `[min r, max r]`. At the midpoint `c`, a pessimistic probe
/// diverging upwards raises the lower end, an optimistic probe diverging
/// downwards lowers the upper end, and otherwise the regions with the most
/// disagreement between the two probes are split and `c` is probed again.
/// Once the partition cannot be refined, bisection continues with concrete
/// relative value iteration.
pub fn mla_longrun(graph: &GameGraph, config: &LongRunConfig) -> Result<LongRunReport> {
    config.validate()?;
    let start = Instant::now();
    let depth = config.initial_depth.unwrap_or_else(|| default_depth(graph));
    let mut tree = initial_partition(graph, depth)?;
    let mut c_lo = graph.min_reward();
    let mut c_hi = graph.max_reward();
    let mut probes = 0;
    let mut refinements = 0;
    while c_hi - c_lo > config.eps_abs {
        if probes >= config.max_bisection_steps {
            return Err(MlaError::ProbeBudgetExceeded {
                steps: probes,
                lo: c_lo,
                hi: c_hi,
            });
        }
        let c = c_lo + (c_hi - c_lo) / 2.0;
        let (d_lo, v_lo) = check_divergence(graph, &tree, c, HMode::Min, config.k);
        let (d_hi, v_hi) = check_divergence(graph, &tree, c, HMode::Max, config.k);
        probes += 1;
        if d_lo == DivergenceVerdict::Plus {
            c_lo = c;
        } else if d_hi == DivergenceVerdict::Minus {
            c_hi = c;
        } else {
            match split_regions_ratio(&tree, &v_lo, &v_hi, config.ratio) {
                Ok(r) => {
                    tree = r.tree;
                    refinements += 1;
                }
                Err(PartitionError::CannotRefine) => {
                    let (lo, hi, concrete_probes) =
                        concrete_bisection(graph, c_lo, c_hi, config, config.max_bisection_steps - probes)?;
                    return Ok(LongRunReport {
                        c_lo: lo,
                        c_hi: hi,
                        regions: tree.num_regions(),
                        space_metric: tree.space_metric(),
                        probes,
                        refinements,
                        concrete_probes,
                        used_fallback: true,
                        elapsed: start.elapsed(),
                    });
                }
                Err(other) => return Err(other.into()),
            }
        }
    }
    Ok(LongRunReport {
        c_lo,
        c_hi,
        regions: tree.num_regions(),
        space_metric: tree.space_metric(),
        probes,
        refinements,
        concrete_probes: 0,
        used_fallback: false,
        elapsed: start.elapsed(),
    })
}

/// Long-run value by bisection with concrete relative value iteration only.
/// Regions and space are reported as one per state.
pub fn concrete_longrun(graph: &GameGraph, config: &LongRunConfig) -> Result<LongRunReport> {
    config.validate()?;
    let start = Instant::now();
    let (c_lo, c_hi, concrete_probes) = concrete_bisection(
        graph,
        graph.min_reward(),
        graph.max_reward(),
        config,
        config.max_bisection_steps,
    )?;
    Ok(LongRunReport {
        c_lo,
        c_hi,
        regions: graph.num_states(),
        space_metric: graph.num_states(),
        probes: 0,
        refinements: 0,
        concrete_probes,
        used_fallback: false,
        elapsed: start.elapsed(),
    })
}

/// Bisection with concrete relative value iteration, doubling the probe
/// length while a probe is undecided. When even the longest probe is
/// undecided, `c` is presumably the value itself, and probes at
/// `c -+ eps_abs / 4` close the interval around it.
fn concrete_bisection(
    graph: &GameGraph,
    mut lo: f64,
    mut hi: f64,
    config: &LongRunConfig,
    budget: usize,
) -> Result<(f64, f64, usize)> {
    let mut probes = 0;
    let probe = |c: f64, k: usize, probes: &mut usize| {
        *probes += 1;
        relative_value_iteration(graph, c, k).0
    };
    while hi - lo > config.eps_abs {
        let c = lo + (hi - lo) / 2.0;
        let mut k = config.k;
        loop {
            match probe(c, k, &mut probes) {
                DivergenceVerdict::Plus => {
                    lo = c;
                    break;
                }
                DivergenceVerdict::Minus => {
                    hi = c;
                    break;
                }
                DivergenceVerdict::Unknown if k < config.max_k => k = (k * 2).min(config.max_k),
                DivergenceVerdict::Unknown => {
                    let below = c - config.eps_abs / 4.0;
                    let above = c + config.eps_abs / 4.0;
                    let raised = probe(below, k, &mut probes) == DivergenceVerdict::Plus;
                    let lowered = probe(above, k, &mut probes) == DivergenceVerdict::Minus;
                    if raised {
                        lo = lo.max(below);
                    }
                    if lowered {
                        hi = hi.min(above);
                    }
                    if !raised && !lowered {
                        return Err(MlaError::ProbeBudgetExceeded { steps: probes, lo, hi });
                    }
                    break;
                }
            }
            if probes >= budget {
                return Err(MlaError::ProbeBudgetExceeded { steps: probes, lo, hi });
            }
        }
    }
    Ok((lo, hi, probes))
}
