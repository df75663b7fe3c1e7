//! Abstraction-refinement solver for discounted objectives.
//!
//! [`mla_discounted`] keeps a lower and an upper value per region. Each round
//! solves both with [`global_val_iter`], which sweeps the regions and
//! recomputes each one with [`mag_iter`]: value iteration over the states of
//! that region only, reading the frozen region values at the boundary.
//! Regions whose bounds are still too far apart are split and the round is
//! repeated.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{MlaError, Result};
use crate::game::{exact_threshold, value_iteration_discounted, GameGraph};
use crate::mpre::{mprex_at, HMode};
use crate::partition::{
    default_depth, initial_partition, split_regions_all, BoundRole, PartitionError, PartitionTree, RegionId,
    RegionValuation,
};

#[derive(Debug, Clone)]
pub struct DiscountedConfig {
    pub beta: f64,
    pub eps_abs: f64,
    pub eps_float: f64,
    /// Bits tested by the initial partition; half the encoding if unset.
    pub initial_depth: Option<u32>,
    pub max_outer_rounds: usize,
    pub max_global_sweeps: usize,
    pub max_mag_sweeps: usize,
    /// Skip regions none of whose successor regions changed in the last sweep.
    pub skip_unchanged: bool,
    /// Worker threads per sweep; 1 runs sequentially.
    pub threads: usize,
}

impl Default for DiscountedConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            eps_abs: 0.01,
            eps_float: 1e-4,
            initial_depth: None,
            max_outer_rounds: 100_000,
            max_global_sweeps: 1_000_000,
            max_mag_sweeps: 10_000_000,
            skip_unchanged: true,
            threads: 1,
        }
    }
}

impl DiscountedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(MlaError::ParamOutOfRange(format!("beta {} not in (0,1)", self.beta)));
        }
        if !(self.eps_abs > 0.0) {
            return Err(MlaError::ParamOutOfRange(format!("eps_abs {} must be positive", self.eps_abs)));
        }
        if !(self.eps_float >= 0.0) {
            return Err(MlaError::ParamOutOfRange(format!("eps_float {} is negative", self.eps_float)));
        }
        if self.eps_float > 0.0 && self.eps_abs < 10.0 * self.eps_float {
            return Err(MlaError::ParamOutOfRange(format!(
                "eps_abs {} must be at least 10 * eps_float {}",
                self.eps_abs, self.eps_float
            )));
        }
        if self.threads == 0 {
            return Err(MlaError::ParamOutOfRange("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Residual at which a global sweep is considered stationary.
    fn global_threshold(&self, graph: &GameGraph) -> f64 {
        if self.eps_float > 0.0 {
            self.eps_float
        } else {
            exact_threshold(graph.max_abs_reward())
        }
    }

    /// Residual at which one region's iteration stops. Tighter than the
    /// global one so that inner error stays a small fraction of `eps_float`.
    fn mag_threshold(&self, graph: &GameGraph) -> f64 {
        if self.eps_float > 0.0 {
            (self.eps_float * (1.0 - self.beta) / 10.0).max(exact_threshold(graph.max_abs_reward()))
        } else {
            exact_threshold(graph.max_abs_reward())
        }
    }

    /// Slack between the returned bounds and the true fixpoint attributable
    /// to stopping at `eps_float`.
    pub fn slack(&self) -> f64 {
        self.eps_float * self.beta / (1.0 - self.beta)
    }
}

/// Counts concrete (per-state) values alive at once.
#[derive(Debug, Default)]
pub struct SpaceMeter {
    live: AtomicUsize,
    peak: AtomicUsize,
}

impl SpaceMeter {
    pub fn acquire(&self, entries: usize) {
        let now = self.live.fetch_add(entries, Ordering::Relaxed) + entries;
        self.peak.fetch_max(now, Ordering::Relaxed);
    }

    pub fn release(&self, entries: usize) {
        self.live.fetch_sub(entries, Ordering::Relaxed);
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::Relaxed)
    }

    pub fn live(&self) -> usize {
        self.live.load(Ordering::Relaxed)
    }

    /// Returns the peak so far and restarts peak tracking from the live count.
    pub fn take_peak(&self) -> usize {
        self.peak.swap(self.live(), Ordering::Relaxed)
    }
}

/// Space use of one outer round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundSpace {
    pub regions: usize,
    pub max_region_size: usize,
    /// Most per-state values alive at once during the round.
    pub peak_live_entries: usize,
}

impl RoundSpace {
    pub fn metric(&self) -> usize {
        2 * self.regions + self.max_region_size
    }
}

/// Distinct successor regions of every region, itself excluded.
#[derive(Debug, Clone)]
pub struct RegionAdjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl RegionAdjacency {
    pub fn new(graph: &GameGraph, tree: &PartitionTree) -> Self {
        let mut offsets = Vec::with_capacity(tree.num_regions() + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        let mut mark = vec![u32::MAX; tree.num_regions()];
        for xi in 0..tree.num_regions() {
            for &s in tree.states_at(xi) {
                for &t in graph.successors(s as usize) {
                    let y = tree.region_index_of(t as usize);
                    if y != xi && mark[y] != xi as u32 {
                        mark[y] = xi as u32;
                        targets.push(y as u32);
                    }
                }
            }
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub fn of(&self, xi: usize) -> &[u32] {
        &self.targets[self.offsets[xi]..self.offsets[xi + 1]]
    }
}

/// Iteration counts gathered during a solve.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SweepStats {
    pub global_sweeps: usize,
    pub mag_calls: usize,
    pub mag_sweeps: usize,
    pub skipped: usize,
}

struct Solver<'a> {
    graph: &'a GameGraph,
    tree: &'a PartitionTree,
    beta: f64,
    mag_threshold: f64,
    max_mag_sweeps: usize,
    meter: &'a SpaceMeter,
}

impl Solver<'_> {
    /// Iterates region `xi` in place on `buf` and returns the `h` summary and
    /// the number of sweeps.
    fn mag_iter(&self, xi: usize, u: &[f64], h: HMode, buf: &mut Vec<f64>) -> Result<(f64, usize)> {
        let states = self.tree.states_at(xi);
        buf.clear();
        buf.resize(states.len(), u[xi]);
        self.meter.acquire(states.len());
        let beta = self.beta;
        let mut sweeps = 0;
        let outcome = loop {
            let mut residual = 0.0f64;
            for (i, &s) in states.iter().enumerate() {
                let s = s as usize;
                let next = (1.0 - beta) * self.graph.reward(s) + beta * mprex_at(self.graph, self.tree, xi, s, buf, u);
                residual = residual.max((next - buf[i]).abs());
                buf[i] = next;
            }
            sweeps += 1;
            if residual <= self.mag_threshold {
                break Ok((h.summarize(buf.iter().copied()), sweeps));
            }
            if sweeps >= self.max_mag_sweeps {
                break Err(MlaError::RegionNoConvergence {
                    region: xi,
                    sweeps,
                    residual,
                });
            }
        };
        self.meter.release(states.len());
        outcome
    }
}

/// Magnified iteration of one region against frozen region values `u`.
///
/// Starts every state of `x` at `u(x)`, iterates
/// `v(s) = (1-beta) r(s) + beta MPrex(v, R, u)(s)` until a sweep changes no
/// value by more than the threshold derived from `eps_float`, and returns
/// `h` over the region's values.
#[allow(clippy::too_many_arguments)]
pub fn mag_iter(
    graph: &GameGraph,
    tree: &PartitionTree,
    x: RegionId,
    u: &RegionValuation,
    beta: f64,
    h: HMode,
    eps_float: f64,
    max_mag_sweeps: usize,
) -> Result<f64> {
    let xi = tree.check(x)?;
    if u.len() != tree.num_regions() {
        return Err(PartitionError::ValuationSize {
            expected: tree.num_regions(),
            got: u.len(),
        }
        .into());
    }
    let config = DiscountedConfig {
        beta,
        eps_float,
        max_mag_sweeps,
        ..Default::default()
    };
    let meter = SpaceMeter::default();
    let solver = Solver {
        graph,
        tree,
        beta,
        mag_threshold: config.mag_threshold(graph),
        max_mag_sweeps,
        meter: &meter,
    };
    Ok(solver.mag_iter(xi, u.values(), h, &mut Vec::new())?.0)
}

/// Sweeps all regions with [`mag_iter`] against a snapshot of `u` until one
/// sweep moves no region by more than the stationarity threshold.
pub fn global_val_iter(
    graph: &GameGraph,
    tree: &PartitionTree,
    u: &mut RegionValuation,
    h: HMode,
    config: &DiscountedConfig,
    meter: &SpaceMeter,
) -> Result<SweepStats> {
    config.validate()?;
    if u.len() != tree.num_regions() {
        return Err(PartitionError::ValuationSize {
            expected: tree.num_regions(),
            got: u.len(),
        }
        .into());
    }
    let adjacency = config.skip_unchanged.then(|| RegionAdjacency::new(graph, tree));
    run_global(graph, tree, u, h, config, meter, adjacency.as_ref())
}

fn run_global(
    graph: &GameGraph,
    tree: &PartitionTree,
    u: &mut RegionValuation,
    h: HMode,
    config: &DiscountedConfig,
    meter: &SpaceMeter,
    adjacency: Option<&RegionAdjacency>,
) -> Result<SweepStats> {
    let solver = Solver {
        graph,
        tree,
        beta: config.beta,
        mag_threshold: config.mag_threshold(graph),
        max_mag_sweeps: config.max_mag_sweeps,
        meter,
    };
    let threshold = config.global_threshold(graph);
    let regions = tree.num_regions();
    let mut stats = SweepStats::default();
    let mut changed = vec![true; regions];
    let mut buf = Vec::with_capacity(tree.max_region_size());
    let pool = if config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| MlaError::ParamOutOfRange(e.to_string()))?,
        )
    } else {
        None
    };
    loop {
        let snapshot = u.values().to_vec();
        let needed = |xi: usize| match adjacency {
            Some(adj) if stats.global_sweeps > 0 => {
                changed[xi] || adj.of(xi).iter().any(|&y| changed[y as usize])
            }
            _ => true,
        };
        let work: Vec<usize> = (0..regions).filter(|&xi| needed(xi)).collect();
        stats.skipped += regions - work.len();
        let results: Vec<(usize, f64, usize)> = match &pool {
            None => {
                let mut out = Vec::with_capacity(work.len());
                for &xi in &work {
                    let (value, sweeps) = solver.mag_iter(xi, &snapshot, h, &mut buf)?;
                    out.push((xi, value, sweeps));
                }
                out
            }
            Some(pool) => pool.install(|| {
                work.par_iter()
                    .map_init(Vec::new, |buf, &xi| {
                        solver.mag_iter(xi, &snapshot, h, buf).map(|(v, n)| (xi, v, n))
                    })
                    .collect::<Result<Vec<_>>>()
            })?,
        };
        changed.iter_mut().for_each(|c| *c = false);
        let mut residual = 0.0f64;
        let mut worst = 0;
        let values = u.values_mut();
        for (xi, value, sweeps) in results {
            stats.mag_calls += 1;
            stats.mag_sweeps += sweeps;
            let delta = (value - snapshot[xi]).abs();
            if delta > residual {
                residual = delta;
                worst = xi;
            }
            changed[xi] = value != snapshot[xi];
            values[xi] = value;
        }
        stats.global_sweeps += 1;
        if residual <= threshold {
            return Ok(stats);
        }
        if stats.global_sweeps >= config.max_global_sweeps {
            return Err(MlaError::GlobalNoConvergence {
                sweeps: stats.global_sweeps,
                residual,
                region: worst,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Every region's bounds are within `eps_abs`.
    Converged,
    /// Refinement ran out of splittable regions; the bounds come from
    /// concrete value iteration.
    Fallback,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "ok",
            SolveStatus::Fallback => "fallback",
        }
    }
}

/// Result of [`mla_discounted`].
#[derive(Debug, Clone)]
pub struct DiscountedSolution {
    pub tree: PartitionTree,
    pub lower: RegionValuation,
    pub upper: RegionValuation,
    pub rounds: usize,
    pub stats: SweepStats,
    /// One entry per outer round.
    pub space: Vec<RoundSpace>,
    pub status: SolveStatus,
    /// Concrete values and their error bound when [`SolveStatus::Fallback`].
    pub fallback: Option<(Vec<f64>, f64)>,
    pub elapsed: Duration,
}

impl DiscountedSolution {
    /// Bounds on the value of state `s`.
    pub fn state_bounds(&self, s: usize) -> (f64, f64) {
        match &self.fallback {
            Some((values, err)) => (values[s] - err, values[s] + err),
            None => {
                let x = self.tree.region_index_of(s);
                (self.lower.values()[x], self.upper.values()[x])
            }
        }
    }

    pub fn max_gap(&self) -> f64 {
        match &self.fallback {
            Some((_, err)) => 2.0 * err,
            None => max_gap(&self.lower, &self.upper),
        }
    }

    pub fn space_metric(&self) -> usize {
        self.tree.space_metric()
    }

    /// Largest space metric over all rounds.
    pub fn peak_space_metric(&self) -> usize {
        self.space.iter().map(RoundSpace::metric).max().unwrap_or(0)
    }

    /// Most per-state values alive at once over the whole solve.
    pub fn peak_live_entries(&self) -> usize {
        self.space.iter().map(|r| r.peak_live_entries).max().unwrap_or(0)
    }

    /// Whether every round stayed within one region's worth of per-state
    /// values.
    pub fn within_region_space(&self) -> bool {
        self.space.iter().all(|r| r.peak_live_entries <= r.max_region_size)
    }

    /// Certified when the abstraction closed the gap by itself.
    pub fn certified(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

fn max_gap(lower: &RegionValuation, upper: &RegionValuation) -> f64 {
    lower
        .values()
        .iter()
        .zip(upper.values())
        .fold(0.0f64, |m, (lo, hi)| m.max(hi - lo))
}

/// The abstraction-refinement loop for discounted objectives.
///
/// Starts from the initial partition with both bounds at zero. Each round
/// restarts the upper bound from the lower one, solves both to stationarity,
/// and either returns (every gap at most `eps_abs`) or splits every region
/// whose gap exceeds `eps_abs`.
pub fn mla_discounted(graph: &GameGraph, config: &DiscountedConfig) -> Result<DiscountedSolution> {
    config.validate()?;
    let start = Instant::now();
    let depth = config.initial_depth.unwrap_or_else(|| default_depth(graph));
    let mut tree = initial_partition(graph, depth)?;
    let mut lower = RegionValuation::constant(BoundRole::Lower, tree.num_regions(), 0.0);
    let mut stats = SweepStats::default();
    let meter = SpaceMeter::default();
    let mut rounds = 0;
    let mut space = Vec::new();
    loop {
        if rounds >= config.max_outer_rounds {
            return Err(MlaError::RoundLimitExceeded(rounds));
        }
        rounds += 1;
        let adjacency = config.skip_unchanged.then(|| RegionAdjacency::new(graph, &tree));
        let mut upper = lower.clone().with_role(BoundRole::Upper);
        for (h, u) in [(HMode::Max, &mut upper), (HMode::Min, &mut lower)] {
            let s = run_global(graph, &tree, u, h, config, &meter, adjacency.as_ref())?;
            stats.global_sweeps += s.global_sweeps;
            stats.mag_calls += s.mag_calls;
            stats.mag_sweeps += s.mag_sweeps;
            stats.skipped += s.skipped;
        }
        space.push(RoundSpace {
            regions: tree.num_regions(),
            max_region_size: tree.max_region_size(),
            peak_live_entries: meter.take_peak(),
        });
        if max_gap(&lower, &upper) <= config.eps_abs {
            return Ok(DiscountedSolution {
                tree,
                lower,
                upper,
                rounds,
                stats,
                space,
                status: SolveStatus::Converged,
                fallback: None,
                elapsed: start.elapsed(),
            });
        }
        match split_regions_all(&tree, &lower, &upper, config.eps_abs) {
            Ok((next, lo, _)) => {
                tree = next;
                lower = lo;
            }
            Err(PartitionError::CannotRefine) => {
                let (values, err) = concrete_fallback(graph, config)?;
                space.push(RoundSpace {
                    regions: graph.num_states(),
                    max_region_size: 1,
                    peak_live_entries: 2 * graph.num_states(),
                });
                return Ok(DiscountedSolution {
                    tree,
                    lower,
                    upper,
                    rounds,
                    stats,
                    space,
                    status: SolveStatus::Fallback,
                    fallback: Some((values, err)),
                    elapsed: start.elapsed(),
                });
            }
            Err(other) => return Err(other.into()),
        }
    }
}

fn concrete_fallback(graph: &GameGraph, config: &DiscountedConfig) -> Result<(Vec<f64>, f64)> {
    let (values, _) = value_iteration_discounted(graph, config.beta, config.eps_float, config.max_global_sweeps)?;
    let threshold = config.global_threshold(graph);
    Ok((values, config.beta / (1.0 - config.beta) * threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{exact_discounted_oracle, GameBuilder, StateKind};

    fn config() -> DiscountedConfig {
        DiscountedConfig {
            eps_float: 1e-8,
            ..Default::default()
        }
    }

    /// Two absorbing rewards reached through a chain.
    fn ladder(n: usize) -> GameGraph {
        let mut b = GameBuilder::new();
        for s in 0..n {
            let next = if s + 1 < n { s + 1 } else { s };
            b.add_player(StateKind::Player1, (s % 3) as f64, &[next]);
        }
        b.build().unwrap()
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = config();
        c.eps_abs = 1e-8;
        assert!(c.validate().is_err());
        c = config();
        c.beta = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn absorbing_region_is_independent_of_u() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 4.0, &[1]);
        b.add_player(StateKind::Player1, 4.0, &[0]);
        let g = b.build().unwrap();
        let t = initial_partition(&g, 0).unwrap();
        for val in [-10.0, 0.0, 10.0] {
            let u = RegionValuation::constant(BoundRole::Upper, 1, val);
            for h in [HMode::Max, HMode::Min] {
                let v = mag_iter(&g, &t, t.region(0), &u, 0.9, h, 0.0, 100_000).unwrap();
                assert!((v - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_value_needs_no_refinement() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 2.0, &[1, 2]);
        b.add_player(StateKind::Player2, 2.0, &[0, 3]);
        b.add_state(StateKind::Probabilistic, 2.0, [(0, 0.5), (3, 0.5)]);
        b.add_player(StateKind::Player1, 2.0, &[3]);
        let g = b.build().unwrap();
        let c = DiscountedConfig {
            initial_depth: Some(0),
            ..config()
        };
        let sol = mla_discounted(&g, &c).unwrap();
        assert_eq!(sol.tree.num_regions(), 1);
        assert!((sol.lower.values()[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn brackets_oracle_on_a_ladder() {
        let g = ladder(40);
        let sol = mla_discounted(&g, &config()).unwrap();
        let oracle = exact_discounted_oracle(&g, 0.9).unwrap();
        let slack = config().slack() + 1e-9;
        for s in 0..g.num_states() {
            let (lo, hi) = sol.state_bounds(s);
            assert!(lo - slack <= oracle.values[s] && oracle.values[s] <= hi + slack, "state {s}");
        }
        assert!(sol.max_gap() <= 0.01);
        assert!(sol.within_region_space());
        assert_eq!(sol.space.len(), sol.rounds);
    }

    #[test]
    fn singleton_partition_recovers_concrete_values() {
        let g = ladder(12);
        let t = initial_partition(&g, g.schema().total_bits()).unwrap();
        let mut u = RegionValuation::constant(BoundRole::Upper, t.num_regions(), 0.0);
        let meter = SpaceMeter::default();
        global_val_iter(&g, &t, &mut u, HMode::Max, &config(), &meter).unwrap();
        let oracle = exact_discounted_oracle(&g, 0.9).unwrap();
        for s in 0..g.num_states() {
            assert!((u.values()[t.region_index_of(s)] - oracle.values[s]).abs() < 1e-6);
        }
        assert_eq!(meter.peak(), 1);
    }

    #[test]
    fn skipping_and_threads_do_not_change_results() {
        let g = ladder(64);
        let base = mla_discounted(&g, &config()).unwrap();
        for (skip, threads) in [(false, 1), (true, 3), (false, 2)] {
            let c = DiscountedConfig {
                skip_unchanged: skip,
                threads,
                ..config()
            };
            let other = mla_discounted(&g, &c).unwrap();
            assert_eq!(other.tree.num_regions(), base.tree.num_regions());
            for (a, b) in other.lower.values().iter().zip(base.lower.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
            for (a, b) in other.upper.values().iter().zip(base.upper.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
