use serde::{Deserialize, Serialize};

use super::{GameError, GameGraph, StateKind};

/// Residual the oracle iterates down to.
pub const ORACLE_RESIDUAL: f64 = 1e-14;

/// Outcome of a finite divergence probe of relative value iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivergenceVerdict {
    /// Every value ended above the probe constant.
    Plus,
    /// Every value ended below the probe constant.
    Minus,
    Unknown,
}

impl DivergenceVerdict {
    /// Verdict for the final values of a probe at `c`. Comparisons are strict.
    pub fn from_extremes(min: f64, max: f64, c: f64) -> Self {
        if min > c {
            DivergenceVerdict::Plus
        } else if max < c {
            DivergenceVerdict::Minus
        } else {
            DivergenceVerdict::Unknown
        }
    }
}

/// Neumaier-compensated sum of `p * value(t)` over the successors of `s`.
#[inline]
pub(crate) fn expectation<F: Fn(usize) -> f64>(graph: &GameGraph, s: usize, value: F) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (&t, &p) in graph.successors(s).iter().zip(graph.probs(s)) {
        let term = p * value(t as usize);
        let next = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - next) + term;
        } else {
            comp += (term - next) + sum;
        }
        sum = next;
    }
    sum + comp
}

/// One predecessor step at `s`: max, min or expectation of `value` over the
/// successors depending on who owns `s`.
#[inline]
pub(crate) fn step<F: Fn(usize) -> f64>(graph: &GameGraph, s: usize, value: F) -> f64 {
    match graph.kind(s) {
        StateKind::Player1 => graph
            .successors(s)
            .iter()
            .map(|&t| value(t as usize))
            .fold(f64::NEG_INFINITY, f64::max),
        StateKind::Player2 => graph
            .successors(s)
            .iter()
            .map(|&t| value(t as usize))
            .fold(f64::INFINITY, f64::min),
        StateKind::Probabilistic => expectation(graph, s, value),
    }
}

fn check_len(graph: &GameGraph, v: &[f64]) -> Result<(), GameError> {
    if v.len() != graph.num_states() {
        return Err(GameError::DimensionMismatch {
            expected: graph.num_states(),
            got: v.len(),
        });
    }
    Ok(())
}

/// The predecessor operator over the whole state space.
pub fn pre(graph: &GameGraph, v: &[f64]) -> Result<Vec<f64>, GameError> {
    let mut out = vec![0.0; graph.num_states()];
    pre_into(graph, v, &mut out)?;
    Ok(out)
}

pub fn pre_into(graph: &GameGraph, v: &[f64], out: &mut [f64]) -> Result<(), GameError> {
    check_len(graph, v)?;
    check_len(graph, out)?;
    for (s, slot) in out.iter_mut().enumerate() {
        *slot = step(graph, s, |t| v[t]);
    }
    Ok(())
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Stopping threshold used when a caller asks for an exact fixpoint:
/// the oracle residual, widened to a few ulps of the largest value so that
/// iteration cannot stall on rounding noise.
pub(crate) fn exact_threshold(scale: f64) -> f64 {
    ORACLE_RESIDUAL.max(8.0 * f64::EPSILON * scale)
}

/// Discounted value iteration `v <- (1-beta) r + beta Pre(v)` from `v = 0`.
///
/// Stops once the sup-norm change of a sweep is at most `eps_float`; an
/// `eps_float` of zero iterates down to [`ORACLE_RESIDUAL`]. Returns the
/// valuation and the number of sweeps.
pub fn value_iteration_discounted(
    graph: &GameGraph,
    beta: f64,
    eps_float: f64,
    max_sweeps: usize,
) -> Result<(Vec<f64>, usize), GameError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(GameError::BadParameter(format!("discount {beta} not in (0,1)")));
    }
    if !(eps_float >= 0.0) {
        return Err(GameError::BadParameter(format!("eps_float {eps_float} < 0")));
    }
    let n = graph.num_states();
    let bound = graph.max_abs_reward();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = (1.0 - beta) * graph.reward(s) + beta * step(graph, s, |t| v[t]);
        }
        residual = sup_distance(&next, &v);
        std::mem::swap(&mut v, &mut next);
        let threshold = if eps_float > 0.0 {
            eps_float
        } else {
            exact_threshold(bound)
        };
        if residual <= threshold {
            return Ok((v, sweep));
        }
    }
    Err(GameError::NoConvergence {
        sweeps: max_sweeps,
        residual,
    })
}

/// A discounted valuation with a certified sup-norm error bound.
#[derive(Debug, Clone)]
pub struct CertifiedValuation {
    pub values: Vec<f64>,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    /// `beta / (1 - beta) * residual`: distance to the true fixpoint.
    pub error_bound: f64,
    pub sweeps: usize,
}

/// Reference discounted values, iterated to [`ORACLE_RESIDUAL`].
pub fn exact_discounted_oracle(graph: &GameGraph, beta: f64) -> Result<CertifiedValuation, GameError> {
    let scale = graph.max_abs_reward().max(f64::MIN_POSITIVE);
    // sweeps for the geometric tail to fall below the residual, plus slack
    let needed = ((ORACLE_RESIDUAL / scale).ln() / beta.ln()).ceil().max(0.0) as usize;
    let cap = needed.saturating_mul(4).saturating_add(1000);
    let (values, sweeps) = value_iteration_discounted(graph, beta, 0.0, cap)?;
    // recover the final residual exactly
    let mut residual = 0.0f64;
    for s in 0..graph.num_states() {
        let next = (1.0 - beta) * graph.reward(s) + beta * step(graph, s, |t| values[t]);
        residual = residual.max((next - values[s]).abs());
    }
    Ok(CertifiedValuation {
        error_bound: beta / (1.0 - beta) * residual,
        values,
        residual,
        sweeps,
    })
}

/// Relative value iteration `v <- r - c + Pre(v)` from `v = c`, run for
/// `k + 1` steps. The verdict compares the final values against `c`.
pub fn relative_value_iteration(graph: &GameGraph, c: f64, k: usize) -> (DivergenceVerdict, Vec<f64>) {
    let n = graph.num_states();
    let mut v = vec![c; n];
    let mut next = vec![0.0; n];
    for _ in 0..=k {
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = graph.reward(s) - c + step(graph, s, |t| v[t]);
        }
        std::mem::swap(&mut v, &mut next);
    }
    let (min, max) = extremes(&v);
    (DivergenceVerdict::from_extremes(min, max, c), v)
}

pub(crate) fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}
