//! Random instance generators and brute-force oracles shared by the
//! integration tests. Nothing here calls into the solvers under test.

#![allow(dead_code)]

use mla_core::game::{GameBuilder, GameGraph, StateKind};
use mla_core::partition::{initial_partition, PartitionTree};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_distribution(rng: &mut ChaCha8Rng, targets: &[usize]) -> Vec<(usize, f64)> {
    let weights: Vec<f64> = targets.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    targets.iter().zip(weights).map(|(&t, w)| (t, w / total)).collect()
}

fn distinct_targets(rng: &mut ChaCha8Rng, n: usize, degree: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(degree.min(n));
    all
}

/// Random game with `n` states; kinds drawn from `kinds`, out-degree in
/// `1..=max_degree`, rewards in `[-1, 1]`.
pub fn random_game(rng: &mut ChaCha8Rng, n: usize, kinds: &[StateKind], max_degree: usize) -> GameGraph {
    let mut b = GameBuilder::new();
    for _ in 0..n {
        let kind = *kinds.choose(rng).unwrap();
        let degree = rng.gen_range(1..=max_degree);
        let targets = distinct_targets(rng, n, degree);
        let reward = (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0;
        match kind {
            StateKind::Probabilistic => b.add_state(kind, reward, random_distribution(rng, &targets)),
            _ => b.add_player(kind, reward, &targets),
        };
    }
    b.build().unwrap()
}

pub const ALL_KINDS: [StateKind; 3] = [StateKind::Player1, StateKind::Player2, StateKind::Probabilistic];
pub const MDP_KINDS: [StateKind; 2] = [StateKind::Player1, StateKind::Probabilistic];

/// Pure memoryless choice per state (index into the successor list; 0 for
/// probabilistic states), enumerated for the states owned by `owner`.
pub fn strategies(graph: &GameGraph, owner: StateKind) -> Vec<Vec<usize>> {
    let n = graph.num_states();
    let mut out = vec![vec![0; n]];
    for s in 0..n {
        if graph.kind(s) != owner {
            continue;
        }
        let d = graph.successors(s).len();
        let mut next = Vec::with_capacity(out.len() * d);
        for strat in &out {
            for c in 0..d {
                let mut s2 = strat.clone();
                s2[s] = c;
                next.push(s2);
            }
        }
        out = next;
    }
    out
}

/// Transition matrix of the chain induced by the two strategies.
pub fn induced_chain(graph: &GameGraph, sigma: &[usize], pi: &[usize]) -> DMatrix<f64> {
    let n = graph.num_states();
    let mut p = DMatrix::zeros(n, n);
    for s in 0..n {
        let succ = graph.successors(s);
        match graph.kind(s) {
            StateKind::Player1 => p[(s, succ[sigma[s]] as usize)] = 1.0,
            StateKind::Player2 => p[(s, succ[pi[s]] as usize)] = 1.0,
            StateKind::Probabilistic => {
                for (&t, &q) in succ.iter().zip(graph.probs(s)) {
                    p[(s, t as usize)] += q;
                }
            }
        }
    }
    p
}

fn rewards(graph: &GameGraph) -> DVector<f64> {
    DVector::from_iterator(graph.num_states(), graph.rewards().iter().copied())
}

/// Normalized discounted value of a chain: `(I - beta P) v = (1 - beta) r`.
pub fn chain_discounted(p: &DMatrix<f64>, r: &DVector<f64>, beta: f64) -> DVector<f64> {
    let n = r.len();
    let a = DMatrix::identity(n, n) - p * beta;
    a.lu().solve(&(r * (1.0 - beta))).expect("I - beta P is invertible")
}

/// Reachability closure of a chain (including the state itself).
fn chain_reach(p: &DMatrix<f64>) -> Vec<Vec<bool>> {
    let n = p.nrows();
    let mut reach = vec![vec![false; n]; n];
    for s in 0..n {
        reach[s][s] = true;
        for t in 0..n {
            if p[(s, t)] > 0.0 {
                reach[s][t] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Long-run average reward of a chain from every state: stationary
/// distributions of the bottom components, then absorption probabilities.
pub fn chain_gain(p: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    let n = r.len();
    let reach = chain_reach(p);
    let mut gain = DVector::zeros(n);
    let mut recurrent = vec![false; n];
    let mut done = vec![false; n];
    for s in 0..n {
        if done[s] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&t| reach[s][t] && reach[t][s]).collect();
        let closed = class.iter().all(|&a| (0..n).all(|b| !reach[a][b] || class.contains(&b)));
        for &t in &class {
            done[t] = true;
        }
        if !closed {
            continue;
        }
        // pi (P_C - I) = 0, sum pi = 1
        let m = class.len();
        let mut a = DMatrix::zeros(m + 1, m);
        let mut rhs = DVector::zeros(m + 1);
        for (j, &cj) in class.iter().enumerate() {
            for (i, &ci) in class.iter().enumerate() {
                a[(j, i)] = p[(ci, cj)] - if i == j { 1.0 } else { 0.0 };
            }
            a[(m, j)] = 1.0;
        }
        rhs[m] = 1.0;
        let pi = a.svd(true, true).solve(&rhs, 1e-14).expect("stationary distribution");
        let g: f64 = class.iter().enumerate().map(|(i, &c)| pi[i] * r[c]).sum();
        for &c in &class {
            gain[c] = g;
            recurrent[c] = true;
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&s| !recurrent[s]).collect();
    if !transient.is_empty() {
        let m = transient.len();
        let mut a = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (i, &s) in transient.iter().enumerate() {
            a[(i, i)] = 1.0;
            for (j, &t) in transient.iter().enumerate() {
                a[(i, j)] -= p[(s, t)];
            }
            rhs[i] = (0..n).filter(|&t| recurrent[t]).map(|t| p[(s, t)] * gain[t]).sum();
        }
        let x = a.lu().solve(&rhs).expect("transient system");
        for (i, &s) in transient.iter().enumerate() {
            gain[s] = x[i];
        }
    }
    gain
}

/// Per-state `max_sigma min_pi` of `evaluate(chain)` over pure memoryless
/// strategies.
fn minimax<F: Fn(&DMatrix<f64>) -> DVector<f64>>(graph: &GameGraph, evaluate: F) -> Vec<f64> {
    let n = graph.num_states();
    let sigmas = strategies(graph, StateKind::Player1);
    let pis = strategies(graph, StateKind::Player2);
    let mut best = vec![f64::NEG_INFINITY; n];
    for sigma in &sigmas {
        let mut worst = vec![f64::INFINITY; n];
        for pi in &pis {
            let v = evaluate(&induced_chain(graph, sigma, pi));
            for s in 0..n {
                worst[s] = worst[s].min(v[s]);
            }
        }
        for s in 0..n {
            best[s] = best[s].max(worst[s]);
        }
    }
    best
}

pub fn discounted_by_enumeration(graph: &GameGraph, beta: f64) -> Vec<f64> {
    let r = rewards(graph);
    minimax(graph, |p| chain_discounted(p, &r, beta))
}

pub fn gain_by_enumeration(graph: &GameGraph) -> Vec<f64> {
    let r = rewards(graph);
    minimax(graph, |p| chain_gain(p, &r))
}

/// Whether every pure memoryless strategy pair induces an irreducible chain.
pub fn irreducible_for_all_strategies(graph: &GameGraph) -> bool {
    let sigmas = strategies(graph, StateKind::Player1);
    let pis = strategies(graph, StateKind::Player2);
    sigmas.iter().all(|sigma| {
        pis.iter().all(|pi| {
            let reach = chain_reach(&induced_chain(graph, sigma, pi));
            reach.iter().all(|row| row.iter().all(|&b| b))
        })
    })
}

/// Random game that is irreducible under every strategy pair. State 0 is a
/// probabilistic hub reaching everything; other states lean towards it.
pub fn random_irreducible(rng: &mut ChaCha8Rng, max_states: usize, kinds: &[StateKind], max_degree: usize) -> GameGraph {
    loop {
        let n = rng.gen_range(2..=max_states);
        let mut b = GameBuilder::new();
        let all: Vec<usize> = (0..n).collect();
        b.add_state(
            StateKind::Probabilistic,
            (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0,
            random_distribution(rng, &all),
        );
        for _ in 1..n {
            let kind = *kinds.choose(rng).unwrap();
            let degree = rng.gen_range(1..=max_degree);
            let mut targets = distinct_targets(rng, n, degree);
            let reward = (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0;
            if kind == StateKind::Probabilistic {
                if !targets.contains(&0) {
                    targets[0] = 0;
                }
                b.add_state(kind, reward, random_distribution(rng, &targets));
            } else {
                b.add_player(kind, reward, &targets);
            }
        }
        let g = b.build().unwrap();
        if irreducible_for_all_strategies(&g) {
            return g;
        }
    }
}

/// Random MDP built from 2-3 internally connected blocks, one-way bridges
/// between them and a few transient states feeding into them.
pub fn random_multi_component_mdp(rng: &mut ChaCha8Rng, max_states: usize) -> GameGraph {
    let n = rng.gen_range(5..=max_states);
    let blocks = rng.gen_range(2..=3usize).min(n / 2);
    let transient = rng.gen_range(0..=(n - 2 * blocks).min(3));
    let in_blocks = n - transient;
    // block of every block state, consecutive ranges
    let mut bounds = vec![0];
    for i in 1..blocks {
        let lo = bounds[i - 1] + 2;
        let hi = in_blocks - 2 * (blocks - i);
        bounds.push(rng.gen_range(lo..=hi.max(lo)));
    }
    bounds.push(in_blocks);
    let mut b = GameBuilder::new();
    for blk in 0..blocks {
        let (lo, hi) = (bounds[blk], bounds[blk + 1]);
        let members: Vec<usize> = (lo..hi).collect();
        for s in lo..hi {
            let next = if s + 1 < hi { s + 1 } else { lo };
            let reward = (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0;
            if rng.gen_bool(0.5) {
                let mut targets = vec![next];
                if let Some(&extra) = members.choose(rng) {
                    if extra != next {
                        targets.push(extra);
                    }
                }
                // bridge to a later block
                if blk + 1 < blocks && rng.gen_bool(0.4) {
                    targets.push(rng.gen_range(bounds[blk + 1]..in_blocks));
                }
                b.add_player(StateKind::Player1, reward, &targets);
            } else {
                let mut targets = vec![next];
                if let Some(&extra) = members.choose(rng) {
                    if extra != next {
                        targets.push(extra);
                    }
                }
                b.add_state(StateKind::Probabilistic, reward, random_distribution(rng, &targets));
            }
        }
    }
    for _ in 0..transient {
        let reward = (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0;
        let degree = rng.gen_range(1..=3);
        let targets = distinct_targets(rng, in_blocks, degree);
        if rng.gen_bool(0.5) {
            b.add_player(StateKind::Player1, reward, &targets);
        } else {
            b.add_state(StateKind::Probabilistic, reward, random_distribution(rng, &targets));
        }
    }
    b.build().unwrap()
}

/// Whether `set` (as a membership mask) is an end component.
pub fn is_end_component(graph: &GameGraph, set: &[bool]) -> bool {
    let members: Vec<usize> = (0..set.len()).filter(|&s| set[s]).collect();
    if members.is_empty() {
        return false;
    }
    for &s in &members {
        let succ = graph.successors(s);
        let ok = match graph.kind(s) {
            StateKind::Probabilistic => succ.iter().all(|&t| set[t as usize]),
            _ => succ.iter().any(|&t| set[t as usize]),
        };
        if !ok {
            return false;
        }
    }
    // strongly connected within the set
    let reach_from = |start: usize, forward: bool| {
        let mut seen = vec![false; set.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(s) = stack.pop() {
            for &t in &members {
                let edge = if forward {
                    graph.successors(s).contains(&(t as u32))
                } else {
                    graph.successors(t).contains(&(s as u32))
                };
                if edge && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        members.iter().all(|&t| seen[t])
    };
    reach_from(members[0], true) && reach_from(members[0], false)
}

/// Maximal end components by enumerating every subset of states.
pub fn mecs_by_enumeration(graph: &GameGraph) -> Vec<Vec<usize>> {
    let n = graph.num_states();
    assert!(n <= 16);
    let mut ecs: Vec<u32> = Vec::new();
    for mask in 1u32..(1 << n) {
        let set: Vec<bool> = (0..n).map(|s| mask >> s & 1 == 1).collect();
        if is_end_component(graph, &set) {
            ecs.push(mask);
        }
    }
    let mut maximal: Vec<Vec<usize>> = ecs
        .iter()
        .filter(|&&m| !ecs.iter().any(|&o| o != m && o & m == m))
        .map(|&m| (0..n).filter(|&s| m >> s & 1 == 1).collect())
        .collect();
    maximal.sort();
    maximal
}

/// States from which `owner` has a pure memoryless strategy reaching `t`
/// with positive probability against every pure memoryless opponent.
pub fn positive_reach_by_enumeration(graph: &GameGraph, owner: StateKind, t: usize) -> Vec<usize> {
    let opponent = match owner {
        StateKind::Player1 => StateKind::Player2,
        _ => StateKind::Player1,
    };
    let n = graph.num_states();
    let own = strategies(graph, owner);
    let opp = strategies(graph, opponent);
    let mut winning = vec![false; n];
    for sigma in &own {
        let mut ok = vec![true; n];
        for pi in &opp {
            let (s1, s2) = if owner == StateKind::Player1 { (sigma, pi) } else { (pi, sigma) };
            let reach = chain_reach(&induced_chain(graph, s1, s2));
            for s in 0..n {
                ok[s] &= reach[s][t];
            }
        }
        for s in 0..n {
            winning[s] |= ok[s];
        }
    }
    (0..n).filter(|&s| winning[s]).collect()
}

/// Partition of `graph` at a random initial depth followed by a few random
/// splits.
pub fn random_tree(rng: &mut ChaCha8Rng, graph: &GameGraph) -> PartitionTree {
    let bits = graph.schema().total_bits();
    let mut tree = initial_partition(graph, rng.gen_range(0..=bits)).unwrap();
    for _ in 0..rng.gen_range(0..3) {
        let flags: Vec<bool> = (0..tree.num_regions()).map(|_| rng.gen_bool(0.5)).collect();
        if let Some(r) = tree.split(&flags) {
            tree = r.tree;
        }
    }
    tree
}

pub fn random_valuation(rng: &mut ChaCha8Rng, n: usize, q: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-q..=q)).collect()
}
