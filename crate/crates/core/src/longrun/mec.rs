use crate::error::{MlaError, Result};
use crate::game::{GameGraph, StateKind};

/// A set of states in which the controller can stay forever and visit every
/// state: strongly connected, and closed under probabilistic moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndComponent {
    /// Ascending state indices.
    pub states: Vec<usize>,
}

impl EndComponent {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.states.binary_search(&s).is_ok()
    }

    /// The component as a game of its own, with edges leaving it dropped.
    pub fn subgraph(&self, graph: &GameGraph) -> Result<GameGraph> {
        Ok(graph.induced_subgraph(&self.states)?.0)
    }
}

/// Strongly connected components of the graph restricted to `member`
/// states, by an iterative Tarjan.
fn sccs(graph: &GameGraph, states: &[usize], member: &[bool]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = graph.num_states();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    // (state, next successor position)
    let mut call: Vec<(usize, usize)> = Vec::new();
    for &root in states {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(top) = call.last_mut() {
            let s = top.0;
            let succ = graph.successors(s);
            if top.1 < succ.len() {
                let t = succ[top.1] as usize;
                top.1 += 1;
                if !member[t] {
                    continue;
                }
                if index[t] == UNSEEN {
                    index[t] = counter;
                    low[t] = counter;
                    counter += 1;
                    stack.push(t);
                    on_stack[t] = true;
                    call.push((t, 0));
                } else if on_stack[t] {
                    low[s] = low[s].min(index[t]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[s]);
                }
                if low[s] == index[s] {
                    let mut comp = Vec::new();
                    loop {
                        let t = stack.pop().expect("component root is on the stack");
                        on_stack[t] = false;
                        comp.push(t);
                        if t == s {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Maximal end components of an MDP, ordered by smallest state.
///
/// Repeatedly splits candidate sets into strongly connected components and
/// drops states that cannot stay inside their component: probabilistic
/// states with an edge out of it and player states with no edge into it.
pub fn mec_decomposition(mdp: &GameGraph) -> Result<Vec<EndComponent>> {
    if !mdp.is_mdp() {
        return Err(MlaError::NotAnMdp);
    }
    let n = mdp.num_states();
    let mut member = vec![false; n];
    let mut work = vec![(0..n).collect::<Vec<usize>>()];
    let mut found = Vec::new();
    while let Some(set) = work.pop() {
        set.iter().for_each(|&s| member[s] = true);
        let comps = sccs(mdp, &set, &member);
        set.iter().for_each(|&s| member[s] = false);
        for comp in comps {
            comp.iter().for_each(|&s| member[s] = true);
            let keep: Vec<usize> = comp
                .iter()
                .copied()
                .filter(|&s| {
                    let succ = mdp.successors(s);
                    match mdp.kind(s) {
                        StateKind::Probabilistic => succ.iter().all(|&t| member[t as usize]),
                        _ => succ.iter().any(|&t| member[t as usize]),
                    }
                })
                .collect();
            comp.iter().for_each(|&s| member[s] = false);
            if keep.len() == comp.len() {
                found.push(EndComponent { states: comp });
            } else if !keep.is_empty() {
                work.push(keep);
            }
        }
    }
    found.sort_by_key(|c| c.states[0]);
    Ok(found)
}
