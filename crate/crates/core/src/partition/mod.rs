//! Region partitions of the state space as binary decision trees over the
//! state-variable encoding.
//!
//! Internal nodes test one bit of a state's code; leaves are regions. Bits
//! are tested in schema order, so a leaf is described by a bit prefix. Empty
//! branches are never materialized, and a split always tests the first bit
//! on which the leaf's states disagree, so every split actually divides the
//! region in two.

mod schema;

use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::game::{GameGraph, StateId};

pub use schema::{Variable, VariableSchema};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PartitionError {
    #[error("variable {0} has an empty domain")]
    EmptyDomain(String),
    #[error("encoding needs {0} bits, at most 64 are supported")]
    EncodingTooWide(u32),
    #[error("assignment has {got} values, schema has {expected} variables")]
    AssignmentArity { expected: usize, got: usize },
    #[error("value {value} outside the domain of {variable}")]
    ValueOutOfDomain { variable: String, value: u64 },
    #[error("initial depth {depth} exceeds the {total_bits}-bit encoding")]
    DepthOutOfRange { depth: u32, total_bits: u32 },
    #[error("region {0} belongs to an older partition")]
    StaleRegionId(RegionId),
    #[error("no region over the threshold can be split further")]
    CannotRefine,
    #[error("valuation has {got} entries for {expected} regions")]
    ValuationSize { expected: usize, got: usize },
    #[error("split ratio {0} outside [0, 1]")]
    BadRatio(f64),
}

/// A leaf of a specific [`PartitionTree`] generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionId {
    generation: u32,
    index: u32,
}

impl RegionId {
    pub fn index(self) -> usize {
        self.index as usize
    }

    pub fn generation(self) -> u32 {
        self.generation
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}@{}", self.index, self.generation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundRole {
    Lower,
    Upper,
}

/// One real value per region, tagged with the bound it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionValuation {
    role: BoundRole,
    values: Vec<f64>,
}

impl RegionValuation {
    pub fn new(role: BoundRole, values: Vec<f64>) -> Self {
        Self { role, values }
    }

    pub fn constant(role: BoundRole, regions: usize, value: f64) -> Self {
        Self::new(role, vec![value; regions])
    }

    pub fn role(&self) -> BoundRole {
        self.role
    }

    pub fn with_role(mut self, role: BoundRole) -> Self {
        self.role = role;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, x: RegionId) -> f64 {
        self.values[x.index()]
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(u32),
    Split { bit: u32, children: [Option<u32>; 2] },
}

#[derive(Debug, Clone)]
struct Leaf {
    depth: u32,
    prefix: u64,
    node: u32,
    /// Ascending state indices.
    states: Vec<u32>,
}

/// Partition of a game's states into regions, as a binary decision tree.
#[derive(Debug, Clone)]
pub struct PartitionTree {
    total_bits: u32,
    generation: u32,
    nodes: Vec<Node>,
    root: u32,
    leaves: Vec<Leaf>,
    codes: Arc<[u64]>,
    /// Cached leaf index of every state.
    region_of: Vec<u32>,
    /// Position of every state inside its region's state list.
    local_index: Vec<u32>,
}

/// Outcome of a refinement: the new tree plus, for every old region, the
/// range of new region indices that replace it.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub tree: PartitionTree,
    pub children: Vec<std::ops::Range<usize>>,
    pub splits: usize,
}

impl Refinement {
    /// Copies each parent's value to its children.
    pub fn migrate(&self, values: &RegionValuation) -> RegionValuation {
        let mut out = vec![0.0; self.tree.num_regions()];
        for (old, range) in self.children.iter().enumerate() {
            for slot in &mut out[range.clone()] {
                *slot = values.values[old];
            }
        }
        RegionValuation::new(values.role, out)
    }
}

impl PartitionTree {
    /// Complete tree over the first `depth` bits, with empty leaves pruned.
    pub fn initial(graph: &GameGraph, depth: u32) -> Result<Self, PartitionError> {
        let total_bits = graph.schema().total_bits();
        if depth > total_bits {
            return Err(PartitionError::DepthOutOfRange { depth, total_bits });
        }
        let codes = graph.shared_codes();
        let mut order: Vec<u32> = (0..graph.num_states() as u32).collect();
        order.sort_by_key(|&s| (codes[s as usize], s));
        let mut tree = PartitionTree {
            total_bits,
            generation: 0,
            nodes: Vec::new(),
            root: 0,
            leaves: Vec::new(),
            codes,
            region_of: vec![0; graph.num_states()],
            local_index: vec![0; graph.num_states()],
        };
        if order.is_empty() {
            tree.nodes.push(Node::Split {
                bit: 0,
                children: [None, None],
            });
            return Ok(tree);
        }
        tree.root = tree.build_complete(&order, 0, depth);
        tree.reindex();
        Ok(tree)
    }

    fn build_complete(&mut self, sorted: &[u32], level: u32, depth: u32) -> u32 {
        let id = self.nodes.len() as u32;
        if level == depth {
            let mut states = sorted.to_vec();
            states.sort_unstable();
            let code = self.codes[states[0] as usize];
            self.leaves.push(Leaf {
                depth,
                prefix: prefix_of(code, self.total_bits, depth),
                node: id,
                states,
            });
            self.nodes.push(Node::Leaf(self.leaves.len() as u32 - 1));
            return id;
        }
        self.nodes.push(Node::Split {
            bit: level,
            children: [None, None],
        });
        let cut = sorted.partition_point(|&s| !bit_of(self.codes[s as usize], self.total_bits, level));
        let mut children = [None, None];
        if cut > 0 {
            children[0] = Some(self.build_complete(&sorted[..cut], level + 1, depth));
        }
        if cut < sorted.len() {
            children[1] = Some(self.build_complete(&sorted[cut..], level + 1, depth));
        }
        self.nodes[id as usize] = Node::Split { bit: level, children };
        id
    }

    /// Renumbers leaves in tree order and rebuilds the per-state caches.
    fn reindex(&mut self) {
        let mut order = Vec::with_capacity(self.leaves.len());
        let mut stack = vec![self.root];
        while let Some(node) = stack.pop() {
            match &self.nodes[node as usize] {
                Node::Leaf(leaf) => order.push(*leaf),
                Node::Split { children, .. } => {
                    // push right first so the left subtree is visited first
                    for child in children.iter().rev().flatten() {
                        stack.push(*child);
                    }
                }
            }
        }
        let mut old: Vec<Option<Leaf>> = std::mem::take(&mut self.leaves).into_iter().map(Some).collect();
        self.leaves = order
            .into_iter()
            .map(|i| old[i as usize].take().expect("each leaf is reached once"))
            .collect();
        for (i, leaf) in self.leaves.iter().enumerate() {
            self.nodes[leaf.node as usize] = Node::Leaf(i as u32);
            for (pos, &s) in leaf.states.iter().enumerate() {
                self.region_of[s as usize] = i as u32;
                self.local_index[s as usize] = pos as u32;
            }
        }
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn num_regions(&self) -> usize {
        self.leaves.len()
    }

    pub fn num_states(&self) -> usize {
        self.region_of.len()
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn regions(&self) -> impl ExactSizeIterator<Item = RegionId> + '_ {
        let generation = self.generation;
        (0..self.leaves.len() as u32).map(move |index| RegionId { generation, index })
    }

    pub fn region(&self, index: usize) -> RegionId {
        assert!(index < self.leaves.len(), "region index {index} out of range");
        RegionId {
            generation: self.generation,
            index: index as u32,
        }
    }

    pub fn check(&self, x: RegionId) -> Result<usize, PartitionError> {
        if x.generation != self.generation || x.index() >= self.leaves.len() {
            return Err(PartitionError::StaleRegionId(x));
        }
        Ok(x.index())
    }

    /// Region containing `s`, found by walking the tree on the state's code.
    pub fn region_of(&self, s: StateId) -> RegionId {
        let code = self.codes[s.index()];
        let mut node = self.root;
        loop {
            match &self.nodes[node as usize] {
                Node::Leaf(leaf) => {
                    return RegionId {
                        generation: self.generation,
                        index: *leaf,
                    }
                }
                Node::Split { bit, children } => {
                    let side = bit_of(code, self.total_bits, *bit) as usize;
                    node = children[side].expect("valid states never reach a pruned branch");
                }
            }
        }
    }

    /// Cached region index of state `s`.
    #[inline]
    pub fn region_index_of(&self, s: usize) -> usize {
        self.region_of[s] as usize
    }

    /// Position of `s` within the state list of its region.
    #[inline]
    pub fn local_index_of(&self, s: usize) -> usize {
        self.local_index[s] as usize
    }

    pub fn states_of(&self, x: RegionId) -> Result<&[u32], PartitionError> {
        let index = self.check(x)?;
        Ok(&self.leaves[index].states)
    }

    #[inline]
    pub fn states_at(&self, index: usize) -> &[u32] {
        &self.leaves[index].states
    }

    pub fn region_size(&self, index: usize) -> usize {
        self.leaves[index].states.len()
    }

    pub fn max_region_size(&self) -> usize {
        self.leaves.iter().map(|l| l.states.len()).max().unwrap_or(0)
    }

    pub fn is_singleton(&self, index: usize) -> bool {
        self.leaves[index].states.len() == 1
    }

    pub fn depth_of(&self, index: usize) -> u32 {
        self.leaves[index].depth
    }

    /// Bit prefix of a region as a string of `0`/`1`.
    pub fn prefix_string(&self, index: usize) -> String {
        let leaf = &self.leaves[index];
        (0..leaf.depth)
            .map(|i| {
                if (leaf.prefix >> (leaf.depth - 1 - i)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    /// Splits every region whose flag is set and which has more than one
    /// state. Returns `None` if nothing could be split.
    pub fn split(&self, flags: &[bool]) -> Option<Refinement> {
        assert_eq!(flags.len(), self.leaves.len());
        let mut tree = self.clone();
        tree.generation += 1;
        let mut splits = 0;
        let old_leaves = std::mem::take(&mut tree.leaves);
        let mut new_leaves = Vec::with_capacity(old_leaves.len() + flags.iter().filter(|&&f| f).count());
        let mut children = Vec::with_capacity(old_leaves.len());
        for (leaf, &flag) in old_leaves.into_iter().zip(flags) {
            let start = new_leaves.len();
            match flag.then(|| tree.first_distinguishing_bit(&leaf.states)).flatten() {
                Some(bit) => {
                    let (left, right): (Vec<u32>, Vec<u32>) = leaf
                        .states
                        .iter()
                        .partition(|&&s| !bit_of(tree.codes[s as usize], tree.total_bits, bit));
                    let mut kids = [None, None];
                    for (side, states) in [left, right].into_iter().enumerate() {
                        let node = tree.nodes.len() as u32;
                        let code = tree.codes[states[0] as usize];
                        tree.nodes.push(Node::Leaf(0));
                        new_leaves.push(Leaf {
                            depth: bit + 1,
                            prefix: prefix_of(code, tree.total_bits, bit + 1),
                            node,
                            states,
                        });
                        kids[side] = Some(node);
                    }
                    tree.nodes[leaf.node as usize] = Node::Split { bit, children: kids };
                    splits += 1;
                }
                None => new_leaves.push(leaf),
            }
            children.push(start..new_leaves.len());
        }
        if splits == 0 {
            return None;
        }
        tree.leaves = new_leaves;
        // leaves were produced in tree order, so indices are already final
        for (i, leaf) in tree.leaves.iter().enumerate() {
            tree.nodes[leaf.node as usize] = Node::Leaf(i as u32);
            for (pos, &s) in leaf.states.iter().enumerate() {
                tree.region_of[s as usize] = i as u32;
                tree.local_index[s as usize] = pos as u32;
            }
        }
        Some(Refinement {
            tree,
            children,
            splits,
        })
    }

    fn first_distinguishing_bit(&self, states: &[u32]) -> Option<u32> {
        let mut any = 0u64;
        let mut all = u64::MAX;
        for &s in states {
            let c = self.codes[s as usize];
            any |= c;
            all &= c;
        }
        let diff = any & !all;
        if diff == 0 {
            None
        } else {
            let highest = 63 - diff.leading_zeros();
            Some(self.total_bits - 1 - highest)
        }
    }

    /// `2|R| + max_x |x|`: live numeric storage of the abstract solvers.
    pub fn space_metric(&self) -> usize {
        2 * self.num_regions() + self.max_region_size()
    }

    /// One line per region: id, bit prefix, size, lower and upper bound.
    pub fn dump(&self, lower: &RegionValuation, upper: &RegionValuation) -> String {
        let mut out = String::new();
        for i in 0..self.num_regions() {
            let prefix = self.prefix_string(i);
            let _ = writeln!(
                out,
                "{i} {} {} {:e} {:e}",
                if prefix.is_empty() { "-" } else { &prefix },
                self.region_size(i),
                lower.values[i],
                upper.values[i]
            );
        }
        out
    }
}

#[inline]
fn bit_of(code: u64, total_bits: u32, position: u32) -> bool {
    (code >> (total_bits - 1 - position)) & 1 == 1
}

#[inline]
fn prefix_of(code: u64, total_bits: u32, depth: u32) -> u64 {
    if depth == 0 {
        0
    } else {
        code >> (total_bits - depth)
    }
}

/// Initial partition testing the first `depth` bits of the encoding.
pub fn initial_partition(graph: &GameGraph, depth: u32) -> Result<PartitionTree, PartitionError> {
    PartitionTree::initial(graph, depth)
}

/// Half the encoding width, the default starting level of abstraction.
pub fn default_depth(graph: &GameGraph) -> u32 {
    graph.schema().total_bits() / 2
}

fn check_sizes(tree: &PartitionTree, vals: &[&RegionValuation]) -> Result<(), PartitionError> {
    for v in vals {
        if v.len() != tree.num_regions() {
            return Err(PartitionError::ValuationSize {
                expected: tree.num_regions(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// Splits every region whose imprecision `upper - lower` exceeds `eps_abs`.
///
/// Children inherit their parent's bounds. If no region is over the
/// threshold the inputs come back unchanged; if some are but all of them are
/// singletons, refinement is impossible and `CannotRefine` is returned.
pub fn split_regions_all(
    tree: &PartitionTree,
    lower: &RegionValuation,
    upper: &RegionValuation,
    eps_abs: f64,
) -> Result<(PartitionTree, RegionValuation, RegionValuation), PartitionError> {
    check_sizes(tree, &[lower, upper])?;
    let flags: Vec<bool> = lower
        .values
        .iter()
        .zip(&upper.values)
        .map(|(lo, hi)| hi - lo > eps_abs)
        .collect();
    if !flags.iter().any(|&f| f) {
        return Ok((tree.clone(), lower.clone(), upper.clone()));
    }
    match tree.split(&flags) {
        Some(r) => {
            let lo = r.migrate(lower);
            let hi = r.migrate(upper);
            Ok((r.tree, lo, hi))
        }
        None => Err(PartitionError::CannotRefine),
    }
}

/// Splits the `ceil(ratio * |R|)` splittable regions of largest imprecision
/// (at least one). Ties go to the lower region index.
pub fn split_regions_ratio(
    tree: &PartitionTree,
    lower: &RegionValuation,
    upper: &RegionValuation,
    ratio: f64,
) -> Result<Refinement, PartitionError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(PartitionError::BadRatio(ratio));
    }
    check_sizes(tree, &[lower, upper])?;
    let gap = |i: usize| upper.values[i] - lower.values[i];
    let mut candidates: Vec<usize> = (0..tree.num_regions()).filter(|&i| !tree.is_singleton(i)).collect();
    if candidates.is_empty() {
        return Err(PartitionError::CannotRefine);
    }
    candidates.sort_by(|&a, &b| gap(b).total_cmp(&gap(a)).then(a.cmp(&b)));
    let count = ((ratio * tree.num_regions() as f64).ceil() as usize).max(1);
    let mut flags = vec![false; tree.num_regions()];
    for &i in candidates.iter().take(count) {
        flags[i] = true;
    }
    tree.split(&flags).ok_or(PartitionError::CannotRefine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameBuilder, StateKind};

    /// Chain of `n` player states encoded by index.
    fn chain(n: usize) -> GameGraph {
        let mut b = GameBuilder::new();
        for s in 0..n {
            b.add_player(StateKind::Player1, 0.0, &[(s + 1) % n]);
        }
        b.build().unwrap()
    }

    fn assert_partition(tree: &PartitionTree) {
        let mut seen = vec![false; tree.num_states()];
        for x in tree.regions() {
            for &s in tree.states_of(x).unwrap() {
                assert!(!seen[s as usize], "state {s} in two regions");
                seen[s as usize] = true;
                assert_eq!(tree.region_of(StateId(s as usize)), x);
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn depth_zero_is_one_region() {
        let g = chain(10);
        let t = initial_partition(&g, 0).unwrap();
        assert_eq!(t.num_regions(), 1);
        for s in 0..10 {
            assert_eq!(t.region_of(StateId(s)).index(), 0);
        }
        assert_eq!(t.space_metric(), 2 + 10);
    }

    #[test]
    fn full_depth_is_singletons() {
        let g = chain(100);
        let bits = g.schema().total_bits();
        let t = initial_partition(&g, bits).unwrap();
        assert_eq!(t.num_regions(), 100);
        assert_eq!(t.space_metric(), 201);
        assert_partition(&t);
        assert!(matches!(
            initial_partition(&g, bits + 1),
            Err(PartitionError::DepthOutOfRange { .. })
        ));
    }

    #[test]
    fn default_depth_is_half_the_bits() {
        let g = chain(256);
        assert_eq!(default_depth(&g), 4);
        let t = initial_partition(&g, default_depth(&g)).unwrap();
        assert_eq!(t.num_regions(), 16);
    }

    #[test]
    fn empty_prefixes_are_pruned() {
        // 5 states need 3 bits; prefixes 11x never occur
        let g = chain(5);
        let t = initial_partition(&g, 2).unwrap();
        assert_eq!(t.num_regions(), 3);
        assert_partition(&t);
    }

    #[test]
    fn split_all_noop_when_tight() {
        let g = chain(8);
        let t = initial_partition(&g, 1).unwrap();
        let lo = RegionValuation::constant(BoundRole::Lower, 2, 0.0);
        let hi = RegionValuation::constant(BoundRole::Upper, 2, 0.005);
        let (t2, _, _) = split_regions_all(&t, &lo, &hi, 0.01).unwrap();
        assert_eq!(t2.num_regions(), 2);
        assert_eq!(t2.generation(), t.generation());
    }

    #[test]
    fn split_all_single_region_inherits_bounds() {
        let g = chain(8);
        let t = initial_partition(&g, 1).unwrap();
        let lo = RegionValuation::new(BoundRole::Lower, vec![0.0, 1.0]);
        let hi = RegionValuation::new(BoundRole::Upper, vec![0.5, 1.0]);
        let (t2, lo2, hi2) = split_regions_all(&t, &lo, &hi, 0.01).unwrap();
        assert_eq!(t2.num_regions(), 3);
        assert_eq!(lo2.values(), &[0.0, 0.0, 1.0]);
        assert_eq!(hi2.values(), &[0.5, 0.5, 1.0]);
        assert_partition(&t2);
        // old ids are stale now
        let old = t.region(0);
        assert!(matches!(t2.states_of(old), Err(PartitionError::StaleRegionId(_))));
    }

    #[test]
    fn split_all_on_singletons_cannot_refine() {
        let g = chain(4);
        let t = initial_partition(&g, 2).unwrap();
        let lo = RegionValuation::constant(BoundRole::Lower, 4, 0.0);
        let hi = RegionValuation::constant(BoundRole::Upper, 4, 1.0);
        assert_eq!(
            split_regions_all(&t, &lo, &hi, 0.01).unwrap_err(),
            PartitionError::CannotRefine
        );
    }

    #[test]
    fn split_ratio_picks_top_gaps() {
        let g = chain(64);
        let t = initial_partition(&g, 3).unwrap();
        assert_eq!(t.num_regions(), 8);
        let lo = RegionValuation::constant(BoundRole::Lower, 8, 0.0);
        let hi = RegionValuation::new(BoundRole::Upper, vec![1.0, 5.0, 2.0, 5.0, 0.0, 3.0, 0.0, 0.0]);
        let r = split_regions_ratio(&t, &lo, &hi, 0.3).unwrap();
        // ceil(0.3 * 8) = 3 -> regions 1, 3 (tie broken by index) and 5
        assert_eq!(r.splits, 3);
        let split: Vec<usize> = r.children.iter().enumerate().filter(|(_, c)| c.len() == 2).map(|(i, _)| i).collect();
        assert_eq!(split, vec![1, 3, 5]);

        let r0 = split_regions_ratio(&t, &lo, &hi, 0.0).unwrap();
        assert_eq!(r0.splits, 1);
        assert_eq!(r0.children[1].len(), 2);

        let r1 = split_regions_ratio(&t, &lo, &hi, 1.0).unwrap();
        assert_eq!(r1.splits, 8);
        assert!(split_regions_ratio(&t, &lo, &hi, 1.5).is_err());
    }

    #[test]
    fn dump_lists_every_region() {
        let g = chain(4);
        let t = initial_partition(&g, 1).unwrap();
        let lo = RegionValuation::constant(BoundRole::Lower, 2, 0.0);
        let hi = RegionValuation::constant(BoundRole::Upper, 2, 1.0);
        let text = t.dump(&lo, &hi);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("1 1 2 "));
    }
}
