//! Extreme-sets tree construction.
//!
//! Phase 1 is a randomized divide-and-conquer: sample two vertices, take the
//! complement `X` of a cut threshold between them under freshly perturbed
//! weights, and recurse on the graphs obtained by contracting `X` and its
//! complement. The combined tree contains every extreme set of the input as
//! a subtree, possibly with spurious extra subtrees. Phase 2 labels every
//! node with its cut value under the original weights and prunes, in
//! postorder, each node whose label is not strictly below all of its
//! children's labels.

use crate::cutthresh;
use crate::flow::MaxFlowSolver;
use crate::graph::{perturb, ContractedGraph, WeightedGraph};
use crate::stats::Stats;
use crate::{Error, Result, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Subproblems of at most this many vertices are solved by subset
/// enumeration. Must stay >= 16: together with the balance condition this
/// guarantees both recursive subproblems strictly shrink.
pub const BASE_CASE_LIMIT: usize = 16;

const NO_NODE: u32 = u32::MAX;

/// Node payload of a candidate tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandNode {
    Internal,
    /// Leaf standing for one vertex of the candidate tree's graph.
    Leaf(u32),
    /// Leaf standing for the contracted partner side during recursion.
    ContractedLeaf,
}

/// Rooted laminar tree produced by Phase 1. Leaves correspond to the
/// vertices of the (possibly contracted) graph it was built for; every
/// extreme set of that graph appears as a subtree, but some subtrees may
/// not be extreme sets.
#[derive(Debug, Clone)]
pub struct CandidateTree {
    pub kind: Vec<CandNode>,
    pub parent: Vec<u32>,
    pub children: Vec<Vec<u32>>,
    pub root: u32,
}

impl CandidateTree {
    fn new_root() -> Self {
        CandidateTree {
            kind: vec![CandNode::Internal],
            parent: vec![NO_NODE],
            children: vec![Vec::new()],
            root: 0,
        }
    }

    fn push(&mut self, kind: CandNode, parent: u32) -> u32 {
        let id = self.kind.len() as u32;
        self.kind.push(kind);
        self.parent.push(parent);
        self.children.push(Vec::new());
        if parent != NO_NODE {
            self.children[parent as usize].push(id);
        }
        id
    }

    pub fn len(&self) -> usize {
        self.kind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kind.is_empty()
    }

    /// Leaf count (both vertex and contracted leaves), counting only nodes
    /// reachable from the root; combining leaves detached placeholders in
    /// the arena.
    pub fn leaf_count(&self) -> usize {
        self.postorder()
            .iter()
            .filter(|&&v| !matches!(self.kind[v as usize], CandNode::Internal))
            .count()
    }

    /// Nodes in postorder (children before parents), skipping detached ones.
    pub fn postorder(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                out.push(v);
            } else {
                stack.push((v, true));
                for &c in &self.children[v as usize] {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// Vertex labels of the leaves under `node`, sorted.
    pub fn leaves_under(&self, node: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.kind[v as usize] {
                CandNode::Leaf(x) => out.push(x),
                CandNode::ContractedLeaf => {}
                CandNode::Internal => stack.extend(self.children[v as usize].iter().copied()),
            }
        }
        out.sort_unstable();
        out
    }

    /// Sorted leaf sets of all internal non-root subtrees reachable from
    /// the root.
    pub fn internal_families(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = self
            .postorder()
            .into_iter()
            .filter(|&v| v != self.root && matches!(self.kind[v as usize], CandNode::Internal))
            .map(|v| self.leaves_under(v))
            .collect();
        out.sort();
        out
    }

    fn contracted_leaf(&self) -> Option<u32> {
        self.postorder()
            .into_iter()
            .find(|&v| self.kind[v as usize] == CandNode::ContractedLeaf)
    }

    /// Renames leaf labels through `inv` and turns the leaf for `merged`
    /// into the contracted marker.
    fn relabel(mut self, inv: &[u32], merged: u32) -> Self {
        for k in self.kind.iter_mut() {
            if let CandNode::Leaf(x) = *k {
                *k = if x == merged {
                    CandNode::ContractedLeaf
                } else {
                    CandNode::Leaf(inv[x as usize])
                };
            }
        }
        self
    }
}

/// Exact extreme-sets tree: leaves are the vertices, internal non-root
/// nodes are the non-singleton extreme sets, the root is `V` (structural,
/// not itself extreme). Every node carries `delta` under the original
/// weights (0 for the root).
#[derive(Debug, Clone)]
pub struct ExtremeSetsTree {
    n: usize,
    parent: Vec<u32>,
    children: Vec<Vec<u32>>,
    leaf_vertex: Vec<Option<u32>>,
    leaf_of: Vec<u32>,
    delta: Vec<Weight>,
    root: u32,
}

impl ExtremeSetsTree {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn parent(&self, node: u32) -> Option<u32> {
        let p = self.parent[node as usize];
        (p != NO_NODE).then_some(p)
    }

    pub fn children(&self, node: u32) -> &[u32] {
        &self.children[node as usize]
    }

    pub fn is_leaf(&self, node: u32) -> bool {
        self.leaf_vertex[node as usize].is_some()
    }

    pub fn leaf_vertex(&self, node: u32) -> Option<u32> {
        self.leaf_vertex[node as usize]
    }

    /// The leaf node representing vertex `v`.
    pub fn leaf_of(&self, v: u32) -> u32 {
        self.leaf_of[v as usize]
    }

    /// `delta(V(node))` under the original weights; 0 at the root.
    pub fn delta(&self, node: u32) -> Weight {
        self.delta[node as usize]
    }

    pub fn postorder(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.num_nodes());
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                out.push(v);
            } else {
                stack.push((v, true));
                for &c in &self.children[v as usize] {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// Vertices of the set represented by `node`, sorted.
    pub fn members(&self, node: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if let Some(x) = self.leaf_vertex[v as usize] {
                out.push(x);
            } else {
                stack.extend(self.children[v as usize].iter().copied());
            }
        }
        out.sort_unstable();
        out
    }

    /// Sorted member lists of the non-singleton extreme sets (internal
    /// non-root nodes). Two trees over the same graph are equal iff these
    /// families agree.
    pub fn canonical_families(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = (0..self.num_nodes() as u32)
            .filter(|&v| v != self.root && !self.is_leaf(v))
            .map(|v| self.members(v))
            .collect();
        out.sort();
        out
    }

    /// Families plus their cut labels, for node-for-node comparisons.
    pub fn canonical_labeled(&self) -> Vec<(Vec<u32>, Weight)> {
        let mut out: Vec<(Vec<u32>, Weight)> = (0..self.num_nodes() as u32)
            .filter(|&v| v != self.root)
            .map(|v| (self.members(v), self.delta(v)))
            .collect();
        out.sort();
        out
    }

    /// Builds the tree for `g` from the family of non-singleton extreme
    /// sets (laminar). Labels are computed from `g` directly.
    pub fn from_family(g: &WeightedGraph, mut family: Vec<Vec<u32>>) -> Result<Self> {
        let n = g.n();
        family.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        for f in &family {
            debug_assert!(f.windows(2).all(|w| w[0] < w[1]), "members must be sorted");
        }
        // nodes: 0 = root; then internal sets in insertion order; leaves last
        let mut member_sets: Vec<Vec<u32>> = vec![(0..n as u32).collect()];
        let mut parent: Vec<u32> = vec![NO_NODE];
        for f in &family {
            if f.len() >= n || f.is_empty() {
                return Err(Error::Defect("family member must be a proper subset".into()));
            }
            // smallest previously inserted superset is the parent
            let mut best: u32 = 0;
            for (i, s) in member_sets.iter().enumerate().skip(1) {
                if s.len() > f.len() && is_subset(f, s) && s.len() < member_sets[best as usize].len()
                {
                    best = i as u32;
                }
            }
            if !is_subset(f, &member_sets[best as usize]) {
                return Err(Error::Defect("family is not laminar".into()));
            }
            parent.push(best);
            member_sets.push(f.clone());
        }
        let mut leaf_of = vec![NO_NODE; n];
        let first_leaf = member_sets.len() as u32;
        for v in 0..n as u32 {
            // smallest set containing v
            let mut best: u32 = 0;
            for (i, s) in member_sets.iter().enumerate().skip(1) {
                if s.binary_search(&v).is_ok() && s.len() < member_sets[best as usize].len() {
                    best = i as u32;
                }
            }
            parent.push(best);
            leaf_of[v as usize] = first_leaf + v;
        }
        let total = parent.len();
        let mut children = vec![Vec::new(); total];
        for (i, &p) in parent.iter().enumerate() {
            if p != NO_NODE {
                children[p as usize].push(i as u32);
            }
        }
        let mut leaf_vertex = vec![None; total];
        for v in 0..n as u32 {
            leaf_vertex[(first_leaf + v) as usize] = Some(v);
        }
        let mut delta = vec![0; total];
        let deg = g.weighted_degrees();
        for i in 1..total {
            delta[i] = match leaf_vertex[i] {
                Some(v) => deg[v as usize],
                None => g.cut_value(&member_sets[i])?,
            };
        }
        let mut tree = ExtremeSetsTree {
            n,
            parent,
            children,
            leaf_vertex,
            leaf_of,
            delta,
            root: 0,
        };
        tree.sort_children();
        Ok(tree)
    }

    /// Orders every child list by the smallest vertex underneath, making
    /// traversal orders deterministic.
    fn sort_children(&mut self) {
        let mut min_leaf = vec![u32::MAX; self.num_nodes()];
        for v in self.postorder() {
            min_leaf[v as usize] = match self.leaf_vertex[v as usize] {
                Some(x) => x,
                None => self.children[v as usize]
                    .iter()
                    .map(|&c| min_leaf[c as usize])
                    .min()
                    .unwrap_or(u32::MAX),
            };
        }
        for list in self.children.iter_mut() {
            list.sort_by_key(|&c| min_leaf[c as usize]);
        }
    }
}

fn is_subset(a: &[u32], b: &[u32]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

// ---------------------------------------------------------------------------
// Base case: exact extreme sets by subset enumeration
// ---------------------------------------------------------------------------

/// Exact extreme sets of a small graph (n <= BASE_CASE_LIMIT) via subset
/// enumeration with incremental cut values and a subset-minimum DP, returned
/// as a candidate tree over the graph's vertices.
pub fn base_case_extreme_sets(g: &WeightedGraph) -> Result<CandidateTree> {
    let n = g.n();
    if n > BASE_CASE_LIMIT {
        return Err(Error::OracleTooLarge { limit: BASE_CASE_LIMIT, got: n });
    }
    let family = small_extreme_family(g);
    family_to_candidate(g.n(), &family)
}

/// Non-singleton extreme sets of a small graph as sorted vertex lists.
/// Shared by the Phase-1 base case; the test oracle recomputes cut values
/// by direct edge iteration instead.
pub(crate) fn small_extreme_family(g: &WeightedGraph) -> Vec<Vec<u32>> {
    let n = g.n();
    debug_assert!(n <= 22);
    if n <= 1 {
        return Vec::new();
    }
    let full = 1usize << n;
    // weight from v to every other vertex
    let mut w = vec![vec![0 as Weight; n]; n];
    for &(a, b, wt) in g.edges() {
        w[a as usize][b as usize] += wt;
        w[b as usize][a as usize] += wt;
    }
    let deg = g.weighted_degrees();
    let mut delta = vec![0 as Weight; full];
    for mask in 1..full {
        let v = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        // delta(rest + v) = delta(rest) + deg(v) - 2 * w(v, rest)
        let mut cross = 0;
        let mut r = rest;
        while r != 0 {
            let u = r.trailing_zeros() as usize;
            cross += w[v][u];
            r &= r - 1;
        }
        delta[mask] = delta[rest] + deg[v] - 2 * cross;
    }
    // best[mask] = min delta over nonempty subsets of mask
    let mut best = delta.clone();
    for mask in 1..full {
        let mut r = mask;
        while r != 0 {
            let v = r.trailing_zeros() as usize;
            r &= r - 1;
            let sub = mask & !(1 << v);
            if sub != 0 && best[sub] < best[mask] {
                best[mask] = best[sub];
            }
        }
    }
    let mut family = Vec::new();
    for mask in 1..full - 1 {
        if mask.count_ones() < 2 {
            continue;
        }
        // min over proper nonempty subsets: drop one vertex at a time
        let mut proper_min = Weight::MAX;
        let mut r = mask;
        while r != 0 {
            let v = r.trailing_zeros() as usize;
            r &= r - 1;
            let sub = mask & !(1 << v);
            proper_min = proper_min.min(best[sub]);
        }
        if delta[mask] < proper_min {
            family.push(mask_to_vec(mask));
        }
    }
    family
}

fn mask_to_vec(mask: usize) -> Vec<u32> {
    let mut out = Vec::new();
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros());
        m &= m - 1;
    }
    out
}

/// Builds a candidate tree (root, internal family nodes, singleton leaves)
/// from a laminar family of proper non-singleton subsets.
fn family_to_candidate(n: usize, family: &[Vec<u32>]) -> Result<CandidateTree> {
    let mut sorted: Vec<&Vec<u32>> = family.iter().collect();
    sorted.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut tree = CandidateTree::new_root();
    let mut member_sets: Vec<Vec<u32>> = vec![(0..n as u32).collect()];
    let mut ids: Vec<u32> = vec![tree.root];
    for f in sorted {
        let mut best = 0usize;
        for (i, s) in member_sets.iter().enumerate().skip(1) {
            if s.len() > f.len() && is_subset(f, s) && s.len() < member_sets[best].len() {
                best = i;
            }
        }
        if !is_subset(f, &member_sets[best]) {
            return Err(Error::Defect("extreme family is not laminar".into()));
        }
        let id = tree.push(CandNode::Internal, ids[best]);
        ids.push(id);
        member_sets.push((*f).clone());
    }
    for v in 0..n as u32 {
        let mut best = 0usize;
        for (i, s) in member_sets.iter().enumerate().skip(1) {
            if s.binary_search(&v).is_ok() && s.len() < member_sets[best].len() {
                best = i;
            }
        }
        tree.push(CandNode::Leaf(v), ids[best]);
    }
    Ok(tree)
}

// ---------------------------------------------------------------------------
// Phase 1
// ---------------------------------------------------------------------------

/// Samples `(s, t)` pairs and cut thresholds under fresh perturbations until
/// the complement `X` of the threshold satisfies the balance condition
/// `n/16 <= |X| <= 15n/16`. Decisions are made under the perturbed weights;
/// the returned set indexes the current graph's vertices.
pub fn sample_balanced_partition(
    cg: &ContractedGraph,
    seed: u64,
    stats: &Stats,
) -> Result<Vec<u32>> {
    let n = cg.n();
    debug_assert!(n > BASE_CASE_LIMIT);
    let budget = 64 * ceil_log2(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=budget {
        let s = rng.gen_range(0..n as u32);
        let mut t = rng.gen_range(0..(n - 1) as u32);
        if t >= s {
            t += 1;
        }
        let pw = perturb(&cg.graph, rng.gen(), 4)?;
        stats.count_flow();
        stats.count_cut_threshold();
        let phi = MaxFlowSolver::new(pw.graph()).max_flow_value(s, t)?;
        // |X| in [ceil(n/16), floor(15n/16)]  <=>  inside size within bounds
        let lo = n.div_ceil(16);
        let hi = 15 * n / 16;
        let inside =
            cutthresh::naive_inside_bounded(pw.graph(), s, phi, stats, Some((n - hi, n - lo)));
        if let Some(inside) = inside {
            stats.count_retries(attempt as u64);
            let mut in_ct = vec![false; n];
            for &v in &inside {
                in_ct[v as usize] = true;
            }
            let x: Vec<u32> = (0..n as u32).filter(|&v| !in_ct[v as usize]).collect();
            debug_assert!(16 * x.len() >= n && 16 * x.len() <= 15 * n);
            return Ok(x);
        }
    }
    stats.count_retries(budget as u64);
    Err(Error::MonteCarloFailure { attempts: budget })
}

/// Phase-1 recursion on a contracted graph. The result contains every
/// extreme set of `cg.graph` (under its own weights) as a subtree.
pub fn phase1(cg: &ContractedGraph, seed: u64, stats: &Stats) -> Result<CandidateTree> {
    phase1_at_depth(cg, seed, stats, 0)
}

fn phase1_at_depth(
    cg: &ContractedGraph,
    seed: u64,
    stats: &Stats,
    depth: u64,
) -> Result<CandidateTree> {
    stats.record_depth(depth);
    let n = cg.n();
    if n <= BASE_CASE_LIMIT {
        return base_case_extreme_sets(&cg.graph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_seed = rng.gen();
    let x = sample_balanced_partition(cg, sample_seed, stats)?;
    let mut in_x = vec![false; n];
    for &v in &x {
        in_x[v as usize] = true;
    }
    let not_x: Vec<u32> = (0..n as u32).filter(|&v| !in_x[v as usize]).collect();
    let (cg_x, map_x, merged_x) = cg.contract(&x)?;
    let (cg_nx, map_nx, merged_nx) = cg.contract(&not_x)?;
    let seed_x: u64 = rng.gen();
    let seed_nx: u64 = rng.gen();
    let (t_x, t_nx) = rayon::join(
        || phase1_at_depth(&cg_x, seed_x, stats, depth + 1),
        || phase1_at_depth(&cg_nx, seed_nx, stats, depth + 1),
    );
    let t_x = t_x?.relabel(&invert_map(&map_x, cg_x.n(), merged_x), merged_x);
    let t_nx = t_nx?.relabel(&invert_map(&map_nx, cg_nx.n(), merged_nx), merged_nx);
    combine_trees(&t_x, &t_nx)
}

/// Inverse of a contraction map restricted to surviving vertices; the slot
/// for the merged vertex is unused.
fn invert_map(map: &[u32], new_n: usize, merged: u32) -> Vec<u32> {
    let mut inv = vec![NO_NODE; new_n];
    for (old, &new) in map.iter().enumerate() {
        if new != merged {
            inv[new as usize] = old as u32;
        }
    }
    inv
}

/// Combines the two subproblem trees. `t_x` is the tree of `contract(X)`
/// and carries a contracted leaf standing for `X`; `t_notx` is the tree of
/// `contract(V \ X)` with a contracted leaf standing for `V \ X`. The
/// latter leaf is discarded (splicing out any single-child node this
/// creates) and the remainder is grafted in place of the former.
pub fn combine_trees(t_x: &CandidateTree, t_notx: &CandidateTree) -> Result<CandidateTree> {
    let x_leaf = t_x
        .contracted_leaf()
        .ok_or_else(|| Error::Defect("combine: contracted leaf missing in T_X".into()))?;
    let nx_leaf = t_notx
        .contracted_leaf()
        .ok_or_else(|| Error::Defect("combine: contracted leaf missing in T_notX".into()))?;

    let mut out = t_x.clone();

    // Copy t_notx into the arena, minus its contracted leaf.
    let offset = out.len() as u32;
    for (i, &k) in t_notx.kind.iter().enumerate() {
        let _ = i;
        out.kind.push(k);
        out.parent.push(NO_NODE);
        out.children.push(Vec::new());
    }
    for v in 0..t_notx.len() as u32 {
        let p = t_notx.parent[v as usize];
        if p != NO_NODE {
            out.parent[(offset + v) as usize] = offset + p;
        }
        out.children[(offset + v) as usize] = t_notx.children[v as usize]
            .iter()
            .map(|&c| offset + c)
            .collect();
    }
    let mut graft_root = offset + t_notx.root;

    // Detach the contracted leaf of t_notx; if its parent drops to a single
    // child, splice that parent out (its parent's child count is unchanged,
    // so one splice suffices).
    let dead = offset + nx_leaf;
    let p = out.parent[dead as usize];
    if p == NO_NODE {
        return Err(Error::Defect("combine: T_notX is a bare contracted leaf".into()));
    }
    out.children[p as usize].retain(|&c| c != dead);
    out.kind[dead as usize] = CandNode::Internal; // detached placeholder
    if out.children[p as usize].len() == 1 {
        let only = out.children[p as usize][0];
        let gp = out.parent[p as usize];
        if gp == NO_NODE {
            out.parent[only as usize] = NO_NODE;
            graft_root = only;
        } else {
            let slot = out.children[gp as usize]
                .iter()
                .position(|&c| c == p)
                .expect("child slot");
            out.children[gp as usize][slot] = only;
            out.parent[only as usize] = gp;
        }
        out.children[p as usize].clear();
    }

    // Graft in place of t_x's contracted leaf.
    let q = out.parent[x_leaf as usize];
    if q == NO_NODE {
        return Err(Error::Defect("combine: T_X is a bare contracted leaf".into()));
    }
    let slot = out.children[q as usize]
        .iter()
        .position(|&c| c == x_leaf)
        .expect("leaf slot");
    out.children[q as usize][slot] = graft_root;
    out.parent[graft_root as usize] = q;
    out.kind[x_leaf as usize] = CandNode::Internal; // detached placeholder
    out.children[x_leaf as usize].clear();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Phase 2
// ---------------------------------------------------------------------------

/// Cut value of every subtree of `t` under `g`'s weights, computed by
/// accumulating `+w` at both endpoint leaves and `-2w` at their lowest
/// common ancestor, then summing over subtrees. Equivalent to the dynamic
/// tree updates done online, but offline. The tree's leaves must be exactly
/// `g`'s vertices. Root label is 0.
pub fn subtree_cut_values(g: &WeightedGraph, t: &CandidateTree) -> Vec<Weight> {
    let total = t.len();
    let mut leaf_of = vec![NO_NODE; g.n()];
    for v in 0..total as u32 {
        if let CandNode::Leaf(x) = t.kind[v as usize] {
            leaf_of[x as usize] = v;
        }
    }
    // depths + binary lifting for lca
    let mut depth = vec![0u32; total];
    let order = {
        // preorder
        let mut out = Vec::with_capacity(total);
        let mut stack = vec![t.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            for &c in &t.children[v as usize] {
                stack.push(c);
            }
        }
        out
    };
    for &v in &order {
        let p = t.parent[v as usize];
        if p != NO_NODE {
            depth[v as usize] = depth[p as usize] + 1;
        }
    }
    let levels = ceil_log2(total.max(2)) as usize + 1;
    let mut up = vec![vec![NO_NODE; total]; levels];
    for v in 0..total {
        up[0][v] = t.parent[v];
    }
    for k in 1..levels {
        for v in 0..total {
            let mid = up[k - 1][v];
            up[k][v] = if mid == NO_NODE { NO_NODE } else { up[k - 1][mid as usize] };
        }
    }
    let lca = |mut a: u32, mut b: u32| -> u32 {
        if depth[a as usize] < depth[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        let mut diff = depth[a as usize] - depth[b as usize];
        let mut k = 0;
        while diff != 0 {
            if diff & 1 == 1 {
                a = up[k][a as usize];
            }
            diff >>= 1;
            k += 1;
        }
        if a == b {
            return a;
        }
        for k in (0..levels).rev() {
            if up[k][a as usize] != up[k][b as usize] {
                a = up[k][a as usize];
                b = up[k][b as usize];
            }
        }
        up[0][a as usize]
    };
    let mut acc = vec![0i128; total];
    for &(u, v, w) in g.edges() {
        let (lu, lv) = (leaf_of[u as usize], leaf_of[v as usize]);
        let w = w as i128;
        acc[lu as usize] += w;
        acc[lv as usize] += w;
        acc[lca(lu, lv) as usize] -= 2 * w;
    }
    let mut label = vec![0i128; total];
    for &v in order.iter().rev() {
        let mut sum = acc[v as usize];
        for &c in &t.children[v as usize] {
            sum += label[c as usize];
        }
        label[v as usize] = sum;
    }
    label
        .into_iter()
        .map(|x| {
            debug_assert!(x >= 0);
            x as Weight
        })
        .collect()
}

/// Phase 2: label every node with its cut value under the original weights
/// and keep, in postorder, only nodes whose label is strictly smaller than
/// all children's labels. Removed nodes donate their children to their
/// parent. The root is structural and always kept.
pub fn phase2_prune(g: &WeightedGraph, t: &CandidateTree) -> Result<ExtremeSetsTree> {
    let labels = subtree_cut_values(g, t);
    let mut children = t.children.clone();
    let mut keep = vec![true; t.len()];
    for v in t.postorder() {
        if v == t.root || !matches!(t.kind[v as usize], CandNode::Internal) {
            continue;
        }
        let strict = children[v as usize]
            .iter()
            .all(|&c| labels[v as usize] < labels[c as usize]);
        if !strict {
            keep[v as usize] = false;
        }
    }
    // rebuild child lists bottom-up: a removed node's children go to the
    // nearest kept ancestor, keeping relative order
    let mut final_children: Vec<Vec<u32>> = vec![Vec::new(); t.len()];
    for v in t.postorder() {
        let mut list = Vec::new();
        for &c in &children[v as usize] {
            if keep[c as usize] {
                list.push(c);
            } else {
                list.append(&mut final_children[c as usize]);
            }
        }
        final_children[v as usize] = list;
    }
    children = final_children;

    // compact into a fresh arena, preorder from the root
    let n = g.n();
    let mut id_map = vec![NO_NODE; t.len()];
    let mut order = Vec::new();
    let mut stack = vec![t.root];
    while let Some(v) = stack.pop() {
        id_map[v as usize] = order.len() as u32;
        order.push(v);
        for &c in children[v as usize].iter().rev() {
            stack.push(c);
        }
    }
    let total = order.len();
    let mut parent = vec![NO_NODE; total];
    let mut kids = vec![Vec::new(); total];
    let mut leaf_vertex = vec![None; total];
    let mut delta = vec![0; total];
    let mut leaf_of = vec![NO_NODE; n];
    for (new_id, &old) in order.iter().enumerate() {
        delta[new_id] = labels[old as usize];
        if let CandNode::Leaf(x) = t.kind[old as usize] {
            leaf_vertex[new_id] = Some(x);
            leaf_of[x as usize] = new_id as u32;
        }
        for &c in &children[old as usize] {
            let cid = id_map[c as usize];
            kids[new_id].push(cid);
            parent[cid as usize] = new_id as u32;
        }
    }
    if leaf_of.iter().any(|&x| x == NO_NODE) {
        return Err(Error::Defect("pruned tree lost a vertex leaf".into()));
    }
    let mut tree = ExtremeSetsTree {
        n,
        parent,
        children: kids,
        leaf_vertex,
        leaf_of,
        delta,
        root: 0,
    };
    tree.sort_children();
    Ok(tree)
}

// ---------------------------------------------------------------------------
// Top level
// ---------------------------------------------------------------------------

/// Computes the exact extreme-sets tree of `g`. Monte Carlo only in running
/// time: the algorithm retries unbalanced partitions and fails with
/// [`Error::MonteCarloFailure`] if a retry budget is exhausted, but any tree
/// it returns is exact.
pub fn extreme_sets_tree(g: &WeightedGraph, seed: u64) -> Result<ExtremeSetsTree> {
    extreme_sets_tree_with(g, seed, &Stats::new())
}

/// As [`extreme_sets_tree`], recording instrumentation into `stats`.
pub fn extreme_sets_tree_with(
    g: &WeightedGraph,
    seed: u64,
    stats: &Stats,
) -> Result<ExtremeSetsTree> {
    let comps = g.components();
    let cand = if comps.len() <= 1 {
        phase1(&ContractedGraph::trivial(g.clone()), seed, stats)?
    } else {
        // per-component trees under a synthetic root; each full component is
        // itself an extreme node (delta 0)
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = CandidateTree::new_root();
        for comp in &comps {
            let sub_edges: Vec<(u32, u32, Weight)> = {
                let mut local = vec![NO_NODE; g.n()];
                for (i, &v) in comp.iter().enumerate() {
                    local[v as usize] = i as u32;
                }
                g.edges()
                    .iter()
                    .filter(|&&(u, v, _)| local[u as usize] != NO_NODE && local[v as usize] != NO_NODE)
                    .map(|&(u, v, w)| (local[u as usize], local[v as usize], w))
                    .collect()
            };
            let sub = WeightedGraph::build(comp.len(), &sub_edges)?;
            let sub_tree = phase1(&ContractedGraph::trivial(sub), rng.gen(), stats)?;
            graft_component(&mut out, &sub_tree, comp);
        }
        out
    };
    phase2_prune(g, &cand)
}

/// Attaches a per-component candidate tree under `out`'s root, relabeling
/// its leaves through `comp`. Single-vertex components attach as leaves.
fn graft_component(out: &mut CandidateTree, sub: &CandidateTree, comp: &[u32]) {
    let offset = out.len() as u32;
    for v in 0..sub.len() as u32 {
        let kind = match sub.kind[v as usize] {
            CandNode::Leaf(x) => CandNode::Leaf(comp[x as usize]),
            k => k,
        };
        out.kind.push(kind);
        out.parent.push(NO_NODE);
        out.children.push(Vec::new());
        let _ = v;
    }
    for v in 0..sub.len() as u32 {
        let p = sub.parent[v as usize];
        if p != NO_NODE {
            out.parent[(offset + v) as usize] = offset + p;
        }
        out.children[(offset + v) as usize] =
            sub.children[v as usize].iter().map(|&c| offset + c).collect();
    }
    let sub_root = offset + sub.root;
    out.parent[sub_root as usize] = out.root;
    let root = out.root;
    out.children[root as usize].push(sub_root);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn barbell6() -> WeightedGraph {
        let e = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)];
        let edges: Vec<_> = e.iter().map(|&(u, v)| (u, v, 1)).collect();
        WeightedGraph::build(6, &edges).unwrap()
    }

    fn triangle() -> WeightedGraph {
        WeightedGraph::build(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap()
    }

    #[test]
    fn base_case_triangle_has_only_singletons() {
        let t = base_case_extreme_sets(&triangle()).unwrap();
        assert!(t.internal_families().is_empty());
        assert_eq!(t.leaf_count(), 3);
    }

    #[test]
    fn base_case_barbell_finds_both_triangles() {
        let t = base_case_extreme_sets(&barbell6()).unwrap();
        assert_eq!(t.internal_families(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn base_case_unit_path_has_only_singletons() {
        let g = WeightedGraph::build(3, &[(0, 1, 1), (1, 2, 1)]).unwrap();
        let t = base_case_extreme_sets(&g).unwrap();
        assert!(t.internal_families().is_empty());
    }

    #[test]
    fn tree_fixtures() {
        let t = extreme_sets_tree(&barbell6(), 1).unwrap();
        assert_eq!(t.canonical_families(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let tri = extreme_sets_tree(&triangle(), 1).unwrap();
        assert!(tri.canonical_families().is_empty());
        let k2 = WeightedGraph::build(2, &[(0, 1, 7)]).unwrap();
        let t2 = extreme_sets_tree(&k2, 1).unwrap();
        assert!(t2.canonical_families().is_empty());
        assert_eq!(t2.num_nodes(), 3); // root + 2 leaves
    }

    #[test]
    fn tree_labels_match_cut_values() {
        let g = barbell6();
        let t = extreme_sets_tree(&g, 3).unwrap();
        for node in 0..t.num_nodes() as u32 {
            if node == t.root() {
                assert_eq!(t.delta(node), 0);
            } else {
                assert_eq!(t.delta(node), g.cut_value(&t.members(node)).unwrap());
            }
        }
        // strict decrease upward
        for node in 0..t.num_nodes() as u32 {
            if node != t.root() {
                for &c in t.children(node) {
                    assert!(t.delta(node) < t.delta(c));
                }
            }
        }
    }

    #[test]
    fn subtree_cut_values_on_barbell() {
        let g = barbell6();
        let t = base_case_extreme_sets(&g).unwrap();
        let labels = subtree_cut_values(&g, &t);
        assert_eq!(labels[t.root as usize], 0);
        for v in 0..t.len() as u32 {
            if v == t.root {
                continue;
            }
            let members = t.leaves_under(v);
            assert_eq!(labels[v as usize], g.cut_value(&members).unwrap());
        }
        // node {3,4,5} must be labeled 1
        let idx = (0..t.len() as u32)
            .find(|&v| t.leaves_under(v) == vec![3, 4, 5])
            .unwrap();
        assert_eq!(labels[idx as usize], 1);
    }

    #[test]
    fn phase2_prunes_spurious_pair() {
        // candidate tree for B6 with a spurious {0,1} node
        let g = barbell6();
        let mut t = CandidateTree::new_root();
        let left = t.push(CandNode::Internal, t.root);
        let spur = t.push(CandNode::Internal, left);
        t.push(CandNode::Leaf(0), spur);
        t.push(CandNode::Leaf(1), spur);
        t.push(CandNode::Leaf(2), left);
        let right = t.push(CandNode::Internal, t.root);
        for v in 3..6 {
            t.push(CandNode::Leaf(v), right);
        }
        let pruned = phase2_prune(&g, &t).unwrap();
        assert_eq!(pruned.canonical_families(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn phase2_is_idempotent_on_exact_tree() {
        let g = barbell6();
        let exact = base_case_extreme_sets(&g).unwrap();
        let pruned = phase2_prune(&g, &exact).unwrap();
        assert_eq!(pruned.canonical_families(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn combine_trivial_trees() {
        // T_X: root with leaves {a, contracted}; T_notX: root with leaves {b, c, contracted}
        let mut tx = CandidateTree::new_root();
        tx.push(CandNode::Leaf(0), tx.root);
        tx.push(CandNode::ContractedLeaf, tx.root);
        let mut tnx = CandidateTree::new_root();
        tnx.push(CandNode::Leaf(1), tnx.root);
        tnx.push(CandNode::Leaf(2), tnx.root);
        tnx.push(CandNode::ContractedLeaf, tnx.root);
        let out = combine_trees(&tx, &tnx).unwrap();
        assert_eq!(out.leaves_under(out.root), vec![0, 1, 2]);
        // leaf count: (2-1) + (3-1) + ... matches |V|
        assert_eq!(out.leaf_count(), 3);
    }

    #[test]
    fn combine_splices_unary_nodes() {
        // T_notX where removing the contracted leaf leaves a unary internal node
        let mut tnx = CandidateTree::new_root();
        let inner = tnx.push(CandNode::Internal, tnx.root);
        tnx.push(CandNode::Leaf(1), inner);
        tnx.push(CandNode::ContractedLeaf, inner);
        tnx.push(CandNode::Leaf(2), tnx.root);
        let mut tx = CandidateTree::new_root();
        tx.push(CandNode::Leaf(0), tx.root);
        tx.push(CandNode::ContractedLeaf, tx.root);
        let out = combine_trees(&tx, &tnx).unwrap();
        // no internal node should have exactly one child
        for v in 0..out.len() as u32 {
            if matches!(out.kind[v as usize], CandNode::Internal) && !out.children[v as usize].is_empty()
            {
                assert!(out.children[v as usize].len() >= 2, "unary node {v}");
            }
        }
        assert_eq!(out.leaves_under(out.root), vec![0, 1, 2]);
    }

    #[test]
    fn balance_bounds_arithmetic() {
        // |V|=32: accepted iff 2 <= |X| <= 30; |V|=48: |X|=2 rejected
        assert!(16 * 2 >= 32 && 16 * 30 <= 15 * 32);
        assert!(16 * 2 < 48);
    }

    #[test]
    fn oracle_equivalence_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for round in 0..60 {
            let n = rng.gen_range(2..=12);
            let g = oracles::random_connected_graph(&mut rng, n, 2 * n, 8);
            let fast = extreme_sets_tree(&g, round).unwrap();
            let brute = oracles::brute_extreme_sets(&g).unwrap();
            assert_eq!(
                fast.canonical_labeled(),
                brute.canonical_labeled(),
                "n={n} round={round}"
            );
        }
    }

    #[test]
    fn oracle_equivalence_beyond_base_case() {
        // n > 16 exercises sampling, contraction, combining and pruning
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for round in 0..12 {
            let n = rng.gen_range(17..=20);
            let g = oracles::random_connected_graph(&mut rng, n, 3 * n, 5);
            let fast = extreme_sets_tree(&g, 7000 + round).unwrap();
            let brute = oracles::brute_extreme_family_large(&g);
            assert_eq!(fast.canonical_families(), brute, "n={n} round={round}");
        }
    }

    #[test]
    fn candidate_contains_all_extreme_sets_midway() {
        // Lemma: before pruning, every brute-force extreme set is a subtree
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for round in 0..8 {
            let n = rng.gen_range(17..=20);
            let g = oracles::random_connected_graph(&mut rng, n, 3 * n, 4);
            let stats = Stats::new();
            let cand = phase1(&ContractedGraph::trivial(g.clone()), round, &stats).unwrap();
            let sets = cand.internal_families();
            for fam in oracles::brute_extreme_family_large(&g) {
                assert!(sets.contains(&fam), "extreme set {fam:?} missing before pruning");
            }
        }
    }

    #[test]
    fn identical_seed_identical_tree() {
        let g = oracles::random_connected_graph(&mut ChaCha8Rng::seed_from_u64(8), 40, 100, 6);
        let a = extreme_sets_tree(&g, 5).unwrap();
        let b = extreme_sets_tree(&g, 5).unwrap();
        assert_eq!(a.canonical_labeled(), b.canonical_labeled());
    }

    #[test]
    fn disconnected_components_become_extreme_nodes() {
        // two unit triangles
        let g = WeightedGraph::build(
            6,
            &[(0, 1, 1), (1, 2, 1), (0, 2, 1), (3, 4, 1), (4, 5, 1), (3, 5, 1)],
        )
        .unwrap();
        let t = extreme_sets_tree(&g, 0).unwrap();
        assert_eq!(t.canonical_families(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        for node in 0..t.num_nodes() as u32 {
            if node != t.root() && !t.is_leaf(node) {
                assert_eq!(t.delta(node), 0);
            }
        }
    }

    #[test]
    fn single_vertex_graph() {
        let g = WeightedGraph::build(1, &[]).unwrap();
        let t = extreme_sets_tree(&g, 0).unwrap();
        assert_eq!(t.num_nodes(), 2);
        assert_eq!(t.members(t.root()), vec![0]);
    }

    #[test]
    fn empirical_balance_acceptance() {
        // sanity version of the statistical bound; the acceptance suite
        // runs the full 10^4-sample variant
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = oracles::random_connected_graph(&mut rng, 64, 192, 4);
        let stats = Stats::new();
        let mut ok = 0;
        let trials = 300;
        for i in 0..trials {
            let pw = perturb(&g, i as u64, 4).unwrap();
            let s = rng.gen_range(0..64u32);
            let mut t = rng.gen_range(0..63u32);
            if t >= s {
                t += 1;
            }
            let phi = MaxFlowSolver::new(pw.graph()).max_flow_value(s, t).unwrap();
            let inside = cutthresh::naive_inside_bounded(pw.graph(), s, phi, &stats, None).unwrap();
            let x = 64 - inside.len();
            if 16 * x >= 64 && 16 * x <= 15 * 64 {
                ok += 1;
            }
        }
        assert!(ok * 64 >= trials, "acceptance too rare: {ok}/{trials}");
    }
}
