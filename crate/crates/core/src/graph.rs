//! Weighted undirected multigraphs with cut evaluation, contraction with
//! provenance, and random weight perturbation.

use crate::{Error, Result, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Undirected graph with positive integer weights. Parallel edges are merged
/// on construction (weights summed) and self-loops dropped. Immutable after
/// construction, so it can be shared freely across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    n: usize,
    /// Canonical edge list: `u < v`, sorted lexicographically, weights >= 1.
    edges: Vec<(u32, u32, Weight)>,
}

impl WeightedGraph {
    /// Builds a graph from an arbitrary edge list. Parallel edges merge,
    /// self-loops are dropped, and the result has a deterministic edge order.
    pub fn build(n: usize, edge_list: &[(u32, u32, Weight)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(u, v, w) in edge_list {
            if u as usize >= n {
                return Err(Error::InvalidVertex { vertex: u, n });
            }
            if v as usize >= n {
                return Err(Error::InvalidVertex { vertex: v, n });
            }
            if w == 0 {
                return Err(Error::NonPositiveWeight { u, v });
            }
            if u == v {
                continue;
            }
            edges.push((u.min(v), u.max(v), w));
        }
        edges.sort_unstable_by_key(|&(u, v, _)| (u, v));
        edges.dedup_by(|cur, acc| {
            if cur.0 == acc.0 && cur.1 == acc.1 {
                acc.2 += cur.2;
                true
            } else {
                false
            }
        });
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32, Weight)] {
        &self.edges
    }

    /// Sum of all edge weights.
    pub fn total_weight(&self) -> Weight {
        self.edges.iter().map(|&(_, _, w)| w).sum()
    }

    /// Weighted degree of `v`.
    pub fn weighted_degree(&self, v: u32) -> Weight {
        self.edges
            .iter()
            .filter(|&&(a, b, _)| a == v || b == v)
            .map(|&(_, _, w)| w)
            .sum()
    }

    /// Weighted degrees of all vertices in one pass.
    pub fn weighted_degrees(&self) -> Vec<Weight> {
        let mut deg = vec![0; self.n];
        for &(u, v, w) in &self.edges {
            deg[u as usize] += w;
            deg[v as usize] += w;
        }
        deg
    }

    /// Cut value `delta(S)`: total weight of edges with exactly one endpoint
    /// in `S`. `S` must be a nonempty proper subset of the vertices.
    pub fn cut_value(&self, side: &[u32]) -> Result<Weight> {
        let mut in_side = vec![false; self.n];
        let mut size = 0usize;
        for &v in side {
            if v as usize >= self.n {
                return Err(Error::InvalidVertex { vertex: v, n: self.n });
            }
            if !in_side[v as usize] {
                in_side[v as usize] = true;
                size += 1;
            }
        }
        if size == 0 || size == self.n {
            return Err(Error::InvalidCutSide);
        }
        Ok(self.cut_value_of_mask(&in_side))
    }

    /// Cut value of the side described by a membership mask. The mask is not
    /// validated; callers guarantee a nonempty proper subset.
    pub fn cut_value_of_mask(&self, in_side: &[bool]) -> Weight {
        self.edges
            .iter()
            .filter(|&&(u, v, _)| in_side[u as usize] != in_side[v as usize])
            .map(|&(_, _, w)| w)
            .sum()
    }

    /// Connected components; each component is a sorted vertex list.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v, _) in &self.edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        let mut comp = vec![usize::MAX; self.n];
        let mut out: Vec<Vec<u32>> = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            out.push(Vec::new());
            comp[start] = id;
            stack.push(start as u32);
            while let Some(v) = stack.pop() {
                out[id].push(v);
                for &u in &adj[v as usize] {
                    if comp[u as usize] == usize::MAX {
                        comp[u as usize] = id;
                        stack.push(u);
                    }
                }
            }
        }
        for c in &mut out {
            c.sort_unstable();
        }
        out
    }

    /// Union with another weighted edge multiset over the same vertex set.
    pub fn union_edges(&self, extra: &[(u32, u32, Weight)]) -> Result<WeightedGraph> {
        let mut all = self.edges.clone();
        all.extend_from_slice(extra);
        WeightedGraph::build(self.n, &all)
    }
}

/// A graph obtained from an original one by contracting vertex classes.
/// `classes[i]` lists the original vertices represented by contracted-graph
/// vertex `i`; `uncontracted` are the vertices whose class is a singleton.
#[derive(Debug, Clone)]
pub struct ContractedGraph {
    pub graph: WeightedGraph,
    pub classes: Vec<Vec<u32>>,
}

impl ContractedGraph {
    /// The trivial contraction: every vertex its own class.
    pub fn trivial(graph: WeightedGraph) -> Self {
        let classes = (0..graph.n() as u32).map(|v| vec![v]).collect();
        Self { graph, classes }
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Vertices whose class is a singleton original vertex.
    pub fn uncontracted(&self) -> Vec<u32> {
        (0..self.n() as u32)
            .filter(|&v| self.classes[v as usize].len() == 1)
            .collect()
    }

    /// Contracts the vertices of `side` (current ids) into a single vertex.
    ///
    /// Returns the new graph, the mapping from old vertex ids to new ones,
    /// and the id of the merged vertex. Surviving vertices keep their
    /// relative order; the merged vertex is numbered last. A singleton
    /// `side` is the identity up to relabeling.
    pub fn contract(&self, side: &[u32]) -> Result<(ContractedGraph, Vec<u32>, u32)> {
        let n = self.n();
        let mut in_side = vec![false; n];
        let mut size = 0usize;
        for &v in side {
            if v as usize >= n {
                return Err(Error::NotASubset);
            }
            if !in_side[v as usize] {
                in_side[v as usize] = true;
                size += 1;
            }
        }
        if size == 0 {
            return Err(Error::NotASubset);
        }
        let new_n = n - size + 1;
        let merged = (new_n - 1) as u32;
        let mut map = vec![0u32; n];
        let mut next = 0u32;
        for v in 0..n {
            if in_side[v] {
                map[v] = merged;
            } else {
                map[v] = next;
                next += 1;
            }
        }
        let mapped: Vec<(u32, u32, Weight)> = self
            .graph
            .edges()
            .iter()
            .map(|&(u, v, w)| (map[u as usize], map[v as usize], w))
            .collect();
        let graph = WeightedGraph::build(new_n, &mapped)?;
        let mut classes = vec![Vec::new(); new_n];
        for v in 0..n {
            classes[map[v] as usize].extend_from_slice(&self.classes[v]);
        }
        for c in &mut classes {
            c.sort_unstable();
        }
        Ok((ContractedGraph { graph, classes }, map, merged))
    }
}

/// Perturbed edge weights `w'(u,v) = m*N*w(u,v) + r(u,v)` with `r` uniform on
/// `{1..N}` and `N = m * n^d`. Preserves the strict order of cut values and
/// makes minimum cuts unique with high probability.
#[derive(Debug, Clone)]
pub struct PerturbedWeights {
    /// `N = m * n^d`.
    pub n_rand: Weight,
    pub d: u32,
    /// Random value per edge, aligned with the base graph's edge order.
    pub r: Vec<Weight>,
    graph: WeightedGraph,
}

impl PerturbedWeights {
    /// The graph under the perturbed weights (same vertices and edge order
    /// as the base graph).
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }
}

/// Draws a fresh perturbation of `g`. Deterministic given `seed`.
///
/// Requires `d >= 4`. The derived weights must fit comfortably in the
/// 128-bit weight type: with the documented input limits `w <= 2^20` and
/// `n <= 2^10` one has `m*N*w <= 2^100`; beyond that the required width is
/// reported instead of overflowing silently.
pub fn perturb(g: &WeightedGraph, seed: u64, d: u32) -> Result<PerturbedWeights> {
    if d < 4 {
        return Err(Error::BadExponent { d });
    }
    let m = g.m() as Weight;
    let n = g.n() as Weight;
    if m == 0 {
        return Ok(PerturbedWeights {
            n_rand: 0,
            d,
            r: Vec::new(),
            graph: g.clone(),
        });
    }
    let overflow = |required: u32| Error::WeightOverflow { required_bits: required };
    // N = m * n^d
    let mut n_rand: Weight = m;
    for _ in 0..d {
        n_rand = n_rand.checked_mul(n).ok_or_else(|| overflow(128))?;
    }
    let scale = m.checked_mul(n_rand).ok_or_else(|| overflow(128))?;
    // Cut values sum whole edge sets; require the grand total to leave
    // headroom below 2^126 so flow arithmetic cannot overflow.
    let mut total: Weight = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = Vec::with_capacity(g.m());
    let mut edges = Vec::with_capacity(g.m());
    for &(u, v, w) in g.edges() {
        let rv: Weight = rng.gen_range(1..=n_rand);
        let wp = scale
            .checked_mul(w)
            .and_then(|x| x.checked_add(rv))
            .ok_or_else(|| overflow(128))?;
        total = total.checked_add(wp).ok_or_else(|| overflow(128))?;
        if total >= (1u128 << 126) {
            let bits = 128 - total.leading_zeros() + 1;
            return Err(overflow(bits.max(127)));
        }
        r.push(rv);
        edges.push((u, v, wp));
    }
    let graph = WeightedGraph { n: g.n(), edges };
    Ok(PerturbedWeights { n_rand, d, r, graph })
}
