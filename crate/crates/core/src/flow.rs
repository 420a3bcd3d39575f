//! Exact max-flow / min-cut on weighted undirected graphs, plus global and
//! Steiner connectivity helpers.
//!
//! Undirected edges are modeled as two opposing directed arcs sharing
//! capacity. The solver is Dinic's algorithm on 128-bit capacities; an
//! optional cap allows early exit as soon as the flow value provably
//! exceeds a threshold, which the cut-threshold backends rely on.

use crate::{Error, Result, Weight, WeightedGraph};

/// Value and the `s`-minimal side of a minimum `s`-`t` cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult {
    pub value: Weight,
    /// Vertices reachable from `s` in the final residual network, sorted.
    pub s_side: Vec<u32>,
}

const UNREACHED: u32 = u32::MAX;

/// Reusable Dinic solver. Capacities are restored from a pristine copy at
/// the start of every run, so one solver serves many (s, t) queries on the
/// same graph. Cloning yields an independent solver for use on another
/// thread.
#[derive(Debug, Clone)]
pub struct MaxFlowSolver {
    n: usize,
    start: Vec<u32>,
    to: Vec<u32>,
    /// Reverse arc of each arc.
    pair: Vec<u32>,
    cap: Vec<Weight>,
    init_cap: Vec<Weight>,
    /// Bit per arc: has residual capacity. Traversals test this instead of
    /// the 16-byte capacities; the bitset stays cache-resident.
    residual: Vec<u64>,
    /// Arcs whose capacity changed in the current run; restoring only these
    /// makes per-query resets proportional to the flow actually pushed.
    dirty: Vec<u32>,
    level: Vec<u32>,
    cursor: Vec<u32>,
    queue: Vec<u32>,
    /// Number of flow runs performed by this solver instance.
    pub calls: u64,
}

impl MaxFlowSolver {
    pub fn new(g: &WeightedGraph) -> Self {
        Self::from_edges(g.n(), g.edges())
    }

    /// Builds a solver directly from an edge list (parallel arcs permitted;
    /// self-loops ignored).
    pub fn from_edges(n: usize, edges: &[(u32, u32, Weight)]) -> Self {
        let mut deg = vec![0u32; n + 1];
        let mut m = 0;
        for &(u, v, _) in edges {
            if u == v {
                continue;
            }
            deg[u as usize + 1] += 1;
            deg[v as usize + 1] += 1;
            m += 1;
        }
        let mut start = deg;
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut to = vec![0u32; 2 * m];
        let mut cap = vec![0; 2 * m];
        let mut pair = vec![0u32; 2 * m];
        let mut slot = start.clone();
        for &(u, v, w) in edges {
            if u == v {
                continue;
            }
            let e = slot[u as usize] as usize;
            slot[u as usize] += 1;
            let f = slot[v as usize] as usize;
            slot[v as usize] += 1;
            to[e] = v;
            to[f] = u;
            cap[e] = w;
            cap[f] = w;
            pair[e] = f as u32;
            pair[f] = e as u32;
        }
        let mut residual = vec![0u64; (2 * m + 63) / 64 + 1];
        for (e, &c) in cap.iter().enumerate() {
            if c > 0 {
                residual[e >> 6] |= 1 << (e & 63);
            }
        }
        Self {
            n,
            start,
            to,
            pair,
            cap: cap.clone(),
            init_cap: cap,
            residual,
            dirty: Vec::new(),
            level: vec![UNREACHED; n],
            cursor: vec![0; n],
            queue: Vec::with_capacity(n),
            calls: 0,
        }
    }

    #[inline(always)]
    fn has_residual(&self, e: usize) -> bool {
        self.residual[e >> 6] & (1 << (e & 63)) != 0
    }

    #[inline(always)]
    fn sync_residual(&mut self, e: usize) {
        if self.cap[e] > 0 {
            self.residual[e >> 6] |= 1 << (e & 63);
        } else {
            self.residual[e >> 6] &= !(1 << (e & 63));
        }
    }

    fn reset(&mut self) {
        for idx in 0..self.dirty.len() {
            let e = self.dirty[idx] as usize;
            let r = self.pair[e] as usize;
            self.cap[e] = self.init_cap[e];
            self.cap[r] = self.init_cap[r];
        }
        for idx in 0..self.dirty.len() {
            let e = self.dirty[idx] as usize;
            let r = self.pair[e] as usize;
            self.sync_residual(e);
            self.sync_residual(r);
        }
        self.dirty.clear();
    }

    /// Exact max-flow value.
    pub fn max_flow_value(&mut self, s: u32, t: u32) -> Result<Weight> {
        if s == t {
            return Err(Error::SourceIsSink);
        }
        Ok(self.run(s, t, Weight::MAX))
    }

    /// Runs until either the flow is maximal or its value exceeds `cap_at`.
    /// A return value `> cap_at` means "the max flow exceeds `cap_at`"; a
    /// value `<= cap_at` is the exact max flow.
    pub fn max_flow_capped(&mut self, s: u32, t: u32, cap_at: Weight) -> Result<Weight> {
        if s == t {
            return Err(Error::SourceIsSink);
        }
        Ok(self.run(s, t, cap_at.saturating_add(1)))
    }

    /// Exact max flow together with the s-minimal minimum-cut side.
    pub fn max_flow(&mut self, s: u32, t: u32) -> Result<FlowResult> {
        let value = self.max_flow_value(s, t)?;
        let mut s_side = self.residual_reachable(s);
        s_side.sort_unstable();
        Ok(FlowResult { value, s_side })
    }

    /// Exact max flow together with the t-minimal side (vertices that can
    /// still reach `t` in the residual network).
    pub fn max_flow_t_side(&mut self, s: u32, t: u32) -> Result<(Weight, Vec<u32>)> {
        let value = self.max_flow_value(s, t)?;
        let mut t_side = self.residual_coreachable(t);
        t_side.sort_unstable();
        Ok((value, t_side))
    }

    /// The minimal t-side of the run that just completed. Only meaningful
    /// after a run that was not stopped early by a cap.
    pub fn t_side_after_run(&mut self, t: u32) -> Vec<u32> {
        let mut side = self.residual_coreachable(t);
        side.sort_unstable();
        side
    }

    /// The minimal s-side of the run that just completed.
    pub fn s_side_after_run(&mut self, s: u32) -> Vec<u32> {
        let mut side = self.residual_reachable(s);
        side.sort_unstable();
        side
    }

    fn run(&mut self, s: u32, t: u32, limit: Weight) -> Weight {
        self.reset();
        self.calls += 1;
        let mut flow: Weight = 0;
        while flow < limit {
            if !self.bfs(s, t) {
                break;
            }
            let (cursor, start) = (&mut self.cursor, &self.start);
            cursor.copy_from_slice(&start[..start.len() - 1]);
            let pushed = self.blocking_flow(s, t, limit - flow);
            if pushed == 0 {
                break;
            }
            flow += pushed;
        }
        flow
    }

    fn bfs(&mut self, s: u32, t: u32) -> bool {
        self.level.fill(UNREACHED);
        self.level[s as usize] = 0;
        self.queue.clear();
        self.queue.push(s);
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            let lv = self.level[v as usize];
            for e in self.start[v as usize]..self.start[v as usize + 1] {
                let e = e as usize;
                let u = self.to[e];
                if self.has_residual(e) && self.level[u as usize] == UNREACHED {
                    self.level[u as usize] = lv + 1;
                    if u == t {
                        return true;
                    }
                    self.queue.push(u);
                }
            }
        }
        false
    }

    /// Iterative blocking flow with the current-arc optimization. Kept
    /// non-recursive so deep level graphs cannot exhaust thread stacks.
    fn blocking_flow(&mut self, s: u32, t: u32, limit: Weight) -> Weight {
        let mut total: Weight = 0;
        let mut path: Vec<u32> = Vec::new();
        let mut x = s;
        loop {
            if x == t {
                let mut bottleneck = limit - total;
                for &e in &path {
                    bottleneck = bottleneck.min(self.cap[e as usize]);
                }
                let mut retreat_to = path.len();
                for (i, &e) in path.iter().enumerate() {
                    self.dirty.push(e);
                    let e = e as usize;
                    self.cap[e] -= bottleneck;
                    let r = self.pair[e] as usize;
                    self.cap[r] += bottleneck;
                    self.sync_residual(e);
                    self.sync_residual(r);
                    if self.cap[e] == 0 && i < retreat_to {
                        retreat_to = i;
                    }
                }
                total += bottleneck;
                if total >= limit {
                    return total;
                }
                path.truncate(retreat_to);
                x = match path.last() {
                    Some(&e) => self.to[e as usize],
                    None => s,
                };
                continue;
            }
            let xi = x as usize;
            let mut advanced = false;
            while self.cursor[xi] < self.start[xi + 1] {
                let e = self.cursor[xi] as usize;
                let u = self.to[e];
                if self.has_residual(e)
                    && self.level[u as usize] == self.level[xi] + 1
                {
                    path.push(e as u32);
                    x = u;
                    advanced = true;
                    break;
                }
                self.cursor[xi] += 1;
            }
            if advanced {
                continue;
            }
            // dead end: remove x from the level graph and retreat
            self.level[xi] = UNREACHED;
            match path.pop() {
                Some(e) => {
                    let prev = self.to[self.pair[e as usize] as usize];
                    self.cursor[prev as usize] += 1;
                    x = prev;
                }
                None => return total,
            }
        }
    }

    fn residual_reachable(&mut self, s: u32) -> Vec<u32> {
        let mut seen = vec![false; self.n];
        seen[s as usize] = true;
        let mut out = vec![s];
        let mut head = 0;
        while head < out.len() {
            let v = out[head] as usize;
            head += 1;
            for e in self.start[v]..self.start[v + 1] {
                let e = e as usize;
                let u = self.to[e] as usize;
                if self.has_residual(e) && !seen[u] {
                    seen[u] = true;
                    out.push(u as u32);
                }
            }
        }
        out
    }

    /// Vertices with a residual path *to* `t`.
    fn residual_coreachable(&mut self, t: u32) -> Vec<u32> {
        let mut seen = vec![false; self.n];
        seen[t as usize] = true;
        let mut out = vec![t];
        let mut head = 0;
        while head < out.len() {
            let v = out[head] as usize;
            head += 1;
            for e in self.start[v]..self.start[v + 1] {
                let e = e as usize;
                // arc pair[e] runs to[e] -> v; residual there means to[e]
                // can step to v and hence reach t
                let u = self.to[e] as usize;
                if self.has_residual(self.pair[e] as usize) && !seen[u] {
                    seen[u] = true;
                    out.push(u as u32);
                }
            }
        }
        out
    }
}

/// The connectivity `lambda(s, t)`: value of the minimum s-t cut.
pub fn connectivity(g: &WeightedGraph, s: u32, t: u32) -> Result<Weight> {
    MaxFlowSolver::new(g).max_flow_value(s, t)
}

/// Minimum cut over all nonempty proper vertex subsets, with a side that
/// attains it. Requires `n >= 2`. One capped max-flow per vertex, run in
/// parallel batches; the cap shrinks as better cuts are found.
pub fn global_min_cut(g: &WeightedGraph) -> Result<(Weight, Vec<u32>)> {
    use rayon::prelude::*;
    if g.n() < 2 {
        return Err(Error::TooFew { needed: 2, got: g.n() });
    }
    let solver = MaxFlowSolver::new(g);
    let mut best: Option<(Weight, Vec<u32>)> = None;
    let sinks: Vec<u32> = (1..g.n() as u32).collect();
    for batch in sinks.chunks(256) {
        let cap = match &best {
            Some((b, _)) if *b > 0 => *b - 1,
            Some(_) => break, // found a zero cut, cannot improve
            None => Weight::MAX - 1,
        };
        let found: Vec<(Weight, Vec<u32>)> = batch
            .par_iter()
            .map_init(
                || solver.clone(),
                |solver, &t| {
                    let value = solver.max_flow_capped(0, t, cap).expect("t != 0");
                    if value <= cap {
                        Some((value, solver.s_side_after_run(0)))
                    } else {
                        None
                    }
                },
            )
            .flatten()
            .collect();
        for cand in found {
            if best.as_ref().map_or(true, |(b, _)| cand.0 < *b) {
                best = Some(cand);
            }
        }
    }
    match best {
        Some(b) => Ok(b),
        None => Err(Error::Defect("uncapped flow must be exact".into())),
    }
}

/// Steiner connectivity of a terminal set: the minimum cut value over cuts
/// separating the terminals. Requires `|terminals| >= 2`.
pub fn steiner_connectivity(g: &WeightedGraph, terminals: &[u32]) -> Result<Weight> {
    if terminals.len() < 2 {
        return Err(Error::TooFew { needed: 2, got: terminals.len() });
    }
    for &t in terminals {
        if t as usize >= g.n() {
            return Err(Error::InvalidVertex { vertex: t, n: g.n() });
        }
    }
    let mut solver = MaxFlowSolver::new(g);
    let t0 = terminals[0];
    let mut best = Weight::MAX;
    for &t in &terminals[1..] {
        if t == t0 {
            continue;
        }
        if best == 0 {
            break;
        }
        let v = solver.max_flow_capped(t0, t, best - 1)?;
        if v < best {
            best = v;
        }
    }
    Ok(best)
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

    #[test]
    fn k2_flow() {
        let g = WeightedGraph::build(2, &[(0, 1, 7)]).unwrap();
        let r = MaxFlowSolver::new(&g).max_flow(0, 1).unwrap();
        assert_eq!(r.value, 7);
        assert_eq!(r.s_side, vec![0]);
    }

    #[test]
    fn barbell_bridge_cut() {
        let g = barbell6();
        let r = MaxFlowSolver::new(&g).max_flow(0, 4).unwrap();
        assert_eq!(r.value, 1);
        assert_eq!(r.s_side, vec![0, 1, 2]);
        assert_eq!(connectivity(&g, 0, 1).unwrap(), 2);
    }

    #[test]
    fn rejects_equal_endpoints() {
        let g = barbell6();
        assert!(MaxFlowSolver::new(&g).max_flow_value(3, 3).is_err());
    }

    #[test]
    fn value_matches_brute_force_min_cut() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let n = rng.gen_range(2..=9);
            let g = oracles::random_graph(&mut rng, n, 2 * n, 5);
            let s = rng.gen_range(0..n as u32);
            let mut t = rng.gen_range(0..n as u32);
            if t == s {
                t = (t + 1) % n as u32;
            }
            let fast = connectivity(&g, s, t).unwrap();
            let brute = oracles::brute_st_min_cut(&g, s, t).unwrap();
            assert_eq!(fast, brute);
        }
    }

    #[test]
    fn side_value_consistency_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let n = rng.gen_range(2..=10);
            let g = oracles::random_graph(&mut rng, n, 3 * n, 6);
            let s = rng.gen_range(0..n as u32);
            let mut t = rng.gen_range(0..n as u32);
            if t == s {
                t = (t + 1) % n as u32;
            }
            let mut solver = MaxFlowSolver::new(&g);
            let r = solver.max_flow(s, t).unwrap();
            assert!(r.s_side.contains(&s) && !r.s_side.contains(&t));
            if !r.s_side.is_empty() && r.s_side.len() < g.n() {
                assert_eq!(g.cut_value(&r.s_side).unwrap(), r.value);
            }
            assert_eq!(r.value, connectivity(&g, t, s).unwrap());
        }
    }

    #[test]
    fn capped_flow_detects_threshold() {
        let g = barbell6();
        let mut solver = MaxFlowSolver::new(&g);
        // lambda(0, 1) = 2: capped at 1 must report "exceeds 1"
        assert!(solver.max_flow_capped(0, 1, 1).unwrap() > 1);
        assert_eq!(solver.max_flow_capped(0, 1, 5).unwrap(), 2);
    }

    #[test]
    fn global_min_cut_fixtures() {
        let g = barbell6();
        let (v, side) = global_min_cut(&g).unwrap();
        assert_eq!(v, 1);
        assert!(side == vec![0, 1, 2] || side == vec![3, 4, 5]);
        let tri = WeightedGraph::build(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        assert_eq!(global_min_cut(&tri).unwrap().0, 2);
        let k2 = WeightedGraph::build(2, &[(0, 1, 7)]).unwrap();
        assert_eq!(global_min_cut(&k2).unwrap().0, 7);
        assert!(global_min_cut(&WeightedGraph::build(1, &[]).unwrap()).is_err());
    }

    #[test]
    fn steiner_fixtures() {
        let g = barbell6();
        assert_eq!(steiner_connectivity(&g, &[0, 4]).unwrap(), 1);
        let tri = WeightedGraph::build(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        assert_eq!(steiner_connectivity(&tri, &[0, 1, 2]).unwrap(), 2);
        assert!(steiner_connectivity(&g, &[3]).is_err());
    }

    #[test]
    fn disconnected_flow_is_zero() {
        let g = WeightedGraph::build(4, &[(0, 1, 3), (2, 3, 4)]).unwrap();
        let r = MaxFlowSolver::new(&g).max_flow(0, 2).unwrap();
        assert_eq!(r.value, 0);
        assert_eq!(r.s_side, vec![0, 1]);
    }

    #[test]
    fn deterministic_sides_on_perturbed_weights() {
        let g = oracles::random_graph(&mut ChaCha8Rng::seed_from_u64(5), 10, 22, 4);
        let p = crate::graph::perturb(&g, 77, 4).unwrap();
        let mut solver = MaxFlowSolver::new(p.graph());
        for t in 1..10 {
            let a = solver.max_flow(0, t).unwrap();
            let b = solver.max_flow(0, t).unwrap();
            assert_eq!(a, b);
        }
    }
}
