//! Minimum isolating cuts: for every terminal `t` in a set `T`, the minimum
//! cut separating `t` from `T \ {t}`.
//!
//! Uses the standard bit-partition construction: `ceil(log2 |T|)` max-flows
//! split the terminals by the bits of their index and carve the graph into
//! disjoint regions, one per terminal; one local max-flow inside each
//! contracted region then yields the exact isolating cut. Total max-flow
//! invocations: at most `ceil(log2 |T|) + |T|`.

use crate::flow::MaxFlowSolver;
use crate::stats::Stats;
use crate::{Error, Result, Weight, WeightedGraph};

/// Per-terminal minimum isolating cuts; `cuts[i]` belongs to
/// `terminals[i]` and its side contains exactly that terminal.
#[derive(Debug, Clone)]
pub struct IsolatingCutsResult {
    /// Sorted, deduplicated terminals.
    pub terminals: Vec<u32>,
    /// `(value, side)` per terminal; sides are sorted, pairwise disjoint,
    /// and `side ∩ terminals == {t}`.
    pub cuts: Vec<(Weight, Vec<u32>)>,
}

impl IsolatingCutsResult {
    pub fn cut_for(&self, t: u32) -> Option<&(Weight, Vec<u32>)> {
        self.terminals
            .binary_search(&t)
            .ok()
            .map(|i| &self.cuts[i])
    }
}

/// Computes all minimum isolating cuts for `terminals` (at least two).
pub fn isolating_cuts(
    g: &WeightedGraph,
    terminals: &[u32],
    stats: &Stats,
) -> Result<IsolatingCutsResult> {
    let n = g.n();
    let mut terms: Vec<u32> = terminals.to_vec();
    terms.sort_unstable();
    terms.dedup();
    if terms.len() < 2 {
        return Err(Error::TooFew { needed: 2, got: terms.len() });
    }
    for &t in &terms {
        if t as usize >= n {
            return Err(Error::InvalidVertex { vertex: t, n });
        }
    }
    let k = terms.len();
    let bits = usize::BITS - (k - 1).leading_zeros();
    let inf: Weight = g.total_weight() + 1;

    // Bit-partition cuts: signature bit j of a vertex says whether it lies
    // on the source side of the j-th bipartition flow. Terminals are wired
    // to the super source/sink with saturated-proof weight, so a terminal's
    // signature equals the bits of its index.
    let mut sig = vec![0u32; n];
    let src = n as u32;
    let snk = n as u32 + 1;
    for j in 0..bits {
        let mut edges: Vec<(u32, u32, Weight)> = g.edges().to_vec();
        for (idx, &t) in terms.iter().enumerate() {
            if idx >> j & 1 == 1 {
                edges.push((src, t, inf));
            } else {
                edges.push((t, snk, inf));
            }
        }
        let mut solver = MaxFlowSolver::from_edges(n + 2, &edges);
        stats.count_flow();
        solver.max_flow_value(src, snk)?;
        for v in solver.s_side_after_run(src) {
            if (v as usize) < n {
                sig[v as usize] |= 1 << j;
            }
        }
    }

    let mut cuts = Vec::with_capacity(k);
    for (idx, &t) in terms.iter().enumerate() {
        let want = idx as u32;
        // region of t: vertices whose side agrees with t in every round
        let region: Vec<u32> = (0..n as u32)
            .filter(|&v| mask_bits(sig[v as usize], bits) == mask_bits(want, bits))
            .collect();
        debug_assert!(region.binary_search(&t).is_ok());
        if region.len() == n {
            return Err(Error::Defect("isolating region failed to separate".into()));
        }
        // contract everything outside the region into one vertex
        let mut local = vec![u32::MAX; n];
        for (i, &v) in region.iter().enumerate() {
            local[v as usize] = i as u32;
        }
        let z = region.len() as u32;
        let edges: Vec<(u32, u32, Weight)> = g
            .edges()
            .iter()
            .filter_map(|&(u, v, w)| {
                let (lu, lv) = (local[u as usize], local[v as usize]);
                let a = if lu == u32::MAX { z } else { lu };
                let b = if lv == u32::MAX { z } else { lv };
                (a != b).then_some((a, b, w))
            })
            .collect();
        let mut solver = MaxFlowSolver::from_edges(region.len() + 1, &edges);
        stats.count_flow();
        let value = solver.max_flow_value(local[t as usize], z)?;
        let side: Vec<u32> = solver
            .s_side_after_run(local[t as usize])
            .into_iter()
            .map(|lv| region[lv as usize])
            .collect();
        let mut side = side;
        side.sort_unstable();
        cuts.push((value, side));
    }
    Ok(IsolatingCutsResult { terminals: terms, cuts })
}

fn mask_bits(x: u32, bits: u32) -> u32 {
    if bits >= 32 {
        x
    } else {
        x & ((1 << bits) - 1)
    }
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
    fn barbell_two_terminals() {
        let g = barbell6();
        let r = isolating_cuts(&g, &[0, 4], &Stats::new()).unwrap();
        assert_eq!(r.cut_for(0).unwrap(), &(1, vec![0, 1, 2]));
        assert_eq!(r.cut_for(4).unwrap(), &(1, vec![3, 4, 5]));
    }

    #[test]
    fn triangle_all_terminals() {
        let g = WeightedGraph::build(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        let r = isolating_cuts(&g, &[0, 1, 2], &Stats::new()).unwrap();
        for t in 0..3u32 {
            assert_eq!(r.cut_for(t).unwrap(), &(2, vec![t]));
        }
    }

    #[test]
    fn two_terminals_match_connectivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.gen_range(2..=10);
            let g = oracles::random_graph(&mut rng, n, 2 * n, 5);
            let a = rng.gen_range(0..n as u32);
            let mut b = rng.gen_range(0..(n - 1).max(1) as u32);
            if b >= a {
                b += 1;
            }
            if b as usize >= n {
                continue;
            }
            let r = isolating_cuts(&g, &[a, b], &Stats::new()).unwrap();
            let lambda = crate::flow::connectivity(&g, a, b).unwrap();
            assert_eq!(r.cut_for(a).unwrap().0, lambda);
            assert_eq!(r.cut_for(b).unwrap().0, lambda);
        }
    }

    #[test]
    fn matches_brute_force_and_sides_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..25 {
            let n = rng.gen_range(3..=10);
            let g = oracles::random_graph(&mut rng, n, 3 * n, 4);
            let k = rng.gen_range(2..=4.min(n));
            let mut terms: Vec<u32> = (0..n as u32).collect();
            for i in (1..terms.len()).rev() {
                terms.swap(i, rng.gen_range(0..=i));
            }
            terms.truncate(k);
            terms.sort_unstable();
            let r = isolating_cuts(&g, &terms, &Stats::new()).unwrap();
            for (i, &t) in r.terminals.iter().enumerate() {
                let (value, side) = &r.cuts[i];
                assert_eq!(g.cut_value(side).unwrap(), *value);
                assert_eq!(
                    *value,
                    oracles::brute_isolating_cut(&g, t, &terms).unwrap(),
                    "terminal {t} of {terms:?}"
                );
                assert!(side.contains(&t));
                for &other in &r.terminals {
                    if other != t {
                        assert!(!side.contains(&other));
                    }
                }
                for (j, (_, other_side)) in r.cuts.iter().enumerate() {
                    if i != j {
                        assert!(side.iter().all(|v| !other_side.contains(v)));
                    }
                }
            }
        }
    }

    #[test]
    fn flow_call_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let n = rng.gen_range(4..=12);
            let g = oracles::random_connected_graph(&mut rng, n, 2 * n, 3);
            let k = rng.gen_range(2..=n);
            let terms: Vec<u32> = (0..k as u32).collect();
            let stats = Stats::new();
            isolating_cuts(&g, &terms, &stats).unwrap();
            let bits = (usize::BITS - (k - 1).leading_zeros()) as u64;
            assert!(stats.flow_calls() <= bits + k as u64);
        }
    }

    #[test]
    fn rejects_single_terminal() {
        let g = barbell6();
        assert!(isolating_cuts(&g, &[2], &Stats::new()).is_err());
    }
}
