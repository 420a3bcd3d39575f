//! The cut threshold `ct(s, phi) = { t : lambda(s, t) <= phi }` and its
//! complement `X`, the pivot of the Phase-1 recursion.
//!
//! The default backend evaluates `lambda(s, t)` for every `t`, with three
//! exact shortcuts: a vertex whose weighted degree is at most `phi` is
//! inside by its singleton cut; a flow is stopped as soon as it exceeds
//! `phi`; and when `t` lands inside, the whole t-side of its minimum cut is
//! inside as well, because that side separates each of its vertices from
//! `s` at value `<= phi`. The optional accelerated backend seeds the same
//! sweep with isolating-cut discoveries; both produce the identical,
//! definitionally unique set.

use crate::flow::MaxFlowSolver;
use crate::isolating;
use crate::stats::Stats;
use crate::{Error, Result, Weight, WeightedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Backend selection for [`cut_threshold`]. Both are exact; `Accelerated`
/// additionally runs randomized isolating-cut rounds to classify whole
/// regions before the per-vertex sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtBackend {
    Naive,
    Accelerated { seed: u64 },
}

/// `ct(s, phi)` and its complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutThresholdResult {
    pub s: u32,
    pub phi: Weight,
    /// Sorted vertices `t` with `lambda(s, t) <= phi`.
    pub inside: Vec<u32>,
    /// Sorted complement; always contains `s`.
    pub complement: Vec<u32>,
}

/// Computes `ct(s, phi)` exactly.
pub fn cut_threshold(
    g: &WeightedGraph,
    s: u32,
    phi: Weight,
    backend: CtBackend,
    stats: &Stats,
) -> Result<CutThresholdResult> {
    if s as usize >= g.n() {
        return Err(Error::InvalidVertex { vertex: s, n: g.n() });
    }
    stats.count_cut_threshold();
    let inside = match backend {
        CtBackend::Naive => naive_inside_bounded(g, s, phi, stats, None)
            .expect("unbounded sweep always completes"),
        CtBackend::Accelerated { seed } => accelerated_inside(g, s, phi, seed, stats)?,
    };
    let mut mark = vec![false; g.n()];
    for &v in &inside {
        mark[v as usize] = true;
    }
    let complement = (0..g.n() as u32).filter(|&v| !mark[v as usize]).collect();
    Ok(CutThresholdResult { s, phi, inside, complement })
}

/// Size of the batches the sweep classifies in parallel. Fixed so that the
/// instrumented flow counts do not depend on the machine.
const SWEEP_BATCH: usize = 64;

/// Classifies one batch against persistent per-thread solvers (splitting
/// work proportionally), returning results in batch order. Which flows run
/// depends only on the batch contents, never on the split.
fn classify_batch(
    solvers: &mut [MaxFlowSolver],
    batch: &[u32],
    s: u32,
    phi: Weight,
    stats: &Stats,
) -> Vec<(u32, Option<Vec<u32>>)> {
    if batch.is_empty() {
        return Vec::new();
    }
    if solvers.len() <= 1 || batch.len() == 1 {
        let solver = &mut solvers[0];
        return batch
            .iter()
            .map(|&t| {
                stats.count_flow();
                let value = solver.max_flow_capped(s, t, phi).expect("distinct endpoints");
                if value <= phi {
                    (t, Some(solver.t_side_after_run(t)))
                } else {
                    (t, None)
                }
            })
            .collect();
    }
    let mid_s = solvers.len() / 2;
    let (left_s, right_s) = solvers.split_at_mut(mid_s);
    let mid_b = (batch.len() * mid_s) / (mid_s + right_s.len());
    let (left_b, right_b) = batch.split_at(mid_b.max(1).min(batch.len() - 1));
    let (mut left, right) = rayon::join(
        || classify_batch(left_s, left_b, s, phi, stats),
        || classify_batch(right_s, right_b, s, phi, stats),
    );
    left.extend(right);
    left
}

fn solver_pool(g: &WeightedGraph) -> Vec<MaxFlowSolver> {
    let k = rayon::current_num_threads().clamp(1, 8);
    vec![MaxFlowSolver::new(g); k]
}

/// The naive sweep. When `abort_inside_bounds = Some((lo, hi))` is given,
/// returns `None` as soon as the final `|ct|` provably falls outside
/// `[lo, hi]`; the Phase-1 sampler uses this to cut short hopelessly
/// unbalanced candidates.
pub(crate) fn naive_inside_bounded(
    g: &WeightedGraph,
    s: u32,
    phi: Weight,
    stats: &Stats,
    abort_inside_bounds: Option<(usize, usize)>,
) -> Option<Vec<u32>> {
    let n = g.n();
    let deg = g.weighted_degrees();
    // wdeg(s) <= phi: every t is separated from s by the singleton cut {s}.
    if deg[s as usize] <= phi {
        let inside: Vec<u32> = (0..n as u32).filter(|&v| v != s).collect();
        return bounds_ok(inside.len(), n, abort_inside_bounds).then_some(inside);
    }
    let mut inside = vec![false; n];
    let mut classified = vec![false; n];
    classified[s as usize] = true;
    let mut inside_count = 0usize;
    let mut outside_count = 1usize; // s itself
    for v in 0..n {
        if v as u32 != s && deg[v] <= phi {
            inside[v] = true;
            classified[v] = true;
            inside_count += 1;
        }
    }
    if let Some((lo, hi)) = abort_inside_bounds {
        if inside_count > hi || n - outside_count < lo {
            return None;
        }
    }
    let mut solvers = solver_pool(g);
    let mut pending: Vec<u32> = (0..n as u32).filter(|&v| !classified[v as usize]).collect();
    while !pending.is_empty() {
        let batch: Vec<u32> = pending
            .iter()
            .copied()
            .take(SWEEP_BATCH)
            .filter(|&v| !classified[v as usize])
            .collect();
        if batch.is_empty() {
            pending.retain(|&v| !classified[v as usize]);
            continue;
        }
        // a flow completing at <= phi is exact, so the minimal t-side is
        // entirely inside the threshold set
        let results = classify_batch(&mut solvers, &batch, s, phi, stats);
        for (t, side) in results {
            match side {
                Some(side) => {
                    for v in side {
                        if !classified[v as usize] {
                            classified[v as usize] = true;
                            inside[v as usize] = true;
                            inside_count += 1;
                        }
                    }
                }
                None => {
                    if !classified[t as usize] {
                        classified[t as usize] = true;
                        outside_count += 1;
                    }
                }
            }
        }
        if let Some((lo, hi)) = abort_inside_bounds {
            if inside_count > hi || n - outside_count < lo {
                return None;
            }
        }
        pending.retain(|&v| !classified[v as usize]);
    }
    let out: Vec<u32> = (0..n as u32).filter(|&v| inside[v as usize]).collect();
    bounds_ok(out.len(), n, abort_inside_bounds).then_some(out)
}

fn bounds_ok(inside: usize, _n: usize, bounds: Option<(usize, usize)>) -> bool {
    match bounds {
        Some((lo, hi)) => inside >= lo && inside <= hi,
        None => true,
    }
}

/// Accelerated backend: randomized isolating-cut rounds mark whole regions
/// of the threshold set, then the exact sweep classifies whatever remains.
fn accelerated_inside(
    g: &WeightedGraph,
    s: u32,
    phi: Weight,
    seed: u64,
    stats: &Stats,
) -> Result<Vec<u32>> {
    let n = g.n();
    let deg = g.weighted_degrees();
    if n <= 2 || deg[s as usize] <= phi {
        return Ok(naive_inside_bounded(g, s, phi, stats, None).expect("sweep"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inside = vec![false; n];
    let scales = (usize::BITS - n.leading_zeros()) as usize;
    for scale in 0..scales {
        for _rep in 0..2 {
            let prob = 1.0 / (1u64 << scale) as f64;
            let mut terminals: Vec<u32> = (0..n as u32)
                .filter(|&v| v != s && !inside[v as usize] && rng.gen_bool(prob))
                .collect();
            if terminals.is_empty() {
                continue;
            }
            terminals.push(s);
            terminals.sort_unstable();
            if terminals.len() < 2 {
                continue;
            }
            let iso = isolating::isolating_cuts(g, &terminals, stats)?;
            for (i, &t) in iso.terminals.iter().enumerate() {
                if t == s {
                    continue;
                }
                let (value, side) = &iso.cuts[i];
                // side contains t, excludes s; each of its vertices is
                // separated from s at value <= phi
                if *value <= phi {
                    for &v in side {
                        inside[v as usize] = true;
                    }
                }
            }
        }
    }
    // finish exactly: sweep only the still-unclassified vertices
    let marked: Vec<u32> = (0..n as u32).filter(|&v| inside[v as usize]).collect();
    let rest = sweep_remaining(g, s, phi, stats, &marked)?;
    let mut all = marked;
    all.extend(rest);
    all.sort_unstable();
    all.dedup();
    Ok(all)
}

/// Classifies the vertices not already known to be inside.
fn sweep_remaining(
    g: &WeightedGraph,
    s: u32,
    phi: Weight,
    stats: &Stats,
    known_inside: &[u32],
) -> Result<Vec<u32>> {
    let n = g.n();
    let deg = g.weighted_degrees();
    let mut classified = vec![false; n];
    let mut inside = vec![false; n];
    classified[s as usize] = true;
    for &v in known_inside {
        classified[v as usize] = true;
    }
    for v in 0..n {
        if !classified[v] && deg[v] <= phi {
            classified[v] = true;
            inside[v] = true;
        }
    }
    let mut solvers = solver_pool(g);
    let mut pending: Vec<u32> = (0..n as u32).filter(|&v| !classified[v as usize]).collect();
    while !pending.is_empty() {
        let batch: Vec<u32> = pending.iter().copied().take(SWEEP_BATCH).collect();
        let results = classify_batch(&mut solvers, &batch, s, phi, stats);
        for (t, side) in results {
            match side {
                Some(side) => {
                    for v in side {
                        if !classified[v as usize] {
                            classified[v as usize] = true;
                            inside[v as usize] = true;
                        }
                    }
                }
                None => classified[t as usize] = true,
            }
        }
        pending.retain(|&v| !classified[v as usize]);
    }
    Ok((0..n as u32).filter(|&v| inside[v as usize]).collect())
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
    fn barbell_thresholds() {
        let g = barbell6();
        let stats = Stats::new();
        let r = cut_threshold(&g, 0, 1, CtBackend::Naive, &stats).unwrap();
        assert_eq!(r.inside, vec![3, 4, 5]);
        assert_eq!(r.complement, vec![0, 1, 2]);
        let r2 = cut_threshold(&g, 0, 2, CtBackend::Naive, &stats).unwrap();
        assert_eq!(r2.inside, vec![1, 2, 3, 4, 5]);
        assert_eq!(r2.complement, vec![0]);
    }

    #[test]
    fn zero_threshold_on_connected_graph() {
        let g = barbell6();
        let r = cut_threshold(&g, 0, 0, CtBackend::Naive, &Stats::new()).unwrap();
        assert!(r.inside.is_empty());
        assert_eq!(r.complement.len(), 6);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..40 {
            let n = rng.gen_range(2..=10);
            let g = oracles::random_graph(&mut rng, n, 2 * n, 4);
            let s = rng.gen_range(0..n as u32);
            let phi = rng.gen_range(0..=8) as Weight;
            let fast = cut_threshold(&g, s, phi, CtBackend::Naive, &Stats::new()).unwrap();
            let brute = oracles::brute_cut_threshold(&g, s, phi).unwrap();
            assert_eq!(fast.inside, brute);
        }
    }

    #[test]
    fn backends_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for round in 0..20 {
            let n = rng.gen_range(3..=24);
            let g = oracles::random_connected_graph(&mut rng, n, 3 * n, 4);
            let s = rng.gen_range(0..n as u32);
            let mut t = rng.gen_range(0..(n - 1) as u32);
            if t >= s {
                t += 1;
            }
            let phi = crate::flow::connectivity(&g, s, t).unwrap();
            let naive = cut_threshold(&g, s, phi, CtBackend::Naive, &Stats::new()).unwrap();
            let acc = cut_threshold(
                &g,
                s,
                phi,
                CtBackend::Accelerated { seed: round },
                &Stats::new(),
            )
            .unwrap();
            assert_eq!(naive.inside, acc.inside);
        }
    }

    #[test]
    fn monotone_in_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = oracles::random_connected_graph(&mut rng, 9, 20, 4);
        for s in 0..9u32 {
            let mut prev: Vec<u32> = Vec::new();
            for phi in 0..12 {
                let r = cut_threshold(&g, s, phi, CtBackend::Naive, &Stats::new()).unwrap();
                assert!(prev.iter().all(|v| r.inside.contains(v)));
                prev = r.inside;
            }
        }
    }

    #[test]
    fn min_cut_sides_stay_inside_threshold() {
        // for every t inside, the t-side of a minimum s-t cut is a subset
        // of ct(s, phi)
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for round in 0..15 {
            let g = oracles::random_connected_graph(&mut rng, 10, 24, 4);
            let p = crate::graph::perturb(&g, round, 4).unwrap();
            let s = rng.gen_range(0..10u32);
            let mut t = rng.gen_range(0..9u32);
            if t >= s {
                t += 1;
            }
            let phi = crate::flow::connectivity(p.graph(), s, t).unwrap();
            let ct = cut_threshold(p.graph(), s, phi, CtBackend::Naive, &Stats::new()).unwrap();
            let mut solver = MaxFlowSolver::new(p.graph());
            for &v in &ct.inside {
                let (_, side) = solver.max_flow_t_side(s, v).unwrap();
                assert!(side.iter().all(|x| ct.inside.contains(x)));
            }
        }
    }

    #[test]
    fn complement_respects_extreme_sets() {
        // trichotomy against brute-force extreme sets under perturbed weights
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for round in 0..15 {
            let n = rng.gen_range(4..=10);
            let g = oracles::random_connected_graph(&mut rng, n, 3 * n, 4);
            let p = crate::graph::perturb(&g, 555 + round, 4).unwrap();
            let s = rng.gen_range(0..n as u32);
            let mut t = rng.gen_range(0..(n - 1) as u32);
            if t >= s {
                t += 1;
            }
            let phi = crate::flow::connectivity(p.graph(), s, t).unwrap();
            let ct = cut_threshold(p.graph(), s, phi, CtBackend::Naive, &Stats::new()).unwrap();
            let x = &ct.complement;
            for fam in oracles::brute_extreme_sets(p.graph()).unwrap().canonical_families() {
                let inter = fam.iter().filter(|v| x.contains(v)).count();
                let nested = inter == 0
                    || inter == fam.len()
                    || (inter == x.len() && x.iter().all(|v| fam.contains(v)));
                assert!(nested, "X={x:?} crosses extreme set {fam:?}");
            }
        }
    }
}
