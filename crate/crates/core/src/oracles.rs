//! Brute-force reference implementations and verifiers. These exist to
//! anchor the property tests and the acceptance suite; they favor being
//! obviously correct over being fast.

use crate::deca::{Beta, SolvePhase};
use crate::extreme::ExtremeSetsTree;
use crate::flow::MaxFlowSolver;
use crate::{Error, Result, Weight, WeightedGraph};
use rand::Rng;

/// Cut value of every vertex subset, by direct edge iteration.
fn mask_deltas(g: &WeightedGraph) -> Vec<Weight> {
    let n = g.n();
    let mut delta = vec![0 as Weight; 1 << n];
    for mask in 1usize..(1 << n) - 1 {
        let mut d = 0;
        for &(u, v, w) in g.edges() {
            if (mask >> u & 1) != (mask >> v & 1) {
                d += w;
            }
        }
        delta[mask] = d;
    }
    delta
}

/// Exact extreme-sets tree by subset enumeration (n <= 16). Cut values are
/// computed definitionally per subset; the subset-minimum uses the
/// sum-over-subsets recurrence to keep n = 16 feasible.
pub fn brute_extreme_sets(g: &WeightedGraph) -> Result<ExtremeSetsTree> {
    if g.n() > 16 {
        return Err(Error::OracleTooLarge { limit: 16, got: g.n() });
    }
    let family = brute_extreme_family(g, mask_deltas(g));
    ExtremeSetsTree::from_family(g, family)
}

fn brute_extreme_family(g: &WeightedGraph, delta: Vec<Weight>) -> Vec<Vec<u32>> {
    let n = g.n();
    if n <= 1 {
        return Vec::new();
    }
    let full = 1usize << n;
    let mut best = delta.clone();
    best[0] = Weight::MAX;
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
        let mut proper_min = Weight::MAX;
        let mut r = mask;
        while r != 0 {
            let v = r.trailing_zeros() as usize;
            r &= r - 1;
            let sub = mask & !(1 << v);
            if sub != 0 {
                proper_min = proper_min.min(best[sub]);
            }
        }
        if delta[mask] < proper_min {
            let mut members = Vec::new();
            let mut m = mask;
            while m != 0 {
                members.push(m.trailing_zeros());
                m &= m - 1;
            }
            family.push(members);
        }
    }
    family
}

/// Non-singleton extreme sets for graphs somewhat beyond the public oracle
/// limit; the recursion tests use this to cross-check Phase 1 on inputs
/// that do not collapse into its base case.
#[doc(hidden)]
pub fn brute_extreme_family_large(g: &WeightedGraph) -> Vec<Vec<u32>> {
    assert!(g.n() <= 22, "enumeration over 2^n subsets");
    let mut family = crate::extreme::small_extreme_family(g);
    family.sort();
    family
}

/// Minimum s-t cut value by enumerating all separating subsets.
pub fn brute_st_min_cut(g: &WeightedGraph, s: u32, t: u32) -> Result<Weight> {
    if g.n() > 20 {
        return Err(Error::OracleTooLarge { limit: 20, got: g.n() });
    }
    if s == t {
        return Err(Error::SourceIsSink);
    }
    let n = g.n();
    let mut best = Weight::MAX;
    for mask in 0usize..1 << n {
        if mask >> s & 1 == 1 && mask >> t & 1 == 0 {
            let mut d = 0;
            for &(u, v, w) in g.edges() {
                if (mask >> u & 1) != (mask >> v & 1) {
                    d += w;
                }
            }
            best = best.min(d);
        }
    }
    Ok(best)
}

/// Minimum isolating cut value for terminal `t` within `terminals`, by
/// subset enumeration.
pub fn brute_isolating_cut(g: &WeightedGraph, t: u32, terminals: &[u32]) -> Result<Weight> {
    if g.n() > 16 {
        return Err(Error::OracleTooLarge { limit: 16, got: g.n() });
    }
    let n = g.n();
    let mut best = Weight::MAX;
    for mask in 1usize..(1 << n) - 1 {
        if mask >> t & 1 == 0 {
            continue;
        }
        if terminals.iter().any(|&x| x != t && mask >> x & 1 == 1) {
            continue;
        }
        let mut d = 0;
        for &(u, v, w) in g.edges() {
            if (mask >> u & 1) != (mask >> v & 1) {
                d += w;
            }
        }
        best = best.min(d);
    }
    Ok(best)
}

/// `ct(s, phi)` by definition: brute-force `lambda(s, t)` for every `t`.
pub fn brute_cut_threshold(g: &WeightedGraph, s: u32, phi: Weight) -> Result<Vec<u32>> {
    if g.n() > 16 {
        return Err(Error::OracleTooLarge { limit: 16, got: g.n() });
    }
    let n = g.n();
    let delta = mask_deltas(g);
    let mut inside = Vec::new();
    for t in 0..n as u32 {
        if t == s {
            continue;
        }
        let mut lambda = Weight::MAX;
        for (mask, &d) in delta.iter().enumerate() {
            if mask >> s & 1 == 1 && mask >> t & 1 == 0 && mask != 0 && mask != (1 << n) - 1 {
                lambda = lambda.min(d);
            }
        }
        if lambda <= phi {
            inside.push(t);
        }
    }
    Ok(inside)
}

/// Exact DECA optimum by branch-and-bound search over edge multisets, up to
/// total weight `weight_cap`. Returns `None` when no solution of weight at
/// most the cap exists. Instances are limited to n <= 6.
pub fn exhaustive_deca_optimum(
    g: &WeightedGraph,
    tau: Weight,
    beta: &[Beta],
    weight_cap: Weight,
) -> Result<Option<Weight>> {
    if g.n() > 6 {
        return Err(Error::OracleTooLarge { limit: 6, got: g.n() });
    }
    let n = g.n();
    // reject sets that cannot be lifted to tau under any edge choice; for
    // tau >= 2 this is the exact feasibility condition, and it keeps the
    // search off hopeless instances
    if n >= 2 {
        let delta = mask_deltas(g);
        for mask in 1usize..(1 << n) - 1 {
            let mut cap: Weight = 0;
            let mut unbounded = false;
            for v in 0..n {
                if mask >> v & 1 == 1 {
                    match beta[v] {
                        Beta::Unbounded => unbounded = true,
                        Beta::Bounded(b) => cap = cap.saturating_add(b),
                    }
                }
            }
            if !unbounded && delta[mask].saturating_add(cap) < tau {
                return Ok(None);
            }
        }
    }
    let pairs: Vec<(u32, u32)> = (0..n as u32)
        .flat_map(|u| (u + 1..n as u32).map(move |v| (u, v)))
        .collect();
    // current extra weight per pair, explored in non-decreasing pair order
    for k in 0..=weight_cap {
        let mut extra = vec![0 as Weight; pairs.len()];
        let mut b_used = vec![0 as Weight; n];
        if search(g, tau, beta, &pairs, &mut extra, &mut b_used, 0, k) {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Lower bound on the remaining weight: half the total demand over the
/// maximal deficient extreme sets (disjoint, so one unit edge reduces the
/// total by at most two).
fn demand_lower_bound(g: &WeightedGraph, tau: Weight, extra: &[(u32, u32, Weight)]) -> Weight {
    let cur = g.union_edges(extra).expect("valid edges");
    let delta = mask_deltas(&cur);
    let family = brute_extreme_family(&cur, delta.clone());
    let n = cur.n();
    let mut sets: Vec<usize> = Vec::new();
    for f in &family {
        let mask = f.iter().fold(0usize, |m, &v| m | 1 << v);
        sets.push(mask);
    }
    for v in 0..n {
        sets.push(1 << v);
    }
    // keep maximal deficient sets
    let deficient: Vec<usize> = sets
        .iter()
        .copied()
        .filter(|&m| delta[m] < tau)
        .collect();
    let mut total: Weight = 0;
    for &m in &deficient {
        if deficient.iter().any(|&o| o != m && o & m == m) {
            continue;
        }
        total += tau - delta[m];
    }
    total.div_ceil(2)
}

fn search(
    g: &WeightedGraph,
    tau: Weight,
    beta: &[Beta],
    pairs: &[(u32, u32)],
    extra: &mut Vec<Weight>,
    b_used: &mut Vec<Weight>,
    first_pair: usize,
    budget: Weight,
) -> bool {
    let edges: Vec<(u32, u32, Weight)> = pairs
        .iter()
        .zip(extra.iter())
        .filter(|&(_, &w)| w > 0)
        .map(|(&(u, v), &w)| (u, v, w))
        .collect();
    let lb = demand_lower_bound(g, tau, &edges);
    if lb == 0 {
        return true;
    }
    if lb > budget {
        return false;
    }
    for i in first_pair..pairs.len() {
        let (u, v) = pairs[i];
        if !beta[u as usize].allows(b_used[u as usize])
            || !beta[v as usize].allows(b_used[v as usize])
        {
            continue;
        }
        extra[i] += 1;
        b_used[u as usize] += 1;
        b_used[v as usize] += 1;
        if search(g, tau, beta, pairs, extra, b_used, i, budget - 1) {
            extra[i] -= 1;
            b_used[u as usize] -= 1;
            b_used[v as usize] -= 1;
            return true;
        }
        extra[i] -= 1;
        b_used[u as usize] -= 1;
        b_used[v as usize] -= 1;
    }
    false
}

/// Literal single-application chain solver: recompute the extreme sets of
/// the current graph by brute force, build a chain over the maximal sets of
/// demand at least two, apply it once, repeat; then pair the remaining
/// budget greedily, accepting an edge only if the instance stays externally
/// feasible (checked against the brute-force extreme sets of the graph
/// including the candidate). Small instances only.
pub fn slow_chain_solver(
    g: &WeightedGraph,
    tau: Weight,
    b: &[Weight],
) -> Result<Vec<(u32, u32, Weight)>> {
    if g.n() > 12 {
        return Err(Error::OracleTooLarge { limit: 12, got: g.n() });
    }
    let n = g.n();
    let mut b = b.to_vec();
    let mut added: Vec<(u32, u32, Weight)> = Vec::new();
    loop {
        let cur = g.union_edges(&added)?;
        let delta = mask_deltas(&cur);
        let listed = maximal_demand_two_sets(&cur, tau, &delta);
        if listed.is_empty() {
            break;
        }
        if listed.len() == 1 {
            // degenerate list: cover one unit of the lone set's demand with
            // a feasibility-tested single edge
            let mask = listed[0];
            let (u, v) = pick_cross_edge(&cur, tau, &b, mask)?;
            b[u as usize] -= 1;
            b[v as usize] -= 1;
            added.push((u, v, 1));
            continue;
        }
        // order: two smallest cut values at the ends
        let mut order = listed.clone();
        order.sort_by_key(|&m| (delta[m], m));
        let first = order.remove(0);
        let last = order.remove(0);
        let mut chain = vec![first];
        chain.extend(order);
        chain.push(last);
        // endpoints: per set, the vacant vertex of largest budget (lowest
        // id on ties), distinct for the two slots when possible
        let mut edges_now: Vec<(u32, u32)> = Vec::new();
        let mut ok = true;
        for w in chain.windows(2) {
            let (left, right) = (w[0], w[1]);
            let lu = pick_endpoint_slow(left, &b, &edges_now);
            let rv = pick_endpoint_slow(right, &b, &edges_now);
            match (lu, rv) {
                (Some(u), Some(v)) => edges_now.push((u, v)),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            return Err(Error::Defect("slow solver: listed set out of budget".into()));
        }
        for &(u, v) in &edges_now {
            debug_assert!(b[u as usize] >= 1 && b[v as usize] >= 1);
            b[u as usize] -= 1;
            b[v as usize] -= 1;
            added.push((u, v, 1));
        }
    }
    // demand-one tail
    loop {
        let total: Weight = b.iter().sum();
        if total == 0 {
            break;
        }
        let cur = g.union_edges(&added)?;
        let mut accepted = None;
        'outer: for u in 0..n as u32 {
            if b[u as usize] == 0 {
                continue;
            }
            for v in u + 1..n as u32 {
                if b[v as usize] == 0 {
                    continue;
                }
                let mut b_after = b.clone();
                b_after[u as usize] -= 1;
                b_after[v as usize] -= 1;
                let with = cur.union_edges(&[(u, v, 1)])?;
                if externally_feasible(&with, tau, &b_after) {
                    accepted = Some((u, v));
                    break 'outer;
                }
            }
        }
        let Some((u, v)) = accepted else {
            return Err(Error::Defect("slow solver: no feasible pairing".into()));
        };
        b[u as usize] -= 1;
        b[v as usize] -= 1;
        added.push((u, v, 1));
    }
    Ok(crate::deca::merge_edge_list(added))
}

fn maximal_demand_two_sets(g: &WeightedGraph, tau: Weight, delta: &[Weight]) -> Vec<usize> {
    let family = brute_extreme_family(g, delta.to_vec());
    let mut masks: Vec<usize> = family
        .iter()
        .map(|f| f.iter().fold(0usize, |m, &v| m | 1 << v))
        .collect();
    masks.extend((0..g.n()).map(|v| 1usize << v));
    let qualifying: Vec<usize> = masks
        .into_iter()
        .filter(|&m| delta[m] + 2 <= tau)
        .collect();
    qualifying
        .iter()
        .copied()
        .filter(|&m| !qualifying.iter().any(|&o| o != m && o & m == m))
        .collect()
}

fn pick_endpoint_slow(mask: usize, b: &[Weight], taken: &[(u32, u32)]) -> Option<u32> {
    let mut used = vec![0 as Weight; b.len()];
    for &(u, v) in taken {
        used[u as usize] += 1;
        used[v as usize] += 1;
    }
    // prefer a vertex not already serving as this set's other endpoint
    let mut best: Option<(Weight, u32)> = None;
    for v in 0..b.len() as u32 {
        if mask >> v & 1 == 0 {
            continue;
        }
        let avail = b[v as usize].saturating_sub(used[v as usize]);
        if avail == 0 {
            continue;
        }
        let cand = (avail, v);
        best = Some(match best {
            Some(cur) if cur.0 > cand.0 || (cur.0 == cand.0 && cur.1 < cand.1) => cur,
            _ => cand,
        });
    }
    best.map(|(_, v)| v)
}

fn pick_cross_edge(
    cur: &WeightedGraph,
    tau: Weight,
    b: &[Weight],
    mask: usize,
) -> Result<(u32, u32)> {
    let n = cur.n();
    for u in 0..n as u32 {
        if mask >> u & 1 == 0 || b[u as usize] == 0 {
            continue;
        }
        for v in 0..n as u32 {
            if mask >> v & 1 == 1 || b[v as usize] == 0 {
                continue;
            }
            let mut b_after = b.to_vec();
            b_after[u as usize] -= 1;
            b_after[v as usize] -= 1;
            let with = cur.union_edges(&[(u.min(v), u.max(v), 1)])?;
            if externally_feasible(&with, tau, &b_after) {
                return Ok((u.min(v), u.max(v)));
            }
        }
    }
    Err(Error::Defect("no feasible cross edge for lone listed set".into()))
}

/// Whether every extreme set of `g` keeps `b(X) >= tau - delta(X)`; by the
/// splitting-off equivalence this is exactly "the remaining budget can be
/// completed to a valid solution".
pub fn externally_feasible(g: &WeightedGraph, tau: Weight, b: &[Weight]) -> bool {
    let delta = mask_deltas(g);
    let family = brute_extreme_family(g, delta.clone());
    let mut masks: Vec<usize> = family
        .iter()
        .map(|f| f.iter().fold(0usize, |m, &v| m | 1 << v))
        .collect();
    masks.extend((0..g.n()).map(|v| 1usize << v));
    masks.into_iter().all(|m| {
        let bx: Weight = (0..g.n())
            .filter(|&v| m >> v & 1 == 1)
            .map(|v| b[v])
            .sum();
        delta[m] + bx >= tau
    })
}

/// Verification report for a DECA solution.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    /// Minimum cut of the augmented graph, clamped at `tau` when the check
    /// proves only `>= tau` (see `min_cut_clamped`).
    pub min_cut_after: Weight,
    pub min_cut_clamped: bool,
    /// `(vertex, new degree, bound)` for every violated bound.
    pub degree_violations: Vec<(u32, Weight, Weight)>,
    pub weight_total: Weight,
    pub optimal_weight_expected: Weight,
    pub pass: bool,
}

/// Checks a solution: connectivity target reached, degree bounds kept, and
/// total weight equal to the expected optimum. The connectivity check runs
/// one capped max-flow per vertex.
pub fn verify_solution(
    g: &WeightedGraph,
    tau: Weight,
    beta: &[Beta],
    edges: &[(u32, u32, Weight)],
    expected_weight: Weight,
) -> Result<VerificationReport> {
    let weight_total: Weight = edges.iter().map(|&(_, _, w)| w).sum();
    let mut degree_violations = Vec::new();
    let mut deg = vec![0 as Weight; g.n()];
    for &(u, v, w) in edges {
        if u as usize >= g.n() || v as usize >= g.n() || u == v {
            return Err(Error::InvalidVertex { vertex: u.max(v), n: g.n() });
        }
        deg[u as usize] += w;
        deg[v as usize] += w;
    }
    for v in 0..g.n() {
        if let Beta::Bounded(cap) = beta[v] {
            if deg[v] > cap {
                degree_violations.push((v as u32, deg[v], cap));
            }
        }
    }
    let augmented = g.union_edges(edges)?;
    let (min_cut_after, min_cut_clamped) = if g.n() < 2 || tau == 0 {
        (tau, true)
    } else {
        let mut solver = MaxFlowSolver::new(&augmented);
        let mut observed = Weight::MAX;
        for t in 1..g.n() as u32 {
            let v = solver.max_flow_capped(0, t, tau)?;
            observed = observed.min(v);
            if observed < tau {
                break;
            }
        }
        if observed > tau {
            (tau, true)
        } else {
            (observed, false)
        }
    };
    let pass =
        degree_violations.is_empty() && min_cut_after >= tau && weight_total == expected_weight;
    Ok(VerificationReport {
        min_cut_after,
        min_cut_clamped,
        degree_violations,
        weight_total,
        optimal_weight_expected: expected_weight,
        pass,
    })
}

/// Audit-friendly view: which phase added which edge.
pub fn audit_by_phase(audit: &[(SolvePhase, (u32, u32, Weight))], phase: SolvePhase) -> Vec<(u32, u32, Weight)> {
    audit
        .iter()
        .filter(|(p, _)| *p == phase)
        .map(|&(_, e)| e)
        .collect()
}

// -- random instance generators (shared by the test suites) -----------------

/// Uniform random multigraph (before merging) with up to `m` edges.
pub fn random_graph(rng: &mut impl Rng, n: usize, m: usize, wmax: Weight) -> WeightedGraph {
    let mut edges = Vec::with_capacity(m);
    if n >= 2 {
        for _ in 0..m {
            let u = rng.gen_range(0..n as u32);
            let v = rng.gen_range(0..n as u32);
            let w = rng.gen_range(1..=wmax);
            if u != v {
                edges.push((u, v, w));
            }
        }
    }
    WeightedGraph::build(n, &edges).expect("valid random graph")
}

/// Random connected graph: a random spanning tree plus extra edges.
pub fn random_connected_graph(
    rng: &mut impl Rng,
    n: usize,
    extra: usize,
    wmax: Weight,
) -> WeightedGraph {
    let mut edges = Vec::with_capacity(n + extra);
    for v in 1..n as u32 {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(1..=wmax)));
    }
    for _ in 0..extra {
        let u = rng.gen_range(0..n as u32);
        let v = rng.gen_range(0..n as u32);
        if u != v {
            edges.push((u, v, rng.gen_range(1..=wmax)));
        }
    }
    WeightedGraph::build(n, &edges).expect("valid random graph")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn barbell6() -> WeightedGraph {
        let e = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)];
        let edges: Vec<_> = e.iter().map(|&(u, v)| (u, v, 1)).collect();
        WeightedGraph::build(6, &edges).unwrap()
    }

    #[test]
    fn brute_extreme_fixtures() {
        let t = brute_extreme_sets(&barbell6()).unwrap();
        assert_eq!(t.canonical_families(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let tri = WeightedGraph::build(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        assert!(brute_extreme_sets(&tri).unwrap().canonical_families().is_empty());
        let k2 = WeightedGraph::build(2, &[(0, 1, 5)]).unwrap();
        assert!(brute_extreme_sets(&k2).unwrap().canonical_families().is_empty());
    }

    #[test]
    fn brute_extreme_matches_literal_definition() {
        // check the subset-minimum recurrence against a 3^n literal scan
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..20 {
            let n = rng.gen_range(2..=8);
            let g = random_graph(&mut rng, n, 2 * n, 4);
            let delta = mask_deltas(&g);
            let full = 1usize << n;
            let mut literal = Vec::new();
            for mask in 1..full - 1 {
                if mask.count_ones() < 2 {
                    continue;
                }
                let mut extreme = true;
                let mut sub = (mask - 1) & mask;
                while sub != 0 {
                    if delta[sub] <= delta[mask] {
                        extreme = false;
                        break;
                    }
                    sub = (sub - 1) & mask;
                }
                if extreme {
                    let mut members = Vec::new();
                    let mut m = mask;
                    while m != 0 {
                        members.push(m.trailing_zeros());
                        m &= m - 1;
                    }
                    literal.push(members);
                }
            }
            literal.sort();
            let mut fast = brute_extreme_family(&g, delta);
            fast.sort();
            assert_eq!(fast, literal);
        }
    }

    #[test]
    fn brute_ct_fixtures() {
        let g = barbell6();
        assert_eq!(brute_cut_threshold(&g, 0, 1).unwrap(), vec![3, 4, 5]);
        assert_eq!(brute_cut_threshold(&g, 0, 0).unwrap(), Vec::<u32>::new());
        let all: Vec<u32> = (1..6).collect();
        assert_eq!(brute_cut_threshold(&g, 0, 7).unwrap(), all);
    }

    #[test]
    fn exhaustive_fixtures() {
        let g = barbell6();
        let unb = vec![Beta::Unbounded; 6];
        assert_eq!(exhaustive_deca_optimum(&g, 3, &unb, 6).unwrap(), Some(2));
        assert_eq!(exhaustive_deca_optimum(&g, 2, &unb, 6).unwrap(), Some(1));
        assert_eq!(exhaustive_deca_optimum(&g, 1, &unb, 6).unwrap(), Some(0));
        let zero = vec![Beta::Bounded(0); 6];
        assert_eq!(exhaustive_deca_optimum(&g, 2, &zero, 6).unwrap(), None);
    }

    #[test]
    fn verify_flags_failures() {
        let g = barbell6();
        let unb = vec![Beta::Unbounded; 6];
        // empty F with tau above the min cut fails
        let r = verify_solution(&g, 2, &unb, &[], 0).unwrap();
        assert!(!r.pass && r.min_cut_after == 1);
        // degree-violating F is flagged
        let tight = vec![Beta::Bounded(0); 6];
        let r2 = verify_solution(&g, 2, &tight, &[(0, 3, 1)], 1).unwrap();
        assert!(!r2.pass && r2.degree_violations.len() == 2);
    }
}
