//! Static rooted-tree structure supporting path addition, path minimum,
//! subtree minimum and lowest common ancestors in logarithmic time, via
//! heavy-path decomposition over a lazy min/add segment tree. Topology is
//! fixed at build time; values are exact signed integers.

use crate::SignedWeight;

const NONE: u32 = u32::MAX;

/// Lazy segment tree: range add, range min.
#[derive(Debug, Clone)]
struct LazySeg {
    size: usize,
    min: Vec<SignedWeight>,
    add: Vec<SignedWeight>,
}

impl LazySeg {
    fn new(values: &[SignedWeight]) -> Self {
        let mut size = 1;
        while size < values.len().max(1) {
            size *= 2;
        }
        let mut min = vec![SignedWeight::MAX / 4; 2 * size];
        for (i, &v) in values.iter().enumerate() {
            min[size + i] = v;
        }
        for i in (1..size).rev() {
            min[i] = min[2 * i].min(min[2 * i + 1]);
        }
        LazySeg { size, min, add: vec![0; 2 * size] }
    }

    fn range_add(&mut self, l: usize, r: usize, x: SignedWeight) {
        self.add_rec(1, 0, self.size, l, r, x);
    }

    fn add_rec(&mut self, node: usize, nl: usize, nr: usize, l: usize, r: usize, x: SignedWeight) {
        if r <= nl || nr <= l {
            return;
        }
        if l <= nl && nr <= r {
            self.min[node] += x;
            self.add[node] += x;
            return;
        }
        let mid = (nl + nr) / 2;
        self.add_rec(2 * node, nl, mid, l, r, x);
        self.add_rec(2 * node + 1, mid, nr, l, r, x);
        self.min[node] = self.min[2 * node].min(self.min[2 * node + 1]) + self.add[node];
    }

    fn range_min(&self, l: usize, r: usize) -> SignedWeight {
        self.min_rec(1, 0, self.size, l, r)
    }

    fn min_rec(&self, node: usize, nl: usize, nr: usize, l: usize, r: usize) -> SignedWeight {
        if r <= nl || nr <= l {
            return SignedWeight::MAX / 4;
        }
        if l <= nl && nr <= r {
            return self.min[node];
        }
        let mid = (nl + nr) / 2;
        let res = self
            .min_rec(2 * node, nl, mid, l, r)
            .min(self.min_rec(2 * node + 1, mid, nr, l, r));
        res + self.add[node]
    }
}

/// Heavy-path decomposed tree with a value per node.
#[derive(Debug, Clone)]
pub struct PathTree {
    n: usize,
    parent: Vec<u32>,
    depth: Vec<u32>,
    head: Vec<u32>,
    /// Position in the decomposition order; subtrees are contiguous
    /// `[pos, out)` ranges because heavy children are visited first.
    pos: Vec<u32>,
    out: Vec<u32>,
    seg: LazySeg,
}

impl PathTree {
    /// Builds the structure for a rooted tree given per-node parents
    /// (`parent[root] == u32::MAX`) and initial values.
    pub fn new(parent: &[u32], root: u32, values: &[SignedWeight]) -> Self {
        let n = parent.len();
        assert_eq!(values.len(), n);
        let mut children = vec![Vec::new(); n];
        for v in 0..n as u32 {
            if parent[v as usize] != NONE {
                children[parent[v as usize] as usize].push(v);
            }
        }
        // iterative size computation in reverse BFS order
        let mut order = Vec::with_capacity(n);
        order.push(root);
        let mut head_idx = 0;
        while head_idx < order.len() {
            let v = order[head_idx];
            head_idx += 1;
            for &c in &children[v as usize] {
                order.push(c);
            }
        }
        let mut size = vec![1u32; n];
        let mut depth = vec![0u32; n];
        for &v in order.iter().skip(1) {
            depth[v as usize] = depth[parent[v as usize] as usize] + 1;
        }
        for &v in order.iter().rev() {
            if parent[v as usize] != NONE {
                size[parent[v as usize] as usize] += size[v as usize];
            }
        }
        // heavy child first in each child list
        for v in 0..n {
            children[v].sort_by_key(|&c| std::cmp::Reverse(size[c as usize]));
        }
        // iterative decomposition: assign positions, heavy edge continues
        // the current chain
        let mut headv = vec![root; n];
        let mut pos = vec![0u32; n];
        let mut outp = vec![0u32; n];
        let mut counter = 0u32;
        let mut stack = vec![(root, root, false)];
        while let Some((v, h, expanded)) = stack.pop() {
            if expanded {
                outp[v as usize] = counter;
                continue;
            }
            headv[v as usize] = h;
            pos[v as usize] = counter;
            counter += 1;
            stack.push((v, h, true));
            // push light children first so the heavy child is processed
            // immediately after v (contiguity of chains and subtrees)
            for (i, &c) in children[v as usize].iter().enumerate().rev() {
                let ch = if i == 0 { h } else { c };
                stack.push((c, ch, false));
            }
        }
        let mut init = vec![0; n];
        for v in 0..n {
            init[pos[v] as usize] = values[v];
        }
        PathTree {
            n,
            parent: parent.to_vec(),
            depth,
            head: headv,
            pos,
            out: outp,
            seg: LazySeg::new(&init),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds `x` to every node on the inclusive `u`-`v` path.
    pub fn add_path(&mut self, u: u32, v: u32, x: SignedWeight) {
        self.for_each_segment(u, v, |seg, l, r| seg.range_add(l, r, x));
    }

    /// Minimum value over the inclusive `u`-`v` path.
    pub fn min_path(&self, u: u32, v: u32) -> SignedWeight {
        let mut best = SignedWeight::MAX / 4;
        let mut a = u;
        let mut b = v;
        while self.head[a as usize] != self.head[b as usize] {
            if self.depth[self.head[a as usize] as usize]
                < self.depth[self.head[b as usize] as usize]
            {
                std::mem::swap(&mut a, &mut b);
            }
            let h = self.head[a as usize];
            best = best.min(
                self.seg
                    .range_min(self.pos[h as usize] as usize, self.pos[a as usize] as usize + 1),
            );
            a = self.parent[h as usize];
        }
        let (top, bot) = if self.depth[a as usize] <= self.depth[b as usize] {
            (a, b)
        } else {
            (b, a)
        };
        best.min(
            self.seg
                .range_min(self.pos[top as usize] as usize, self.pos[bot as usize] as usize + 1),
        )
    }

    /// Minimum value in the subtree rooted at `u` (inclusive).
    pub fn min_subtree(&self, u: u32) -> SignedWeight {
        self.seg
            .range_min(self.pos[u as usize] as usize, self.out[u as usize] as usize)
    }

    /// Current value at a single node.
    pub fn value(&self, u: u32) -> SignedWeight {
        self.seg
            .range_min(self.pos[u as usize] as usize, self.pos[u as usize] as usize + 1)
    }

    /// Position of `u` in the decomposition order.
    pub fn position(&self, u: u32) -> usize {
        self.pos[u as usize] as usize
    }

    /// Half-open position range `[lo, hi)` of `u`'s subtree.
    pub fn subtree_range(&self, u: u32) -> (usize, usize) {
        (self.pos[u as usize] as usize, self.out[u as usize] as usize)
    }

    pub fn lca(&self, u: u32, v: u32) -> u32 {
        let mut a = u;
        let mut b = v;
        while self.head[a as usize] != self.head[b as usize] {
            if self.depth[self.head[a as usize] as usize]
                < self.depth[self.head[b as usize] as usize]
            {
                std::mem::swap(&mut a, &mut b);
            }
            a = self.parent[self.head[a as usize] as usize];
        }
        if self.depth[a as usize] <= self.depth[b as usize] {
            a
        } else {
            b
        }
    }

    fn for_each_segment<F: FnMut(&mut LazySeg, usize, usize)>(&mut self, u: u32, v: u32, mut f: F) {
        let mut a = u;
        let mut b = v;
        while self.head[a as usize] != self.head[b as usize] {
            if self.depth[self.head[a as usize] as usize]
                < self.depth[self.head[b as usize] as usize]
            {
                std::mem::swap(&mut a, &mut b);
            }
            let h = self.head[a as usize];
            f(
                &mut self.seg,
                self.pos[h as usize] as usize,
                self.pos[a as usize] as usize + 1,
            );
            a = self.parent[h as usize];
        }
        let (top, bot) = if self.depth[a as usize] <= self.depth[b as usize] {
            (a, b)
        } else {
            (b, a)
        };
        f(
            &mut self.seg,
            self.pos[top as usize] as usize,
            self.pos[bot as usize] as usize + 1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Naive per-node reference with O(n) operations.
    struct NaiveTree {
        parent: Vec<u32>,
        values: Vec<SignedWeight>,
    }

    impl NaiveTree {
        fn path(&self, mut u: u32, mut v: u32) -> Vec<u32> {
            let depth = |mut x: u32| {
                let mut d = 0;
                while self.parent[x as usize] != NONE {
                    x = self.parent[x as usize];
                    d += 1;
                }
                d
            };
            let mut out = Vec::new();
            let (mut du, mut dv) = (depth(u), depth(v));
            while du > dv {
                out.push(u);
                u = self.parent[u as usize];
                du -= 1;
            }
            let mut tail = Vec::new();
            while dv > du {
                tail.push(v);
                v = self.parent[v as usize];
                dv -= 1;
            }
            while u != v {
                out.push(u);
                tail.push(v);
                u = self.parent[u as usize];
                v = self.parent[v as usize];
            }
            out.push(u);
            out.extend(tail.into_iter().rev());
            out
        }

        fn lca(&self, u: u32, v: u32) -> u32 {
            let p = self.path(u, v);
            // the unique node on the path whose parent is not on the path
            *p.iter()
                .find(|&&x| {
                    let par = self.parent[x as usize];
                    par == NONE || !p.contains(&par)
                })
                .unwrap()
        }

        fn add_path(&mut self, u: u32, v: u32, x: SignedWeight) {
            for w in self.path(u, v) {
                self.values[w as usize] += x;
            }
        }

        fn min_path(&self, u: u32, v: u32) -> SignedWeight {
            self.path(u, v)
                .into_iter()
                .map(|w| self.values[w as usize])
                .min()
                .unwrap()
        }

        fn min_subtree(&self, u: u32) -> SignedWeight {
            let mut best = SignedWeight::MAX;
            for v in 0..self.parent.len() as u32 {
                let mut x = v;
                loop {
                    if x == u {
                        best = best.min(self.values[v as usize]);
                        break;
                    }
                    if self.parent[x as usize] == NONE {
                        break;
                    }
                    x = self.parent[x as usize];
                }
            }
            best
        }
    }

    fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<u32> {
        let mut parent = vec![NONE; n];
        for v in 1..n {
            parent[v] = rng.gen_range(0..v) as u32;
        }
        parent
    }

    #[test]
    fn single_node() {
        let t = PathTree::new(&[NONE], 0, &[42]);
        assert_eq!(t.min_subtree(0), 42);
        assert_eq!(t.min_path(0, 0), 42);
        assert_eq!(t.lca(0, 0), 0);
    }

    #[test]
    fn point_update_touches_only_target() {
        let parent = vec![NONE, 0, 0, 1, 1];
        let mut t = PathTree::new(&parent, 0, &[10, 20, 30, 40, 50]);
        t.add_path(1, 1, 5);
        assert_eq!(t.value(1), 25);
        assert_eq!(t.value(0), 10);
        assert_eq!(t.value(3), 40);
    }

    #[test]
    fn leaf_to_root_path_length() {
        // path from a depth-d leaf to the root touches d+1 nodes
        let parent = vec![NONE, 0, 1, 2, 3];
        let mut t = PathTree::new(&parent, 0, &[0; 5]);
        t.add_path(4, 0, 1);
        for v in 0..5 {
            assert_eq!(t.value(v), 1);
        }
    }

    #[test]
    fn disjoint_paths_unaffected_by_large_adds() {
        let parent = vec![NONE, 0, 0, 1, 1, 2, 2];
        let mut t = PathTree::new(&parent, 0, &[0; 7]);
        t.add_path(3, 4, 1 << 40);
        assert_eq!(t.min_path(5, 6), 0);
    }

    #[test]
    fn add_then_subtract_restores_answers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parent = random_tree(&mut rng, 64);
        let values: Vec<SignedWeight> = (0..64).map(|_| rng.gen_range(-100..100)).collect();
        let mut t = PathTree::new(&parent, 0, &values);
        let before: Vec<SignedWeight> = (0..64).map(|v| t.value(v)).collect();
        let m = 1 << 50;
        t.add_path(17, 44, m);
        t.add_path(3, 60, m);
        t.add_path(3, 60, -m);
        t.add_path(17, 44, -m);
        let after: Vec<SignedWeight> = (0..64).map(|v| t.value(v)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn differential_against_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.gen_range(2..=60);
            let parent = random_tree(&mut rng, n);
            let values: Vec<SignedWeight> =
                (0..n).map(|_| rng.gen_range(-1000..1000)).collect();
            let mut fast = PathTree::new(&parent, 0, &values);
            let mut slow = NaiveTree { parent: parent.clone(), values };
            for _ in 0..200 {
                let u = rng.gen_range(0..n) as u32;
                let v = rng.gen_range(0..n) as u32;
                match rng.gen_range(0..4) {
                    0 => {
                        let x = rng.gen_range(-500..500);
                        fast.add_path(u, v, x);
                        slow.add_path(u, v, x);
                    }
                    1 => assert_eq!(fast.min_path(u, v), slow.min_path(u, v)),
                    2 => assert_eq!(fast.min_subtree(u), slow.min_subtree(u)),
                    _ => assert_eq!(fast.lca(u, v), slow.lca(u, v)),
                }
            }
        }
    }
}
