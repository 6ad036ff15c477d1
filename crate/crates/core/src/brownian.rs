//! A Brownian path that can be queried at arbitrary increasing times.
//!
//! The path on `[0, T]` is built by dyadic midpoint refinement (Lévy's
//! construction). The Gaussian used at tree node `id` comes from a small
//! generator seeded by `(key, id)`, with the key drawn from the per-sample
//! ChaCha stream, so the path is a deterministic function of the sample: two simulations that step through time differently still see
//! the same Brownian motion, which is what makes step-size comparisons
//! meaningful sample by sample.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::rng::{sample_rng, splitmix64};

const MAX_DEPTH: u32 = 62;

#[derive(Debug, Clone, Copy)]
struct Node {
    a: f64,
    b: f64,
    ba: f64,
    bb: f64,
    id: u64,
    depth: u32,
}

#[derive(Debug, Clone)]
pub struct BrownianTree {
    key: u64,
    t_max: f64,
    stack: Vec<Node>,
    /// Leaves are refined down to `refine · (t − t_prev)`.
    refine: f64,
    last_t: f64,
    last_b: f64,
}

impl BrownianTree {
    /// The tree for sample `index` of a run seeded with `seed`.
    pub fn new(seed: u64, index: u64, t_max: f64) -> Self {
        let mut tree = Self {
            key: sample_rng(seed, index).random(),
            t_max,
            stack: Vec::with_capacity(MAX_DEPTH as usize + 1),
            refine: 1.0 / 16.0,
            last_t: 0.0,
            last_b: 0.0,
        };
        // id 0 is the endpoint B(T); midpoints use heap ids starting at 1
        let bt = t_max.sqrt() * tree.node_normal(0);
        tree.stack.push(Node { a: 0.0, b: t_max, ba: 0.0, bb: bt, id: 1, depth: 0 });
        tree
    }

    pub fn horizon(&self) -> f64 {
        self.t_max
    }

    fn node_normal(&self, id: u64) -> f64 {
        let mut h = self.key ^ splitmix64(id);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            h = splitmix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        SmallRng::from_seed(seed).sample(StandardNormal)
    }

    /// `B(t)` resolved to intervals no longer than `res`.
    fn value(&mut self, t: f64, res: f64) -> f64 {
        while self.stack.len() > 1 {
            let n = self.stack.last().unwrap();
            if n.a <= t && t <= n.b {
                break;
            }
            self.stack.pop();
        }
        loop {
            let n = *self.stack.last().unwrap();
            if t == n.a {
                return n.ba;
            }
            if t == n.b {
                return n.bb;
            }
            if n.b - n.a <= res || n.depth >= MAX_DEPTH {
                // Brownian bridge inside the leaf, keyed by the leaf and the time
                let z = self.node_normal(splitmix64(!n.id ^ t.to_bits().rotate_left(17)));
                let mean = n.ba + (n.bb - n.ba) * (t - n.a) / (n.b - n.a);
                return mean + ((t - n.a) * (n.b - t) / (n.b - n.a)).sqrt() * z;
            }
            let m = 0.5 * (n.a + n.b);
            let bm = 0.5 * (n.ba + n.bb) + 0.5 * (n.b - n.a).sqrt() * self.node_normal(n.id);
            let child = if t < m {
                Node { a: n.a, b: m, ba: n.ba, bb: bm, id: 2 * n.id, depth: n.depth + 1 }
            } else {
                Node { a: m, b: n.b, ba: bm, bb: n.bb, id: 2 * n.id + 1, depth: n.depth + 1 }
            };
            self.stack.push(child);
        }
    }

    /// `B(t) − B(t_prev)` where `t_prev` is the previous query time (0 at
    /// the start). Times must be nondecreasing and at most the horizon.
    pub fn advance_to(&mut self, t: f64) -> f64 {
        debug_assert!(t >= self.last_t && t <= self.t_max);
        let h = t - self.last_t;
        if h == 0.0 {
            return 0.0;
        }
        let b = self.value(t, h * self.refine);
        let db = b - self.last_b;
        self.last_t = t;
        self.last_b = b;
        db
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_have_brownian_variance() {
        let n = 4000;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut cross = 0.0;
        for i in 0..n {
            let mut tree = BrownianTree::new(3, i, 10.0);
            let a = tree.advance_to(0.37);
            let b = tree.advance_to(2.9);
            s1 += a * a;
            s2 += b * b;
            cross += a * b;
        }
        let n = n as f64;
        // standard errors of the sample variances are about √(2/n)·σ²
        assert!((s1 / n - 0.37).abs() < 4.0 * 0.37 * (2.0 / n).sqrt());
        assert!((s2 / n - 2.53).abs() < 4.0 * 2.53 * (2.0 / n).sqrt());
        assert!((cross / n).abs() < 4.0 * (0.37f64 * 2.53).sqrt() / n.sqrt());
    }

    #[test]
    fn different_step_sequences_see_the_same_path() {
        // with horizon 128 the integer times are tree nodes, where every
        // query sequence reads the same value
        let mut coarse = BrownianTree::new(9, 0, 128.0);
        let mut fine = BrownianTree::new(9, 0, 128.0);
        let mut bc = 0.0;
        let mut bf = 0.0;
        for k in 1..=128 {
            let t = k as f64;
            bc += coarse.advance_to(t);
            for j in 1..=8 {
                bf += fine.advance_to(t - 1.0 + j as f64 / 8.0);
            }
            assert!((bc - bf).abs() < 1e-12, "t={t}: {bc} vs {bf}");
        }
        let mut again = BrownianTree::new(9, 0, 128.0);
        let total: f64 = (1..=128).map(|k| again.advance_to(k as f64)).sum();
        assert_eq!(total, bc);
    }
}
