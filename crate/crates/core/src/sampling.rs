//! Weighted and uniform samplers used by the simulation engines.

use rand::Rng;

/// Element type of a [`SumTree`].
pub trait Weight: Copy + PartialOrd + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {
    const ZERO: Self;
    /// Draws a uniform value in `[0, total)`.
    fn draw<R: Rng + ?Sized>(rng: &mut R, total: Self) -> Self;
}

impl Weight for f64 {
    const ZERO: f64 = 0.0;
    #[inline]
    fn draw<R: Rng + ?Sized>(rng: &mut R, total: f64) -> f64 {
        rng.random::<f64>() * total
    }
}

impl Weight for u64 {
    const ZERO: u64 = 0;
    #[inline]
    fn draw<R: Rng + ?Sized>(rng: &mut R, total: u64) -> u64 {
        rng.random_range(0..total)
    }
}

/// Complete binary tree of partial sums over a fixed number of slots.
///
/// Parents are recomputed from their children on every update, so the
/// root is always the sum of the current leaf values and float totals do
/// not drift over long runs.
#[derive(Debug, Clone)]
pub struct SumTree<W: Weight> {
    base: usize,
    len: usize,
    nodes: Vec<W>,
}

impl<W: Weight> SumTree<W> {
    pub fn new(len: usize) -> Self {
        let base = len.max(1).next_power_of_two();
        SumTree {
            base,
            len,
            nodes: vec![W::ZERO; 2 * base],
        }
    }

    pub fn from_weights(weights: &[W]) -> Self {
        let mut tree = SumTree::new(weights.len());
        tree.nodes[tree.base..tree.base + weights.len()].copy_from_slice(weights);
        for i in (1..tree.base).rev() {
            tree.nodes[i] = tree.nodes[2 * i] + tree.nodes[2 * i + 1];
        }
        tree
    }

    /// Overwrites every slot, reusing the allocation.
    pub fn reset(&mut self, weights: impl Iterator<Item = W>) {
        let base = self.base;
        for slot in self.nodes[base..].iter_mut() {
            *slot = W::ZERO;
        }
        for (slot, w) in self.nodes[base..base + self.len].iter_mut().zip(weights) {
            *slot = w;
        }
        for i in (1..base).rev() {
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> W {
        self.nodes[self.base + i]
    }

    #[inline]
    pub fn total(&self) -> W {
        self.nodes[1]
    }

    #[inline]
    pub fn set(&mut self, i: usize, w: W) {
        let mut node = self.base + i;
        self.nodes[node] = w;
        node >>= 1;
        while node > 0 {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
            node >>= 1;
        }
    }

    /// Index of the slot containing `target`, treating slot `i` as the
    /// half-open interval of length `w_i`. Never returns a zero-weight slot
    /// while the total is positive, even when `target` sits on a boundary
    /// because of rounding.
    #[inline]
    pub fn find(&self, mut target: W) -> usize {
        let mut node = 1;
        while node < self.base {
            let left = self.nodes[2 * node];
            let right = self.nodes[2 * node + 1];
            if left > W::ZERO && (target < left || !(right > W::ZERO)) {
                node = 2 * node;
            } else {
                target = target - left;
                node = 2 * node + 1;
            }
        }
        node - self.base
    }

    /// Samples a slot with probability proportional to its weight.
    /// The caller must ensure the total is positive.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.find(W::draw(rng, self.total()))
    }
}

/// Set of `0..capacity` supporting O(1) insert, remove, and uniform sampling.
#[derive(Debug, Clone)]
pub struct IndexSet {
    members: Vec<u32>,
    position: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl IndexSet {
    pub fn new(capacity: usize) -> Self {
        IndexSet {
            members: Vec::with_capacity(capacity),
            position: vec![ABSENT; capacity],
        }
    }

    pub fn clear(&mut self) {
        for &m in &self.members {
            self.position[m as usize] = ABSENT;
        }
        self.members.clear();
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.position[i] != ABSENT
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        if self.position[i] == ABSENT {
            self.position[i] = self.members.len() as u32;
            self.members.push(i as u32);
        }
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        let pos = self.position[i];
        if pos == ABSENT {
            return;
        }
        let last = self.members.pop().expect("non-empty when member present");
        if last as usize != i {
            self.members[pos as usize] = last;
            self.position[last as usize] = pos;
        }
        self.position[i] = ABSENT;
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.members[rng.random_range(0..self.members.len())] as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|&m| m as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_tree_totals_and_find() {
        let mut t = SumTree::from_weights(&[1.0, 0.0, 2.0, 3.0, 0.5]);
        assert_eq!(t.total(), 6.5);
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.99), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.99), 2);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(6.4), 4);
        t.set(3, 0.0);
        assert_eq!(t.total(), 3.5);
        assert_eq!(t.find(3.2), 4);
    }

    #[test]
    fn find_skips_zero_slots_at_boundaries() {
        let t = SumTree::from_weights(&[0.0, 1.0, 0.0, 0.0]);
        // Any target, including ones past the total from rounding, lands on
        // the only positive slot.
        for target in [0.0, 0.5, 1.0, 1.5] {
            assert_eq!(t.find(target), 1);
        }
        let t = SumTree::from_weights(&[2u64, 0, 0, 5, 0]);
        assert_eq!(t.find(1), 0);
        assert_eq!(t.find(2), 3);
        assert_eq!(t.find(6), 3);
    }

    #[test]
    fn sum_tree_sampling_frequencies() {
        let t = SumTree::from_weights(&[1u64, 3, 0, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 4];
        for _ in 0..80_000 {
            counts[t.sample(&mut rng)] += 1;
        }
        assert_eq!(counts[2], 0);
        for (i, expected) in [(0, 10_000.0), (1, 30_000.0), (3, 40_000.0)] {
            let c = counts[i] as f64;
            assert!((c - expected).abs() < 5.0 * expected.sqrt(), "slot {i}: {c}");
        }
    }

    #[test]
    fn reset_reuses_tree() {
        let mut t = SumTree::<u64>::new(3);
        t.reset([4, 5, 6].into_iter());
        assert_eq!(t.total(), 15);
        t.reset([1, 0, 0].into_iter());
        assert_eq!(t.total(), 1);
        assert_eq!(t.get(1), 0);
    }

    #[test]
    fn index_set_ops() {
        let mut s = IndexSet::new(6);
        s.insert(2);
        s.insert(4);
        s.insert(2);
        assert_eq!(s.len(), 2);
        s.remove(2);
        assert!(!s.contains(2));
        assert!(s.contains(4));
        s.remove(2);
        s.insert(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = s.sample(&mut rng);
            assert!(x == 0 || x == 4);
        }
        s.clear();
        assert!(s.is_empty());
        assert!(!s.contains(4));
    }
}
