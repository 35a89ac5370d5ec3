//! Experience replay with proportional prioritization.
//!
//! A transition `i` with priority `p_i` is drawn with probability
//! `P(i) = p_i^alpha / sum_k p_k^alpha`. Leaves of the [`SumTree`] hold the
//! already-exponentiated values `p_i^alpha`, so a draw is one inverse-CDF
//! descent. Importance weights are `w_i = (1 / (N * P(i)))^beta` with `N` the
//! number of stored transitions, divided by the batch maximum before use.

use rand::Rng;

use crate::error::{ensure_dim, ensure_finite, Error, Result};

/// Added to `|td_error|` so that no stored transition becomes unreachable.
pub const DEFAULT_PRIORITY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Complete binary tree over `capacity` leaves (a power of two) where every
/// internal node stores the sum of its children.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    /// Tree with room for at least `min_leaves` leaves, all zero.
    pub fn new(min_leaves: usize) -> Result<Self> {
        if min_leaves == 0 {
            return Err(Error::InvalidArgument("sum tree needs at least one leaf".into()));
        }
        let capacity = min_leaves.next_power_of_two();
        Ok(Self {
            capacity,
            nodes: vec![0.0; 2 * capacity - 1],
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[0]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn leaf(&self, leaf: usize) -> f64 {
        self.nodes[self.capacity - 1 + leaf]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.nodes[self.capacity - 1..]
    }

    pub fn set(&mut self, leaf: usize, value: f64) -> Result<()> {
        if leaf >= self.capacity {
            return Err(Error::IndexOutOfRange {
                index: leaf,
                len: self.capacity,
            });
        }
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sum tree leaf value must be finite and >= 0, got {value}"
            )));
        }
        let mut node = self.capacity - 1 + leaf;
        self.nodes[node] = value;
        while node > 0 {
            node = (node - 1) / 2;
            // re-summed from children so no drift accumulates
            self.nodes[node] = self.nodes[2 * node + 1] + self.nodes[2 * node + 2];
        }
        Ok(())
    }

    /// Smallest leaf whose inclusive prefix sum exceeds `x`.
    pub fn find_prefix(&self, x: f64) -> Result<usize> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("prefix search on an all-zero tree".into()));
        }
        if !(x >= 0.0 && x < total) {
            return Err(Error::InvalidArgument(format!(
                "prefix query {x} outside [0, {total})"
            )));
        }
        let mut x = x;
        let mut node = 0;
        while node < self.capacity - 1 {
            let left = 2 * node + 1;
            let right = left + 1;
            // A zero right subtree can only be reached through rounding; stay left.
            if x < self.nodes[left] || self.nodes[right] == 0.0 {
                node = left;
            } else {
                x -= self.nodes[left];
                node = right;
            }
        }
        Ok(node + 1 - self.capacity)
    }
}

/// Mini-batch drawn by [`PrioritizedBuffer::sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    pub transitions: Vec<Transition>,
    /// `P(i)` for each draw.
    pub probabilities: Vec<f64>,
    /// Importance weights divided by the batch maximum; every entry in (0, 1].
    pub is_weights: Vec<f64>,
}

impl SampledBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Raw importance weight `(1 / (n * p))^beta`.
pub fn importance_weight(n: usize, probability: f64, beta: f64) -> f64 {
    (1.0 / (n as f64 * probability)).powf(beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrioritizedBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    alpha: f64,
    priority_eps: f64,
    max_priority: f64,
    cursor: usize,
    storage: Vec<Transition>,
    tree: SumTree,
}

impl PrioritizedBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize, alpha: f64) -> Result<Self> {
        Self::with_priority_eps(capacity, state_dim, action_dim, alpha, DEFAULT_PRIORITY_EPS)
    }

    pub fn with_priority_eps(
        capacity: usize,
        state_dim: usize,
        action_dim: usize,
        alpha: f64,
        priority_eps: f64,
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("buffer capacity must be >= 1".into()));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(priority_eps.is_finite() && priority_eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "priority epsilon must be > 0, got {priority_eps}"
            )));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            alpha,
            priority_eps,
            max_priority: 1.0,
            cursor: 0,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            tree: SumTree::new(capacity)?,
        })
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn priority_eps(&self) -> f64 {
        self.priority_eps
    }

    /// Largest raw priority seen so far (starts at 1).
    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    /// Stored `p_i^alpha` for slot `i`.
    pub fn leaf(&self, index: usize) -> f64 {
        self.tree.leaf(index)
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.storage.get(index)
    }

    fn priority_leaf(&self, priority: f64) -> f64 {
        priority.powf(self.alpha)
    }

    /// Stores `t` at the cursor with the running maximum priority, overwriting
    /// the oldest transition once full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        ensure_dim("transition state", self.state_dim, t.state.len())?;
        ensure_dim("transition action", self.action_dim, t.action.len())?;
        ensure_dim("transition next state", self.state_dim, t.next_state.len())?;
        ensure_finite("transition state", &t.state)?;
        ensure_finite("transition action", &t.action)?;
        ensure_finite("transition next state", &t.next_state)?;
        ensure_finite("transition reward", &[t.reward])?;
        let slot = self.cursor;
        if slot < self.storage.len() {
            self.storage[slot] = t;
        } else {
            self.storage.push(t);
        }
        self.tree.set(slot, self.priority_leaf(self.max_priority))?;
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// `batch_size` independent proportional draws (with replacement).
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<SampledBatch> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("beta must lie in [0, 1], got {beta}")));
        }
        let total = self.tree.total();
        let n = self.len();
        let mut indices = Vec::with_capacity(batch_size);
        let mut probabilities = Vec::with_capacity(batch_size);
        let mut raw = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let u: f64 = rng.random();
            let x = (u * total).min(total * (1.0 - f64::EPSILON));
            let idx = self.tree.find_prefix(x)?;
            debug_assert!(idx < n, "zero leaves beyond the fill level are unreachable");
            let p = self.tree.leaf(idx) / total;
            indices.push(idx);
            probabilities.push(p);
            raw.push(importance_weight(n, p, beta));
        }
        let max_w = raw.iter().cloned().fold(f64::MIN, f64::max);
        let is_weights = raw.iter().map(|w| w / max_w).collect();
        let transitions = indices.iter().map(|&i| self.storage[i].clone()).collect();
        Ok(SampledBatch {
            indices,
            transitions,
            probabilities,
            is_weights,
        })
    }

    /// Sets `p_i = |td_error_i| + eps` for each sampled slot.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        ensure_dim("priority update", indices.len(), td_errors.len())?;
        ensure_finite("td errors", td_errors)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.len(),
            });
        }
        for (&i, &delta) in indices.iter().zip(td_errors) {
            let p = delta.abs() + self.priority_eps;
            self.tree.set(i, self.priority_leaf(p))?;
            self.max_priority = self.max_priority.max(p);
        }
        Ok(())
    }

    /// `P(i)` for every occupied slot.
    pub fn exact_distribution(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let leaves = &self.tree.leaves()[..self.len()];
        let total: f64 = leaves.iter().sum();
        Ok(leaves.iter().map(|l| l / total).collect())
    }

    /// Text dump: a header line with the scalar state, then one line per
    /// stored transition holding its leaf value and fields. Floats use
    /// round-trip formatting so [`PrioritizedBuffer::from_snapshot`] restores
    /// the buffer exactly.
    pub fn to_snapshot(&self) -> String {
        let mut out = format!(
            "buffer capacity={} state_dim={} action_dim={} alpha={:?} eps={:?} max_priority={:?} cursor={} len={}\n",
            self.capacity,
            self.state_dim,
            self.action_dim,
            self.alpha,
            self.priority_eps,
            self.max_priority,
            self.cursor,
            self.len()
        );
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        for (i, t) in self.storage.iter().enumerate() {
            out.push_str(&format!(
                "{:?};{};{};{:?};{};{}\n",
                self.tree.leaf(i),
                join(&t.state),
                join(&t.action),
                t.reward,
                join(&t.next_state),
                u8::from(t.done)
            ));
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty buffer snapshot".into()))?;
        let fields: Vec<(&str, &str)> = header
            .strip_prefix("buffer ")
            .ok_or_else(|| Error::Parse("missing `buffer` header".into()))?
            .split_whitespace()
            .map(|kv| kv.split_once('=').ok_or_else(|| Error::Parse(format!("bad field `{kv}`"))))
            .collect::<Result<_>>()?;
        let get = |key: &str| {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Parse(format!("missing `{key}`")))
        };
        let num = |key: &str| -> Result<f64> { parse(get(key)?) };
        let int = |key: &str| -> Result<usize> { parse(get(key)?) };
        let mut buf = Self::with_priority_eps(
            int("capacity")?,
            int("state_dim")?,
            int("action_dim")?,
            num("alpha")?,
            num("eps")?,
        )?;
        buf.max_priority = num("max_priority")?;
        let len = int("len")?;
        for i in 0..len {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing transition line {i}")))?;
            let parts: Vec<&str> = line.split(';').collect();
            if parts.len() != 6 {
                return Err(Error::Parse(format!("bad transition line `{line}`")));
            }
            let vec = |s: &str| -> Result<Vec<f64>> {
                if s.is_empty() {
                    Ok(Vec::new())
                } else {
                    s.split(',').map(parse).collect()
                }
            };
            let t = Transition {
                state: vec(parts[1])?,
                action: vec(parts[2])?,
                reward: parse(parts[3])?,
                next_state: vec(parts[4])?,
                done: match parts[5] {
                    "0" => false,
                    "1" => true,
                    other => return Err(Error::Parse(format!("bad done flag `{other}`"))),
                },
            };
            buf.cursor = i % buf.capacity;
            buf.push(t)?;
            buf.tree.set(i, parse(parts[0])?)?;
        }
        let cursor = int("cursor")?;
        if cursor >= buf.capacity {
            return Err(Error::Parse(format!("cursor {cursor} beyond capacity")));
        }
        buf.cursor = cursor;
        Ok(buf)
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn transition(tag: f64) -> Transition {
        Transition {
            state: vec![tag, 0.0],
            action: vec![tag],
            reward: tag,
            next_state: vec![tag + 1.0, 0.0],
            done: false,
        }
    }

    fn tree_with(leaves: &[f64]) -> SumTree {
        let mut t = SumTree::new(leaves.len()).unwrap();
        for (i, &v) in leaves.iter().enumerate() {
            t.set(i, v).unwrap();
        }
        t
    }

    #[test]
    fn single_leaf_root() {
        let mut t = tree_with(&[0.0; 8]);
        t.set(3, 5.0).unwrap();
        assert_eq!(t.total(), 5.0);
    }

    #[test]
    fn root_is_leaf_sum() {
        assert_eq!(tree_with(&[1.0, 2.0, 3.0, 4.0]).total(), 10.0);
    }

    #[test]
    fn tree_set_errors() {
        let mut t = SumTree::new(4).unwrap();
        assert!(t.set(4, 1.0).is_err());
        assert!(t.set(0, -1.0).is_err());
        assert!(t.set(0, f64::NAN).is_err());
        assert!(SumTree::new(0).is_err());
    }

    #[test]
    fn prefix_lookup_examples() {
        let t = tree_with(&[1.0, 2.0, 3.0]);
        assert_eq!(t.find_prefix(0.5).unwrap(), 0);
        assert_eq!(t.find_prefix(1.5).unwrap(), 1);
        assert_eq!(t.find_prefix(1.0).unwrap(), 1);
        assert_eq!(t.find_prefix(5.999).unwrap(), 2);

        let z = tree_with(&[0.0, 0.0, 4.0]);
        for x in [0.0, 1.0, 2.5, 3.999999] {
            assert_eq!(z.find_prefix(x).unwrap(), 2);
        }
    }

    #[test]
    fn prefix_lookup_errors() {
        let t = tree_with(&[1.0, 2.0, 3.0]);
        assert!(t.find_prefix(6.0).is_err());
        assert!(t.find_prefix(-0.1).is_err());
        assert!(SumTree::new(4).unwrap().find_prefix(0.0).is_err());
    }

    #[test]
    fn first_push_uses_initial_priority() {
        let mut buf = PrioritizedBuffer::new(8, 2, 1, 0.6).unwrap();
        buf.push(transition(0.0)).unwrap();
        assert_eq!(buf.len(), 1);
        assert_eq!(buf.leaf(0), 1.0f64.powf(0.6));
    }

    #[test]
    fn ring_wraps_at_capacity() {
        let mut buf = PrioritizedBuffer::new(4, 2, 1, 0.6).unwrap();
        for i in 0..5 {
            buf.push(transition(i as f64)).unwrap();
        }
        assert_eq!(buf.len(), 4);
        assert_eq!(buf.get(0).unwrap().reward, 4.0);
        assert_eq!(buf.cursor(), 1);
    }

    #[test]
    fn push_after_update_uses_new_max() {
        let alpha = 0.6;
        let mut buf = PrioritizedBuffer::new(8, 2, 1, alpha).unwrap();
        for i in 0..3 {
            buf.push(transition(i as f64)).unwrap();
        }
        let eps = buf.priority_eps();
        buf.update_priorities(&[1], &[9.0 - eps]).unwrap();
        buf.push(transition(3.0)).unwrap();
        assert!((buf.leaf(3) - 9.0f64.powf(alpha)).abs() < 1e-12);
    }

    #[test]
    fn overwrite_refreshes_leaf() {
        let mut buf = PrioritizedBuffer::new(2, 2, 1, 1.0).unwrap();
        buf.push(transition(0.0)).unwrap();
        buf.push(transition(1.0)).unwrap();
        buf.update_priorities(&[0, 1], &[0.0, 4.0]).unwrap();
        assert!(buf.leaf(0) < 1e-5);
        buf.push(transition(2.0)).unwrap();
        assert_eq!(buf.leaf(0), buf.max_priority());
    }

    #[test]
    fn push_rejects_wrong_dims() {
        let mut buf = PrioritizedBuffer::new(4, 3, 1, 0.6).unwrap();
        assert!(matches!(buf.push(transition(0.0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sample_empty_is_error() {
        let buf = PrioritizedBuffer::new(4, 2, 1, 0.6).unwrap();
        assert!(matches!(buf.sample(2, 0.4, &mut seeded_rng(0)), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn alpha_zero_is_uniform_with_unit_weights() {
        let mut buf = PrioritizedBuffer::new(16, 2, 1, 0.0).unwrap();
        for i in 0..7 {
            buf.push(transition(i as f64)).unwrap();
        }
        buf.update_priorities(&[0, 3, 5], &[10.0, 0.0, -3.0]).unwrap();
        let dist = buf.exact_distribution().unwrap();
        assert!(dist.iter().all(|&p| (p - 1.0 / 7.0).abs() < 1e-15));
        for beta in [0.0, 0.4, 1.0] {
            let batch = buf.sample(32, beta, &mut seeded_rng(1)).unwrap();
            assert!(batch.is_weights.iter().all(|&w| w == 1.0));
        }
    }

    #[test]
    fn proportional_probabilities_and_weights() {
        let mut buf = PrioritizedBuffer::new(4, 2, 1, 1.0).unwrap();
        for i in 0..4 {
            buf.push(transition(i as f64)).unwrap();
        }
        let eps = buf.priority_eps();
        let deltas: Vec<f64> = [1.0, 2.0, 3.0, 4.0].iter().map(|p| p - eps).collect();
        buf.update_priorities(&[0, 1, 2, 3], &deltas).unwrap();
        let dist = buf.exact_distribution().unwrap();
        for (p, want) in dist.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((p - want).abs() < 1e-12);
        }
        let raw: Vec<f64> = dist.iter().map(|&p| importance_weight(4, p, 1.0)).collect();
        for (w, want) in raw.iter().zip([2.5, 1.25, 0.8333333333333334, 0.625]) {
            assert!((w - want).abs() < 1e-9);
        }
        let max = raw.iter().cloned().fold(0.0, f64::max);
        for (w, want) in raw.iter().zip([1.0, 0.5, 1.0 / 3.0, 0.25]) {
            assert!((w / max - want).abs() < 1e-9);
        }
    }

    #[test]
    fn batch_weights_are_max_normalized() {
        let mut buf = PrioritizedBuffer::new(8, 2, 1, 0.7).unwrap();
        for i in 0..8 {
            buf.push(transition(i as f64)).unwrap();
        }
        buf.update_priorities(&[0, 1, 2, 3, 4, 5, 6, 7], &[0.1, 3.0, 0.5, 2.0, 0.0, 8.0, 1.0, 0.2])
            .unwrap();
        let batch = buf.sample(64, 0.5, &mut seeded_rng(3)).unwrap();
        let max = batch.is_weights.iter().cloned().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(batch.is_weights.iter().all(|&w| w > 0.0 && w <= 1.0));
        for (i, &idx) in batch.indices.iter().enumerate() {
            assert_eq!(batch.transitions[i], *buf.get(idx).unwrap());
        }
    }

    #[test]
    fn zero_error_stays_sampleable() {
        let alpha = 0.6;
        let mut buf = PrioritizedBuffer::new(4, 2, 1, alpha).unwrap();
        buf.push(transition(0.0)).unwrap();
        buf.update_priorities(&[0], &[0.0]).unwrap();
        assert_eq!(buf.leaf(0), DEFAULT_PRIORITY_EPS.powf(alpha));
        assert!(buf.leaf(0) > 0.0);
    }

    #[test]
    fn signed_errors_give_equal_leaves() {
        let mut buf = PrioritizedBuffer::new(4, 2, 1, 0.6).unwrap();
        buf.push(transition(0.0)).unwrap();
        buf.push(transition(1.0)).unwrap();
        buf.update_priorities(&[0, 1], &[-2.0, 2.0]).unwrap();
        assert_eq!(buf.leaf(0), buf.leaf(1));
    }

    #[test]
    fn update_rejects_unoccupied_index() {
        let mut buf = PrioritizedBuffer::new(4, 2, 1, 0.6).unwrap();
        buf.push(transition(0.0)).unwrap();
        assert!(matches!(
            buf.update_priorities(&[1], &[0.5]),
            Err(Error::IndexOutOfRange { index: 1, len: 1 })
        ));
    }

    #[test]
    fn exact_distribution_examples() {
        let mut buf = PrioritizedBuffer::new(4, 2, 1, 2.0).unwrap();
        assert!(buf.exact_distribution().is_err());
        buf.push(transition(0.0)).unwrap();
        assert_eq!(buf.exact_distribution().unwrap(), vec![1.0]);
        buf.push(transition(1.0)).unwrap();
        let eps = buf.priority_eps();
        buf.update_priorities(&[0, 1], &[1.0 - eps, 3.0 - eps]).unwrap();
        let d = buf.exact_distribution().unwrap();
        assert!((d[0] - 0.1).abs() < 1e-12 && (d[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trips_exactly() {
        let mut buf = PrioritizedBuffer::new(5, 2, 1, 0.6).unwrap();
        for i in 0..7 {
            let mut t = transition(i as f64 * 0.1);
            t.done = i % 3 == 0;
            buf.push(t).unwrap();
        }
        buf.update_priorities(&[0, 2, 4], &[0.123456789, -7.5, 1e-9]).unwrap();
        let back = PrioritizedBuffer::from_snapshot(&buf.to_snapshot()).unwrap();
        assert_eq!(back, buf);
    }
}
