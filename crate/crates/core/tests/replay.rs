mod common;

use pddpg_core::replay::{importance_weight, PrioritizedBuffer, SumTree, Transition};
use pddpg_core::{seeded_rng, RunRng};
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn transition(tag: f64) -> Transition {
    Transition {
        state: vec![tag],
        action: vec![0.0],
        reward: tag,
        next_state: vec![tag],
        done: false,
    }
}

/// Buffer whose slot `i` has priority `priorities[i]`, written through the
/// TD-error update path. The epsilon is far below the rounding unit of any
/// priority used here, so `|delta| + eps == |delta|` exactly.
fn buffer_with(priorities: &[f64], alpha: f64) -> PrioritizedBuffer {
    let mut b = PrioritizedBuffer::with_priority_eps(priorities.len(), 1, 1, alpha, 1e-300).unwrap();
    for i in 0..priorities.len() {
        b.push(transition(i as f64)).unwrap();
    }
    let idx: Vec<usize> = (0..priorities.len()).collect();
    b.update_priorities(&idx, priorities).unwrap();
    b
}

fn scan_prefix(leaves: &[f64], x: f64) -> usize {
    let mut acc = 0.0;
    for (i, &l) in leaves.iter().enumerate() {
        acc += l;
        if x < acc {
            return i;
        }
    }
    leaves.iter().rposition(|&l| l > 0.0).unwrap()
}

fn random_priorities(rng: &mut RunRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.01..10.0)).collect()
}

#[test]
fn sum_tree_totals_track_linear_sum_through_random_sets() {
    let mut rng = seeded_rng(21);
    let mut tree = SumTree::new(37).unwrap();
    let mut shadow = vec![0.0; tree.capacity()];
    for _ in 0..10_000 {
        let i = rng.random_range(0..shadow.len());
        let v = rng.random_range(0.0..5.0);
        tree.set(i, v).unwrap();
        shadow[i] = v;
        let want: f64 = shadow.iter().sum();
        assert!((tree.total() - want).abs() <= 1e-9 * want.max(1.0));
    }
    // Every interior node is the sum of its children.
    let nodes = tree.nodes();
    let c = tree.capacity();
    for i in 0..c - 1 {
        assert!((nodes[i] - (nodes[2 * i + 1] + nodes[2 * i + 2])).abs() < 1e-9);
    }
}

#[test]
fn exact_distribution_matches_from_scratch_computation() {
    let mut rng = seeded_rng(22);
    for _ in 0..200 {
        let n = rng.random_range(1..=64);
        let alpha = rng.random_range(0.0..1.0);
        let p = random_priorities(&mut rng, n);
        let b = buffer_with(&p, alpha);
        let powered: Vec<f64> = p.iter().map(|x| x.powf(alpha)).collect();
        let z: f64 = powered.iter().sum();
        let got = b.exact_distribution().unwrap();
        for (g, w) in got.iter().zip(&powered) {
            assert!((g - w / z).abs() < 1e-12);
        }
    }
}

#[test]
fn empirical_draws_pass_chi_square() {
    let mut rng = seeded_rng(23);
    let p = random_priorities(&mut rng, 16);
    let b = buffer_with(&p, 0.6);
    let probs = b.exact_distribution().unwrap();
    let draws = 100_000;
    let mut counts = [0usize; 16];
    let mut remaining = draws;
    while remaining > 0 {
        let k = remaining.min(1000);
        for i in b.sample(k, 1.0, &mut rng).unwrap().indices {
            counts[i] += 1;
        }
        remaining -= k;
    }
    let stat: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&o, &q)| {
            let e = q * draws as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new(15.0).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn raw_importance_weights_undo_prioritization() {
    let mut rng = seeded_rng(24);
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let b = buffer_with(&random_priorities(&mut rng, n), rng.random_range(0.0..1.0));
        let probs = b.exact_distribution().unwrap();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let weighted: f64 = (0..n)
            .map(|i| probs[i] * importance_weight(n, probs[i], 1.0) * values[i])
            .sum();
        let uniform = values.iter().sum::<f64>() / n as f64;
        assert!((weighted - uniform).abs() < 1e-12, "{weighted} vs {uniform}");
    }
}

#[test]
fn sampled_weights_are_max_normalized() {
    let mut rng = seeded_rng(25);
    let b = buffer_with(&random_priorities(&mut rng, 30), 0.7);
    let batch = b.sample(64, 0.5, &mut rng).unwrap();
    let n = b.len();
    let raw: Vec<f64> = batch
        .probabilities
        .iter()
        .map(|&p| (1.0 / (n as f64 * p)).powf(0.5))
        .collect();
    let max = raw.iter().cloned().fold(f64::MIN, f64::max);
    for (w, r) in batch.is_weights.iter().zip(&raw) {
        assert!((w - r / max).abs() < 1e-12);
    }
    assert!(batch.is_weights.contains(&1.0));
}

#[test]
fn distribution_after_updates_matches_recomputation() {
    let mut rng = seeded_rng(26);
    let alpha = 0.6;
    let eps = 1e-6;
    let mut b = PrioritizedBuffer::with_priority_eps(20, 1, 1, alpha, eps).unwrap();
    let mut shadow: Vec<f64> = Vec::new();
    let mut max_p: f64 = 1.0;
    let mut cursor = 0;
    for step in 0..300 {
        if rng.random_bool(0.4) || b.is_empty() {
            b.push(transition(step as f64)).unwrap();
            if shadow.len() < 20 {
                shadow.push(max_p);
            } else {
                shadow[cursor] = max_p;
            }
            cursor = (cursor + 1) % 20;
        } else {
            let batch = b.sample(4, 0.4, &mut rng).unwrap();
            let td: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            b.update_priorities(&batch.indices, &td).unwrap();
            for (&i, d) in batch.indices.iter().zip(&td) {
                shadow[i] = d.abs() + eps;
                max_p = max_p.max(shadow[i]);
            }
        }
        let z: f64 = shadow.iter().map(|p| p.powf(alpha)).sum();
        for (g, p) in b.exact_distribution().unwrap().iter().zip(&shadow) {
            assert!((g - p.powf(alpha) / z).abs() < 1e-12);
        }
    }
}

#[test]
fn snapshot_restores_buffer_exactly() {
    let mut rng = seeded_rng(27);
    let mut b = buffer_with(&random_priorities(&mut rng, 9), 0.6);
    b.push(transition(-1.5)).unwrap();
    let back = PrioritizedBuffer::from_snapshot(&b.to_snapshot()).unwrap();
    assert_eq!(back, b);
}

proptest! {
    #[test]
    fn find_prefix_agrees_with_linear_scan(
        leaves in prop::collection::vec(0.0f64..10.0, 1..40),
        u in 0.0f64..1.0,
    ) {
        prop_assume!(leaves.iter().any(|&l| l > 0.0));
        let mut tree = SumTree::new(leaves.len()).unwrap();
        for (i, &l) in leaves.iter().enumerate() {
            tree.set(i, l).unwrap();
        }
        let x = u * tree.total();
        let got = tree.find_prefix(x).unwrap();
        prop_assert!(tree.leaf(got) > 0.0);
        let want = scan_prefix(&leaves, x);
        // Tree sums and running sums round differently at cell boundaries.
        if got != want {
            let before: f64 = leaves[..want].iter().sum();
            let after = before + leaves[want];
            prop_assert!((x - before).abs() < 1e-9 || (x - after).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_lie_in_unit_interval(
        priorities in prop::collection::vec(0.001f64..50.0, 1..30),
        alpha in 0.0f64..1.0,
        beta in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let b = buffer_with(&priorities, alpha);
        let batch = b.sample(16, beta, &mut seeded_rng(seed)).unwrap();
        for &w in &batch.is_weights {
            prop_assert!(w > 0.0 && w <= 1.0);
        }
        let total: f64 = b.exact_distribution().unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
