//! Independent oracles shared by the integration and acceptance tests. Nothing
//! here calls into the forward or backward code under test except through
//! raw parameter access.

#![allow(dead_code)]

use pddpg_core::nn::{Activation, LayerShape, Network};
use pddpg_core::RunRng;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Relative error with a floor on the denominator so two vanishing partials
/// compare by absolute difference.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Tanh => x.tanh(),
        Activation::Relu => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        Activation::Linear => x,
    }
}

/// Plain matrix-multiply forward pass. Also returns every pre-activation value
/// so callers can avoid ReLU kinks.
pub fn oracle_forward(net: &Network, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut x = input.to_vec();
    let mut pre_relu = Vec::new();
    for (k, shape) in net.layers().iter().enumerate() {
        let w = net.weights(k);
        let b = net.bias(k);
        let mut z = vec![0.0; shape.outputs];
        for j in 0..shape.outputs {
            let mut acc = b[j];
            for i in 0..shape.inputs {
                acc += w[j * shape.inputs + i] * x[i];
            }
            z[j] = acc;
        }
        if shape.normalized {
            let n = shape.outputs as f64;
            let mu = z.iter().sum::<f64>() / n;
            let var = z.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            let gain = net.gain(k).unwrap();
            let offset = net.offset(k).unwrap();
            for j in 0..shape.outputs {
                z[j] = gain[j] * (z[j] - mu) / (var + 1e-5).sqrt() + offset[j];
            }
        }
        if shape.activation == Activation::Relu {
            pre_relu.extend_from_slice(&z);
        }
        x = z.into_iter().map(|v| act(shape.activation, v)).collect();
    }
    (x, pre_relu)
}

/// Central finite differences of `f` with respect to every parameter of `net`.
pub fn fd_param_grad(net: &Network, f: impl Fn(&Network) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.param_count())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + FD_STEP;
            let up = f(&probe);
            probe.params_mut()[i] = orig - FD_STEP;
            let down = f(&probe);
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn fd_input_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn random_vec(rng: &mut RunRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Random MLP with at most two hidden layers of width at most 16. Weights are
/// drawn wider than the default init so every activation regime is exercised.
pub fn random_network(rng: &mut RunRng) -> Network {
    let hidden = rng.random_range(0..=2usize);
    let mut sizes = vec![rng.random_range(1..=6usize)];
    for _ in 0..hidden {
        sizes.push(rng.random_range(2..=16usize));
    }
    sizes.push(rng.random_range(1..=4usize));
    let acts = [Activation::Tanh, Activation::Relu, Activation::Linear];
    let shapes: Vec<LayerShape> = (0..sizes.len() - 1)
        .map(|k| {
            let last = k + 2 == sizes.len();
            let a = acts[rng.random_range(0..3)];
            LayerShape::new(sizes[k], sizes[k + 1], a).normalized(!last && rng.random_bool(0.5))
        })
        .collect();
    let mut net = Network::zeros(shapes).unwrap();
    for v in net.params_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    net
}

/// Input for which no ReLU pre-activation sits within `margin` of the kink.
pub fn smooth_input(net: &Network, rng: &mut RunRng, margin: f64) -> Vec<f64> {
    loop {
        let x = random_vec(rng, net.input_dim(), 1.5);
        let (_, pre) = oracle_forward(net, &x);
        if pre.iter().all(|v| v.abs() > margin) {
            return x;
        }
    }
}
