//! Dense feed-forward networks with hand-written backpropagation.
//!
//! All parameters of a [`Network`] live in one flat `Vec<f64>`. Layer `k`
//! occupies a contiguous block laid out as
//!
//! ```text
//! weights (outputs x inputs, row-major) | bias (outputs) | [gain (outputs) | offset (outputs)]
//! ```
//!
//! where the bracketed normalization block is present only for layers built
//! with `normalized = true`. A normalized layer computes
//! `y = act(gain * (z - mean(z)) / sqrt(var(z) + 1e-5) + offset)` with `z = Wx + b`.
//!
//! [`Gradient`] and the [`Adam`] moments use the same flat layout, so
//! optimizer and target-network arithmetic are elementwise over one slice.
//!
//! # Snapshot format
//!
//! [`Network::to_snapshot`] writes UTF-8 text:
//!
//! ```text
//! network <layer count>
//! layer <inputs> <outputs> <tanh|relu|linear> <plain|norm>   (one line per layer)
//! params <parameter count>
//! <value>                                                    (one line per parameter)
//! ```
//!
//! Parameters follow the flat layout above, layer by layer. Values are printed
//! with Rust's shortest round-trip float formatting, so reading a snapshot back
//! reproduces every parameter bit for bit.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{ensure_dim, ensure_finite, Error, Result};

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub normalized: bool,
}

impl LayerShape {
    pub fn new(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            activation,
            normalized: false,
        }
    }

    pub fn normalized(mut self, on: bool) -> Self {
        self.normalized = on;
        self
    }

    pub fn param_count(&self) -> usize {
        let norm = if self.normalized { 2 * self.outputs } else { 0 };
        self.outputs * self.inputs + self.outputs + norm
    }
}

/// Layer shapes for a multilayer perceptron `sizes[0] -> ... -> sizes[n]`.
///
/// Hidden layers use `hidden` (and layer normalization when `normalize_hidden`);
/// the last layer uses `output` and is never normalized.
pub fn mlp_shapes(
    sizes: &[usize],
    hidden: Activation,
    output: Activation,
    normalize_hidden: bool,
) -> Vec<LayerShape> {
    let n = sizes.len().saturating_sub(1);
    (0..n)
        .map(|k| {
            let last = k + 1 == n;
            LayerShape::new(sizes[k], sizes[k + 1], if last { output } else { hidden })
                .normalized(normalize_hidden && !last)
        })
        .collect()
}

/// Where a parameter lives inside its layer block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Gain,
    Offset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    shapes: Vec<LayerShape>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

impl Network {
    /// Zero weights and biases; normalization gains start at 1.
    pub fn zeros(shapes: Vec<LayerShape>) -> Result<Self> {
        if shapes.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for (k, s) in shapes.iter().enumerate() {
            if s.inputs == 0 || s.outputs == 0 {
                return Err(Error::InvalidArgument(format!("layer {k} has a zero dimension")));
            }
        }
        for pair in shapes.windows(2) {
            ensure_dim("layer chaining", pair[0].outputs, pair[1].inputs)?;
        }
        let mut offsets = Vec::with_capacity(shapes.len() + 1);
        let mut total = 0;
        for s in &shapes {
            offsets.push(total);
            total += s.param_count();
        }
        offsets.push(total);
        let mut net = Self {
            shapes,
            offsets,
            params: vec![0.0; total],
        };
        for k in 0..net.shapes.len() {
            if let Some(gain) = net.gain_mut(k) {
                gain.fill(1.0);
            }
        }
        Ok(net)
    }

    /// Uniform initialization in `±1/sqrt(fan_in)` for every layer except the
    /// last, which is drawn from `±final_limit`. Biases follow their layer's range.
    pub fn random<R: Rng + ?Sized>(
        shapes: Vec<LayerShape>,
        final_limit: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(final_limit.is_finite() && final_limit > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "final layer init limit must be positive, got {final_limit}"
            )));
        }
        let mut net = Self::zeros(shapes)?;
        let n = net.shapes.len();
        for k in 0..n {
            let limit = if k + 1 == n {
                final_limit
            } else {
                1.0 / (net.shapes[k].inputs as f64).sqrt()
            };
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let (w, b) = net.weights_and_bias_mut(k);
            for v in w.iter_mut().chain(b.iter_mut()) {
                *v = dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.shapes[self.shapes.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn block(&self, k: usize) -> &[f64] {
        &self.params[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        let s = &self.shapes[k];
        &self.block(k)[..s.inputs * s.outputs]
    }

    pub fn bias(&self, k: usize) -> &[f64] {
        let s = &self.shapes[k];
        let w = s.inputs * s.outputs;
        &self.block(k)[w..w + s.outputs]
    }

    pub fn gain(&self, k: usize) -> Option<&[f64]> {
        let s = &self.shapes[k];
        s.normalized.then(|| {
            let start = s.inputs * s.outputs + s.outputs;
            &self.block(k)[start..start + s.outputs]
        })
    }

    pub fn offset(&self, k: usize) -> Option<&[f64]> {
        let s = &self.shapes[k];
        s.normalized.then(|| {
            let start = s.inputs * s.outputs + 2 * s.outputs;
            &self.block(k)[start..start + s.outputs]
        })
    }

    pub fn weights_and_bias_mut(&mut self, k: usize) -> (&mut [f64], &mut [f64]) {
        let s = self.shapes[k];
        let block = &mut self.params[self.offsets[k]..self.offsets[k + 1]];
        let (w, rest) = block.split_at_mut(s.inputs * s.outputs);
        (w, &mut rest[..s.outputs])
    }

    fn gain_mut(&mut self, k: usize) -> Option<&mut [f64]> {
        let s = self.shapes[k];
        if !s.normalized {
            return None;
        }
        let start = self.offsets[k] + s.inputs * s.outputs + s.outputs;
        Some(&mut self.params[start..start + s.outputs])
    }

    /// Layer index and role of the flat parameter at `index`.
    pub fn locate(&self, index: usize) -> Option<(usize, ParamKind)> {
        if index >= self.params.len() {
            return None;
        }
        let k = self.offsets.partition_point(|&o| o <= index) - 1;
        let s = &self.shapes[k];
        let local = index - self.offsets[k];
        let w = s.inputs * s.outputs;
        let kind = if local < w {
            ParamKind::Weight
        } else if local < w + s.outputs {
            ParamKind::Bias
        } else if local < w + 2 * s.outputs {
            ParamKind::Gain
        } else {
            ParamKind::Offset
        };
        Some((k, kind))
    }

    pub fn same_shape(&self, other: &Network) -> bool {
        self.shapes == other.shapes
    }

    fn ensure_same_shape(&self, other: &Network, context: &'static str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{context}: network shapes differ"
            )))
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(input)?.into_output())
    }

    /// Forward pass keeping every intermediate needed by [`Network::backward_trace`].
    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        ensure_dim("network input", self.input_dim(), input.len())?;
        ensure_finite("network input", input)?;
        let mut activations = Vec::with_capacity(self.shapes.len() + 1);
        let mut norms = Vec::with_capacity(self.shapes.len());
        activations.push(input.to_vec());
        for k in 0..self.shapes.len() {
            let (out, norm) = self.layer_forward(k, &activations[k]);
            activations.push(out);
            norms.push(norm);
        }
        Ok(Trace { activations, norms })
    }

    fn layer_forward(&self, k: usize, x: &[f64]) -> (Vec<f64>, Option<NormCache>) {
        let s = &self.shapes[k];
        let w = self.weights(k);
        let b = self.bias(k);
        let mut z: Vec<f64> = w
            .chunks_exact(s.inputs)
            .zip(b)
            .map(|(row, &bias)| bias + dot(row, x))
            .collect();
        let norm = if s.normalized {
            let n = s.outputs as f64;
            let mean = z.iter().sum::<f64>() / n;
            let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv_std = 1.0 / (var + NORM_EPS).sqrt();
            let gain = self.gain(k).expect("normalized layer has gain");
            let offset = self.offset(k).expect("normalized layer has offset");
            let normed: Vec<f64> = z.iter().map(|v| (v - mean) * inv_std).collect();
            for ((zj, &nj), (&g, &o)) in z.iter_mut().zip(&normed).zip(gain.iter().zip(offset)) {
                *zj = g * nj + o;
            }
            Some(NormCache { normed, inv_std })
        } else {
            None
        };
        for v in &mut z {
            *v = s.activation.apply(*v);
        }
        (z, norm)
    }

    /// Backpropagates `upstream` (gradient of a scalar with respect to the
    /// network output) through a recorded trace. Parameter gradients are
    /// accumulated into `grad`; the gradient with respect to the input is returned.
    pub fn backward_trace(
        &self,
        trace: &Trace,
        upstream: &[f64],
        grad: &mut Gradient,
    ) -> Result<Vec<f64>> {
        ensure_dim("gradient length", self.param_count(), grad.values.len())?;
        self.backprop(trace, upstream, Some(grad))
    }

    /// Gradient with respect to the input only; parameter gradients are skipped.
    pub fn input_gradient(&self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        self.backprop(trace, upstream, None)
    }

    fn backprop(
        &self,
        trace: &Trace,
        upstream: &[f64],
        mut grad: Option<&mut Gradient>,
    ) -> Result<Vec<f64>> {
        ensure_dim("backward upstream", self.output_dim(), upstream.len())?;
        ensure_dim("trace depth", self.shapes.len() + 1, trace.activations.len())?;
        let mut delta = upstream.to_vec();
        for k in (0..self.shapes.len()).rev() {
            let s = self.shapes[k];
            let x = &trace.activations[k];
            let y = &trace.activations[k + 1];
            let mut dz: Vec<f64> = delta
                .iter()
                .zip(y)
                .map(|(d, &yj)| d * s.activation.derivative_from_output(yj))
                .collect();
            let base = self.offsets[k];
            let w_len = s.inputs * s.outputs;
            if let Some(cache) = &trace.norms[k] {
                let gain = self.gain(k).expect("normalized layer has gain");
                if let Some(grad) = grad.as_deref_mut() {
                    let g_gain = base + w_len + s.outputs;
                    let g_off = g_gain + s.outputs;
                    for j in 0..s.outputs {
                        grad.values[g_gain + j] += dz[j] * cache.normed[j];
                        grad.values[g_off + j] += dz[j];
                    }
                }
                let n = s.outputs as f64;
                let dn: Vec<f64> = dz.iter().zip(gain).map(|(d, g)| d * g).collect();
                let mean_dn = dn.iter().sum::<f64>() / n;
                let mean_dn_n = dn.iter().zip(&cache.normed).map(|(a, b)| a * b).sum::<f64>() / n;
                for j in 0..s.outputs {
                    dz[j] = cache.inv_std * (dn[j] - mean_dn - cache.normed[j] * mean_dn_n);
                }
            }
            let w = self.weights(k);
            if let Some(grad) = grad.as_deref_mut() {
                let gw = &mut grad.values[base..base + w_len];
                for (grow, &dzj) in gw.chunks_exact_mut(s.inputs).zip(&dz) {
                    if dzj != 0.0 {
                        for (g, &xi) in grow.iter_mut().zip(x) {
                            *g += dzj * xi;
                        }
                    }
                }
                let gb = &mut grad.values[base + w_len..base + w_len + s.outputs];
                for (g, &dzj) in gb.iter_mut().zip(&dz) {
                    *g += dzj;
                }
            }
            let mut dx = vec![0.0; s.inputs];
            for (row, &dzj) in w.chunks_exact(s.inputs).zip(&dz) {
                if dzj != 0.0 {
                    for (d, &wji) in dx.iter_mut().zip(row) {
                        *d += wji * dzj;
                    }
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// Exact gradients of `upstream · forward(input)` with respect to the
    /// parameters and the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(Gradient, Vec<f64>)> {
        let trace = self.trace(input)?;
        let mut grad = Gradient::zeros_like(self);
        let input_grad = self.backward_trace(&trace, upstream, &mut grad)?;
        Ok((grad, input_grad))
    }

    /// Moves every parameter toward `source`: `self = tau * source + (1 - tau) * self`.
    pub fn soft_update(&mut self, source: &Network, tau: f64) -> Result<()> {
        self.ensure_same_shape(source, "soft update")?;
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidArgument(format!("tau must lie in [0, 1], got {tau}")));
        }
        let keep = 1.0 - tau;
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = tau * s + keep * *t;
        }
        Ok(())
    }

    /// Copy with independent `N(0, sigma^2)` noise added to every weight and
    /// bias. Normalization gains and offsets are left untouched.
    pub fn perturb<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<Network> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "perturbation sigma must be >= 0, got {sigma}"
            )));
        }
        let mut out = self.clone();
        if sigma == 0.0 {
            return Ok(out);
        }
        for k in 0..out.shapes.len() {
            let (w, b) = out.weights_and_bias_mut(k);
            for v in w.iter_mut().chain(b.iter_mut()) {
                let z: f64 = StandardNormal.sample(rng);
                *v += sigma * z;
            }
        }
        Ok(out)
    }

    pub fn to_snapshot(&self) -> String {
        let mut out = format!("network {}\n", self.shapes.len());
        for s in &self.shapes {
            out.push_str(&format!(
                "layer {} {} {} {}\n",
                s.inputs,
                s.outputs,
                s.activation.name(),
                if s.normalized { "norm" } else { "plain" }
            ));
        }
        out.push_str(&format!("params {}\n", self.params.len()));
        for v in &self.params {
            out.push_str(&format!("{v:?}\n"));
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let net = Self::read_snapshot(&mut lines)?;
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Parse("trailing content after network snapshot".into()));
        }
        Ok(net)
    }

    /// Reads one snapshot from a line stream, leaving the stream positioned
    /// after the last parameter line.
    pub fn read_snapshot<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<Self> {
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("snapshot ended before {what}")))
        };
        let n_layers: usize = header_value(next("network header")?, "network")?;
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let line = next("layer line")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 || parts[0] != "layer" {
                return Err(Error::Parse(format!("bad layer line `{line}`")));
            }
            let normalized = match parts[4] {
                "norm" => true,
                "plain" => false,
                other => return Err(Error::Parse(format!("bad normalization flag `{other}`"))),
            };
            shapes.push(
                LayerShape::new(
                    parse_num(parts[1])?,
                    parse_num(parts[2])?,
                    Activation::parse(parts[3])?,
                )
                .normalized(normalized),
            );
        }
        let mut net = Self::zeros(shapes)?;
        let count: usize = header_value(next("params header")?, "params")?;
        ensure_dim("snapshot parameter count", net.params.len(), count)?;
        for v in net.params.iter_mut() {
            *v = parse_num(next("parameter value")?.trim())?;
        }
        ensure_finite("snapshot parameters", &net.params)?;
        Ok(net)
    }
}

fn header_value<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    match line.split_once(' ') {
        Some((k, v)) if k == key => parse_num(v.trim()),
        _ => Err(Error::Parse(format!("expected `{key} <n>`, found `{line}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("cannot parse number `{s}`")))
}

/// Dot product with four independent partial sums so the loop pipelines.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone)]
struct NormCache {
    normed: Vec<f64>,
    inv_std: f64,
}

/// Recorded forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
    norms: Vec<Option<NormCache>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds the input at least")
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.activations.pop().expect("trace holds the input at least")
    }
}

/// Parameter gradient in the flat layout of its [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    values: Vec<f64>,
}

impl Gradient {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            values: vec![0.0; net.param_count()],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Adam optimizer state for one network. `step` minimizes: parameters move
/// against the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    steps: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(net: &Network, lr: f64) -> Result<Self> {
        Self::with_params(net, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_params(net: &Network, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !(lr.is_finite() && lr > 0.0 && in_unit(beta1) && in_unit(beta2) && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bad Adam hyperparameters lr={lr} beta1={beta1} beta2={beta2} eps={epsilon}"
            )));
        }
        Ok(Self {
            lr,
            beta1,
            beta2,
            epsilon,
            steps: 0,
            m: vec![0.0; net.param_count()],
            v: vec![0.0; net.param_count()],
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected Adam update. The gradient is validated before any
    /// state changes.
    pub fn step(&mut self, net: &mut Network, grad: &Gradient) -> Result<()> {
        ensure_dim("Adam moments", self.m.len(), net.param_count())?;
        ensure_dim("Adam gradient", net.param_count(), grad.values.len())?;
        if let Some(bad) = grad.values.iter().position(|g| !g.is_finite()) {
            let (layer, kind) = net.locate(bad).expect("index within parameters");
            return Err(Error::NonFinite(format!(
                "gradient of layer {layer} ({kind:?} parameter, flat index {bad})"
            )));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in net
            .params
            .iter_mut()
            .zip(&grad.values)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Root-mean-square difference between the outputs of two networks over a
/// set of probe inputs (mean over probes and output dimensions).
pub fn action_distance(a: &Network, b: &Network, probes: &[Vec<f64>]) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("action distance needs probe states".into()));
    }
    ensure_dim("action distance output", a.output_dim(), b.output_dim())?;
    let mut sum = 0.0;
    for s in probes {
        let ya = a.forward(s)?;
        let yb = b.forward(s)?;
        sum += ya.iter().zip(&yb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    Ok((sum / (probes.len() * a.output_dim()) as f64).sqrt())
}
