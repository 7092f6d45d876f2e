//! Dense feed-forward network with hand-written backpropagation.
//!
//! Parameters live in one flat vector so that federated fusion can treat a
//! model as a plain list of scalars. Layer `l` occupies a contiguous block:
//! its `fan_in x fan_out` weights stored input-major (`w[i * fan_out + o]`),
//! followed by its `fan_out` biases.

mod gradcheck;
mod snapshot;

pub use gradcheck::{gradient_check, gradient_check_with, max_relative_error};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrlError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => x.max(S::zero()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn grad_from_output<S: Scalar>(self, y: S) -> S {
        match self {
            Activation::Relu => {
                if y > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Identity => S::one(),
        }
    }
}

/// Network topology. The output layer is always linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        Self::with_activation(layer_sizes, Activation::Relu)
    }

    pub fn with_activation(layer_sizes: Vec<usize>, hidden_activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(FrlError::Config("a network needs at least an input and an output layer".into()));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(FrlError::Config(format!("zero-width layer in {layer_sizes:?}")));
        }
        Ok(Self { layer_sizes, hidden_activation })
    }

    /// `[obs_dim, hidden..., num_actions]`.
    pub fn dqn(obs_dim: usize, hidden: &[usize], num_actions: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(num_actions);
        Self::new(sizes)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layout(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let l = LayerLayout { fan_in: w[0], fan_out: w[1], w_off: offset, b_off: offset + w[0] * w[1] };
                offset = l.b_off + l.fan_out;
                l
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    fan_in: usize,
    fan_out: usize,
    w_off: usize,
    b_off: usize,
}

/// All weights and biases of a network, flattened layer by layer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightVector<S>(Vec<S>);

impl<S: Scalar> WeightVector<S> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![S::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<S> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.0.iter()
    }

    pub fn cast<T: Scalar>(&self) -> WeightVector<T> {
        WeightVector(self.0.iter().map(|&x| T::lit(x.as_f64())).collect())
    }
}

impl<S> From<Vec<S>> for WeightVector<S> {
    fn from(v: Vec<S>) -> Self {
        Self(v)
    }
}

/// Structured parameters of one layer: `weights[o][i]` maps input `i` to output `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<S> {
    pub weights: Vec<Vec<S>>,
    pub bias: Vec<S>,
}

/// Per-layer outputs retained from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations<S> {
    layers: Vec<Vec<S>>,
}

impl<S: Scalar> Activations<S> {
    pub fn new(spec: &MlpSpec) -> Self {
        Self { layers: spec.layer_sizes.iter().map(|&n| vec![S::zero(); n]).collect() }
    }

    pub fn output(&self) -> &[S] {
        self.layers.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    spec: MlpSpec,
    layout: Vec<LayerLayout>,
    params: WeightVector<S>,
}

impl<S: Scalar> Mlp<S> {
    pub fn zeros(spec: MlpSpec) -> Self {
        let len = spec.param_count();
        Self { layout: spec.layout(), spec, params: WeightVector::zeros(len) }
    }

    /// He-style uniform initialization: weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`,
    /// biases zero.
    pub fn he_uniform<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut net = Self::zeros(spec);
        for l in net.layout.clone() {
            let bound = (6.0 / l.fan_in as f64).sqrt();
            for w in &mut net.params.0[l.w_off..l.b_off] {
                *w = S::lit(rng.random_range(-bound..bound));
            }
        }
        net
    }

    pub fn from_weights(spec: MlpSpec, weights: WeightVector<S>) -> Result<Self> {
        if weights.len() != spec.param_count() {
            return Err(FrlError::Config(format!(
                "weight vector has {} entries, topology {:?} needs {}",
                weights.len(),
                spec.layer_sizes,
                spec.param_count()
            )));
        }
        Ok(Self { layout: spec.layout(), spec, params: weights })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightVector<S> {
        &self.params
    }

    pub fn weights_mut(&mut self) -> &mut [S] {
        &mut self.params.0
    }

    /// Overwrites every parameter. Panics on a length mismatch.
    pub fn set_weights(&mut self, weights: &[S]) {
        assert_eq!(weights.len(), self.params.len(), "weight vector length mismatch");
        self.params.0.copy_from_slice(weights);
    }

    pub fn to_layers(&self) -> Vec<LayerParams<S>> {
        self.layout
            .iter()
            .map(|l| {
                let w = &self.params.0[l.w_off..l.b_off];
                LayerParams {
                    weights: (0..l.fan_out).map(|o| (0..l.fan_in).map(|i| w[i * l.fan_out + o]).collect()).collect(),
                    bias: self.params.0[l.b_off..l.b_off + l.fan_out].to_vec(),
                }
            })
            .collect()
    }

    pub fn from_layers(spec: MlpSpec, layers: &[LayerParams<S>]) -> Result<Self> {
        let mut net = Self::zeros(spec);
        if layers.len() != net.layout.len() {
            return Err(FrlError::Config("layer count does not match topology".into()));
        }
        for (l, p) in net.layout.clone().iter().zip(layers) {
            if p.bias.len() != l.fan_out
                || p.weights.len() != l.fan_out
                || p.weights.iter().any(|row| row.len() != l.fan_in)
            {
                return Err(FrlError::Config("layer shape does not match topology".into()));
            }
            for (o, row) in p.weights.iter().enumerate() {
                for (i, &w) in row.iter().enumerate() {
                    net.params.0[l.w_off + i * l.fan_out + o] = w;
                }
            }
            net.params.0[l.b_off..l.b_off + l.fan_out].copy_from_slice(&p.bias);
        }
        Ok(net)
    }

    pub fn forward(&self, input: &[S]) -> Vec<S> {
        let mut acts = Activations::new(&self.spec);
        self.forward_cached(input, &mut acts);
        acts.layers.pop().unwrap()
    }

    /// Forward pass that keeps every layer's output in `acts`.
    pub fn forward_cached(&self, input: &[S], acts: &mut Activations<S>) {
        assert_eq!(input.len(), self.spec.input_dim(), "input dimension mismatch");
        acts.layers[0].copy_from_slice(input);
        let last = self.layout.len() - 1;
        for (k, l) in self.layout.iter().enumerate() {
            let (head, tail) = acts.layers.split_at_mut(k + 1);
            let x = &head[k];
            let out = &mut tail[0];
            affine(x, &self.params.0[l.w_off..l.b_off], &self.params.0[l.b_off..l.b_off + l.fan_out], out);
            if k != last {
                let act = self.spec.hidden_activation;
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
    }

    /// Gradient of a scalar loss with respect to every parameter, given the
    /// loss gradient with respect to the network output.
    pub fn backward(&self, input: &[S], output_gradient: &[S]) -> WeightVector<S> {
        let mut acts = Activations::new(&self.spec);
        self.forward_cached(input, &mut acts);
        let mut grad = WeightVector::zeros(self.params.len());
        self.accumulate_gradient(&acts, output_gradient, grad.as_mut_slice());
        grad
    }

    /// Adds the parameter gradient for one sample to `grad`. `acts` must hold
    /// the forward pass of that sample through this network.
    pub fn accumulate_gradient(&self, acts: &Activations<S>, output_gradient: &[S], grad: &mut [S]) {
        self.accumulate_batch_gradient(std::slice::from_ref(acts), output_gradient, grad);
    }

    /// Adds the parameter gradient summed over a batch to `grad`. `acts[b]`
    /// holds the forward pass of sample `b` and `output_gradients` the loss
    /// gradients of all samples back to back.
    pub fn accumulate_batch_gradient(&self, acts: &[Activations<S>], output_gradients: &[S], grad: &mut [S]) {
        assert_eq!(output_gradients.len(), acts.len() * self.spec.output_dim(), "output gradient dimension mismatch");
        assert_eq!(grad.len(), self.params.len(), "gradient buffer length mismatch");
        let zero = S::zero();
        let act = self.spec.hidden_activation;
        let mut delta = output_gradients.to_vec();
        let mut prev = Vec::new();
        let mut transposed = Vec::new();
        let mut nonzero = Vec::new();
        for (k, l) in self.layout.iter().enumerate().rev() {
            let w = &self.params.0[l.w_off..l.b_off];
            let (gw, gb) = grad[l.w_off..l.b_off + l.fan_out].split_at_mut(l.fan_in * l.fan_out);
            // a loss on a single output (the usual DQN case) gives one-hot deltas
            let sparse = delta.iter().filter(|&&d| d != zero).count() * 4 <= delta.len();
            for (a, d) in acts.iter().zip(delta.chunks_exact(l.fan_out)) {
                let x = &a.layers[k];
                for (b, &dv) in gb.iter_mut().zip(d) {
                    *b += dv;
                }
                if sparse {
                    nonzero.clear();
                    nonzero.extend((0..d.len()).filter(|&o| d[o] != zero));
                    for (&xi, row) in x.iter().zip(gw.chunks_exact_mut(l.fan_out)) {
                        nonzero.iter().for_each(|&o| row[o] += xi * d[o]);
                    }
                } else {
                    for (&xi, row) in x.iter().zip(gw.chunks_exact_mut(l.fan_out)) {
                        for (g, &dv) in row.iter_mut().zip(d) {
                            *g += xi * dv;
                        }
                    }
                }
            }
            if k == 0 {
                break;
            }
            prev.clear();
            prev.resize(acts.len() * l.fan_in, zero);
            let samples = acts.iter().zip(delta.chunks_exact(l.fan_out)).zip(prev.chunks_exact_mut(l.fan_in));
            if sparse {
                for ((a, d), p) in samples {
                    nonzero.clear();
                    nonzero.extend((0..d.len()).filter(|&o| d[o] != zero));
                    for ((pi, &xi), row) in p.iter_mut().zip(&a.layers[k]).zip(w.chunks_exact(l.fan_out)) {
                        let s: S = nonzero.iter().map(|&o| row[o] * d[o]).sum();
                        *pi = s * act.grad_from_output(xi);
                    }
                }
            } else {
                // back-propagating through W is a forward pass through W^T
                transposed.clear();
                transposed.resize(w.len(), zero);
                for (i, row) in w.chunks_exact(l.fan_out).enumerate() {
                    for (o, &v) in row.iter().enumerate() {
                        transposed[o * l.fan_in + i] = v;
                    }
                }
                let no_bias = vec![zero; l.fan_in];
                for ((a, d), p) in samples {
                    affine(d, &transposed, &no_bias, p);
                    for (pi, &xi) in p.iter_mut().zip(&a.layers[k]) {
                        *pi *= act.grad_from_output(xi);
                    }
                }
            }
            std::mem::swap(&mut delta, &mut prev);
        }
    }
}

/// `out[o] = bias[o] + sum_i x[i] * w[i * out.len() + o]`.
///
/// Outputs are computed in register-sized blocks whose partial sums stay in
/// registers across the input loop; even and odd inputs feed separate
/// accumulators to shorten the add dependency chains. A ragged tail is covered
/// by one overlapping block, which rewrites identical values.
fn affine<S: Scalar>(x: &[S], w: &[S], bias: &[S], out: &mut [S]) {
    debug_assert_eq!(w.len(), x.len() * out.len());
    match out.len() {
        n if n >= 64 => affine_blocks::<S, 64>(x, w, bias, out),
        n if n >= 32 => affine_blocks::<S, 32>(x, w, bias, out),
        n if n >= 8 => affine_blocks::<S, 8>(x, w, bias, out),
        _ => {
            out.copy_from_slice(bias);
            for (&xi, row) in x.iter().zip(w.chunks_exact(out.len())) {
                for (o, &wio) in out.iter_mut().zip(row) {
                    *o += xi * wio;
                }
            }
        }
    }
}

fn affine_blocks<S: Scalar, const B: usize>(x: &[S], w: &[S], bias: &[S], out: &mut [S]) {
    let fan_out = out.len();
    let mut start = 0;
    loop {
        let mut even = [S::zero(); B];
        let mut odd = [S::zero(); B];
        even.copy_from_slice(&bias[start..start + B]);
        let mut rows = x.iter().zip(w.chunks_exact(fan_out));
        while let Some((&x0, r0)) = rows.next() {
            let r0 = &r0[start..start + B];
            for j in 0..B {
                even[j] += x0 * r0[j];
            }
            let Some((&x1, r1)) = rows.next() else { break };
            let r1 = &r1[start..start + B];
            for j in 0..B {
                odd[j] += x1 * r1[j];
            }
        }
        for (o, (&e, &d)) in out[start..start + B].iter_mut().zip(even.iter().zip(&odd)) {
            *o = e + d;
        }
        if start + B == fan_out {
            break;
        }
        start = (start + B).min(fan_out - B);
    }
}


/// `w <- w - lr * g`, elementwise.
pub fn sgd_step<S: Scalar>(weights: &mut [S], gradient: &[S], lr: S) {
    assert_eq!(weights.len(), gradient.len(), "gradient length mismatch");
    for (w, &g) in weights.iter_mut().zip(gradient) {
        *w -= lr * g;
    }
}

/// Gradient descent with optional heavy-ball momentum (off when `momentum == 0`).
#[derive(Debug, Clone)]
pub struct Sgd<S> {
    pub lr: S,
    pub momentum: S,
    velocity: Vec<S>,
}

impl<S: Scalar> Sgd<S> {
    pub fn new(lr: S, momentum: S) -> Self {
        Self { lr, momentum, velocity: Vec::new() }
    }

    pub fn step(&mut self, weights: &mut [S], gradient: &[S]) {
        if self.momentum == S::zero() {
            return sgd_step(weights, gradient, self.lr);
        }
        if self.velocity.len() != weights.len() {
            self.velocity = vec![S::zero(); weights.len()];
        }
        for ((w, v), &g) in weights.iter_mut().zip(&mut self.velocity).zip(gradient) {
            *v = self.momentum * *v + g;
            *w -= self.lr * *v;
        }
    }

    /// Drops accumulated momentum, e.g. after the weights were replaced externally.
    pub fn reset(&mut self) {
        self.velocity.iter_mut().for_each(|v| *v = S::zero());
    }
}
