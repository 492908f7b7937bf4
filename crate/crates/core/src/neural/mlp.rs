//! Fully-connected networks with hand-written reverse-mode gradients.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::spectral::{initial_vector, power_iteration, top_singular_triplet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Swish,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Swish => x / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative evaluated at the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Swish => {
                let s = 1.0 / (1.0 + (-x).exp());
                s + x * s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Affine layer `y = W x + b` with `W` stored as `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SpectralState {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub sigma: f64,
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl MlpGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.weight.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weight *= factor;
            l.bias *= factor;
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weight.iter().map(|x| x * x).sum::<f64>() + l.bias.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }
}

/// Activations recorded by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    out_pre: Array2<f64>,
}

/// Multilayer perceptron: `hidden` activation on every hidden layer and a
/// linear output unless [`with_output_activation`](Mlp::with_output_activation)
/// says otherwise. Optionally spectrally normalized: every layer then uses
/// `W / sigma(W)`, with `sigma` tracked by persistent power-iteration vectors
/// that are refreshed explicitly via [`Mlp::refresh_spectral`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
    spectral: Option<Vec<SpectralState>>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. `sizes` includes input and output.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                Dense {
                    weight: Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(rng)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Mlp {
            layers,
            hidden,
            output: Activation::Identity,
            spectral: None,
        })
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::dims(
                    w[0].outputs(),
                    w[1].inputs(),
                    format!("layer {} input", i + 1),
                ));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::dims(l.outputs(), l.bias.len(), format!("layer {i} bias")));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters")));
            }
        }
        let layers = layers
            .into_iter()
            .map(|l| Dense {
                weight: l.weight.as_standard_layout().into_owned(),
                bias: l.bias.as_standard_layout().into_owned(),
            })
            .collect();
        Ok(Mlp {
            layers,
            hidden,
            output: Activation::Identity,
            spectral: None,
        })
    }

    pub fn with_output_activation(mut self, output: Activation) -> Self {
        self.output = output;
        self
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    /// Multiplies the output layer's weights, e.g. to start a policy head
    /// near zero.
    pub fn scale_output_layer(&mut self, factor: f64) {
        if let Some(last) = self.layers.last_mut() {
            last.weight *= factor;
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameter tensors in a fixed order (weight, bias per layer), for optimizers.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    /// Turns on spectral normalization; `warmup_iters` power iterations seed
    /// the persistent vectors.
    pub fn enable_spectral_norm(&mut self, warmup_iters: usize) {
        let states = self
            .layers
            .iter()
            .map(|l| {
                let u0 = initial_vector(l.outputs());
                let (u, v, sigma) = power_iteration(l.weight.view(), u0.view(), warmup_iters);
                SpectralState { u, v, sigma }
            })
            .collect();
        self.spectral = Some(states);
    }

    pub fn spectral_norm_enabled(&self) -> bool {
        self.spectral.is_some()
    }

    /// Advances every layer's power iteration by `iters` rounds from its
    /// stored vectors. No-op without spectral normalization.
    pub fn refresh_spectral(&mut self, iters: usize) {
        if let Some(states) = &mut self.spectral {
            for (s, l) in states.iter_mut().zip(&self.layers) {
                let (u, v, sigma) = power_iteration(l.weight.view(), s.u.view(), iters);
                *s = SpectralState { u, v, sigma };
            }
        }
    }

    /// Sets every layer's spectral state to its exact top singular triplet.
    pub fn refresh_spectral_exact(&mut self) {
        if let Some(states) = &mut self.spectral {
            for (s, l) in states.iter_mut().zip(&self.layers) {
                let (u, v, sigma) = top_singular_triplet(l.weight.view(), s.u.view());
                *s = SpectralState { u, v, sigma };
            }
        }
    }

    /// Current sigma estimates, one per layer.
    pub fn spectral_sigmas(&self) -> Option<Vec<f64>> {
        self.spectral.as_ref().map(|s| s.iter().map(|x| x.sigma).collect())
    }

    pub(crate) fn spectral_states(&self) -> Option<&[SpectralState]> {
        self.spectral.as_deref()
    }

    pub(crate) fn set_spectral_states(&mut self, states: Option<Vec<SpectralState>>) {
        self.spectral = states;
    }

    #[inline]
    fn weight_scale(&self, layer: usize) -> f64 {
        match &self.spectral {
            Some(s) if s[layer].sigma > 0.0 => 1.0 / s[layer].sigma,
            _ => 1.0,
        }
    }

    /// The matrix actually applied by layer `layer` (after normalization).
    pub fn effective_weight(&self, layer: usize) -> Array2<f64> {
        &self.layers[layer].weight * self.weight_scale(layer)
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(Error::dims(self.input_dim(), got, "network input"));
        }
        Ok(())
    }

    fn affine(&self, layer: usize, h: &ArrayView2<f64>) -> Array2<f64> {
        let l = &self.layers[layer];
        let mut z = h.dot(&l.weight.t());
        let scale = self.weight_scale(layer);
        if scale != 1.0 {
            z *= scale;
        }
        z += &l.bias;
        z
    }

    /// Batched forward pass; one row per sample.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut h = self.affine(0, &x);
        for l in 1..=last {
            h.mapv_inplace(|v| self.hidden.apply(v));
            h = self.affine(l, &h.view());
        }
        if self.output != Activation::Identity {
            h.mapv_inplace(|v| self.output.apply(v));
        }
        Ok(h)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x.ncols())?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n - 1);
        let mut out_pre = Array2::zeros((0, 0));
        let mut h = x.to_owned();
        for l in 0..n {
            let z = self.affine(l, &h.view());
            inputs.push(h);
            if l + 1 < n {
                h = z.mapv(|v| self.hidden.apply(v));
                pre.push(z);
            } else {
                h = z.mapv(|v| self.output.apply(v));
                out_pre = z;
            }
        }
        Ok((h, ForwardCache { inputs, pre, out_pre }))
    }

    /// Reverse pass for a cached forward. `upstream` is dL/d(output), one row
    /// per sample; gradients are summed over rows.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<(MlpGrads, Array2<f64>)> {
        let batch = cache.inputs[0].nrows();
        if upstream.nrows() != batch || upstream.ncols() != self.output_dim() {
            return Err(Error::dims(self.output_dim(), upstream.ncols(), "upstream gradient"));
        }
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut delta = upstream.to_owned();
        if self.output != Activation::Identity {
            let out = self.output;
            Zip::from(&mut delta)
                .and(&cache.out_pre)
                .for_each(|d, &z| *d *= out.derivative(z));
        }
        let mut input_grad = Array2::zeros((0, 0));
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let scale = self.weight_scale(l);
            let mut g_w = delta.t().dot(&cache.inputs[l]);
            // A one-row batch makes both operands column-major, and so the product.
            if !g_w.is_standard_layout() {
                g_w = g_w.as_standard_layout().into_owned();
            }
            let g_b = delta.sum_axis(Axis(0));
            let mut d_in = delta.dot(&layer.weight);
            if scale != 1.0 {
                d_in *= scale;
            }
            if let Some(states) = &self.spectral {
                // W_eff = W / sigma with sigma = u^T W v:
                // dL/dW = (G - <G, W_eff> u v^T) / sigma
                let s = &states[l];
                let inner: f64 = Zip::from(&g_w).and(&layer.weight).fold(0.0, |acc, g, w| acc + g * w) * scale;
                Zip::from(g_w.rows_mut()).and(&s.u).for_each(|mut row, &ui| {
                    row.scaled_add(-inner * ui, &s.v);
                });
                g_w *= scale;
            }
            grads.push(Dense { weight: g_w, bias: g_b });
            if l > 0 {
                let hidden = self.hidden;
                Zip::from(&mut d_in)
                    .and(&cache.pre[l - 1])
                    .for_each(|d, &z| *d *= hidden.derivative(z));
                delta = d_in;
            } else {
                input_grad = d_in;
            }
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, input_grad))
    }

    /// Exact gradients of `upstream . f(input)` with respect to parameters and input.
    pub fn grad(&self, input: &[f64], upstream: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        self.check_input(input.len())?;
        if upstream.len() != self.output_dim() {
            return Err(Error::dims(self.output_dim(), upstream.len(), "upstream gradient"));
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous slice");
        let (_, cache) = self.forward_cached(x)?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("contiguous slice");
        let (g, gi) = self.backward(&cache, up)?;
        Ok((g, gi.into_raw_vec_and_offset().0))
    }

    pub fn forward_vec(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let x = x.to_owned();
        Ok(Array1::from(self.forward(x.as_slice().expect("owned"))?))
    }
}
