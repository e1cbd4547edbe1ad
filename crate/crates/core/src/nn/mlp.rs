use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
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
}

/// Fully connected layer computing `act(x W + b)` on row-major batches.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `inputs x outputs`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

/// Activations recorded by [`Mlp::forward_cached`]; consumed by [`Mlp::backward`].
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> Option<&Array2<f64>> {
        self.activations.last()
    }
}

/// Per-layer parameter gradients, congruent with the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    /// Flattened in the same order as [`Mlp::params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    /// Fan-in uniform initialisation; the final layer is multiplied by `output_scale`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter {
                name: "layer sizes",
                reason: format!("need at least two positive sizes, got {sizes:?}"),
            });
        }
        let n = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n);
        for (i, pair) in sizes.windows(2).enumerate() {
            let last = i + 1 == n;
            let activation = if last { Activation::Linear } else { hidden };
            let bound = 1.0 / (pair[0] as f64).sqrt();
            let scale = if last { output_scale } else { 1.0 };
            let mut layer = Dense::zeros(pair[0], pair[1], activation);
            layer
                .weights
                .mapv_inplace(|_| rng.random_range(-bound..bound) * scale);
            layer
                .bias
                .mapv_inplace(|_| rng.random_range(-bound..bound) * scale);
            layers.push(layer);
        }
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter {
                name: "layers",
                reason: "network needs at least one layer".into(),
            });
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::ShapeMismatch {
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::ShapeMismatch {
                    expected: l.outputs(),
                    actual: l.bias.len(),
                });
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Layer widths including the input, e.g. `[2, 64, 64, 4]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::outputs))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let input = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward_batch(input)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut h = self.layer_forward(0, x);
        for i in 1..self.layers.len() {
            h = self.layer_forward(i, h.view());
        }
        Ok(h)
    }

    /// Forward pass that keeps every activation for a later [`Mlp::backward`].
    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x.ncols())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for i in 0..self.layers.len() {
            let next = self.layer_forward(i, activations[i].view());
            activations.push(next);
        }
        let out = activations[activations.len() - 1].clone();
        Ok((out, ForwardCache { activations }))
    }

    /// Reverse-mode pass: given `dL/d(output)` for the cached batch, returns
    /// the parameter gradients and `dL/d(input)`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::MissingForwardCache);
        }
        let out = &cache.activations[self.layers.len()];
        if upstream.dim() != out.dim() {
            return Err(Error::ShapeMismatch {
                expected: out.len(),
                actual: upstream.len(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[i + 1];
            if layer.activation != Activation::Linear {
                ndarray::Zip::from(&mut delta)
                    .and(y)
                    .for_each(|d, &y| *d *= layer.activation.derivative_from_output(y));
            }
            let x = &cache.activations[i];
            let dw = x.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            let dx = delta.dot(&layer.weights.t());
            grads.push((dw, db));
            delta = dx;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::ShapeMismatch {
                expected: self.num_params(),
                actual: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    /// Mutable views of every parameter in [`Mlp::params`] order.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Polyak averaging `self <- (1 - tau) self + tau src`.
    pub fn soft_update_from(&mut self, src: &Mlp, tau: f64) {
        for (dst, s) in self.layers.iter_mut().zip(&src.layers) {
            dst.weights.zip_mut_with(&s.weights, |d, &s| *d += tau * (s - *d));
            dst.bias.zip_mut_with(&s.bias, |d, &s| *d += tau * (s - *d));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    fn layer_forward(&self, i: usize, x: ArrayView2<f64>) -> Array2<f64> {
        let layer = &self.layers[i];
        let mut z = x.dot(&layer.weights);
        z += &layer.bias;
        if layer.activation != Activation::Linear {
            z.mapv_inplace(|v| layer.activation.apply(v));
        }
        z
    }
}
