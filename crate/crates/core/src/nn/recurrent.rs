//! ReLU recurrent cells and backpropagation through time.

use ndarray::{Array1, Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::{init_matrix, init_vector};
use crate::error::{Error, Result};

/// One recurrent cell: `h_t = relu(W_in x_t + W_rec h_{t-1} + b)`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RecurrentLayer {
    /// hidden x in.
    pub input_weights: Array2<f64>,
    /// hidden x hidden.
    pub recurrent_weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct RecurrentGrads {
    pub input_weights: Array2<f64>,
    pub recurrent_weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl RecurrentGrads {
    pub fn zeros_like(layer: &RecurrentLayer) -> Self {
        RecurrentGrads {
            input_weights: Array2::zeros(layer.input_weights.raw_dim()),
            recurrent_weights: Array2::zeros(layer.recurrent_weights.raw_dim()),
            bias: Array1::zeros(layer.bias.raw_dim()),
        }
    }

    pub fn flatten(&self, out: &mut Vec<f64>) {
        out.extend(self.input_weights.iter());
        out.extend(self.recurrent_weights.iter());
        out.extend(self.bias.iter());
    }
}

impl RecurrentLayer {
    pub fn init(in_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        RecurrentLayer {
            input_weights: init_matrix(hidden, in_dim, in_dim, rng),
            recurrent_weights: init_matrix(hidden, hidden, hidden, rng),
            bias: init_vector(hidden, in_dim, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.input_weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.input_weights.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.input_weights.len() + self.recurrent_weights.len() + self.bias.len()
    }

    pub fn flatten_params(&self, out: &mut Vec<f64>) {
        out.extend(self.input_weights.iter());
        out.extend(self.recurrent_weights.iter());
        out.extend(self.bias.iter());
    }

    pub fn load_params<'a>(&mut self, flat: &'a [f64]) -> &'a [f64] {
        let ni = self.input_weights.len();
        let nr = self.recurrent_weights.len();
        let nb = self.bias.len();
        for (dst, &src) in self.input_weights.iter_mut().zip(&flat[..ni]) {
            *dst = src;
        }
        for (dst, &src) in self.recurrent_weights.iter_mut().zip(&flat[ni..ni + nr]) {
            *dst = src;
        }
        for (dst, &src) in self.bias.iter_mut().zip(&flat[ni + nr..ni + nr + nb]) {
            *dst = src;
        }
        &flat[ni + nr + nb..]
    }

    /// One step over a batch: returns the new hidden state and the cached
    /// pre-activation.
    pub fn forward_step(
        &self,
        x: &Array2<f64>,
        h_prev: &Array2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        if x.ncols() != self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "recurrent forward: input width {} vs in_dim {}",
                x.ncols(),
                self.in_dim()
            )));
        }
        if h_prev.ncols() != self.hidden() {
            return Err(Error::ShapeMismatch(format!(
                "recurrent forward: hidden width {} vs hidden {}",
                h_prev.ncols(),
                self.hidden()
            )));
        }
        let pre = x.dot(&self.input_weights.t()) + h_prev.dot(&self.recurrent_weights.t()) + &self.bias;
        let h = pre.mapv(|v| v.max(0.0));
        Ok((h, pre))
    }

    /// Backward through one step. Accumulates into `grads` and returns
    /// `(dL/dx, dL/dh_prev)`.
    pub fn backward_step(
        &self,
        x: &Array2<f64>,
        h_prev: &Array2<f64>,
        pre: &Array2<f64>,
        dh: &Array2<f64>,
        grads: &mut RecurrentGrads,
    ) -> (Array2<f64>, Array2<f64>) {
        let dpre = dh * &pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        grads.input_weights += &dpre.t().dot(x);
        grads.recurrent_weights += &dpre.t().dot(h_prev);
        grads.bias += &dpre.sum_axis(Axis(0));
        (dpre.dot(&self.input_weights), dpre.dot(&self.recurrent_weights))
    }
}

/// Per-layer, per-step cache of a stacked RNN forward pass.
pub struct RnnCache {
    /// xs[layer][t]: input consumed by `layer` at step `t`.
    pub xs: Vec<Vec<Array2<f64>>>,
    /// pres[layer][t]: pre-activation.
    pub pres: Vec<Vec<Array2<f64>>>,
    /// hs[layer][t]: hidden states, with `hs[layer][0]` the initial state.
    pub hs: Vec<Vec<Array2<f64>>>,
}

/// Run a stack of recurrent layers over an input sequence.
///
/// Returns the top layer's hidden state per step plus the cache for BPTT.
pub fn rnn_forward(
    layers: &[RecurrentLayer],
    inputs: &[Array2<f64>],
    initial_hidden: &[Array2<f64>],
) -> Result<(Vec<Array2<f64>>, RnnCache)> {
    if inputs.is_empty() {
        return Err(Error::InvalidSpec("rnn forward: empty input sequence".into()));
    }
    if layers.len() != initial_hidden.len() {
        return Err(Error::ShapeMismatch(format!(
            "rnn forward: {} layers vs {} initial hidden states",
            layers.len(),
            initial_hidden.len()
        )));
    }
    let steps = inputs.len();
    let mut xs: Vec<Vec<Array2<f64>>> = vec![Vec::with_capacity(steps); layers.len()];
    let mut pres: Vec<Vec<Array2<f64>>> = vec![Vec::with_capacity(steps); layers.len()];
    let mut hs: Vec<Vec<Array2<f64>>> = initial_hidden.iter().map(|h| vec![h.clone()]).collect();

    for x in inputs {
        let mut layer_input = x.clone();
        for (l, layer) in layers.iter().enumerate() {
            let h_prev = hs[l].last().unwrap().clone();
            let (h, pre) = layer.forward_step(&layer_input, &h_prev)?;
            xs[l].push(layer_input);
            pres[l].push(pre);
            hs[l].push(h.clone());
            layer_input = h;
        }
    }
    let outputs = hs.last().unwrap()[1..].to_vec();
    Ok((outputs, RnnCache { xs, pres, hs }))
}

/// Full BPTT given `dL/d(top hidden)` per step. Returns parameter gradients
/// per layer and `dL/d(input)` per step.
pub fn rnn_backward(
    layers: &[RecurrentLayer],
    cache: &RnnCache,
    upstream: &[Array2<f64>],
) -> Result<(Vec<RecurrentGrads>, Vec<Array2<f64>>)> {
    let steps = cache.xs[0].len();
    if upstream.len() != steps {
        return Err(Error::ShapeMismatch(format!(
            "rnn backward: {} upstream grads vs {} steps",
            upstream.len(),
            steps
        )));
    }
    let top = layers.len() - 1;
    let mut grads: Vec<RecurrentGrads> = layers.iter().map(RecurrentGrads::zeros_like).collect();
    let mut dh_carry: Vec<Array2<f64>> = cache
        .hs
        .iter()
        .map(|h| Array2::zeros(h[0].raw_dim()))
        .collect();
    let mut dinputs = vec![Array2::zeros(cache.xs[0][0].raw_dim()); steps];

    for t in (0..steps).rev() {
        let mut from_above: Option<Array2<f64>> = None;
        for l in (0..layers.len()).rev() {
            let mut dh = dh_carry[l].clone();
            if l == top {
                dh += &upstream[t];
            }
            if let Some(above) = from_above.take() {
                dh += &above;
            }
            let (dx, dh_prev) = layers[l].backward_step(
                &cache.xs[l][t],
                &cache.hs[l][t],
                &cache.pres[l][t],
                &dh,
                &mut grads[l],
            );
            dh_carry[l] = dh_prev;
            if l == 0 {
                dinputs[t] = dx;
            } else {
                from_above = Some(dx);
            }
        }
    }
    Ok((grads, dinputs))
}
