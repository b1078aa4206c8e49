//! Dense (affine + activation) layer with exact analytic gradients.

use ndarray::{Array1, Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::activation::{Activation, ForwardMode};
use super::{init_matrix, init_vector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DenseLayer {
    /// out x in.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Forward-pass values the backward pass needs.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Array2<f64>,
    pub pre: Array2<f64>,
    pub slopes: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        DenseGrads {
            weights: Array2::zeros(layer.weights.raw_dim()),
            bias: Array1::zeros(layer.bias.raw_dim()),
        }
    }

    pub fn flatten(&self, out: &mut Vec<f64>) {
        out.extend(self.weights.iter());
        out.extend(self.bias.iter());
    }
}

impl DenseLayer {
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        DenseLayer {
            weights: init_matrix(out_dim, in_dim, in_dim, rng),
            bias: init_vector(out_dim, in_dim, rng),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn flatten_params(&self, out: &mut Vec<f64>) {
        out.extend(self.weights.iter());
        out.extend(self.bias.iter());
    }

    /// Load parameters from the front of `flat`, returning the remainder.
    pub fn load_params<'a>(&mut self, flat: &'a [f64]) -> &'a [f64] {
        let nw = self.weights.len();
        let nb = self.bias.len();
        for (dst, &src) in self.weights.iter_mut().zip(&flat[..nw]) {
            *dst = src;
        }
        for (dst, &src) in self.bias.iter_mut().zip(&flat[nw..nw + nb]) {
            *dst = src;
        }
        &flat[nw + nb..]
    }

    /// `batch x in` -> `batch x out`.
    pub fn forward(
        &self,
        input: &Array2<f64>,
        mode: &mut ForwardMode<'_>,
    ) -> Result<(Array2<f64>, DenseCache)> {
        if input.ncols() != self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "dense forward: input width {} vs layer in_dim {}",
                input.ncols(),
                self.in_dim()
            )));
        }
        let pre = input.dot(&self.weights.t()) + &self.bias;
        let (out, slopes) = self.activation.forward(&pre, mode);
        Ok((out, DenseCache { input: input.clone(), pre, slopes }))
    }

    /// Gradients of a scalar loss given `dL/d(output)`. Sums over the batch.
    pub fn backward(
        &self,
        cache: &DenseCache,
        upstream: &Array2<f64>,
    ) -> Result<(DenseGrads, Array2<f64>)> {
        if upstream.dim() != cache.pre.dim() {
            return Err(Error::ShapeMismatch(format!(
                "dense backward: upstream {:?} vs pre {:?}",
                upstream.dim(),
                cache.pre.dim()
            )));
        }
        let dpre = upstream * &self.activation.derivative(&cache.pre, cache.slopes.as_ref());
        let grads = DenseGrads {
            weights: dpre.t().dot(&cache.input),
            bias: dpre.sum_axis(Axis(0)),
        };
        let dinput = dpre.dot(&self.weights);
        Ok((grads, dinput))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mse_loss;
    use crate::seed::rng_from_seed;
    use ndarray::array;

    #[test]
    fn hand_arithmetic_identity_case() {
        // identity activation, W = [[2]], b = [1], x = [3] -> [7]
        let layer = DenseLayer {
            weights: array![[2.0]],
            bias: array![1.0],
            activation: Activation::Identity,
        };
        let (out, _) = layer.forward(&array![[3.0]], &mut ForwardMode::Eval).unwrap();
        assert_eq!(out, array![[7.0]]);
    }

    #[test]
    fn relu_blocks_negative_preactivations() {
        let layer = DenseLayer {
            weights: array![[1.0]],
            bias: array![0.0],
            activation: Activation::Relu,
        };
        let (out, cache) = layer.forward(&array![[-2.0]], &mut ForwardMode::Eval).unwrap();
        assert_eq!(out, array![[0.0]]);
        let (grads, dx) = layer.backward(&cache, &array![[1.0]]).unwrap();
        assert_eq!(grads.weights, array![[0.0]]);
        assert_eq!(grads.bias, array![0.0]);
        assert_eq!(dx, array![[0.0]]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let layer = DenseLayer::init(3, 2, Activation::Identity, &mut rng_from_seed(0));
        assert!(layer.forward(&Array2::zeros((1, 4)), &mut ForwardMode::Eval).is_err());
    }

    /// Central finite differences over every parameter and input of a random
    /// dense layer, for each activation kind.
    #[test]
    fn gradients_match_finite_differences() {
        let eps = 1e-5;
        for trial in 0..100 {
            let activation = match trial % 4 {
                0 => Activation::Identity,
                1 => Activation::Relu,
                2 => Activation::Sigmoid,
                _ => Activation::RRelu,
            };
            let mut rng = rng_from_seed(1000 + trial);
            let mut layer = DenseLayer::init(4, 3, activation, &mut rng);
            let x = super::super::init_matrix(2, 4, 1, &mut rng);
            let target = super::super::init_matrix(2, 3, 1, &mut rng);

            // RReLU is checked in eval mode so the loss is a deterministic
            // function of the parameters.
            let loss_of = |layer: &DenseLayer, x: &Array2<f64>| {
                let (out, _) = layer.forward(x, &mut ForwardMode::Eval).unwrap();
                mse_loss(&out, &target).unwrap().0
            };

            let (out, cache) = layer.forward(&x, &mut ForwardMode::Eval).unwrap();
            let (_, dout) = mse_loss(&out, &target).unwrap();
            let (grads, dx) = layer.backward(&cache, &dout).unwrap();

            let check = |analytic: f64, fd: f64| {
                let denom = analytic.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (analytic - fd).abs() / denom < 1e-4,
                    "trial {trial} {activation:?}: analytic {analytic} vs fd {fd}"
                );
            };

            for idx in 0..layer.weights.len() {
                let orig = layer.weights.as_slice().unwrap()[idx];
                layer.weights.as_slice_mut().unwrap()[idx] = orig + eps;
                let up = loss_of(&layer, &x);
                layer.weights.as_slice_mut().unwrap()[idx] = orig - eps;
                let down = loss_of(&layer, &x);
                layer.weights.as_slice_mut().unwrap()[idx] = orig;
                check(grads.weights.as_slice().unwrap()[idx], (up - down) / (2.0 * eps));
            }
            for idx in 0..layer.bias.len() {
                let orig = layer.bias[idx];
                layer.bias[idx] = orig + eps;
                let up = loss_of(&layer, &x);
                layer.bias[idx] = orig - eps;
                let down = loss_of(&layer, &x);
                layer.bias[idx] = orig;
                check(grads.bias[idx], (up - down) / (2.0 * eps));
            }
            for idx in 0..x.len() {
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus.as_slice_mut().unwrap()[idx] += eps;
                minus.as_slice_mut().unwrap()[idx] -= eps;
                check(
                    dx.as_slice().unwrap()[idx],
                    (loss_of(&layer, &plus) - loss_of(&layer, &minus)) / (2.0 * eps),
                );
            }
        }
    }
}
