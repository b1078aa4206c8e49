//! Minimal deterministic neural-network engine.
//!
//! Dense layers, ReLU recurrent cells with backpropagation through time,
//! RReLU/Sigmoid activations, MSE loss, and bias-corrected Adam. Everything is
//! f64, batch-first (`batch x dim` matrices), and seeded: the same seed always
//! produces the same parameters and the same training run.

mod activation;
mod adam;
mod dense;
mod recurrent;

pub use activation::{
    rrelu, Activation, ForwardMode, RRELU_HIGH, RRELU_INFERENCE_SLOPE, RRELU_LOW,
};
pub use adam::{adam_step, clip_global_norm, AdamState};
pub use dense::{DenseCache, DenseGrads, DenseLayer};
pub use recurrent::{rnn_backward, rnn_forward, RecurrentGrads, RecurrentLayer, RnnCache};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Mean-squared error over all elements plus its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mse: pred {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len() as f64;
    let diff = pred - target;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let grad = diff.mapv(|d| 2.0 * d / n);
    Ok((loss, grad))
}

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], row-major fill order.
pub fn init_matrix(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

/// Uniform init for a bias vector with the same fan-in scaling.
pub fn init_vector(len: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array1::from_iter((0..len).map(|_| rng.random_range(-bound..bound)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn mse_cases() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let (loss, grad) = mse_loss(&a, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));

        // pred - target = [3, 4], N = 2 -> (9 + 16) / 2 = 12.5
        let pred = array![[3.0, 4.0]];
        let target = array![[0.0, 0.0]];
        let (loss, grad) = mse_loss(&pred, &target).unwrap();
        assert_eq!(loss, 12.5);
        assert_eq!(grad, array![[3.0, 4.0]]);

        assert!(mse_loss(&pred, &array![[0.0]]).is_err());
    }

    #[test]
    fn mse_grad_matches_finite_differences() {
        let mut rng = rng_from_seed(31);
        for _ in 0..100 {
            let pred = init_matrix(3, 4, 1, &mut rng);
            let target = init_matrix(3, 4, 1, &mut rng);
            let (_, grad) = mse_loss(&pred, &target).unwrap();
            let eps = 1e-5;
            for idx in 0..pred.len() {
                let mut plus = pred.clone();
                let mut minus = pred.clone();
                plus.as_slice_mut().unwrap()[idx] += eps;
                minus.as_slice_mut().unwrap()[idx] -= eps;
                let fd = (mse_loss(&plus, &target).unwrap().0
                    - mse_loss(&minus, &target).unwrap().0)
                    / (2.0 * eps);
                let a = grad.as_slice().unwrap()[idx];
                let denom = a.abs().max(fd.abs()).max(1e-8);
                assert!((a - fd).abs() / denom < 1e-4, "analytic {a} vs fd {fd}");
            }
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_matrix(4, 5, 5, &mut rng_from_seed(9));
        let b = init_matrix(4, 5, 5, &mut rng_from_seed(9));
        let c = init_matrix(4, 5, 5, &mut rng_from_seed(10));
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = 1.0 / 5f64.sqrt();
        assert!(a.iter().all(|&v| v > -bound && v < bound));
    }

    #[test]
    fn training_descends_on_synthetic_regression() {
        // Two dense layers fit y = sin-ish function of 3 inputs; after 100
        // Adam epochs the MSE must fall below 10% of the initial MSE.
        let mut rng = rng_from_seed(77);
        let n = 64;
        let x = init_matrix(n, 3, 1, &mut rng);
        let y = Array2::from_shape_fn((n, 1), |(i, _)| {
            let r = x.row(i);
            (r[0] - 0.5 * r[1]).sin() + 0.25 * r[2]
        });

        let mut l1 = DenseLayer::init(3, 16, Activation::Relu, &mut rng);
        let mut l2 = DenseLayer::init(16, 1, Activation::Identity, &mut rng);
        let n_params = l1.param_count() + l2.param_count();
        let mut adam = AdamState::new(0.01, n_params);

        let mut initial = None;
        let mut last = 0.0;
        for _ in 0..100 {
            let (h, c1) = l1.forward(&x, &mut ForwardMode::Eval).unwrap();
            let (out, c2) = l2.forward(&h, &mut ForwardMode::Eval).unwrap();
            let (loss, dout) = mse_loss(&out, &y).unwrap();
            initial.get_or_insert(loss);
            last = loss;
            let (g2, dh) = l2.backward(&c2, &dout).unwrap();
            let (g1, _) = l1.backward(&c1, &dh).unwrap();

            let mut params = Vec::with_capacity(n_params);
            l1.flatten_params(&mut params);
            l2.flatten_params(&mut params);
            let mut grads = Vec::with_capacity(n_params);
            g1.flatten(&mut grads);
            g2.flatten(&mut grads);
            adam_step(&mut adam, &mut params, &grads).unwrap();
            let rest = l1.load_params(&params);
            l2.load_params(rest);
        }
        let initial = initial.unwrap();
        assert!(
            last < 0.1 * initial,
            "mse after 100 epochs {last} vs initial {initial}"
        );
    }

    #[test]
    fn sigmoid_outputs_stay_in_open_unit_interval() {
        let mut rng = rng_from_seed(5);
        let layer = DenseLayer::init(4, 6, Activation::Sigmoid, &mut rng);
        for _ in 0..50 {
            // Pre-activations up to ~30; beyond ~36.7 the f64 result rounds
            // to exactly 1.0.
            let x = init_matrix(8, 4, 1, &mut rng).mapv(|v| v * 12.0);
            let (out, _) = layer.forward(&x, &mut ForwardMode::Eval).unwrap();
            assert!(out.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        let edge = Array2::from_shape_vec((1, 2), vec![30.0, -30.0]).unwrap();
        let (out, _) = DenseLayer {
            weights: array![[1.0, 0.0], [0.0, 1.0]],
            bias: array![0.0, 0.0],
            activation: Activation::Sigmoid,
        }
        .forward(&edge, &mut ForwardMode::Eval)
        .unwrap();
        assert!(out[[0, 0]] > 0.0 && out[[0, 0]] < 1.0);
        assert!(out[[0, 1]] > 0.0 && out[[0, 1]] < 1.0);
        assert_relative_eq!(out[[0, 0]], 1.0, epsilon = 1e-12);
    }
}
