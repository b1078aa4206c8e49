//! Activation functions with cached derivatives.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// RReLU negative-slope range, sampled per element during training.
pub const RRELU_LOW: f64 = 0.125;
pub const RRELU_HIGH: f64 = 1.0 / 3.0;
/// Fixed negative slope at inference time.
pub const RRELU_INFERENCE_SLOPE: f64 = 5.0 / 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    RRelu,
    Sigmoid,
}

/// Whether RReLU draws random slopes (training) or uses the fixed slope.
pub enum ForwardMode<'r> {
    Train(&'r mut ChaCha8Rng),
    Eval,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Scalar RReLU. Negative inputs are scaled by a slope drawn uniformly from
/// [`RRELU_LOW`, `RRELU_HIGH`] during training and by the fixed
/// [`RRELU_INFERENCE_SLOPE`] otherwise. Returns the output and the effective
/// slope (1 for non-negative inputs).
pub fn rrelu(x: f64, mode: &mut ForwardMode<'_>) -> (f64, f64) {
    // One draw per element per pass, regardless of sign, so the stream
    // position depends only on tensor sizes.
    let slope = match mode {
        ForwardMode::Train(rng) => rng.random_range(RRELU_LOW..RRELU_HIGH),
        ForwardMode::Eval => RRELU_INFERENCE_SLOPE,
    };
    if x >= 0.0 {
        (x, 1.0)
    } else {
        (slope * x, slope)
    }
}

impl Activation {
    /// Apply elementwise. Returns the output and, for RReLU, the effective
    /// per-element slopes needed by the backward pass.
    pub fn forward(&self, pre: &Array2<f64>, mode: &mut ForwardMode<'_>) -> (Array2<f64>, Option<Array2<f64>>) {
        match self {
            Activation::Identity => (pre.clone(), None),
            Activation::Relu => (pre.mapv(|x| x.max(0.0)), None),
            Activation::Sigmoid => (pre.mapv(sigmoid), None),
            Activation::RRelu => {
                let mut out = Array2::zeros(pre.raw_dim());
                let mut slopes = Array2::zeros(pre.raw_dim());
                for ((o, s), &x) in out.iter_mut().zip(slopes.iter_mut()).zip(pre.iter()) {
                    let (y, slope) = rrelu(x, mode);
                    *o = y;
                    *s = slope;
                }
                (out, Some(slopes))
            }
        }
    }

    /// Derivative w.r.t. the pre-activation, evaluated from cached values.
    pub fn derivative(&self, pre: &Array2<f64>, slopes: Option<&Array2<f64>>) -> Array2<f64> {
        match self {
            Activation::Identity => Array2::ones(pre.raw_dim()),
            Activation::Relu => pre.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 }),
            Activation::Sigmoid => pre.mapv(|x| {
                let s = sigmoid(x);
                s * (1.0 - s)
            }),
            Activation::RRelu => slopes.expect("rrelu backward needs cached slopes").clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn rrelu_passes_positive_inputs_through() {
        let mut mode = ForwardMode::Eval;
        assert_eq!(rrelu(5.0, &mut mode), (5.0, 1.0));
    }

    #[test]
    fn rrelu_inference_uses_fixed_slope() {
        let mut mode = ForwardMode::Eval;
        let (y, slope) = rrelu(-1.0, &mut mode);
        assert_relative_eq!(y, -RRELU_INFERENCE_SLOPE, max_relative = 1e-12);
        assert!((y - (-0.2083)).abs() < 1e-4);
        assert_eq!(slope, RRELU_INFERENCE_SLOPE);
    }

    #[test]
    fn rrelu_training_slopes_stay_in_range() {
        let mut rng = rng_from_seed(3);
        for _ in 0..1000 {
            let mut mode = ForwardMode::Train(&mut rng);
            let (y, slope) = rrelu(-1.0, &mut mode);
            assert!((RRELU_LOW..RRELU_HIGH).contains(&slope));
            assert_eq!(y, -slope);
        }
    }

    #[test]
    fn rrelu_training_is_seeded() {
        let run = |seed: u64| {
            let mut rng = rng_from_seed(seed);
            let mut mode = ForwardMode::Train(&mut rng);
            (0..16).map(|i| rrelu(-(i as f64), &mut mode).0).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }
}
