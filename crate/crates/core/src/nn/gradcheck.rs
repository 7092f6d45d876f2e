//! Finite-difference verification of [`Mlp::backward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mlp, MlpSpec, WeightVector};
use crate::scalar::Scalar;

const STEP: f64 = 1e-4;

/// Denominator floor so that parameters with (near) zero gradient do not
/// turn rounding noise into a large relative error.
const REL_FLOOR: f64 = 1e-6;

/// `max_k |a_k - n_k| / max(|a_k|, |n_k|, 1e-6)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Checks the backward pass of a randomly initialized network of topology
/// `spec` on a random input/target pair under the loss `0.5 |y - t|^2`.
///
/// The analytic gradient is computed in precision `S`; the central-difference
/// reference always runs in `f64` on the same (rounded) weights.
pub fn gradient_check<S: Scalar>(spec: &MlpSpec, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Mlp::<f64>::he_uniform(spec.clone(), &mut rng);
    // random biases too, so every parameter class is exercised
    let mut weights = net.weights().clone();
    for w in weights.as_mut_slice().iter_mut().filter(|w| **w == 0.0) {
        *w = rng.random_range(-0.1..0.1);
    }
    let input: Vec<f64> = (0..spec.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target: Vec<f64> = (0..spec.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    gradient_check_with::<S>(spec, &weights, &input, &target)
}

pub fn gradient_check_with<S: Scalar>(spec: &MlpSpec, weights: &WeightVector<f64>, input: &[f64], target: &[f64]) -> f64 {
    let low: WeightVector<S> = weights.cast();
    let net_s = Mlp::from_weights(spec.clone(), low.clone()).expect("weights match spec");
    let mut reference = Mlp::from_weights(spec.clone(), low.cast::<f64>()).expect("weights match spec");

    let x_s: Vec<S> = input.iter().map(|&v| S::lit(v)).collect();
    let y = net_s.forward(&x_s);
    let out_grad: Vec<S> = y.iter().zip(target).map(|(&y, &t)| y - S::lit(t)).collect();
    let analytic: Vec<f64> = net_s.backward(&x_s, &out_grad).iter().map(|g| g.as_f64()).collect();

    let x: Vec<f64> = x_s.iter().map(|v| v.as_f64()).collect();
    let loss = |net: &Mlp<f64>| -> f64 {
        net.forward(&x).iter().zip(target).map(|(y, t)| 0.5 * (y - t) * (y - t)).sum()
    };
    let numeric: Vec<f64> = (0..analytic.len())
        .map(|k| {
            let orig = reference.weights().as_slice()[k];
            reference.weights_mut()[k] = orig + STEP;
            let up = loss(&reference);
            reference.weights_mut()[k] = orig - STEP;
            let down = loss(&reference);
            reference.weights_mut()[k] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect();
    max_relative_error(&analytic, &numeric)
}
