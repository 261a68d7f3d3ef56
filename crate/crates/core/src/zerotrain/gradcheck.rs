//! Central finite-difference verification of the loss gradients in 64-bit
//! precision.
//!
//! Every check here evaluates losses through forward passes only, so it is
//! independent of the reverse-mode code it verifies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LossInputs;
use crate::error::{Error, Result};
use crate::image::Image2D;
use crate::nn::{forward, image_gradient, Activations, DenoiserParams, GradientAccumulator, PARAM_COUNT};

/// Central-difference step.
pub const STEP: f64 = 1e-5;
/// Maximum accepted relative error.
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error, far above the ~1e-11 round-off
/// of a central difference with [`STEP`].
pub const RELATIVE_FLOOR: f64 = 1e-6;
/// Minimum distance of every L1 argument and pre-activation from its kink.
pub const MIN_KINK_MARGIN: f64 = 5e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub worst_parameter: usize,
    pub kink_margin: f64,
}

pub fn relative_error(numeric: f64, analytic: f64) -> f64 {
    (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(RELATIVE_FLOOR)
}

/// Every parameter index, or a deterministic stride through the big
/// 48->48 weight tensor when `stride > 1` (all other tensors stay complete).
pub fn parameter_indices(stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let w2_start = 48 * 9 + 48;
    let w2_end = w2_start + 48 * 48 * 9;
    (0..PARAM_COUNT)
        .filter(|&i| i < w2_start || i >= w2_end || (i - w2_start) % stride == 0)
        .collect()
}

fn compare(
    params: &DenoiserParams<f64>,
    analytic: &GradientAccumulator<f64>,
    indices: &[usize],
    kink_margin: f64,
    mut objective: impl FnMut(&DenoiserParams<f64>) -> Result<f64>,
) -> Result<GradientCheckReport> {
    let flat = params.to_flat();
    let grad = analytic.0.to_flat();
    let mut report = GradientCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst_parameter: 0,
        kink_margin,
    };
    for &idx in indices {
        let mut plus = flat.clone();
        let mut minus = flat.clone();
        plus[idx] += STEP;
        minus[idx] -= STEP;
        let mut p = DenoiserParams::from_flat(&plus)?;
        p.leaky_slope = params.leaky_slope;
        let mut m = DenoiserParams::from_flat(&minus)?;
        m.leaky_slope = params.leaky_slope;
        let numeric = (objective(&p)? - objective(&m)?) / (2.0 * STEP);
        let err = relative_error(numeric, grad[idx]);
        if err > report.max_relative_error || err.is_nan() {
            report.max_relative_error = err;
            report.worst_parameter = idx;
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Checks the parameter gradient of `<weights, f(x)>`.
pub fn check_network(
    params: &DenoiserParams<f64>,
    x: &Image2D<f64>,
    weights: &Image2D<f64>,
    indices: &[usize],
) -> Result<GradientCheckReport> {
    let (h, w) = x.shape();
    let mut act = Activations::new(h, w)?;
    act.forward(params, x)?;
    let margin = act.min_abs_preactivation(params.leaky_slope);
    let mut grads = GradientAccumulator::zeros();
    act.backward(params, weights, &mut grads)?;
    compare(params, &grads, indices, margin, |p| forward(p, x)?.dot(weights))
}

/// Distance of the current point from every non-differentiable kink of
/// `L_total`: hidden pre-activations of all three forward passes, the L1
/// arguments of both residual branches, and the non-structural entries of
/// the consistency difference.
pub fn kink_margin(params: &DenoiserParams<f64>, inputs: &LossInputs<f64>) -> Result<f64> {
    let (h, w) = inputs.y().shape();
    let mut act = Activations::new(h, w)?;
    let mut margin = f64::INFINITY;

    for (a, b) in [(inputs.s1(), inputs.s2()), (inputs.s2(), inputs.s1())] {
        let fa = act.forward(params, a)?.clone();
        margin = margin.min(act.min_abs_preactivation(params.leaky_slope));
        for ((&av, &fv), &bv) in a.as_slice().iter().zip(fa.as_slice()).zip(b.as_slice()) {
            margin = margin.min((av - fv - bv).abs());
        }
    }

    let fy = act.forward(params, inputs.y())?.clone();
    margin = margin.min(act.min_abs_preactivation(params.leaky_slope));
    let (gx, gy) = image_gradient(&inputs.y().sub(&fy)?)?;
    for i in 0..h {
        for j in 0..w {
            if j + 1 < w {
                margin = margin.min((gx.get(i, j) - inputs.target_gx.get(i, j)).abs());
            }
            if i + 1 < h {
                margin = margin.min((gy.get(i, j) - inputs.target_gy.get(i, j)).abs());
            }
        }
    }
    Ok(margin)
}

/// Checks the parameter gradient of `L_total` at `params`.
pub fn check_total_loss(
    params: &DenoiserParams<f64>,
    inputs: &mut LossInputs<f64>,
    alpha: f64,
    indices: &[usize],
) -> Result<GradientCheckReport> {
    let margin = kink_margin(params, inputs)?;
    let mut grads = GradientAccumulator::zeros();
    inputs.total(params, alpha, Some(&mut grads))?;
    compare(params, &grads, indices, margin, |p| {
        Ok(inputs.total(p, alpha, None)?.total)
    })
}

/// Random 8x8 `(s1, s2, y)` in `[0, 1]` whose kink margin at `params` is at
/// least [`MIN_KINK_MARGIN`]; fixture seeds are tried in order from `seed`.
pub fn kink_free_fixture(params: &DenoiserParams<f64>, seed: u64) -> Result<LossInputs<f64>> {
    for attempt in 0..2000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut image = || Image2D::from_fn(8, 8, |_, _| rng.random_range(0.0..1.0));
        let inputs = LossInputs::new(image(), image(), image())?;
        if kink_margin(params, &inputs)? >= MIN_KINK_MARGIN {
            return Ok(inputs);
        }
    }
    Err(Error::NumericFailure {
        location: "gradient check".into(),
        detail: "no kink-free 8x8 fixture found".into(),
    })
}

/// Finite-difference check of `L_total` on a synthetic kink-free 8x8
/// fixture, over every parameter outside the 48->48 layer and every 17th
/// inside it.
pub fn self_test(params: &DenoiserParams<f64>, alpha: f64, seed: u64) -> Result<GradientCheckReport> {
    let mut inputs = kink_free_fixture(params, seed)?;
    check_total_loss(params, &mut inputs, alpha, &parameter_indices(17))
}
