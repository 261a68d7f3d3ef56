//! Self-supervised losses, the per-image training loop and residual
//! inference.
//!
//! With `f` the network, `s1`/`s2` the parity sub-compounds and `y` the full
//! compound:
//!
//! ```text
//! L_res   = 1/2 (|s1 - f(s1) - s2|_1 + |s2 - f(s2) - s1|_1)
//! L_cons  = |grad(y - f(y)) - grad(G * y)|_1
//! L_total = L_res + alpha L_cons
//! x       = clip(y - f(y), 0, 1)
//! ```
//!
//! All `|.|_1` are means over pixels (both gradient channels for `L_cons`).
//! `G * y` is a constant target; only the `f(y)` branch is differentiated.

use std::fmt::Write as _;
use std::path::Path;

use crate::compounding::{full_bmode, make_pair, AngleStack, BModeImage, DEFAULT_DYNAMIC_RANGE_DB};
use crate::error::{Error, Result};
use crate::image::Image2D;
use crate::nn::{
    gaussian3x3, image_gradient, image_gradient_adjoint, l1_mean, Activations, DenoiserParams,
    GradientAccumulator, Scalar,
};

pub mod gradcheck;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Run a 64-bit finite-difference check of the loss gradients before
    /// training starts.
    pub verify_gradients: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 1000,
            learning_rate: 0.001,
            alpha: 0.25,
            seed: 0,
            verify_gradients: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        check_alpha(self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    Ok(())
}

/// Loss components at one parameter setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub residual: f64,
    pub consistency: f64,
    pub total: f64,
}

impl LossRecord {
    fn is_finite(&self) -> bool {
        self.residual.is_finite() && self.consistency.is_finite() && self.total.is_finite()
    }
}

/// Per-iteration losses, recorded before each parameter update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub records: Vec<LossRecord>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&LossRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&LossRecord> {
        self.records.last()
    }

    /// `iter L_Res L_Cons L_Total`, one line per iteration, 9 significant
    /// digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, r) in self.records.iter().enumerate() {
            writeln!(s, "{i} {:.8e} {:.8e} {:.8e}", r.residual, r.consistency, r.total).unwrap();
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Everything the losses need for one image, with network workspaces sized
/// to it.
#[derive(Debug, Clone)]
pub struct LossInputs<T> {
    s1: Image2D<T>,
    s2: Image2D<T>,
    y: Image2D<T>,
    target_gx: Image2D<T>,
    target_gy: Image2D<T>,
    act_s1: Activations<T>,
    act_s2: Activations<T>,
    act_y: Activations<T>,
}

impl<T: Scalar> LossInputs<T> {
    pub fn new(s1: Image2D<T>, s2: Image2D<T>, y: Image2D<T>) -> Result<Self> {
        s1.ensure_same_shape(&s2)?;
        s1.ensure_same_shape(&y)?;
        let (h, w) = y.shape();
        let (target_gx, target_gy) = image_gradient(&gaussian3x3(&y)?)?;
        Ok(LossInputs {
            s1,
            s2,
            y,
            target_gx,
            target_gy,
            act_s1: Activations::new(h, w)?,
            act_s2: Activations::new(h, w)?,
            act_y: Activations::new(h, w)?,
        })
    }

    pub fn from_bmode(s1: &BModeImage, s2: &BModeImage, y: &BModeImage) -> Result<Self> {
        Self::new(s1.pixels().cast(), s2.pixels().cast(), y.pixels().cast())
    }

    pub fn s1(&self) -> &Image2D<T> {
        &self.s1
    }

    pub fn s2(&self) -> &Image2D<T> {
        &self.s2
    }

    pub fn y(&self) -> &Image2D<T> {
        &self.y
    }

    /// Symmetric residual loss; gradients are added to `grads` if given.
    pub fn residual(
        &mut self,
        params: &DenoiserParams<T>,
        mut grads: Option<&mut GradientAccumulator<T>>,
    ) -> Result<f64> {
        let half = T::from_f64(0.5);
        let l12 = residual_branch(&mut self.act_s1, params, &self.s1, &self.s2, half, grads.as_deref_mut())?;
        let l21 = residual_branch(&mut self.act_s2, params, &self.s2, &self.s1, half, grads)?;
        Ok(0.5 * (l12 + l21))
    }

    /// Gradient-consistency loss on the full compound; gradients are added to
    /// `grads` scaled by `weight`.
    pub fn consistency(
        &mut self,
        params: &DenoiserParams<T>,
        grads: Option<&mut GradientAccumulator<T>>,
        weight: f64,
    ) -> Result<f64> {
        let fy = self.act_y.forward(params, &self.y)?;
        let (loss, dx, dy) = consistency_terms(&self.y, fy, &self.target_gx, &self.target_gy)?;
        let count = 2 * dx.len();
        if let Some(grads) = grads {
            // d/d f(y) = -grad^T sign(d) / count
            let scale = T::from_f64(-weight / count as f64);
            let sx = dx.map(|v| sign(v) * scale);
            let sy = dy.map(|v| sign(v) * scale);
            let grad_out = image_gradient_adjoint(&sx, &sy)?;
            self.act_y.backward(params, &grad_out, grads)?;
        }
        Ok(loss)
    }

    /// `L_res + alpha L_cons` with its gradient accumulated into `grads`.
    pub fn total(
        &mut self,
        params: &DenoiserParams<T>,
        alpha: f64,
        mut grads: Option<&mut GradientAccumulator<T>>,
    ) -> Result<LossRecord> {
        check_alpha(alpha)?;
        let residual = self.residual(params, grads.as_deref_mut())?;
        let consistency = self.consistency(params, grads, alpha)?;
        Ok(LossRecord {
            residual,
            consistency,
            total: residual + alpha * consistency,
        })
    }
}

/// Loss value and the two difference channels `grad(y - fy) - target`.
fn consistency_terms<T: Scalar>(
    y: &Image2D<T>,
    fy: &Image2D<T>,
    target_gx: &Image2D<T>,
    target_gy: &Image2D<T>,
) -> Result<(f64, Image2D<T>, Image2D<T>)> {
    let (gx, gy) = image_gradient(&y.sub(fy)?)?;
    let dx = gx.sub(target_gx)?;
    let dy = gy.sub(target_gy)?;
    let total: f64 = dx
        .as_slice()
        .iter()
        .chain(dy.as_slice())
        .map(|v| v.as_f64().abs())
        .sum();
    Ok((total / (2 * dx.len()) as f64, dx, dy))
}

/// `mean |a - f(a) - b|`, backpropagating `weight` times its gradient.
fn residual_branch<T: Scalar>(
    act: &mut Activations<T>,
    params: &DenoiserParams<T>,
    a: &Image2D<T>,
    b: &Image2D<T>,
    weight: T,
    grads: Option<&mut GradientAccumulator<T>>,
) -> Result<f64> {
    let fa = act.forward(params, a)?;
    let predicted = a.sub(fa)?;
    let loss = l1_mean(&predicted, b)?;
    if let Some(grads) = grads {
        let scale = -weight / T::from_f64(a.len() as f64);
        let grad_out = predicted.zip_map(b, |p, q| sign(p - q) * scale)?;
        act.backward(params, &grad_out, grads)?;
    }
    Ok(loss)
}

#[inline]
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Symmetric residual loss and its parameter gradient.
pub fn residual_loss<T: Scalar>(
    params: &DenoiserParams<T>,
    s1: &Image2D<T>,
    s2: &Image2D<T>,
) -> Result<(f64, GradientAccumulator<T>)> {
    s1.ensure_same_shape(s2)?;
    let (h, w) = s1.shape();
    let mut a1 = Activations::new(h, w)?;
    let mut a2 = Activations::new(h, w)?;
    let mut grads = GradientAccumulator::zeros();
    let half = T::from_f64(0.5);
    let l12 = residual_branch(&mut a1, params, s1, s2, half, Some(&mut grads))?;
    let l21 = residual_branch(&mut a2, params, s2, s1, half, Some(&mut grads))?;
    Ok((0.5 * (l12 + l21), grads))
}

/// Gradient-consistency loss on `y` and its parameter gradient.
pub fn consistency_loss<T: Scalar>(
    params: &DenoiserParams<T>,
    y: &Image2D<T>,
) -> Result<(f64, GradientAccumulator<T>)> {
    let mut inputs = LossInputs::new(y.clone(), y.clone(), y.clone())?;
    let mut grads = GradientAccumulator::zeros();
    let loss = inputs.consistency(params, Some(&mut grads), 1.0)?;
    Ok((loss, grads))
}

/// Total loss and its parameter gradient.
pub fn total_loss<T: Scalar>(
    params: &DenoiserParams<T>,
    s1: &Image2D<T>,
    s2: &Image2D<T>,
    y: &Image2D<T>,
    alpha: f64,
) -> Result<(LossRecord, GradientAccumulator<T>)> {
    check_alpha(alpha)?;
    let mut inputs = LossInputs::new(s1.clone(), s2.clone(), y.clone())?;
    let mut grads = GradientAccumulator::zeros();
    let record = inputs.total(params, alpha, Some(&mut grads))?;
    Ok((record, grads))
}

/// Trains a fresh network on one angle stack. See [`train_zero_shot_with`].
pub fn train_zero_shot(
    stack: &AngleStack,
    cfg: &TrainConfig,
) -> Result<(DenoiserParams<f32>, LossTrace)> {
    train_zero_shot_with(stack, cfg, |_, _| {})
}

/// Full-image SGD on `L_total` for `cfg.iterations` steps, starting from
/// [`DenoiserParams::init`]`(cfg.seed)`. `observer` sees each iteration's
/// loss before the update.
pub fn train_zero_shot_with(
    stack: &AngleStack,
    cfg: &TrainConfig,
    mut observer: impl FnMut(usize, &LossRecord),
) -> Result<(DenoiserParams<f32>, LossTrace)> {
    cfg.validate()?;
    let y = full_bmode(stack, DEFAULT_DYNAMIC_RANGE_DB)?;
    let pair = make_pair(stack, DEFAULT_DYNAMIC_RANGE_DB)?;
    let mut params = DenoiserParams::<f32>::init(cfg.seed);

    if cfg.verify_gradients {
        let report = gradcheck::self_test(&params.cast::<f64>(), cfg.alpha, cfg.seed)?;
        if report.max_relative_error > gradcheck::TOLERANCE {
            return Err(Error::NumericFailure {
                location: "gradient check".into(),
                detail: format!(
                    "relative error {:.3e} exceeds {:.0e}",
                    report.max_relative_error,
                    gradcheck::TOLERANCE
                ),
            });
        }
    }

    let mut inputs = LossInputs::<f32>::from_bmode(&pair.s1, &pair.s2, &y)?;
    let mut grads = GradientAccumulator::zeros();
    let mut trace = LossTrace {
        records: Vec::with_capacity(cfg.iterations),
    };
    for it in 0..cfg.iterations {
        grads.reset();
        let record = inputs.total(&params, cfg.alpha, Some(&mut grads))?;
        if !record.is_finite() {
            return Err(Error::NumericFailure {
                location: format!("iteration {it}"),
                detail: format!("non-finite loss {record:?}"),
            });
        }
        observer(it, &record);
        trace.records.push(record);
        params
            .sgd_step(&grads, cfg.learning_rate)
            .map_err(|e| match e {
                Error::NumericFailure { location, detail } => Error::NumericFailure {
                    location: format!("iteration {it}, {location}"),
                    detail,
                },
                other => other,
            })?;
    }
    Ok((params, trace))
}

/// Residual inference `x = clip(y - f(y), 0, 1)`.
pub fn denoise(params: &DenoiserParams<f32>, y: &BModeImage) -> Result<BModeImage> {
    let noise = crate::nn::forward(params, y.pixels())?;
    let x = y.pixels().sub(&noise)?;
    BModeImage::clipped(x, y.dynamic_range_db())
}
