use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Scalar;
use crate::error::{Error, Result};

/// Hidden channel width of both 3x3 layers.
pub const CHANNELS: usize = 48;
/// Negative slope of the LeakyReLU activations.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Scalars in conv3x3(1->48) + conv3x3(48->48) + conv1x1(48->1), biases included.
pub const PARAM_COUNT: usize =
    (CHANNELS * 9 + CHANNELS) + (CHANNELS * CHANNELS * 9 + CHANNELS) + (CHANNELS + 1);

/// Names of the parameter tensors in checkpoint order.
pub const TENSOR_NAMES: [&str; 6] = [
    "layer1.weight",
    "layer1.bias",
    "layer2.weight",
    "layer2.bias",
    "layer3.weight",
    "layer3.bias",
];

/// Weights and biases of the three-layer residual denoiser.
///
/// Weight layouts follow `[out][in][ky][kx]`:
/// `w1` is `[48][1][3][3]`, `w2` is `[48][48][3][3]`, `w3` is `[1][48][1][1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams<T> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
    pub w3: Vec<T>,
    pub b3: Vec<T>,
    pub leaky_slope: f64,
}

/// Parameter gradients, laid out exactly like [`DenoiserParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAccumulator<T>(pub DenoiserParams<T>);

impl<T: Scalar> DenoiserParams<T> {
    /// All-zero network. Its output is identically zero.
    pub fn zeros() -> Self {
        DenoiserParams {
            w1: vec![T::zero(); CHANNELS * 9],
            b1: vec![T::zero(); CHANNELS],
            w2: vec![T::zero(); CHANNELS * CHANNELS * 9],
            b2: vec![T::zero(); CHANNELS],
            w3: vec![T::zero(); CHANNELS],
            b3: vec![T::zero(); 1],
            leaky_slope: LEAKY_SLOPE,
        }
    }

    /// Seeded initialization.
    ///
    /// Weights are drawn from `U(-b, b)` with `b = sqrt(1 / fan_in)` (fan-in 9,
    /// 432 and 48 for the three layers) and biases are zero. The stream comes
    /// from `ChaCha8Rng::seed_from_u64(seed)`, sampled as `f64` in the order
    /// layer1, layer2, layer3, so both precisions share the same draws.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros();
        for (weights, fan_in) in [
            (&mut p.w1, 9usize),
            (&mut p.w2, CHANNELS * 9),
            (&mut p.w3, CHANNELS),
        ] {
            let bound = (1.0 / fan_in as f64).sqrt();
            for w in weights.iter_mut() {
                let u: f64 = rng.random();
                *w = T::from_f64(bound * (2.0 * u - 1.0));
            }
        }
        p
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn tensors(&self) -> [(&'static str, &[T]); 6] {
        [
            (TENSOR_NAMES[0], &self.w1),
            (TENSOR_NAMES[1], &self.b1),
            (TENSOR_NAMES[2], &self.w2),
            (TENSOR_NAMES[3], &self.b2),
            (TENSOR_NAMES[4], &self.w3),
            (TENSOR_NAMES[5], &self.b3),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Vec<T>); 6] {
        [
            (TENSOR_NAMES[0], &mut self.w1),
            (TENSOR_NAMES[1], &mut self.b1),
            (TENSOR_NAMES[2], &mut self.w2),
            (TENSOR_NAMES[3], &mut self.b2),
            (TENSOR_NAMES[4], &mut self.w3),
            (TENSOR_NAMES[5], &mut self.b3),
        ]
    }

    /// Flattened copy in checkpoint order.
    pub fn to_flat(&self) -> Vec<T> {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter().copied())
            .collect()
    }

    pub fn from_flat(flat: &[T]) -> Result<Self> {
        if flat.len() != PARAM_COUNT {
            return Err(Error::invalid(format!(
                "expected {PARAM_COUNT} parameters, got {}",
                flat.len()
            )));
        }
        let mut p = Self::zeros();
        let mut offset = 0;
        for (_, t) in p.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(p)
    }

    pub fn cast<U: Scalar>(&self) -> DenoiserParams<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::from_f64(x.as_f64())).collect();
        DenoiserParams {
            w1: conv(&self.w1),
            b1: conv(&self.b1),
            w2: conv(&self.w2),
            b2: conv(&self.b2),
            w3: conv(&self.w3),
            b3: conv(&self.b3),
            leaky_slope: self.leaky_slope,
        }
    }

    /// Plain SGD update `theta <- theta - lr * g`.
    ///
    /// Gradients are validated first, so a non-finite gradient leaves the
    /// parameters untouched.
    pub fn sgd_step(&mut self, grads: &GradientAccumulator<T>, lr: f64) -> Result<()> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::invalid(format!("learning rate must be >= 0, got {lr}")));
        }
        grads.check_finite()?;
        let lr = T::from_f64(lr);
        for ((_, theta), (_, g)) in self.tensors_mut().into_iter().zip(grads.0.tensors()) {
            for (t, &d) in theta.iter_mut().zip(g) {
                *t = *t - lr * d;
            }
        }
        Ok(())
    }
}

impl<T: Scalar> GradientAccumulator<T> {
    pub fn zeros() -> Self {
        GradientAccumulator(DenoiserParams::zeros())
    }

    pub fn reset(&mut self) {
        for (_, t) in self.0.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.0.tensors_mut().into_iter().zip(other.0.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for (_, t) in self.0.tensors_mut() {
            t.iter_mut().for_each(|v| *v = *v * factor);
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in self.0.tensors() {
            if let Some(pos) = t.iter().position(|v| !v.is_finite()) {
                return Err(Error::NumericFailure {
                    location: name.to_string(),
                    detail: format!("non-finite gradient at element {pos}"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_is_21313() {
        assert_eq!(PARAM_COUNT, 21_313);
        assert_eq!(DenoiserParams::<f32>::init(3).param_count(), 21_313);
        assert!(PARAM_COUNT < 22_000);
    }

    #[test]
    fn init_is_seeded() {
        let a = DenoiserParams::<f32>::init(7);
        let b = DenoiserParams::<f32>::init(7);
        let c = DenoiserParams::<f32>::init(8);
        assert_eq!(a, b);
        assert!(a.w2.iter().zip(&c.w2).any(|(x, y)| x != y));
        assert!(a.b1.iter().chain(&a.b2).chain(&a.b3).all(|&v| v == 0.0));
        let bound2 = (1.0f32 / 432.0).sqrt();
        assert!(a.w2.iter().all(|w| w.abs() <= bound2));
        // both precisions come from the same f64 draws
        let d = DenoiserParams::<f64>::init(7);
        assert!(a.w1.iter().zip(&d.w1).all(|(&x, &y)| x == y as f32));
    }

    #[test]
    fn sgd_arithmetic() {
        let mut p = DenoiserParams::<f64>::zeros();
        p.b3[0] = 1.0;
        let mut g = GradientAccumulator::<f64>::zeros();
        g.0.b3[0] = 2.0;
        p.sgd_step(&g, 0.1).unwrap();
        assert!((p.b3[0] - 0.8).abs() < 1e-15);

        let before = p.clone();
        p.sgd_step(&g, 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn two_steps_equal_one_summed_step() {
        let mut g = GradientAccumulator::<f64>::zeros();
        for (i, v) in g.0.w2.iter_mut().enumerate() {
            *v = ((i % 17) as f64 - 8.0) * 0.125;
        }
        let mut twice = DenoiserParams::<f64>::init(1);
        let mut once = twice.clone();
        twice.sgd_step(&g, 0.01).unwrap();
        twice.sgd_step(&g, 0.01).unwrap();
        let mut summed = g.clone();
        summed.add_assign(&g);
        once.sgd_step(&summed, 0.01).unwrap();
        for (a, b) in twice.w2.iter().zip(&once.w2) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut p = DenoiserParams::<f32>::init(0);
        let before = p.clone();
        let mut g = GradientAccumulator::<f32>::zeros();
        g.0.w3[5] = f32::NAN;
        match p.sgd_step(&g, 0.1) {
            Err(Error::NumericFailure { location, .. }) => assert_eq!(location, "layer3.weight"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(p, before);
    }

    #[test]
    fn flat_roundtrip() {
        let p = DenoiserParams::<f32>::init(11);
        assert_eq!(DenoiserParams::from_flat(&p.to_flat()).unwrap(), p);
        assert!(DenoiserParams::<f32>::from_flat(&[0.0; 10]).is_err());
    }
}
