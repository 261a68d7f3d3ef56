//! Seeded CPWC surrogate: a Rayleigh-speckle scene with anechoic cysts and
//! per-angle frames `clean * (1 + artifact) + noise`.
//!
//! Each frame's random stream is keyed by the bit pattern of its steering
//! angle, so the frames of any angle subset are identical to the matching
//! frames of the full simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::compounding::{
    compound_all, full_bmode, log_compress, select_angles, AngleStack, BModeImage,
    DEFAULT_DYNAMIC_RANGE_DB,
};
use crate::error::{Error, Result};
use crate::image::Image2D;
use crate::metrics::{Circle, Rect, RoiSpec};

/// A circular inclusion whose echogenicity is `scale` times the background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cyst {
    pub center_z: f64,
    pub center_x: f64,
    pub radius: f64,
    pub echogenicity_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub cysts: Vec<Cyst>,
    pub background_echogenicity: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::invalid("phantom must be non-empty"));
        }
        if !(self.background_echogenicity > 0.0 && self.background_echogenicity.is_finite()) {
            return Err(Error::invalid("background echogenicity must be positive"));
        }
        for c in &self.cysts {
            if !(0.0..1.0).contains(&c.echogenicity_scale) {
                return Err(Error::invalid(format!(
                    "cyst echogenicity scale {} outside [0, 1)",
                    c.echogenicity_scale
                )));
            }
            let inside = c.radius > 0.0
                && c.center_z - c.radius >= 0.0
                && c.center_x - c.radius >= 0.0
                && c.center_z + c.radius <= (self.height - 1) as f64
                && c.center_x + c.radius <= (self.width - 1) as f64;
            if !inside {
                return Err(Error::invalid(format!("cyst {c:?} is not inside the phantom")));
            }
        }
        Ok(())
    }

    /// Local echogenicity (variance of the complex scatterer field).
    pub fn echogenicity(&self, z: usize, x: usize) -> f64 {
        let mut e = self.background_echogenicity;
        for c in &self.cysts {
            let dz = z as f64 - c.center_z;
            let dx = x as f64 - c.center_x;
            if dz * dz + dx * dx <= c.radius * c.radius {
                e = self.background_echogenicity * c.echogenicity_scale;
            }
        }
        e
    }
}

/// Angle-dependent corruption of each frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of the additive Gaussian noise, envelope units.
    pub white_noise_sigma: f64,
    /// Peak relative amplitude of the multiplicative streak pattern.
    pub artifact_amplitude: f64,
    /// Streak wavelength in pixels.
    pub artifact_period_px: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.white_noise_sigma) || !ok(self.artifact_amplitude) {
            return Err(Error::invalid("noise amplitudes must be finite and >= 0"));
        }
        if !(self.artifact_period_px > 0.0 && self.artifact_period_px.is_finite()) {
            return Err(Error::invalid("artifact period must be positive"));
        }
        Ok(())
    }
}

/// Clean envelope `|z|` with `z` circular complex Gaussian of variance equal
/// to the local echogenicity.
pub fn make_phantom(spec: &PhantomSpec) -> Result<Image2D<f32>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Image2D::zeros(spec.height, spec.width);
    for z in 0..spec.height {
        for x in 0..spec.width {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let s = (spec.echogenicity(z, x) / 2.0).sqrt();
            out.set(z, x, (s * (re * re + im * im).sqrt()) as f32);
        }
    }
    Ok(out)
}

fn frame_rng(seed: u64, angle_deg: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(angle_deg.to_bits());
    rng
}

/// One corrupted frame for steering angle `angle_deg`.
pub fn simulate_frame(
    clean: &Image2D<f32>,
    angle_deg: f64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Image2D<f32>> {
    noise.validate()?;
    let mut rng = frame_rng(seed, angle_deg);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let theta = angle_deg.to_radians();
    // wavevector orthogonal to the steering direction (sin t, cos t)
    let kx = theta.cos() / noise.artifact_period_px;
    let kz = -theta.sin() / noise.artifact_period_px;
    let (h, w) = clean.shape();
    let mut out = Image2D::zeros(h, w);
    for z in 0..h {
        for x in 0..w {
            let art = noise.artifact_amplitude
                * (std::f64::consts::TAU * (kx * x as f64 + kz * z as f64) + phase).sin();
            let n: f64 = rng.sample(StandardNormal);
            let v = clean.get(z, x) as f64 * (1.0 + art) + noise.white_noise_sigma * n;
            out.set(z, x, v.max(0.0) as f32);
        }
    }
    Ok(out)
}

pub fn simulate_stack(
    clean: &Image2D<f32>,
    angles_deg: &[f64],
    noise: &NoiseModel,
    seed: u64,
) -> Result<AngleStack> {
    let frames = angles_deg
        .iter()
        .map(|&a| simulate_frame(clean, a, noise, seed))
        .collect::<Result<Vec<_>>>()?;
    AngleStack::new(frames, angles_deg.to_vec(), (0.1, 0.1), format!("simulated seed {seed}"))
}

/// `n` equally spaced angles from `min_deg` to `max_deg` inclusive.
pub fn linspace_angles(min_deg: f64, max_deg: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(max_deg > min_deg) {
        return Err(Error::invalid("need n >= 2 angles over an increasing range"));
    }
    let step = (max_deg - min_deg) / (n - 1) as f64;
    Ok((0..n).map(|i| min_deg + step * i as f64).collect())
}

/// The noisy low-angle compound, the all-angle compound and the log
/// compressed clean scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceImages {
    pub y_low: BModeImage,
    pub y_all: BModeImage,
    pub truth: BModeImage,
}

/// Builds the all-angle stack, compounds it and its `k`-angle subset, and
/// log-compresses the clean scene.
pub fn reference_images(
    clean: &Image2D<f32>,
    angles_deg: &[f64],
    k: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<ReferenceImages> {
    let all = simulate_stack(clean, angles_deg, noise, seed)?;
    let low = all.select(&select_angles(all.k(), k)?)?;
    Ok(ReferenceImages {
        y_low: full_bmode(&low, DEFAULT_DYNAMIC_RANGE_DB)?,
        y_all: log_compress(&compound_all(&all), DEFAULT_DYNAMIC_RANGE_DB)?,
        truth: log_compress(clean, DEFAULT_DYNAMIC_RANGE_DB)?,
    })
}

/// Complete simulation scenario: scene, corruption, acquisition and the
/// measurement geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub phantom: PhantomSpec,
    pub noise: NoiseModel,
    pub angles_deg: Vec<f64>,
    pub k: usize,
    pub stack_seed: u64,
    pub roi: RoiSpec,
}

impl Fixture {
    /// 300x384 speckle scene with one central anechoic cyst, 75 angles over
    /// [-16, 16] degrees, 5 working angles.
    pub fn standard() -> Self {
        let (h, w) = (300usize, 384usize);
        let (cz, cx, r) = (150.0, 192.0, 36.0);
        Fixture {
            phantom: PhantomSpec {
                height: h,
                width: w,
                cysts: vec![Cyst {
                    center_z: cz,
                    center_x: cx,
                    radius: r,
                    echogenicity_scale: 0.0,
                }],
                background_echogenicity: 1.0,
                seed: 0,
            },
            noise: NoiseModel {
                white_noise_sigma: 1.0,
                artifact_amplitude: 0.3,
                artifact_period_px: 20.0,
            },
            angles_deg: linspace_angles(-16.0, 16.0, 75).expect("valid range"),
            k: 5,
            stack_seed: 1,
            roi: RoiSpec {
                roi_circles: vec![Circle::new(cz, cx, r - 5.0)],
                background_circles: vec![
                    Circle::new(cz, cx - 80.0, 30.0),
                    Circle::new(cz, cx + 80.0, 30.0),
                ],
                speckle_rect: Rect {
                    z0: 10,
                    x0: 10,
                    height: 48,
                    width: 48,
                },
            },
        }
    }

    pub fn clean(&self) -> Result<Image2D<f32>> {
        make_phantom(&self.phantom)
    }

    /// The all-angle stack.
    pub fn full_stack(&self) -> Result<AngleStack> {
        simulate_stack(&self.clean()?, &self.angles_deg, &self.noise, self.stack_seed)
    }

    /// Only the `k` working frames; equal to selecting them from
    /// [`Fixture::full_stack`].
    pub fn working_stack(&self) -> Result<AngleStack> {
        let idx = select_angles(self.angles_deg.len(), self.k)?;
        let angles: Vec<f64> = idx.iter().map(|&i| self.angles_deg[i]).collect();
        simulate_stack(&self.clean()?, &angles, &self.noise, self.stack_seed)
    }

    pub fn references(&self) -> Result<ReferenceImages> {
        reference_images(&self.clean()?, &self.angles_deg, self.k, &self.noise, self.stack_seed)
    }
}
