//! Angle selection, parity subsets, envelope compounding and log compression.

use crate::error::{Error, Result};
use crate::image::Image2D;

/// Display dynamic range used throughout, in dB.
pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 80.0;

/// Per-angle beamformed envelope frames sharing one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleStack {
    frames: Vec<Image2D<f32>>,
    angles_deg: Vec<f64>,
    pixel_spacing_mm: (f64, f64),
    source_id: String,
}

impl AngleStack {
    pub fn new(
        frames: Vec<Image2D<f32>>,
        angles_deg: Vec<f64>,
        pixel_spacing_mm: (f64, f64),
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::invalid(format!(
                "an angle stack needs k >= 2 frames, got {}",
                frames.len()
            )));
        }
        if angles_deg.len() != frames.len() {
            return Err(Error::invalid(format!(
                "{} angles for {} frames",
                angles_deg.len(),
                frames.len()
            )));
        }
        if !angles_deg.iter().all(|a| a.is_finite()) || angles_deg.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("steering angles must be finite and strictly increasing"));
        }
        let shape = frames[0].shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::invalid("frames must be non-empty"));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.shape() != shape {
                return Err(Error::invalid(format!(
                    "frame {i} is {:?}, expected {shape:?}",
                    f.shape()
                )));
            }
            if let Some(v) = f.as_slice().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::invalid(format!(
                    "frame {i} holds {v}; envelopes must be finite and >= 0"
                )));
            }
        }
        let (dz, dx) = pixel_spacing_mm;
        if !(dz > 0.0 && dx > 0.0 && dz.is_finite() && dx.is_finite()) {
            return Err(Error::invalid("pixel spacing must be positive"));
        }
        Ok(AngleStack {
            frames,
            angles_deg,
            pixel_spacing_mm,
            source_id: source_id.into(),
        })
    }

    pub fn k(&self) -> usize {
        self.frames.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.frames[0].shape()
    }

    pub fn frames(&self) -> &[Image2D<f32>] {
        &self.frames
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn pixel_spacing_mm(&self) -> (f64, f64) {
        self.pixel_spacing_mm
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Sub-stack holding the frames at `indices` (which must be strictly
    /// increasing so the angle ordering survives).
    pub fn select(&self, indices: &[usize]) -> Result<AngleStack> {
        check_indices(indices, self.k())?;
        AngleStack::new(
            indices.iter().map(|&i| self.frames[i].clone()).collect(),
            indices.iter().map(|&i| self.angles_deg[i]).collect(),
            self.pixel_spacing_mm,
            self.source_id.clone(),
        )
    }
}

/// A log-compressed image normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BModeImage {
    pixels: Image2D<f32>,
    dynamic_range_db: f64,
}

impl BModeImage {
    pub fn new(pixels: Image2D<f32>, dynamic_range_db: f64) -> Result<Self> {
        if !(dynamic_range_db > 0.0 && dynamic_range_db.is_finite()) {
            return Err(Error::invalid(format!(
                "dynamic range must be positive, got {dynamic_range_db}"
            )));
        }
        if let Some(v) = pixels
            .as_slice()
            .iter()
            .find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::invalid(format!("B-mode pixel {v} outside [0, 1]")));
        }
        Ok(BModeImage {
            pixels,
            dynamic_range_db,
        })
    }

    /// Clips every pixel into `[0, 1]`; NaNs are rejected.
    pub fn clipped(pixels: Image2D<f32>, dynamic_range_db: f64) -> Result<Self> {
        if !pixels.as_slice().iter().all(|v| !v.is_nan()) {
            return Err(Error::NumericFailure {
                location: "b-mode clip".into(),
                detail: "NaN pixel".into(),
            });
        }
        BModeImage::new(pixels.map(|v| v.clamp(0.0, 1.0)), dynamic_range_db)
    }

    pub fn pixels(&self) -> &Image2D<f32> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Image2D<f32> {
        self.pixels
    }

    pub fn dynamic_range_db(&self) -> f64 {
        self.dynamic_range_db
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pixels.shape()
    }
}

/// The parity pseudo-pair used for self-supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPair {
    pub s1: BModeImage,
    pub s2: BModeImage,
    pub indices_1: Vec<usize>,
    pub indices_2: Vec<usize>,
}

/// Picks `k` of `total_angles` evenly spaced indices, endpoints included:
/// `index_j = round(j * (M - 1) / (k - 1))`, ties rounded up.
pub fn select_angles(total_angles: usize, k: usize) -> Result<Vec<usize>> {
    if k < 2 || k > total_angles {
        return Err(Error::invalid(format!(
            "need 2 <= k <= {total_angles}, got k = {k}"
        )));
    }
    let span = total_angles - 1;
    let steps = k - 1;
    Ok((0..k).map(|j| (2 * j * span + steps) / (2 * steps)).collect())
}

/// Splits `0..k` into even (first set) and odd (second set) indices.
pub fn parity_partition(k: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if k < 2 {
        return Err(Error::invalid(format!("parity partition needs k >= 2, got {k}")));
    }
    Ok(((0..k).step_by(2).collect(), (1..k).step_by(2).collect()))
}

fn check_indices(indices: &[usize], k: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::invalid("index set is empty"));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= k) {
        return Err(Error::invalid(format!("index {i} out of range for k = {k}")));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("indices must be strictly increasing"));
    }
    Ok(())
}

/// Pixelwise mean of the selected envelope frames.
///
/// Indices may come in any order but must be distinct; the sum always runs in
/// ascending index order, so the result does not depend on the order given.
pub fn compound(stack: &AngleStack, indices: &[usize]) -> Result<Image2D<f32>> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    check_indices(&sorted, stack.k())?;
    let (h, w) = stack.shape();
    let mut acc = vec![0.0f64; h * w];
    for &i in &sorted {
        for (a, &v) in acc.iter_mut().zip(stack.frames[i].as_slice()) {
            *a += v as f64;
        }
    }
    let inv = 1.0 / sorted.len() as f64;
    Image2D::from_vec(h, w, acc.into_iter().map(|a| (a * inv) as f32).collect())
}

/// Compounds every frame of the stack.
pub fn compound_all(stack: &AngleStack) -> Image2D<f32> {
    let all: Vec<usize> = (0..stack.k()).collect();
    compound(stack, &all).expect("full index set is valid")
}

/// Log compression against the image's own maximum.
///
/// `v = 20 log10(p / max)` is clipped to `[-dr, 0]` and mapped to
/// `(v + dr) / dr`. Zero pixels land on 0.
pub fn log_compress(envelope: &Image2D<f32>, dynamic_range_db: f64) -> Result<BModeImage> {
    let max = envelope_max(envelope)?;
    log_compress_with_reference(envelope, max, dynamic_range_db)
}

/// Log compression against an externally supplied reference maximum, so that
/// several envelopes share one intensity scale. Pixels above the reference
/// saturate at 1.
pub fn log_compress_with_reference(
    envelope: &Image2D<f32>,
    reference_max: f64,
    dynamic_range_db: f64,
) -> Result<BModeImage> {
    if !(reference_max > 0.0 && reference_max.is_finite()) {
        return Err(Error::invalid(format!(
            "reference maximum must be positive, got {reference_max}"
        )));
    }
    if !(dynamic_range_db > 0.0 && dynamic_range_db.is_finite()) {
        return Err(Error::invalid(format!(
            "dynamic range must be positive, got {dynamic_range_db}"
        )));
    }
    if let Some(v) = envelope.as_slice().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!("envelope pixel {v} is not finite and >= 0")));
    }
    let dr = dynamic_range_db;
    let pixels = envelope.map(|p| {
        if p <= 0.0 {
            return 0.0;
        }
        let db = 20.0 * (p as f64 / reference_max).log10();
        ((db.clamp(-dr, 0.0) + dr) / dr) as f32
    });
    BModeImage::new(pixels, dr)
}

fn envelope_max(envelope: &Image2D<f32>) -> Result<f64> {
    let max = envelope
        .as_slice()
        .iter()
        .fold(0.0f32, |m, &v| if v > m { v } else { m });
    if max <= 0.0 {
        return Err(Error::invalid("cannot log-compress an all-zero envelope"));
    }
    Ok(max as f64)
}

/// Full compound `y` of the stack, log-compressed.
pub fn full_bmode(stack: &AngleStack, dynamic_range_db: f64) -> Result<BModeImage> {
    log_compress(&compound_all(stack), dynamic_range_db)
}

/// Builds the even/odd parity pair. Both subsets are log-compressed against
/// the maximum of the full compound so they share the scale of `y`.
pub fn make_pair(stack: &AngleStack, dynamic_range_db: f64) -> Result<SubsetPair> {
    let (indices_1, indices_2) = parity_partition(stack.k())?;
    let reference = envelope_max(&compound_all(stack))?;
    let s1 = log_compress_with_reference(&compound(stack, &indices_1)?, reference, dynamic_range_db)?;
    let s2 = log_compress_with_reference(&compound(stack, &indices_2)?, reference, dynamic_range_db)?;
    Ok(SubsetPair {
        s1,
        s2,
        indices_1,
        indices_2,
    })
}
