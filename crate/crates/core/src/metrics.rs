//! Contrast and speckle-preservation metrics.
//!
//! - CNR in dB: `20 log10(|mu_roi - mu_bg| / sqrt((var_roi + var_bg) / 2))`
//!   with population variances.
//! - gCNR: one minus the overlap of the two intensity histograms on shared
//!   equal-width bins over `[0, 1]`.
//! - Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::compounding::BModeImage;
use crate::error::{Error, Result};

/// Default histogram resolution for gCNR.
pub const GCNR_BINS: usize = 256;
/// Speckle is considered preserved when the KS p-value exceeds this.
pub const KS_PASS_P: f64 = 0.05;

/// A disc in pixel coordinates (`z` = row, `x` = column).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center_z: f64,
    pub center_x: f64,
    pub radius: f64,
}

impl Circle {
    pub fn new(center_z: f64, center_x: f64, radius: f64) -> Self {
        Circle {
            center_z,
            center_x,
            radius,
        }
    }

    #[inline]
    pub fn contains(&self, z: usize, x: usize) -> bool {
        let dz = z as f64 - self.center_z;
        let dx = x as f64 - self.center_x;
        dz * dz + dx * dx <= self.radius * self.radius
    }

    fn inside_image(&self, h: usize, w: usize) -> bool {
        self.radius >= 0.0
            && self.center_z - self.radius >= 0.0
            && self.center_x - self.radius >= 0.0
            && self.center_z + self.radius <= (h - 1) as f64
            && self.center_x + self.radius <= (w - 1) as f64
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub z0: usize,
    pub x0: usize,
    pub height: usize,
    pub width: usize,
}

/// Measurement geometry: target regions, background regions and the speckle
/// patch used for the KS test.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiSpec {
    pub roi_circles: Vec<Circle>,
    pub background_circles: Vec<Circle>,
    pub speckle_rect: Rect,
}

impl RoiSpec {
    pub fn validate(&self, h: usize, w: usize) -> Result<()> {
        if self.roi_circles.is_empty() || self.background_circles.is_empty() {
            return Err(Error::invalid("need at least one ROI and one background circle"));
        }
        for c in self.roi_circles.iter().chain(&self.background_circles) {
            if !c.inside_image(h, w) {
                return Err(Error::invalid(format!(
                    "circle {c:?} is not fully inside the {h}x{w} image"
                )));
            }
        }
        let r = self.speckle_rect;
        if r.height == 0 || r.width == 0 || r.z0 + r.height > h || r.x0 + r.width > w {
            return Err(Error::invalid(format!(
                "speckle rectangle {r:?} is not inside the {h}x{w} image"
            )));
        }
        let roi = self.roi_mask(h, w);
        let bg = self.background_mask(h, w);
        if roi.iter().zip(&bg).any(|(&a, &b)| a && b) {
            return Err(Error::invalid("ROI and background regions overlap"));
        }
        Ok(())
    }

    pub fn roi_mask(&self, h: usize, w: usize) -> Vec<bool> {
        mask(&self.roi_circles, h, w)
    }

    pub fn background_mask(&self, h: usize, w: usize) -> Vec<bool> {
        mask(&self.background_circles, h, w)
    }
}

fn mask(circles: &[Circle], h: usize, w: usize) -> Vec<bool> {
    let mut m = vec![false; h * w];
    for i in 0..h {
        for j in 0..w {
            m[i * w + j] = circles.iter().any(|c| c.contains(i, j));
        }
    }
    m
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Contrast-to-noise ratio in dB.
///
/// Equal means give `Ok(-inf)`; zero pooled variance is a
/// [`Error::DegenerateInput`].
pub fn cnr_db(roi: &[f64], background: &[f64]) -> Result<f64> {
    if roi.is_empty() || background.is_empty() {
        return Err(Error::invalid("CNR needs non-empty samples"));
    }
    let (mu_r, var_r) = mean_var(roi);
    let (mu_b, var_b) = mean_var(background);
    let pooled = ((var_r + var_b) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(Error::DegenerateInput("CNR with zero pooled variance".into()));
    }
    let diff = (mu_r - mu_b).abs();
    if diff == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (diff / pooled).log10())
}

fn histogram(v: &[f64], bins: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; bins];
    for &x in v {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(format!("gCNR sample {x} outside [0, 1]")));
        }
        counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let n = v.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Generalized CNR over `bins` equal-width bins on `[0, 1]`.
pub fn gcnr(roi: &[f64], background: &[f64], bins: usize) -> Result<f64> {
    if roi.is_empty() || background.is_empty() {
        return Err(Error::invalid("gCNR needs non-empty samples"));
    }
    if bins == 0 {
        return Err(Error::invalid("gCNR needs at least one bin"));
    }
    let p = histogram(roi, bins)?;
    let q = histogram(background, bins)?;
    let overlap: f64 = p.iter().zip(&q).map(|(a, b)| a.min(*b)).sum();
    Ok((1.0 - overlap).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample KS test. `D = sup |F_a - F_b|`; the p-value is the Kolmogorov
/// survival function at `lambda = (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) D`,
/// `ne = n m / (n + m)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("KS test needs at least two values per sample"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("KS test sample contains NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        // step past every copy of the smallest remaining value in both
        let v = a[i].min(b[j]);
        while i < n && a[i] == v {
            i += 1;
        }
        while j < m && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    })
}

/// `Q(lambda) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lambda^2)`.
///
/// Below `lambda = 1` the alternating series converges slowly, so the
/// equivalent theta-function form
/// `1 - sqrt(2 pi) / lambda sum_{j>=1} exp(-(2j-1)^2 pi^2 / (8 lambda^2))`
/// is summed instead. Both stop once a term drops below 1e-10.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    const EPS: f64 = 1e-10;
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.0 {
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for j in 1..=1000u32 {
            let odd = (2 * j - 1) as f64;
            let term = (-odd * odd * c).exp();
            sum += term;
            if term < EPS {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1..=1000u32 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sum += sign * term;
            if term < EPS {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Summary of one image's contrast and speckle statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub gcnr_mean: f64,
    pub gcnr_std: f64,
    pub cnr_db_mean: f64,
    pub cnr_db_std: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub ks_pass: bool,
    pub n_windows: usize,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "gcnr_mean,gcnr_std,cnr_db_mean,cnr_db_std,ks_statistic,ks_p_value,ks_pass,n_windows";

    /// Flat `key = value` block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "gcnr_mean = {:.6}", self.gcnr_mean).unwrap();
        writeln!(s, "gcnr_std = {:.6}", self.gcnr_std).unwrap();
        writeln!(s, "cnr_db_mean = {:.6}", self.cnr_db_mean).unwrap();
        writeln!(s, "cnr_db_std = {:.6}", self.cnr_db_std).unwrap();
        writeln!(s, "ks_statistic = {:.6}", self.ks_statistic).unwrap();
        writeln!(s, "ks_p_value = {:.6}", self.ks_p_value).unwrap();
        writeln!(s, "ks_pass = {}", self.ks_pass).unwrap();
        writeln!(s, "n_windows = {}", self.n_windows).unwrap();
        s
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            self.gcnr_mean,
            self.gcnr_std,
            self.cnr_db_mean,
            self.cnr_db_std,
            self.ks_statistic,
            self.ks_p_value,
            self.ks_pass,
            self.n_windows
        )
    }
}

/// Centers of every window of `radius` that fits inside some ROI circle.
fn window_centers(roi: &RoiSpec, radius: f64, h: usize, w: usize) -> Vec<(usize, usize)> {
    let mut centers = Vec::new();
    for i in 0..h {
        for j in 0..w {
            let fits = roi.roi_circles.iter().any(|c| {
                let dz = i as f64 - c.center_z;
                let dx = j as f64 - c.center_x;
                (dz * dz + dx * dx).sqrt() + radius <= c.radius
            });
            if fits {
                centers.push((i, j));
            }
        }
    }
    centers
}

/// Windowed contrast protocol plus the KS speckle test.
///
/// `n_windows` distinct circular windows of `window_radius` pixels are drawn
/// (seeded) from the positions that fit inside the ROI circles; gCNR and CNR
/// of each window against the whole background mask are averaged (population
/// std). The KS test compares `image` with `reference` inside the speckle
/// rectangle.
pub fn evaluate(
    image: &BModeImage,
    reference: &BModeImage,
    roi: &RoiSpec,
    n_windows: usize,
    window_radius: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if image.shape() != reference.shape() {
        return Err(Error::invalid(format!(
            "image {:?} and reference {:?} differ in shape",
            image.shape(),
            reference.shape()
        )));
    }
    if n_windows == 0 {
        return Err(Error::invalid("n_windows must be >= 1"));
    }
    let (h, w) = image.shape();
    roi.validate(h, w)?;
    let px = image.pixels();

    let centers = window_centers(roi, window_radius as f64, h, w);
    if centers.is_empty() {
        return Err(Error::invalid(format!(
            "a window of radius {window_radius} does not fit inside any ROI circle"
        )));
    }
    if centers.len() < n_windows {
        return Err(Error::invalid(format!(
            "only {} distinct window positions for {n_windows} windows",
            centers.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, centers.len(), n_windows);

    let bg_mask = roi.background_mask(h, w);
    let background: Vec<f64> = px
        .as_slice()
        .iter()
        .zip(&bg_mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v as f64)
        .collect();

    let r = window_radius as isize;
    let mut gcnrs = Vec::with_capacity(n_windows);
    let mut cnrs = Vec::with_capacity(n_windows);
    for pick in picks.iter() {
        let (ci, cj) = centers[pick];
        let window = Circle::new(ci as f64, cj as f64, window_radius as f64);
        let mut samples = Vec::new();
        for di in -r..=r {
            for dj in -r..=r {
                let (i, j) = ((ci as isize + di) as usize, (cj as isize + dj) as usize);
                if window.contains(i, j) {
                    samples.push(px.get(i, j) as f64);
                }
            }
        }
        gcnrs.push(gcnr(&samples, &background, GCNR_BINS)?);
        cnrs.push(cnr_db(&samples, &background)?);
    }
    let (gcnr_mean, gcnr_var) = mean_var(&gcnrs);
    let (cnr_db_mean, cnr_var) = mean_var(&cnrs);

    let rect = roi.speckle_rect;
    let patch = |b: &BModeImage| -> Vec<f64> {
        (rect.z0..rect.z0 + rect.height)
            .flat_map(|i| (rect.x0..rect.x0 + rect.width).map(move |j| (i, j)))
            .map(|(i, j)| b.pixels().get(i, j) as f64)
            .collect()
    };
    let ks = ks_two_sample(&patch(image), &patch(reference))?;

    Ok(MetricsReport {
        gcnr_mean,
        gcnr_std: gcnr_var.sqrt(),
        cnr_db_mean,
        cnr_db_std: cnr_var.sqrt(),
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
        ks_pass: ks.p_value > KS_PASS_P,
        n_windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image2D;

    #[test]
    fn cnr_hand_case() {
        // mean 0.2 / 0.5 with population std 0.1 each
        let roi = [0.1, 0.3];
        let bg = [0.4, 0.6];
        let v = cnr_db(&roi, &bg).unwrap();
        assert!((v - 20.0 * 3f64.log10()).abs() < 1e-9, "{v}");
        assert!((v - 9.542).abs() < 1e-3);
    }

    #[test]
    fn cnr_degenerate_cases() {
        assert!(matches!(
            cnr_db(&[0.2, 0.2], &[0.7, 0.7]),
            Err(Error::DegenerateInput(_))
        ));
        assert_eq!(cnr_db(&[0.1, 0.3], &[0.0, 0.4]).unwrap(), f64::NEG_INFINITY);
        assert!(cnr_db(&[], &[0.1]).is_err());
    }

    #[test]
    fn gcnr_hand_cases() {
        let a = [0.1, 0.5, 0.9];
        assert_eq!(gcnr(&a, &a, 256).unwrap(), 0.0);
        assert_eq!(gcnr(&[0.05, 0.1], &[0.8, 0.95], 256).unwrap(), 1.0);
        // 4 bins: ROI in bins {0,1}, background in bins {1,2}
        let half = gcnr(&[0.1, 0.3], &[0.3, 0.6], 4).unwrap();
        assert!((half - 0.5).abs() < 1e-9);
        assert!(gcnr(&[], &a, 256).is_err());
        assert!(gcnr(&[1.5], &a, 256).is_err());
    }

    #[test]
    fn ks_hand_cases() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(r.statistic, 0.25);
        let same = ks_two_sample(&[0.3, 0.1, 0.2], &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
        let apart = ks_two_sample(&[0.0, 0.1], &[0.5, 0.6, 0.7]).unwrap();
        assert_eq!(apart.statistic, 1.0);
        assert!(ks_two_sample(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kolmogorov_table_values() {
        // reference values of the Kolmogorov survival function
        for (lambda, q) in [
            (0.3, 0.9999906941986655),
            (0.5, 0.9639452436648751),
            (1.0, 0.26999967167735456),
            (1.358, 0.05002679733444698),
            (2.0, 0.0006709252557796953),
        ] {
            assert!((kolmogorov_survival(lambda) - q).abs() < 1e-9, "lambda {lambda}");
        }
        // both series agree where they meet
        let below = kolmogorov_survival(1.0 - 1e-12);
        let above = kolmogorov_survival(1.0);
        assert!((below - above).abs() < 1e-9);
    }

    fn fixture_roi() -> RoiSpec {
        RoiSpec {
            roi_circles: vec![Circle::new(10.0, 10.0, 6.0)],
            background_circles: vec![Circle::new(10.0, 28.0, 6.0)],
            speckle_rect: Rect {
                z0: 0,
                x0: 20,
                height: 8,
                width: 12,
            },
        }
    }

    fn fixture_image() -> BModeImage {
        let px = Image2D::from_fn(21, 36, |i, j| {
            let base = if j < 18 { 0.2 } else { 0.7 };
            base + 0.1 * (((i * 7 + j * 13) % 11) as f32 / 11.0)
        });
        BModeImage::new(px, 80.0).unwrap()
    }

    #[test]
    fn evaluate_identity_and_single_window() {
        let img = fixture_image();
        let rep = evaluate(&img, &img, &fixture_roi(), 1, 2, 0).unwrap();
        assert_eq!(rep.ks_statistic, 0.0);
        assert_eq!(rep.ks_p_value, 1.0);
        assert!(rep.ks_pass);
        assert_eq!(rep.gcnr_std, 0.0);
        assert_eq!(rep.cnr_db_std, 0.0);
        assert!(rep.gcnr_mean > 0.9);

        let again = evaluate(&img, &img, &fixture_roi(), 5, 2, 3).unwrap();
        assert_eq!(again, evaluate(&img, &img, &fixture_roi(), 5, 2, 3).unwrap());
    }

    #[test]
    fn evaluate_rejects_bad_geometry() {
        let img = fixture_image();
        assert!(evaluate(&img, &img, &fixture_roi(), 3, 7, 0).is_err());
        let mut outside = fixture_roi();
        outside.background_circles[0].center_x = 33.0;
        assert!(evaluate(&img, &img, &outside, 1, 1, 0).is_err());
        let mut overlap = fixture_roi();
        overlap.background_circles[0] = Circle::new(10.0, 14.0, 4.0);
        assert!(evaluate(&img, &img, &overlap, 1, 1, 0).is_err());
    }

    #[test]
    fn report_exports() {
        let rep = MetricsReport {
            gcnr_mean: 0.5,
            gcnr_std: 0.01,
            cnr_db_mean: 2.0,
            cnr_db_std: 0.1,
            ks_statistic: 0.02,
            ks_p_value: 0.9,
            ks_pass: true,
            n_windows: 20,
        };
        assert_eq!(rep.csv_row(), "0.500000,0.010000,2.000000,0.100000,0.020000,0.900000,true,20");
        assert_eq!(MetricsReport::CSV_HEADER.split(',').count(), rep.csv_row().split(',').count());
        assert!(rep.to_text().contains("ks_pass = true\n"));
    }
}
