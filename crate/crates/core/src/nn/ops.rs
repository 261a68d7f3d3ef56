//! Fixed image operators with their exact adjoints.

use super::Scalar;
use crate::error::{Error, Result};
use crate::image::Image2D;

/// Normalized 3x3 binomial approximation of a Gaussian.
pub const GAUSSIAN_3X3: [[f64; 3]; 3] = [
    [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
    [2.0 / 16.0, 4.0 / 16.0, 2.0 / 16.0],
    [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
];

#[inline]
pub fn leaky_relu<T: Scalar>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        slope * x
    }
}

/// Derivative of [`leaky_relu`]; 1 at the kink.
#[inline]
pub fn leaky_relu_grad<T: Scalar>(x: T, slope: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        slope
    }
}

/// Fills the one-pixel border of a `(h+2) x (w+2)` buffer by mirroring the
/// interior without repeating the edge (`[x1, x0, x1, x2, ...]`).
pub(crate) fn fill_reflect_border<T: Scalar>(pad: &mut [T], h: usize, w: usize) {
    let pw = w + 2;
    let (top, rest) = pad.split_at_mut(pw);
    top[1..=w].copy_from_slice(&rest[pw + 1..pw + 1 + w]);
    let bottom = (h + 1) * pw;
    let src = (h - 1) * pw;
    pad.copy_within(src + 1..src + 1 + w, bottom + 1);
    for r in 0..h + 2 {
        let row = r * pw;
        pad[row] = pad[row + 2];
        pad[row + w + 1] = pad[row + w - 1];
    }
}

/// Adjoint of [`fill_reflect_border`]: folds border gradients back onto the
/// interior pixels they were copied from. Border entries are left stale.
pub(crate) fn fold_reflect_border<T: Scalar>(pad: &mut [T], h: usize, w: usize) {
    let pw = w + 2;
    for r in 0..h + 2 {
        let row = r * pw;
        pad[row + 2] = pad[row + 2] + pad[row];
        pad[row + w - 1] = pad[row + w - 1] + pad[row + w + 1];
    }
    for j in 1..=w {
        pad[2 * pw + j] = pad[2 * pw + j] + pad[j];
        let bottom = (h + 1) * pw + j;
        let src = (h - 1) * pw + j;
        pad[src] = pad[src] + pad[bottom];
    }
}

pub(crate) fn reflect_pad<T: Scalar>(x: &Image2D<T>) -> Vec<T> {
    let (h, w) = x.shape();
    let pw = w + 2;
    let mut pad = vec![T::zero(); (h + 2) * pw];
    for i in 0..h {
        pad[(i + 1) * pw + 1..(i + 1) * pw + 1 + w].copy_from_slice(x.row(i));
    }
    fill_reflect_border(&mut pad, h, w);
    pad
}

fn require_min_size<T: Scalar>(x: &Image2D<T>, min: usize, what: &str) -> Result<()> {
    if x.height() < min || x.width() < min {
        return Err(Error::invalid(format!(
            "{what} needs at least {min}x{min} pixels, got {}x{}",
            x.height(),
            x.width()
        )));
    }
    Ok(())
}

/// Reflect-padded 3x3 Gaussian smoothing.
pub fn gaussian3x3<T: Scalar>(x: &Image2D<T>) -> Result<Image2D<T>> {
    require_min_size(x, 2, "gaussian3x3")?;
    let (h, w) = x.shape();
    let pw = w + 2;
    let pad = reflect_pad(x);
    let k = GAUSSIAN_3X3.map(|r| r.map(T::from_f64));
    Ok(Image2D::from_fn(h, w, |i, j| {
        let mut acc = T::zero();
        for (dy, krow) in k.iter().enumerate() {
            let base = (i + dy) * pw + j;
            for (dx, &kv) in krow.iter().enumerate() {
                acc = acc + kv * pad[base + dx];
            }
        }
        acc
    }))
}

/// Transpose of [`gaussian3x3`].
pub fn gaussian3x3_adjoint<T: Scalar>(u: &Image2D<T>) -> Result<Image2D<T>> {
    require_min_size(u, 2, "gaussian3x3")?;
    let (h, w) = u.shape();
    let pw = w + 2;
    let mut pad = vec![T::zero(); (h + 2) * pw];
    let k = GAUSSIAN_3X3.map(|r| r.map(T::from_f64));
    for i in 0..h {
        for j in 0..w {
            let g = u.get(i, j);
            for (dy, krow) in k.iter().enumerate() {
                let base = (i + dy) * pw + j;
                for (dx, &kv) in krow.iter().enumerate() {
                    pad[base + dx] = pad[base + dx] + kv * g;
                }
            }
        }
    }
    fold_reflect_border(&mut pad, h, w);
    Ok(Image2D::from_fn(h, w, |i, j| pad[(i + 1) * pw + j + 1]))
}

/// Forward differences `(gx, gy)`; the last column of `gx` and last row of
/// `gy` are zero.
pub fn image_gradient<T: Scalar>(x: &Image2D<T>) -> Result<(Image2D<T>, Image2D<T>)> {
    require_min_size(x, 2, "image_gradient")?;
    let (h, w) = x.shape();
    let gx = Image2D::from_fn(h, w, |i, j| {
        if j + 1 < w {
            x.get(i, j + 1) - x.get(i, j)
        } else {
            T::zero()
        }
    });
    let gy = Image2D::from_fn(h, w, |i, j| {
        if i + 1 < h {
            x.get(i + 1, j) - x.get(i, j)
        } else {
            T::zero()
        }
    });
    Ok((gx, gy))
}

/// Transpose of [`image_gradient`], mapping a gradient pair back to an image.
pub fn image_gradient_adjoint<T: Scalar>(ux: &Image2D<T>, uy: &Image2D<T>) -> Result<Image2D<T>> {
    ux.ensure_same_shape(uy)?;
    require_min_size(ux, 2, "image_gradient")?;
    let (h, w) = ux.shape();
    let mut out = Image2D::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            if j + 1 < w {
                let g = ux.get(i, j);
                out.set(i, j + 1, out.get(i, j + 1) + g);
                out.set(i, j, out.get(i, j) - g);
            }
            if i + 1 < h {
                let g = uy.get(i, j);
                out.set(i + 1, j, out.get(i + 1, j) + g);
                out.set(i, j, out.get(i, j) - g);
            }
        }
    }
    Ok(out)
}

/// Mean absolute difference `mean(|a - b|)`, accumulated in f64 in row-major
/// order.
pub fn l1_mean<T: Scalar>(a: &Image2D<T>, b: &Image2D<T>) -> Result<f64> {
    a.mean_abs_diff(b)
}

/// Gradient of [`l1_mean`] with respect to `a`: `sign(a - b) / n`, with
/// `sign(0) = 0`.
pub fn l1_mean_grad<T: Scalar>(a: &Image2D<T>, b: &Image2D<T>) -> Result<Image2D<T>> {
    let inv = T::from_f64(1.0 / a.len() as f64);
    a.zip_map(b, |x, y| {
        let d = x - y;
        if d > T::zero() {
            inv
        } else if d < T::zero() {
            -inv
        } else {
            T::zero()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> Image2D<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image2D::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn leaky_relu_values() {
        assert_eq!(leaky_relu(1.0, 0.2), 1.0);
        assert_eq!(leaky_relu(-1.0, 0.2), -0.2);
        assert_eq!(leaky_relu(0.0, 0.2), 0.0);
        assert_eq!(leaky_relu_grad(0.0, 0.2), 1.0);
        assert_eq!(leaky_relu_grad(-3.0, 0.2), 0.2);
    }

    #[test]
    fn gaussian_constant_and_impulse() {
        let c = Image2D::<f64>::filled(6, 7, 0.37);
        let g = gaussian3x3(&c).unwrap();
        assert!(g.as_slice().iter().all(|v| (v - 0.37).abs() < 1e-15));

        let mut imp = Image2D::<f64>::zeros(5, 5);
        imp.set(2, 2, 1.0);
        let g = gaussian3x3(&imp).unwrap();
        assert!((g.get(2, 2) - 0.25).abs() < 1e-15);
        assert!((g.get(1, 2) - 0.125).abs() < 1e-15);
        assert!((g.get(1, 1) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn gaussian_preserves_ramp_interior() {
        let ramp = Image2D::<f64>::from_fn(8, 9, |_, j| 0.1 * j as f64);
        let g = gaussian3x3(&ramp).unwrap();
        for i in 0..8 {
            for j in 1..8 {
                assert!((g.get(i, j) - ramp.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradient_of_constant_and_ramp() {
        let c = Image2D::<f64>::filled(4, 5, 2.0);
        let (gx, gy) = image_gradient(&c).unwrap();
        assert!(gx.as_slice().iter().chain(gy.as_slice()).all(|&v| v == 0.0));

        let ramp = Image2D::<f64>::from_fn(4, 5, |_, j| j as f64);
        let (gx, gy) = image_gradient(&ramp).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                assert_eq!(gx.get(i, j), if j < 4 { 1.0 } else { 0.0 });
                assert_eq!(gy.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn adjoint_identities() {
        for (h, w, seed) in [(8, 8, 1), (5, 9, 2), (2, 2, 3), (3, 7, 4)] {
            let x = random_image(h, w, seed);
            let u = random_image(h, w, seed + 100);
            let v = random_image(h, w, seed + 200);

            let lhs = gaussian3x3(&x).unwrap().dot(&u).unwrap();
            let rhs = x.dot(&gaussian3x3_adjoint(&u).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "gaussian {h}x{w}: {lhs} vs {rhs}");

            let (gx, gy) = image_gradient(&x).unwrap();
            let lhs = gx.dot(&u).unwrap() + gy.dot(&v).unwrap();
            let rhs = x.dot(&image_gradient_adjoint(&u, &v).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "gradient {h}x{w}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn reflect_pad_adjoint() {
        let (h, w) = (4, 6);
        let x = random_image(h, w, 9);
        let pad = reflect_pad(&x);
        let mut u: Vec<f64> = random_image(h + 2, w + 2, 10).into_vec();
        let lhs: f64 = pad.iter().zip(&u).map(|(a, b)| a * b).sum();
        fold_reflect_border(&mut u, h, w);
        let folded = Image2D::from_fn(h, w, |i, j| u[(i + 1) * (w + 2) + j + 1]);
        let rhs = x.dot(&folded).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn too_small_images_are_rejected() {
        let tiny = Image2D::<f64>::zeros(1, 5);
        assert!(gaussian3x3(&tiny).is_err());
        assert!(image_gradient(&tiny).is_err());
    }

    #[test]
    fn l1_values_and_gradient() {
        let a = Image2D::<f64>::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        let b = Image2D::<f64>::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        assert_eq!(l1_mean(&a, &a).unwrap(), 0.0);
        assert_eq!(l1_mean(&a, &b).unwrap(), 0.5);
        let g = l1_mean_grad(&a, &b).unwrap();
        assert_eq!(g.as_slice(), &[-0.5, 0.0]);
        let c = Image2D::<f64>::zeros(2, 2);
        assert!(l1_mean(&a, &c).is_err());
    }

    #[test]
    fn l1_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_image(8, 8, 6);
        // keep every |a - b| comfortably above the step
        let a = b.map(|v| {
            let off: f64 = rng.random_range(0.01..0.5);
            if rng.random_bool(0.5) { v + off } else { v - off }
        });
        let g = l1_mean_grad(&a, &b).unwrap();
        let h = 1e-5;
        for idx in 0..a.len() {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap.as_mut_slice()[idx] += h;
            am.as_mut_slice()[idx] -= h;
            let fd = (l1_mean(&ap, &b).unwrap() - l1_mean(&am, &b).unwrap()) / (2.0 * h);
            let an = g.as_slice()[idx];
            assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-12), "{fd} vs {an}");
        }
    }
}
