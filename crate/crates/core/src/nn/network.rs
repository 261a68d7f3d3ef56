//! Forward and reverse pass of the residual denoiser
//! `conv3x3(1->48) -> LeakyReLU -> conv3x3(48->48) -> LeakyReLU -> conv1x1(48->1)`.
//!
//! Activations live on a "padded-width grid": a channel plane is stored with
//! row stride `w + 2`, so each 3x3 tap of a reflect-padded input is one
//! contiguous shifted slice and the 48->48 layer becomes nine GEMMs.
//! Grid columns `w` and `w + 1` of every row are scratch and never reach the
//! output; their gradients are forced to zero.

use super::ops::{fill_reflect_border, fold_reflect_border, leaky_relu, leaky_relu_grad};
use super::params::{DenoiserParams, GradientAccumulator, CHANNELS};
use super::Scalar;
use crate::error::{Error, Result};
use crate::image::Image2D;

const TAPS: usize = 9;
const W2_ROW: isize = (CHANNELS * TAPS) as isize;

/// Cached activations of one forward pass, reusable across iterations for a
/// fixed image size.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    h: usize,
    w: usize,
    /// reflect-padded input, one plane
    xpad: Vec<T>,
    /// reflect-padded first-layer activations, 48 planes
    a1pad: Vec<T>,
    /// second-layer activations on the grid, 48 x n
    a2: Vec<T>,
    out: Image2D<T>,
    // backward scratch
    grid_grad: Vec<T>,
    dh2: Vec<T>,
    da1pad: Vec<T>,
}

impl<T: Scalar> Activations<T> {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        if h < 3 || w < 3 {
            return Err(Error::invalid(format!(
                "denoiser input must be at least 3x3, got {h}x{w}"
            )));
        }
        let plane = plane_len(h, w);
        let n = h * (w + 2);
        Ok(Activations {
            h,
            w,
            xpad: vec![T::zero(); plane],
            a1pad: vec![T::zero(); CHANNELS * plane],
            a2: vec![T::zero(); CHANNELS * n],
            out: Image2D::zeros(h, w),
            grid_grad: vec![T::zero(); n],
            dh2: vec![T::zero(); CHANNELS * n],
            da1pad: vec![T::zero(); CHANNELS * plane],
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    /// Output of the most recent [`Activations::forward`].
    pub fn output(&self) -> &Image2D<T> {
        &self.out
    }

    /// Runs the network on `x`, keeping every activation needed by
    /// [`Activations::backward`].
    pub fn forward(&mut self, params: &DenoiserParams<T>, x: &Image2D<T>) -> Result<&Image2D<T>> {
        if x.shape() != (self.h, self.w) {
            return Err(Error::invalid(format!(
                "input {:?} does not match workspace {:?}",
                x.shape(),
                (self.h, self.w)
            )));
        }
        let (h, w) = (self.h, self.w);
        let pw = w + 2;
        let plane = plane_len(h, w);
        let n = h * pw;
        let slope = T::from_f64(params.leaky_slope);
        let offsets = tap_offsets(w);

        for i in 0..h {
            self.xpad[(i + 1) * pw + 1..(i + 1) * pw + 1 + w].copy_from_slice(x.row(i));
        }
        fill_reflect_border(&mut self.xpad, h, w);

        // layer 1: direct 3x3 convolution, activation written into the
        // interior of the padded plane consumed by layer 2
        for co in 0..CHANNELS {
            let dst = &mut self.a1pad[co * plane..(co + 1) * plane];
            let taps = &params.w1[co * TAPS..(co + 1) * TAPS];
            for i in 0..h {
                let row = &mut dst[(i + 1) * pw + 1..(i + 1) * pw + 1 + w];
                row.fill(params.b1[co]);
                for (t, &wt) in taps.iter().enumerate() {
                    let src = &self.xpad[i * pw + offsets[t]..i * pw + offsets[t] + w];
                    for (r, &s) in row.iter_mut().zip(src) {
                        *r = *r + wt * s;
                    }
                }
                for r in row.iter_mut() {
                    *r = leaky_relu(*r, slope);
                }
            }
            fill_reflect_border(dst, h, w);
        }

        // layer 2: nine shifted GEMMs, C[48 x n] += W_t[48 x 48] * A1_t[48 x n]
        for (co, chunk) in self.a2.chunks_exact_mut(n).enumerate() {
            chunk.fill(params.b2[co]);
        }
        for (t, &off) in offsets.iter().enumerate() {
            // SAFETY: w2 is [48][48][9]; a1pad holds 48 planes of `plane`
            // values and off + n <= plane; a2 is 48 x n and distinct.
            unsafe {
                T::gemm(
                    CHANNELS,
                    CHANNELS,
                    n,
                    T::one(),
                    params.w2.as_ptr().add(t),
                    W2_ROW,
                    TAPS as isize,
                    self.a1pad.as_ptr().add(off),
                    plane as isize,
                    1,
                    T::one(),
                    self.a2.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
        for v in self.a2.iter_mut() {
            *v = leaky_relu(*v, slope);
        }

        // layer 3: 1x1 projection
        let out = self.out.as_mut_slice();
        for i in 0..h {
            let row = &mut out[i * w..(i + 1) * w];
            row.fill(params.b3[0]);
            for (c, &wc) in params.w3.iter().enumerate() {
                let src = &self.a2[c * n + i * pw..c * n + i * pw + w];
                for (r, &s) in row.iter_mut().zip(src) {
                    *r = *r + wc * s;
                }
            }
        }
        Ok(&self.out)
    }

    /// Smallest |pre-activation| over both hidden layers at valid pixels;
    /// finite-difference checks need this bounded away from zero.
    pub fn min_abs_preactivation(&self, slope: f64) -> f64 {
        let (h, w) = (self.h, self.w);
        let pw = w + 2;
        let plane = plane_len(h, w);
        let n = h * pw;
        let pre = |a: T| {
            let a = a.as_f64();
            if a >= 0.0 { a } else { -a / slope }
        };
        let mut m = f64::INFINITY;
        for c in 0..CHANNELS {
            for i in 0..h {
                for j in 0..w {
                    m = m.min(pre(self.a1pad[c * plane + (i + 1) * pw + j + 1]));
                    m = m.min(pre(self.a2[c * n + i * pw + j]));
                }
            }
        }
        m
    }

    /// Accumulates into `grads` the parameter gradient of `<grad_out, f(x)>`
    /// for the input of the last forward pass.
    pub fn backward(
        &mut self,
        params: &DenoiserParams<T>,
        grad_out: &Image2D<T>,
        grads: &mut GradientAccumulator<T>,
    ) -> Result<()> {
        if grad_out.shape() != (self.h, self.w) {
            return Err(Error::invalid(format!(
                "output gradient {:?} does not match workspace {:?}",
                grad_out.shape(),
                (self.h, self.w)
            )));
        }
        let (h, w) = (self.h, self.w);
        let pw = w + 2;
        let plane = plane_len(h, w);
        let n = h * pw;
        let slope = T::from_f64(params.leaky_slope);
        let offsets = tap_offsets(w);
        let g = &mut grads.0;

        self.grid_grad.fill(T::zero());
        for i in 0..h {
            self.grid_grad[i * pw..i * pw + w].copy_from_slice(grad_out.row(i));
        }

        // layer 3
        g.b3[0] = g.b3[0] + sum(&self.grid_grad);
        for c in 0..CHANNELS {
            let a2c = &self.a2[c * n..(c + 1) * n];
            g.w3[c] = g.w3[c] + dot(&self.grid_grad, a2c);
            let wc = params.w3[c];
            let dh = &mut self.dh2[c * n..(c + 1) * n];
            for ((d, &gq), &a) in dh.iter_mut().zip(&self.grid_grad).zip(a2c) {
                *d = wc * gq * leaky_relu_grad(a, slope);
            }
            g.b2[c] = g.b2[c] + sum(dh);
        }

        // layer 2, in column blocks so both products reuse the cached
        // slice of dH2: dW_t[48 x 48] += dH2[48 x nb] * A1_t^T[nb x 48] and
        // dA1pad[48 x nb] (shifted by tap) += W_t^T[48 x 48] * dH2[48 x nb]
        self.da1pad.fill(T::zero());
        let mut j0 = 0;
        while j0 < n {
            let nb = BACKWARD_BLOCK.min(n - j0);
            for (t, &off) in offsets.iter().enumerate() {
                // SAFETY: every block lies within the extents of the forward
                // GEMM; the gradient buffers are distinct from every operand.
                unsafe {
                    T::gemm(
                        CHANNELS,
                        nb,
                        CHANNELS,
                        T::one(),
                        self.dh2.as_ptr().add(j0),
                        n as isize,
                        1,
                        self.a1pad.as_ptr().add(off + j0),
                        1,
                        plane as isize,
                        T::one(),
                        g.w2.as_mut_ptr().add(t),
                        W2_ROW,
                        TAPS as isize,
                    );
                    T::gemm(
                        CHANNELS,
                        CHANNELS,
                        nb,
                        T::one(),
                        params.w2.as_ptr().add(t),
                        TAPS as isize,
                        W2_ROW,
                        self.dh2.as_ptr().add(j0),
                        n as isize,
                        1,
                        T::one(),
                        self.da1pad.as_mut_ptr().add(off + j0),
                        plane as isize,
                        1,
                    );
                }
            }
            j0 += nb;
        }

        // layer 1
        let mut dh1 = vec![T::zero(); h * w];
        for c in 0..CHANNELS {
            let da = &mut self.da1pad[c * plane..(c + 1) * plane];
            fold_reflect_border(da, h, w);
            let a1 = &self.a1pad[c * plane..(c + 1) * plane];
            for i in 0..h {
                let base = (i + 1) * pw + 1;
                let dst = &mut dh1[i * w..(i + 1) * w];
                for ((d, &gr), &a) in dst.iter_mut().zip(&da[base..base + w]).zip(&a1[base..base + w]) {
                    *d = gr * leaky_relu_grad(a, slope);
                }
            }
            g.b1[c] = g.b1[c] + sum(&dh1);
            for (t, &off) in offsets.iter().enumerate() {
                let mut acc = 0.0f64;
                for i in 0..h {
                    let src = &self.xpad[i * pw + off..i * pw + off + w];
                    acc += dot_f64(&dh1[i * w..(i + 1) * w], src);
                }
                g.w1[c * TAPS + t] = g.w1[c * TAPS + t] + T::from_f64(acc);
            }
        }
        Ok(())
    }
}

/// Applies the denoiser to one image.
pub fn forward<T: Scalar>(params: &DenoiserParams<T>, x: &Image2D<T>) -> Result<Image2D<T>> {
    let mut act = Activations::new(x.height(), x.width())?;
    act.forward(params, x)?;
    Ok(act.out)
}

/// Grid columns per backward GEMM block.
const BACKWARD_BLOCK: usize = 8192;

fn plane_len(h: usize, w: usize) -> usize {
    // two trailing values so the bottom-right tap of the last scratch
    // column stays in bounds
    (h + 2) * (w + 2) + 2
}

fn tap_offsets(w: usize) -> [usize; TAPS] {
    let pw = w + 2;
    std::array::from_fn(|t| (t / 3) * pw + t % 3)
}

fn sum<T: Scalar>(v: &[T]) -> T {
    T::from_f64(v.iter().map(|x| x.as_f64()).sum())
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    T::from_f64(dot_f64(a, b))
}

fn dot_f64<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.as_f64() * y.as_f64()).sum()
}
