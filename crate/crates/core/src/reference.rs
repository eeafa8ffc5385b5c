//! Slow, obviously-correct reference implementations used as test oracles,
//! by the `verify` suite, and by the op-count instrumentation. Nothing in the
//! fast paths calls into this module.

use std::cell::Cell;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor4, RealTensor4, Shape4};

pub fn random_real<T: Scalar>(shape: Shape4, seed: u64) -> RealTensor4<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealTensor4::from_fn(shape, |_| T::of(rng.random_range(-1.0..1.0)))
}

pub fn random_complex<T: Scalar>(shape: Shape4, seed: u64) -> ComplexTensor4<T> {
    ComplexTensor4 {
        re: random_real(shape, seed),
        im: random_real(shape, seed ^ 0x9e37_79b9_7f4a_7c15),
    }
}

/// `max |a − b| / max |b|` over complex elements (absolute when `b` is zero).
pub fn max_rel_diff<T: Scalar>(a: &ComplexTensor4<T>, b: &ComplexTensor4<T>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..a.len() {
        let dr = a.re.data()[i].as_f64() - b.re.data()[i].as_f64();
        let di = a.im.data()[i].as_f64() - b.im.data()[i].as_f64();
        diff = diff.max(dr.hypot(di));
        scale = scale.max(b.re.data()[i].as_f64().hypot(b.im.data()[i].as_f64()));
    }
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn max_rel_diff_real<T: Scalar>(a: &RealTensor4<T>, b: &RealTensor4<T>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let diff = a
        .data()
        .iter()
        .zip(b.data())
        .fold(0.0f64, |m, (x, y)| m.max((x.as_f64() - y.as_f64()).abs()));
    let scale = b.max_abs().as_f64();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// O((MN)²) double-sum DFT of every (batch, channel) plane, accumulated in f64.
pub fn naive_dft2<T: Scalar>(x: &ComplexTensor4<T>, inverse: bool) -> ComplexTensor4<T> {
    let [b, m, n, c] = x.shape();
    let sign = if inverse { 1.0 } else { -1.0 };
    let norm = if inverse { 1.0 / (m * n) as f64 } else { 1.0 };
    let mut out = ComplexTensor4::zeros(x.shape());
    for bi in 0..b {
        for ch in 0..c {
            for u in 0..m {
                for v in 0..n {
                    let (mut sr, mut si) = (0.0, 0.0);
                    for p in 0..m {
                        for q in 0..n {
                            let theta = sign * 2.0 * PI * ((u * p) as f64 / m as f64 + (v * q) as f64 / n as f64);
                            let (xr, xi) = (x.re.get([bi, p, q, ch]).as_f64(), x.im.get([bi, p, q, ch]).as_f64());
                            sr += xr * theta.cos() - xi * theta.sin();
                            si += xr * theta.sin() + xi * theta.cos();
                        }
                    }
                    out.re.set([bi, u, v, ch], T::of(sr * norm));
                    out.im.set([bi, u, v, ch], T::of(si * norm));
                }
            }
        }
    }
    out
}

/// Circular cross-correlation of two M×N planes:
/// `R[τ] = Σ_t u[t]·v[(t + τ) mod (M, N)]`.
pub fn circular_xcorr(u: &[f64], v: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for ty in 0..m {
        for tx in 0..n {
            let mut s = 0.0;
            for y in 0..m {
                for x in 0..n {
                    s += u[y * n + x] * v[((y + ty) % m) * n + (x + tx) % n];
                }
            }
            out[ty * n + tx] = s;
        }
    }
    out
}

/// Linear (non-wrapping) cross-correlation at lag (dy, dx):
/// `Σ_t u[t]·v[t + τ]` with both planes zero outside their extent.
pub fn linear_xcorr_at(u: &[f64], v: &[f64], m: usize, n: usize, dy: isize, dx: isize) -> f64 {
    let mut s = 0.0;
    for y in 0..m as isize {
        for x in 0..n as isize {
            let (yy, xx) = (y + dy, x + dx);
            if yy >= 0 && yy < m as isize && xx >= 0 && xx < n as isize {
                s += u[(y as usize) * n + x as usize] * v[(yy as usize) * n + xx as usize];
            }
        }
    }
    s
}

/// Counts real multiplications performed by the instrumented references.
#[derive(Debug, Default)]
pub struct MulCounter(Cell<u64>);

impl MulCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.0.get()
    }

    fn mul(&self, a: f64, b: f64) -> f64 {
        self.0.set(self.0.get() + 1);
        a * b
    }
}

/// Top/left padding of TF-style `same` convolution.
pub fn same_padding(input: usize, k: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + k).saturating_sub(input);
    (out, total / 2)
}

/// Quadruple-loop `same` cross-correlation (CNN convention) plus bias.
/// Every tap is multiplied, including taps over the zero border, so the
/// counter sees exactly K²·H_out·W_out·Cin·Cout multiplies.
pub fn naive_conv2d(
    x: &RealTensor4<f64>,
    kernel: &RealTensor4<f64>,
    bias: &[f64],
    stride: usize,
    counter: &MulCounter,
) -> RealTensor4<f64> {
    let [b, h, w, cin] = x.shape();
    let [k, _, _, cout] = kernel.shape();
    let (ho, pt) = same_padding(h, k, stride);
    let (wo, pl) = same_padding(w, k, stride);
    let mut out = RealTensor4::zeros([b, ho, wo, cout]);
    for bi in 0..b {
        for oy in 0..ho {
            for ox in 0..wo {
                for co in 0..cout {
                    let mut s = bias[co];
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pt as isize;
                            let ix = (ox * stride + kx) as isize - pl as isize;
                            for ci in 0..cin {
                                let v = if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    x.get([bi, iy as usize, ix as usize, ci])
                                } else {
                                    0.0
                                };
                                s += counter.mul(v, kernel.get([ky, kx, ci, co]));
                            }
                        }
                    }
                    out.set([bi, oy, ox, co], s);
                }
            }
        }
    }
    out
}

/// Direct evaluation of `Σ_ci conj(x[b,:,:,ci])·W[:,:,ci,co]` with each
/// complex product spelled out as four real multiplies.
pub fn naive_eml(x: &ComplexTensor4<f64>, weights: &ComplexTensor4<f64>, counter: &MulCounter) -> ComplexTensor4<f64> {
    let [b, h, w, cin] = x.shape();
    let cout = weights.shape()[3];
    let mut out = ComplexTensor4::zeros([b, h, w, cout]);
    for bi in 0..b {
        for y in 0..h {
            for xx in 0..w {
                for co in 0..cout {
                    let (mut sr, mut si) = (0.0, 0.0);
                    for ci in 0..cin {
                        let (ar, ai) = (x.re.get([bi, y, xx, ci]), -x.im.get([bi, y, xx, ci]));
                        let (wr, wi) = (weights.re.get([y, xx, ci, co]), weights.im.get([y, xx, ci, co]));
                        sr += counter.mul(ar, wr) - counter.mul(ai, wi);
                        si += counter.mul(ar, wi) + counter.mul(ai, wr);
                    }
                    out.re.set([bi, y, xx, co], sr);
                    out.im.set([bi, y, xx, co], si);
                }
            }
        }
    }
    out
}

/// Time-domain batch normalization per channel over (batch, H, W) with
/// biased variance; the straightforward formula, no fused backward.
pub fn naive_batchnorm(x: &RealTensor4<f64>, gamma: &[f64], beta: &[f64], eps: f64) -> RealTensor4<f64> {
    let [b, h, w, c] = x.shape();
    let n = (b * h * w) as f64;
    let mut out = x.clone();
    for ch in 0..c {
        let vals: Vec<f64> = (0..b * h * w).map(|i| x.data()[i * c + ch]).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        for i in 0..b * h * w {
            out.data_mut()[i * c + ch] = gamma[ch] * (vals[i] - mean) / (var + eps).sqrt() + beta[ch];
        }
    }
    out
}

/// Central finite difference of `f` with respect to `x[i]`.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &mut [f64], i: usize, h: f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let up = f(x);
    x[i] = orig - h;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * h)
}

/// Symmetric relative error used by gradient checks:
/// `|a − n| / max(|a|, |n|, floor)`.
pub fn grad_rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn random_unit_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}
