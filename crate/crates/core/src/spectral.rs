//! 2D discrete Fourier transforms over the spatial plane of 4-axis tensors,
//! and the spectral primitives that frequency-domain layers are built from.
//!
//! Convention: the forward transform is the plain double sum
//! `X[u,v] = Σ_x Σ_y x[x,y]·exp(-2πi(ux/M + vy/N))` with no normalization;
//! the inverse carries the `1/(M·N)` factor.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{numel, ComplexTensor4, RealTensor4, Shape4};

/// Precomputed row/column FFTs for one H×W plane size.
pub struct Dft2Plan<T: Scalar> {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Clone for Dft2Plan<T> {
    fn clone(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            row_fwd: Arc::clone(&self.row_fwd),
            row_inv: Arc::clone(&self.row_inv),
            col_fwd: Arc::clone(&self.col_fwd),
            col_inv: Arc::clone(&self.col_inv),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for Dft2Plan<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dft2Plan({}x{})", self.height, self.width)
    }
}

impl<T: Scalar> Dft2Plan<T> {
    pub fn new(height: usize, width: usize) -> Self {
        assert!(height >= 1 && width >= 1, "plane dims must be >= 1");
        let mut planner = FftPlanner::<T>::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft(width, FftDirection::Forward),
            row_inv: planner.plan_fft(width, FftDirection::Inverse),
            col_fwd: planner.plan_fft(height, FftDirection::Forward),
            col_inv: planner.plan_fft(height, FftDirection::Inverse),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn check_plane(&self, shape: Shape4) -> Result<()> {
        check_dim("height", self.height, shape[1])?;
        check_dim("width", self.width, shape[2])
    }

    pub fn forward_real(&self, x: &RealTensor4<T>) -> Result<ComplexTensor4<T>> {
        self.check_plane(x.shape())?;
        x.check_finite()?;
        Ok(self.run(x, None, false))
    }

    pub fn forward(&self, x: &ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
        self.check_plane(x.shape())?;
        x.check_finite()?;
        Ok(self.run(&x.re, Some(&x.im), false))
    }

    pub fn inverse(&self, x: &ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
        self.check_plane(x.shape())?;
        x.check_finite()?;
        Ok(self.run(&x.re, Some(&x.im), true))
    }

    /// Per-(sample, channel) transform; samples are processed in parallel
    /// and each writes only its own output block.
    fn run(&self, re: &RealTensor4<T>, im: Option<&RealTensor4<T>>, inverse: bool) -> ComplexTensor4<T> {
        let shape = re.shape();
        let (h, w, c) = (shape[1], shape[2], shape[3]);
        let plane = h * w;
        let block = plane * c;
        let mut out = ComplexTensor4::zeros(shape);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let scale = if inverse { T::one() / T::of(plane as f64) } else { T::one() };
        let scratch_len = row.get_inplace_scratch_len().max(col.get_inplace_scratch_len());

        out.re
            .data_mut()
            .par_chunks_mut(block)
            .zip(out.im.data_mut().par_chunks_mut(block))
            .enumerate()
            .for_each(|(b, (out_re, out_im))| {
                let src_re = re.outer(b);
                let src_im = im.map(|t| t.outer(b));
                let zero = Complex::new(T::zero(), T::zero());
                let mut buf = vec![zero; block];
                let mut tr = vec![zero; block];
                let mut scratch = vec![zero; scratch_len];
                // (h, w, c) -> channel-major planes
                for p in 0..plane {
                    for ch in 0..c {
                        let i = p * c + ch;
                        let v_im = src_im.map_or(T::zero(), |s| s[i]);
                        buf[ch * plane + p] = Complex::new(src_re[i], v_im);
                    }
                }
                row.process_with_scratch(&mut buf, &mut scratch);
                for ch in 0..c {
                    let src = &buf[ch * plane..(ch + 1) * plane];
                    let dst = &mut tr[ch * plane..(ch + 1) * plane];
                    for y in 0..h {
                        for x in 0..w {
                            dst[x * h + y] = src[y * w + x];
                        }
                    }
                }
                col.process_with_scratch(&mut tr, &mut scratch);
                for ch in 0..c {
                    let src = &tr[ch * plane..(ch + 1) * plane];
                    for y in 0..h {
                        for x in 0..w {
                            let v = src[x * h + y];
                            let i = (y * w + x) * c + ch;
                            out_re[i] = v.re * scale;
                            out_im[i] = v.im * scale;
                        }
                    }
                }
            });
        out
    }
}

/// Anything `dft2` accepts: real tensors (zero imaginary plane) or complex.
pub trait SpatialSignal<T: Scalar> {
    fn shape(&self) -> Shape4;
    fn dft2_with(&self, plan: &Dft2Plan<T>) -> Result<ComplexTensor4<T>>;
}

impl<T: Scalar> SpatialSignal<T> for RealTensor4<T> {
    fn shape(&self) -> Shape4 {
        RealTensor4::shape(self)
    }

    fn dft2_with(&self, plan: &Dft2Plan<T>) -> Result<ComplexTensor4<T>> {
        plan.forward_real(self)
    }
}

impl<T: Scalar> SpatialSignal<T> for ComplexTensor4<T> {
    fn shape(&self) -> Shape4 {
        ComplexTensor4::shape(self)
    }

    fn dft2_with(&self, plan: &Dft2Plan<T>) -> Result<ComplexTensor4<T>> {
        plan.forward(self)
    }
}

/// Unnormalized forward 2D DFT of every (batch, channel) plane.
pub fn dft2<T: Scalar, S: SpatialSignal<T>>(x: &S) -> Result<ComplexTensor4<T>> {
    let s = x.shape();
    x.dft2_with(&Dft2Plan::new(s[1], s[2]))
}

/// Inverse 2D DFT with `1/(M·N)` normalization.
pub fn idft2<T: Scalar>(x: &ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
    let s = x.shape();
    Dft2Plan::new(s[1], s[2]).inverse(x)
}

/// Embed a K×K×Cin×Cout filter in the upper-left corner of a
/// `target_h`×`target_w` grid; every other entry is exactly zero.
pub fn zero_pad_filter<T: Scalar>(
    filter: &RealTensor4<T>,
    target_h: usize,
    target_w: usize,
) -> Result<RealTensor4<T>> {
    let [kh, kw, cin, cout] = filter.shape();
    if kh > target_h || kw > target_w {
        return Err(Error::invalid(format!(
            "filter {kh}x{kw} does not fit in a {target_h}x{target_w} plane"
        )));
    }
    let mut out = RealTensor4::zeros([target_h, target_w, cin, cout]);
    for y in 0..kh {
        for x in 0..kw {
            let src = filter.outer(y);
            let n = cin * cout;
            let src = &src[x * n..(x + 1) * n];
            let base = out.offset([y, x, 0, 0]);
            out.data_mut()[base..base + n].copy_from_slice(src);
        }
    }
    Ok(out)
}

fn broadcast(a: Shape4, b: Shape4) -> Result<Shape4> {
    const AXES: [&str; 4] = ["axis 0", "axis 1", "axis 2", "axis 3"];
    let mut out = [0; 4];
    for i in 0..4 {
        out[i] = match (a[i], b[i]) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            (x, y) => {
                return Err(Error::Shape {
                    axis: AXES[i],
                    expected: x,
                    actual: y,
                })
            }
        };
    }
    Ok(out)
}

/// Elementwise `conj(a)·b` with size-1 axes broadcast, so a [H,W,Cin,1]
/// input slice against [H,W,Cin,Cout] weights copies the input across Cout.
pub fn complex_conj_mul<T: Scalar>(a: &ComplexTensor4<T>, b: &ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    let shape = broadcast(sa, sb)?;
    let pick = |s: Shape4, idx: [usize; 4]| -> [usize; 4] {
        let mut j = idx;
        for i in 0..4 {
            if s[i] == 1 {
                j[i] = 0;
            }
        }
        j
    };
    let mut out = ComplexTensor4::zeros(shape);
    for flat in 0..numel(shape) {
        let mut idx = [0; 4];
        let mut rem = flat;
        for axis in (0..4).rev() {
            idx[axis] = rem % shape[axis];
            rem /= shape[axis];
        }
        let ia = a.re.offset(pick(sa, idx));
        let ib = b.re.offset(pick(sb, idx));
        let (ar, ai) = (a.re.data()[ia], -a.im.data()[ia]);
        let (br, bi) = (b.re.data()[ib], b.im.data()[ib]);
        out.re.data_mut()[flat] = ar * br - ai * bi;
        out.im.data_mut()[flat] = ar * bi + ai * br;
    }
    Ok(out)
}

/// Sum an [H, W, Cin, Cout] grid over its Cin axis, giving a [1, H, W, Cout]
/// feature map.
pub fn reduce_sum_cin<T: Scalar>(x: &ComplexTensor4<T>) -> ComplexTensor4<T> {
    let [h, w, cin, cout] = x.shape();
    let mut out = ComplexTensor4::zeros([1, h, w, cout]);
    for p in 0..h * w {
        for ci in 0..cin {
            let src = (p * cin + ci) * cout;
            for co in 0..cout {
                out.re.data_mut()[p * cout + co] = out.re.data()[p * cout + co] + x.re.data()[src + co];
                out.im.data_mut()[p * cout + co] = out.im.data()[p * cout + co] + x.im.data()[src + co];
            }
        }
    }
    out
}

/// Relative Parseval gap `|Σ|x|² − Σ|X|²/(MN)| / Σ|x|²`; zero-energy input
/// yields 0.
pub fn parseval_gap<T: Scalar>(x: &RealTensor4<T>) -> Result<T> {
    let time = x.sum_squares();
    if time == T::zero() {
        return Ok(T::zero());
    }
    let spec = dft2(x)?;
    let plane = T::of((x.height() * x.width()) as f64);
    Ok((time - spec.energy() / plane).abs() / time)
}

/// 0/1 grid selecting the upper-left K×K corner of an H×W plane.
#[derive(Clone, Debug, PartialEq)]
pub struct FixationMask {
    height: usize,
    width: usize,
    k: usize,
    mask: Vec<u8>,
}

impl FixationMask {
    pub fn new(height: usize, width: usize, k: usize) -> Result<Self> {
        if k == 0 || k > height.min(width) {
            return Err(Error::invalid(format!(
                "fixation support {k} must lie in [1, {}]",
                height.min(width)
            )));
        }
        let mask = (0..height * width)
            .map(|i| u8::from(i / width < k && i % width < k))
            .collect();
        Ok(Self { height, width, k, mask })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.mask[y * self.width + x] == 1
    }

    pub fn ones(&self) -> usize {
        self.mask.iter().map(|&m| m as usize).sum()
    }
}

/// Frequency-domain weights of an EML: an [H, W, Cin, Cout] complex grid
/// equal to the DFT of a zero-padded K×K filter bank.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralWeights<T> {
    pub values: ComplexTensor4<T>,
    support_k: usize,
}

impl<T: Scalar> SpectralWeights<T> {
    pub fn new(values: ComplexTensor4<T>, support_k: usize) -> Result<Self> {
        let [h, w, _, _] = values.shape();
        if support_k == 0 || support_k > h.min(w) {
            return Err(Error::invalid(format!(
                "support {support_k} must lie in [1, {}]",
                h.min(w)
            )));
        }
        Ok(Self { values, support_k })
    }

    /// DFT of `filter` (K×K×Cin×Cout) zero-padded to `height`×`width`.
    pub fn from_filter(filter: &RealTensor4<T>, height: usize, width: usize) -> Result<Self> {
        let [kh, kw, cin, cout] = filter.shape();
        if kh != kw {
            return Err(Error::invalid(format!("filter must be square, got {kh}x{kw}")));
        }
        let padded = zero_pad_filter(filter, height, width)?;
        let as_maps = padded.reshape([1, height, width, cin * cout])?;
        let spec = dft2(&as_maps)?.reshape([height, width, cin, cout])?;
        Self::new(spec, kh)
    }

    pub fn support_k(&self) -> usize {
        self.support_k
    }

    pub fn shape(&self) -> Shape4 {
        self.values.shape()
    }

    /// Inverse transform of every (cin, cout) slice, as an [H, W, Cin, Cout] grid.
    pub fn to_time_domain(&self, plan: &Dft2Plan<T>) -> Result<ComplexTensor4<T>> {
        let [h, w, cin, cout] = self.shape();
        let maps = self.values.clone().reshape([1, h, w, cin * cout])?;
        plan.inverse(&maps)?.reshape([h, w, cin, cout])
    }

    /// Project onto filters supported on the K×K corner:
    /// `W ← dft2(Re(idft2(W)) ⊙ V)`.
    pub fn fix(&mut self, plan: &Dft2Plan<T>, mask: &FixationMask) -> Result<()> {
        let [h, w, cin, cout] = self.shape();
        check_dim("height", mask.height(), h)?;
        check_dim("width", mask.width(), w)?;
        let mut time = self.to_time_domain(plan)?.re;
        let n = cin * cout;
        for y in 0..h {
            for x in 0..w {
                if !mask.get(y, x) {
                    let base = (y * w + x) * n;
                    time.data_mut()[base..base + n].fill(T::zero());
                }
            }
        }
        let maps = time.reshape([1, h, w, n])?;
        self.values = plan.forward_real(&maps)?.reshape([h, w, cin, cout])?;
        Ok(())
    }

    /// Largest ratio, over all (cin, cout) slices, of the time-domain
    /// magnitude outside the K×K corner to the slice's peak magnitude.
    pub fn support_violation(&self, plan: &Dft2Plan<T>) -> Result<f64> {
        let [h, w, cin, cout] = self.shape();
        let time = self.to_time_domain(plan)?;
        let k = self.support_k;
        let n = cin * cout;
        let mut worst = 0.0f64;
        for s in 0..n {
            let (mut peak, mut outside) = (0.0f64, 0.0f64);
            for y in 0..h {
                for x in 0..w {
                    let i = (y * w + x) * n + s;
                    let m = time.re.data()[i].as_f64().hypot(time.im.data()[i].as_f64());
                    peak = peak.max(m);
                    if y >= k || x >= k {
                        outside = outside.max(m);
                    }
                }
            }
            if peak > 0.0 {
                worst = worst.max(outside / peak);
            }
        }
        Ok(worst)
    }

    /// Fraction of time-domain energy lying outside the K×K corner.
    pub fn outside_energy_fraction(&self, plan: &Dft2Plan<T>) -> Result<f64> {
        let [h, w, cin, cout] = self.shape();
        let time = self.to_time_domain(plan)?;
        let k = self.support_k;
        let n = cin * cout;
        let (mut total, mut outside) = (0.0f64, 0.0f64);
        for y in 0..h {
            for x in 0..w {
                for s in 0..n {
                    let i = (y * w + x) * n + s;
                    let e = time.re.data()[i].as_f64().powi(2) + time.im.data()[i].as_f64().powi(2);
                    total += e;
                    if y >= k || x >= k {
                        outside += e;
                    }
                }
            }
        }
        Ok(if total > 0.0 { outside / total } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    fn t2x2() -> RealTensor4<f64> {
        RealTensor4::from_vec([1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn dft_of_zeros_is_zero() {
        let x = RealTensor4::<f64>::zeros([1, 4, 4, 1]);
        let y = dft2(&x).unwrap();
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn dft_of_constant_is_dc_spike() {
        let (m, n, c) = (3, 5, 2.5);
        let x = RealTensor4::<f64>::filled([1, m, n, 1], c);
        let y = dft2(&x).unwrap();
        for u in 0..m {
            for v in 0..n {
                let (re, im) = (y.re.get([0, u, v, 0]), y.im.get([0, u, v, 0]));
                let want = if u == 0 && v == 0 { c * (m * n) as f64 } else { 0.0 };
                assert!((re - want).abs() < 1e-12 && im.abs() < 1e-12, "bin ({u},{v})");
            }
        }
    }

    #[test]
    fn dft_2x2_by_hand() {
        let y = dft2(&t2x2()).unwrap();
        let want = [10.0, -2.0, -4.0, 0.0];
        for (i, w) in want.iter().enumerate() {
            assert!((y.re.data()[i] - w).abs() < 1e-12);
            assert!(y.im.data()[i].abs() < 1e-12);
        }
    }

    #[test]
    fn idft_round_trip_2x2() {
        let x = t2x2();
        let back = idft2(&dft2(&x).unwrap()).unwrap();
        for i in 0..4 {
            assert!((back.re.data()[i] - x.data()[i]).abs() < 1e-12);
            assert!(back.im.data()[i].abs() < 1e-6);
        }
    }

    #[test]
    fn idft_of_dc_bin_is_constant() {
        let mut spec = ComplexTensor4::<f64>::zeros([1, 2, 2, 1]);
        spec.re.set([0, 0, 0, 0], 4.0);
        let x = idft2(&spec).unwrap();
        for i in 0..4 {
            assert!((x.re.data()[i] - 1.0).abs() < 1e-12);
            assert!(x.im.data()[i].abs() < 1e-12);
        }
        assert_eq!(idft2(&ComplexTensor4::<f64>::zeros([2, 3, 3, 2])).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn non_finite_input_names_index() {
        let mut x = RealTensor4::<f32>::zeros([2, 3, 3, 2]);
        x.set([1, 2, 0, 1], f32::INFINITY);
        match dft2(&x) {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, [1, 2, 0, 1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matches_naive_double_sum_with_channels() {
        let x = reference::random_real::<f64>([2, 5, 7, 3], 11);
        let fast = dft2(&x).unwrap();
        let slow = reference::naive_dft2(&ComplexTensor4::from_real(x.clone()), false);
        let err = reference::max_rel_diff(&fast, &slow);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn zero_pad_examples() {
        let f = RealTensor4::<f64>::from_vec([1, 1, 1, 1], vec![5.0]).unwrap();
        let p = zero_pad_filter(&f, 3, 3).unwrap();
        assert_eq!(p.data(), &[5.0, 0., 0., 0., 0., 0., 0., 0., 0.]);

        let f = RealTensor4::<f64>::from_vec([2, 2, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(zero_pad_filter(&f, 2, 2).unwrap(), f);

        let p = zero_pad_filter(&f, 4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let v = p.get([y, x, 0, 0]);
                if y < 2 && x < 2 {
                    assert_eq!(v, f.get([y, x, 0, 0]));
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!(zero_pad_filter(&f, 1, 4).is_err());
    }

    fn scalar(re: f64, im: f64) -> ComplexTensor4<f64> {
        ComplexTensor4::from_parts(
            RealTensor4::from_vec([1, 1, 1, 1], vec![re]).unwrap(),
            RealTensor4::from_vec([1, 1, 1, 1], vec![im]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn conj_mul_examples() {
        let p = complex_conj_mul(&scalar(0.0, 1.0), &scalar(0.0, 1.0)).unwrap();
        assert_eq!((p.re.data()[0], p.im.data()[0]), (1.0, 0.0));

        let p = complex_conj_mul(&scalar(1.0, 2.0), &scalar(3.0, 4.0)).unwrap();
        assert_eq!((p.re.data()[0], p.im.data()[0]), (11.0, -2.0));

        let a = ComplexTensor4::from_real(RealTensor4::from_vec([1, 1, 3, 1], vec![1.0, 2.0, 3.0]).unwrap());
        let b = ComplexTensor4::from_real(RealTensor4::from_vec([1, 1, 3, 1], vec![4.0, 5.0, 6.0]).unwrap());
        let p = complex_conj_mul(&a, &b).unwrap();
        assert_eq!(p.re.data(), &[4.0, 10.0, 18.0]);
        assert_eq!(p.im.max_abs(), 0.0);
    }

    #[test]
    fn conj_mul_broadcasts_and_rejects() {
        let a = ComplexTensor4::<f64>::zeros([2, 2, 3, 1]);
        let b = ComplexTensor4::<f64>::zeros([2, 2, 3, 4]);
        assert_eq!(complex_conj_mul(&a, &b).unwrap().shape(), [2, 2, 3, 4]);
        let c = ComplexTensor4::<f64>::zeros([2, 2, 2, 4]);
        assert!(matches!(complex_conj_mul(&a, &c), Err(Error::Shape { .. })));
    }

    #[test]
    fn reduce_sum_examples() {
        let x = scalar(1.0, 1.0).reshape([1, 1, 1, 1]).unwrap();
        assert_eq!(reduce_sum_cin(&x), x);

        let x = ComplexTensor4::from_parts(
            RealTensor4::from_vec([1, 1, 2, 1], vec![1.0, 2.0]).unwrap(),
            RealTensor4::from_vec([1, 1, 2, 1], vec![1.0, -3.0]).unwrap(),
        )
        .unwrap();
        let s = reduce_sum_cin(&x);
        assert_eq!((s.re.data()[0], s.im.data()[0]), (3.0, -2.0));

        let one = reference::random_complex::<f64>([2, 2, 1, 3], 5);
        let mut two = ComplexTensor4::zeros([2, 2, 2, 3]);
        for p in 0..4 {
            for ci in 0..2 {
                for co in 0..3 {
                    two.re.set([p / 2, p % 2, ci, co], one.re.get([p / 2, p % 2, 0, co]));
                    two.im.set([p / 2, p % 2, ci, co], one.im.get([p / 2, p % 2, 0, co]));
                }
            }
        }
        let s = reduce_sum_cin(&two);
        for (a, b) in s.re.data().iter().zip(one.re.data()) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_examples() {
        assert_eq!(parseval_gap(&RealTensor4::<f64>::zeros([1, 4, 4, 1])).unwrap(), 0.0);
        let mut imp = RealTensor4::<f64>::zeros([1, 4, 4, 1]);
        imp.set([0, 0, 0, 0], 1.0);
        assert!(parseval_gap(&imp).unwrap() < 1e-15);
        let spec = dft2(&imp).unwrap();
        assert!(spec.re.data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let x = reference::random_real::<f32>([1, 8, 8, 1], 3);
        assert!(parseval_gap(&x).unwrap() < 1e-5);
    }

    #[test]
    fn fixation_mask_counts() {
        let m = FixationMask::new(6, 5, 3).unwrap();
        assert_eq!(m.ones(), 9);
        for y in 0..6 {
            for x in 0..5 {
                assert_eq!(m.get(y, x), y < 3 && x < 3);
            }
        }
        assert!(FixationMask::new(4, 4, 0).is_err());
        assert!(FixationMask::new(4, 3, 4).is_err());
    }

    #[test]
    fn fixation_keeps_supported_filters_and_kills_outside() {
        let filt = reference::random_real::<f64>([3, 3, 2, 2], 9);
        let mut sw = SpectralWeights::from_filter(&filt, 8, 8).unwrap();
        let before = sw.clone();
        let plan = Dft2Plan::new(8, 8);
        let mask = FixationMask::new(8, 8, 3).unwrap();
        sw.fix(&plan, &mask).unwrap();
        assert!(reference::max_rel_diff(&sw.values, &before.values) < 1e-12);

        let mut lone = RealTensor4::<f64>::zeros([8, 8, 1, 1]);
        lone.set([5, 2, 0, 0], 1.0);
        let maps = lone.reshape([1, 8, 8, 1]).unwrap();
        let spec = dft2(&maps).unwrap().reshape([8, 8, 1, 1]).unwrap();
        let mut sw = SpectralWeights::new(spec, 3).unwrap();
        sw.fix(&plan, &mask).unwrap();
        assert!(sw.values.max_abs() < 1e-12);
    }
}
