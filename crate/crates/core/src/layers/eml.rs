use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::layers::{glorot_uniform, ForwardCtx, ParamView};
use crate::scalar::Scalar;
use crate::spectral::{Dft2Plan, FixationMask, SpectralWeights};
use crate::tensor::{ComplexTensor4, RealTensor4};

/// Element-wise multiplication layer: a K×K convolution carried out as a
/// per-bin product with the spectrum of the filter zero-padded to H×W.
///
/// `out[b,u,v,co] = Σ_ci conj(x[b,u,v,ci]) · W[u,v,ci,co]`
///
/// In the time domain this is the circular correlation
/// `o[m] = Σ_t x[t]·w[(t+m) mod N]`, i.e. the CNN cross-correlation read at
/// the reflected index: the valid output at offset `s` sits at `(−s) mod N`.
#[derive(Debug, Clone)]
pub struct Eml<T: Scalar> {
    pub weights: SpectralWeights<T>,
    mask: FixationMask,
    plan: Dft2Plan<T>,
    grad: ComplexTensor4<T>,
    input: Option<ComplexTensor4<T>>,
}

impl<T: Scalar> Eml<T> {
    pub fn from_weights(weights: SpectralWeights<T>) -> Result<Self> {
        let [h, w, _, _] = weights.shape();
        let mask = FixationMask::new(h, w, weights.support_k())?;
        Ok(Self {
            grad: ComplexTensor4::zeros(weights.shape()),
            weights,
            mask,
            plan: Dft2Plan::new(h, w),
            input: None,
        })
    }

    /// Spectrum of a K×K×Cin×Cout time-domain filter padded to H×W.
    pub fn from_filter(filter: &RealTensor4<T>, height: usize, width: usize) -> Result<Self> {
        Self::from_weights(SpectralWeights::from_filter(filter, height, width)?)
    }

    /// Glorot-uniform K×K filter, padded and transformed.
    pub fn new_random(
        height: usize,
        width: usize,
        k: usize,
        cin: usize,
        cout: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let data = glorot_uniform(k * k * cin * cout, k * k * cin, k * k * cout, rng);
        Self::from_filter(&RealTensor4::from_vec([k, k, cin, cout], data)?, height, width)
    }

    pub fn height(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[3]
    }

    pub fn mask(&self) -> &FixationMask {
        &self.mask
    }

    pub fn plan(&self) -> &Dft2Plan<T> {
        &self.plan
    }

    /// Accumulated weight gradient, packed as `∂L/∂re + i·∂L/∂im`.
    pub fn weight_grad(&self) -> &ComplexTensor4<T> {
        &self.grad
    }

    fn check_input(&self, x: &ComplexTensor4<T>) -> Result<()> {
        let [_, h, w, c] = x.shape();
        check_dim("height", self.height(), h)?;
        check_dim("width", self.width(), w)?;
        check_dim("channels", self.in_channels(), c)
    }

    pub fn forward(&mut self, x: ComplexTensor4<T>, ctx: &ForwardCtx) -> Result<ComplexTensor4<T>> {
        self.check_input(&x)?;
        let y = multiply(&x, &self.weights.values);
        if ctx.training() {
            self.input = Some(x);
        }
        Ok(y)
    }

    pub fn backward(&mut self, g: ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
        let x = self.input.as_ref().ok_or(Error::MissingCache("eml"))?;
        let [b, h, w, _] = x.shape();
        check_dim("batch", b, g.shape()[0])?;
        check_dim("height", h, g.shape()[1])?;
        check_dim("width", w, g.shape()[2])?;
        check_dim("channels", self.out_channels(), g.shape()[3])?;
        accumulate_weight_grad(x, &g, &mut self.grad);
        Ok(input_grad(&g, &self.weights.values, self.in_channels()))
    }

    /// Project the weights back onto K×K-supported filters.
    pub fn fix(&mut self) -> Result<()> {
        self.weights.fix(&self.plan, &self.mask)
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView<'_, T>)) {
        f(ParamView {
            name: "weight.re".into(),
            value: self.weights.values.re.data_mut(),
            grad: self.grad.re.data_mut(),
        });
        f(ParamView {
            name: "weight.im".into(),
            value: self.weights.values.im.data_mut(),
            grad: self.grad.im.data_mut(),
        });
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}

fn multiply<T: Scalar>(x: &ComplexTensor4<T>, w: &ComplexTensor4<T>) -> ComplexTensor4<T> {
    let [b, h, wd, cin] = x.shape();
    let cout = w.shape()[3];
    let hw = h * wd;
    let mut out = ComplexTensor4::zeros([b, h, wd, cout]);
    let (wr, wi) = (w.re.data(), w.im.data());
    for bi in 0..b {
        for p in 0..hw {
            let xo = (bi * hw + p) * cin;
            let oo = (bi * hw + p) * cout;
            let or = &mut out.re.data_mut()[oo..oo + cout];
            let mut acc_im = vec![T::zero(); cout];
            for ci in 0..cin {
                let (ar, ai) = (x.re.data()[xo + ci], x.im.data()[xo + ci]);
                let wo = (p * cin + ci) * cout;
                for co in 0..cout {
                    let (br, bim) = (wr[wo + co], wi[wo + co]);
                    // conj(a)·b
                    or[co] = or[co] + ar * br + ai * bim;
                    acc_im[co] = acc_im[co] + ar * bim - ai * br;
                }
            }
            out.im.data_mut()[oo..oo + cout].copy_from_slice(&acc_im);
        }
    }
    out
}

/// `grad_w[u,v,ci,co] += Σ_b x[b,u,v,ci] · g[b,u,v,co]`
fn accumulate_weight_grad<T: Scalar>(x: &ComplexTensor4<T>, g: &ComplexTensor4<T>, gw: &mut ComplexTensor4<T>) {
    let [b, h, w, cin] = x.shape();
    let cout = g.shape()[3];
    let hw = h * w;
    for bi in 0..b {
        for p in 0..hw {
            let xo = (bi * hw + p) * cin;
            let go = (bi * hw + p) * cout;
            let (gr, gi) = (&g.re.data()[go..go + cout], &g.im.data()[go..go + cout]);
            for ci in 0..cin {
                let (ar, ai) = (x.re.data()[xo + ci], x.im.data()[xo + ci]);
                let wo = (p * cin + ci) * cout;
                let dr = &mut gw.re.data_mut()[wo..wo + cout];
                for co in 0..cout {
                    dr[co] = dr[co] + ar * gr[co] - ai * gi[co];
                }
                let di = &mut gw.im.data_mut()[wo..wo + cout];
                for co in 0..cout {
                    di[co] = di[co] + ar * gi[co] + ai * gr[co];
                }
            }
        }
    }
}

/// `grad_x[b,u,v,ci] = Σ_co conj(g[b,u,v,co]) · W[u,v,ci,co]`
fn input_grad<T: Scalar>(g: &ComplexTensor4<T>, w: &ComplexTensor4<T>, cin: usize) -> ComplexTensor4<T> {
    let [b, h, wd, cout] = g.shape();
    let hw = h * wd;
    let mut gx = ComplexTensor4::zeros([b, h, wd, cin]);
    for bi in 0..b {
        for p in 0..hw {
            let go = (bi * hw + p) * cout;
            let (gr, gi) = (&g.re.data()[go..go + cout], &g.im.data()[go..go + cout]);
            for ci in 0..cin {
                let wo = (p * cin + ci) * cout;
                let (wr, wi) = (&w.re.data()[wo..wo + cout], &w.im.data()[wo..wo + cout]);
                let (mut sr, mut si) = (T::zero(), T::zero());
                for co in 0..cout {
                    sr = sr + gr[co] * wr[co] + gi[co] * wi[co];
                    si = si + gr[co] * wi[co] - gi[co] * wr[co];
                }
                let xo = (bi * hw + p) * cin + ci;
                gx.re.data_mut()[xo] = sr;
                gx.im.data_mut()[xo] = si;
            }
        }
    }
    gx
}

/// Forward pass in training mode (the input is cached for [`eml_backward`]).
pub fn eml_forward<T: Scalar>(x: &ComplexTensor4<T>, layer: &mut Eml<T>) -> Result<ComplexTensor4<T>> {
    layer.forward(x.clone(), &ForwardCtx::train(0, 0))
}

/// Weight and input gradients for the most recent [`eml_forward`]. The
/// returned weight gradient covers this call only; the layer's accumulated
/// gradient is updated as well.
pub fn eml_backward<T: Scalar>(
    g: &ComplexTensor4<T>,
    layer: &mut Eml<T>,
) -> Result<(ComplexTensor4<T>, ComplexTensor4<T>)> {
    let before = layer.grad.clone();
    let gx = layer.backward(g.clone())?;
    let mut gw = layer.grad.clone();
    for (a, b) in gw.re.data_mut().iter_mut().zip(before.re.data()) {
        *a = *a - *b;
    }
    for (a, b) in gw.im.data_mut().iter_mut().zip(before.im.data()) {
        *a = *a - *b;
    }
    Ok((gw, gx))
}

pub fn weight_fixation<T: Scalar>(layer: &mut Eml<T>) -> Result<()> {
    layer.fix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{self, MulCounter};
    use crate::spectral::{dft2, idft2};
    use rand::SeedableRng;

    fn reflect(x: &RealTensor4<f64>) -> RealTensor4<f64> {
        let [b, h, w, c] = x.shape();
        RealTensor4::from_fn([b, h, w, c], |[bi, y, xx, ci]| x.get([bi, (h - y) % h, (w - xx) % w, ci]))
    }

    #[test]
    fn delta_filter_gives_reflected_input() {
        let mut delta = RealTensor4::<f64>::zeros([3, 3, 1, 1]);
        delta.set([0, 0, 0, 0], 1.0);
        let mut eml = Eml::from_filter(&delta, 6, 5).unwrap();
        let x = reference::random_real::<f64>([2, 6, 5, 1], 8);
        let y = eml_forward(&dft2(&x).unwrap(), &mut eml).unwrap();
        let back = idft2(&y).unwrap();
        assert!(reference::max_rel_diff_real(&back.re, &reflect(&x)) < 1e-12);
        assert!(back.im.max_abs() < 1e-12);
    }

    #[test]
    fn two_by_two_hand_example() {
        let x = RealTensor4::<f64>::from_vec([1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let filt = RealTensor4::<f64>::from_vec([2, 2, 1, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut eml = Eml::from_filter(&filt, 2, 2).unwrap();
        let y = idft2(&eml_forward(&dft2(&x).unwrap(), &mut eml).unwrap()).unwrap();
        for &v in y.re.data() {
            assert!((v - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_circular_correlation_oracle() {
        let (m, n) = (5, 7);
        let x = reference::random_real::<f64>([1, m, n, 1], 2);
        let f = reference::random_real::<f64>([3, 3, 1, 1], 3);
        let mut eml = Eml::from_filter(&f, m, n).unwrap();
        let y = idft2(&eml_forward(&dft2(&x).unwrap(), &mut eml).unwrap()).unwrap();
        let padded = crate::spectral::zero_pad_filter(&f, m, n).unwrap();
        let want = reference::circular_xcorr(x.data(), padded.data(), m, n);
        // o[τ] = Σ_t x[t]·w[t+τ] is R[τ] of the oracle with u = x, v = w
        for (a, b) in y.re.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn interior_matches_linear_xcorr() {
        let n = 6;
        let k = 3;
        let x = reference::random_real::<f64>([1, n, n, 1], 21);
        let f = reference::random_real::<f64>([k, k, 1, 1], 22);
        let mut eml = Eml::from_filter(&f, n, n).unwrap();
        let y = idft2(&eml_forward(&dft2(&x).unwrap(), &mut eml).unwrap()).unwrap();
        let padded = crate::spectral::zero_pad_filter(&f, n, n).unwrap();
        // valid CNN output at offset s is Σ_j f[j]·x[s + j]
        for sy in 0..=n - k {
            for sx in 0..=n - k {
                let want = reference::linear_xcorr_at(padded.data(), x.data(), n, n, sy as isize, sx as isize);
                let got = y.re.get([0, (n - sy) % n, (n - sx) % n, 0]);
                assert!((got - want).abs() < 1e-4 * want.abs().max(1.0), "{sy},{sx}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn matches_naive_product_and_counts_four_mults() {
        let x = reference::random_complex::<f64>([2, 4, 3, 3], 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut eml = Eml::<f64>::new_random(4, 3, 2, 3, 2, &mut rng).unwrap();
        let counter = MulCounter::new();
        let want = reference::naive_eml(&x, &eml.weights.values, &counter);
        assert_eq!(counter.get(), 4 * 2 * 4 * 3 * 3 * 2);
        let got = eml_forward(&x, &mut eml).unwrap();
        assert!(reference::max_rel_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn scalar_gradient() {
        let x = ComplexTensor4::from_parts(
            RealTensor4::filled([1, 1, 1, 1], 1.0f64),
            RealTensor4::filled([1, 1, 1, 1], 2.0),
        )
        .unwrap();
        let w = ComplexTensor4::from_parts(
            RealTensor4::filled([1, 1, 1, 1], 0.3),
            RealTensor4::filled([1, 1, 1, 1], -0.7),
        )
        .unwrap();
        let mut eml = Eml::from_weights(SpectralWeights::new(w, 1).unwrap()).unwrap();
        eml_forward(&x, &mut eml).unwrap();
        // loss = Re(O)
        let g = ComplexTensor4::from_real(RealTensor4::filled([1, 1, 1, 1], 1.0));
        let (gw, _) = eml_backward(&g, &mut eml).unwrap();
        assert!((gw.re.data()[0] - 1.0).abs() < 1e-12);
        assert!((gw.im.data()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut eml = Eml::<f64>::new_random(4, 4, 3, 2, 3, &mut rng).unwrap();
        let x = reference::random_complex::<f64>([2, 4, 4, 2], 6);
        eml_forward(&x, &mut eml).unwrap();
        let (gw, gx) = eml_backward(&ComplexTensor4::zeros([2, 4, 4, 3]), &mut eml).unwrap();
        assert_eq!(gw.max_abs(), 0.0);
        assert_eq!(gx.max_abs(), 0.0);
    }

    #[test]
    fn backward_needs_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut eml = Eml::<f64>::new_random(4, 4, 3, 1, 1, &mut rng).unwrap();
        assert!(matches!(
            eml.backward(ComplexTensor4::zeros([1, 4, 4, 1])),
            Err(Error::MissingCache(_))
        ));
    }

    #[test]
    fn shape_mismatch_names_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut eml = Eml::<f64>::new_random(4, 4, 3, 2, 1, &mut rng).unwrap();
        let err = eml_forward(&ComplexTensor4::zeros([1, 4, 4, 3]), &mut eml).unwrap_err();
        assert!(matches!(err, Error::Shape { axis: "channels", .. }));
    }

    #[test]
    fn fixation_keeps_supported_filter_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut eml = Eml::<f64>::new_random(8, 8, 3, 2, 2, &mut rng).unwrap();
        let before = eml.weights.values.clone();
        weight_fixation(&mut eml).unwrap();
        assert!(reference::max_rel_diff(&before, &eml.weights.values) < 1e-10);
        eml.weights.values.re.data_mut()[7] += 0.5;
        weight_fixation(&mut eml).unwrap();
        let once = eml.weights.values.clone();
        assert!(eml.weights.support_violation(eml.plan()).unwrap() < 1e-10);
        weight_fixation(&mut eml).unwrap();
        assert!(reference::max_rel_diff(&once, &eml.weights.values) < 1e-12);
    }
}
