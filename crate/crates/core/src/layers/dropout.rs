use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, Error, Result};
use crate::layers::ForwardCtx;
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor4, RealTensor4};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutSpec {
    p: f64,
    pub rng_seed: u64,
}

impl DropoutSpec {
    pub fn new(p: f64, rng_seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("dropout rate {p} outside [0, 1)")));
        }
        Ok(Self { p, rng_seed })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Noise stream keyed by (seed, step, layer); element order within the
/// stream is the tensor's row-major order.
pub fn noise_rng(seed: u64, step: u64, layer_index: usize) -> ChaCha8Rng {
    let mut z = seed ^ step.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (layer_index as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// `n` multipliers drawn from Normal(mean 1, standard deviation p/2).
pub fn dropout_multipliers(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(1.0, p / 2.0).expect("p/2 is finite and non-negative");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// Approximated frequency-domain dropout: in training each element of the
/// real and imaginary planes is scaled by its own independent N(1, p/2)
/// draw; in evaluation the input is returned untouched.
pub fn approx_dropout<T: Scalar>(x: &ComplexTensor4<T>, spec: &DropoutSpec, ctx: &ForwardCtx) -> ComplexTensor4<T> {
    ApproxDropout::new(*spec).forward(x.clone(), ctx)
}

#[derive(Debug, Clone)]
pub struct ApproxDropout<T> {
    pub spec: DropoutSpec,
    noise: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> ApproxDropout<T> {
    pub fn new(spec: DropoutSpec) -> Self {
        Self { spec, noise: None }
    }

    pub fn forward(&mut self, mut x: ComplexTensor4<T>, ctx: &ForwardCtx) -> ComplexTensor4<T> {
        if !ctx.training() {
            return x;
        }
        let n = x.len();
        let mut rng = noise_rng(self.spec.rng_seed, ctx.step, ctx.layer_index);
        let r_re: Vec<T> = dropout_multipliers(n, self.spec.p, &mut rng).into_iter().map(T::of).collect();
        let r_im: Vec<T> = dropout_multipliers(n, self.spec.p, &mut rng).into_iter().map(T::of).collect();
        for (v, &r) in x.re.data_mut().iter_mut().zip(&r_re) {
            *v = *v * r;
        }
        for (v, &r) in x.im.data_mut().iter_mut().zip(&r_im) {
            *v = *v * r;
        }
        self.noise = Some((r_re, r_im));
        x
    }

    pub fn backward(&mut self, mut g: ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
        let (r_re, r_im) = self.noise.as_ref().ok_or(Error::MissingCache("freq_dropout"))?;
        check_dim("dropout grad", r_re.len(), g.len())?;
        for (v, &r) in g.re.data_mut().iter_mut().zip(r_re) {
            *v = *v * r;
        }
        for (v, &r) in g.im.data_mut().iter_mut().zip(r_im) {
            *v = *v * r;
        }
        Ok(g)
    }

    pub fn clear_cache(&mut self) {
        self.noise = None;
    }
}

/// Time-domain inverted dropout: keep with probability 1−p and rescale by
/// 1/(1−p), so evaluation is the identity.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    pub spec: DropoutSpec,
    mask: Option<Vec<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(spec: DropoutSpec) -> Self {
        Self { spec, mask: None }
    }

    pub fn forward(&mut self, mut x: RealTensor4<T>, ctx: &ForwardCtx) -> RealTensor4<T> {
        if !ctx.training() {
            return x;
        }
        let keep = 1.0 - self.spec.p;
        let mut rng = noise_rng(self.spec.rng_seed, ctx.step, ctx.layer_index);
        let scale = T::of(1.0 / keep);
        let mask: Vec<T> = (0..x.len())
            .map(|_| if rng.random::<f64>() < keep { scale } else { T::zero() })
            .collect();
        for (v, &m) in x.data_mut().iter_mut().zip(&mask) {
            *v = *v * m;
        }
        self.mask = Some(mask);
        x
    }

    pub fn backward(&mut self, mut g: RealTensor4<T>) -> Result<RealTensor4<T>> {
        let mask = self.mask.as_ref().ok_or(Error::MissingCache("dropout"))?;
        check_dim("dropout grad", mask.len(), g.len())?;
        for (v, &m) in g.data_mut().iter_mut().zip(mask) {
            *v = *v * m;
        }
        Ok(g)
    }

    pub fn clear_cache(&mut self) {
        self.mask = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn rate_outside_unit_interval_rejected() {
        assert!(DropoutSpec::new(1.0, 0).is_err());
        assert!(DropoutSpec::new(-0.1, 0).is_err());
        assert!(DropoutSpec::new(0.0, 0).is_ok());
    }

    #[test]
    fn eval_is_bit_identical() {
        let x = reference::random_complex::<f32>([2, 3, 3, 2], 1);
        let spec = DropoutSpec::new(0.5, 3).unwrap();
        assert_eq!(approx_dropout(&x, &spec, &ForwardCtx::eval()), x);
    }

    #[test]
    fn zero_rate_multiplier_is_exactly_one() {
        let mut rng = noise_rng(1, 2, 3);
        assert!(dropout_multipliers(1000, 0.0, &mut rng).iter().all(|&r| r == 1.0));
        let x = reference::random_complex::<f64>([2, 3, 3, 2], 1);
        let spec = DropoutSpec::new(0.0, 3).unwrap();
        assert_eq!(approx_dropout(&x, &spec, &ForwardCtx::train(5, 1)), x);
    }

    #[test]
    fn multiplier_statistics_at_half() {
        let mut rng = noise_rng(42, 0, 0);
        let r = dropout_multipliers(1_000_000, 0.5, &mut rng);
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let std = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let inside = r.iter().filter(|&&v| (0.5..=1.5).contains(&v)).count() as f64 / n;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((std - 0.25).abs() < 0.01, "std {std}");
        assert!((inside - 0.954).abs() < 0.005, "mass {inside}");
    }

    #[test]
    fn branches_and_steps_draw_fresh_noise() {
        let x = ComplexTensor4 {
            re: RealTensor4::<f64>::filled([1, 4, 4, 1], 1.0),
            im: RealTensor4::filled([1, 4, 4, 1], 1.0),
        };
        let spec = DropoutSpec::new(0.5, 9).unwrap();
        let a = approx_dropout(&x, &spec, &ForwardCtx::train(0, 0));
        let b = approx_dropout(&x, &spec, &ForwardCtx::train(1, 0));
        assert_ne!(a.re, a.im);
        assert_ne!(a.re, b.re);
        assert_eq!(a, approx_dropout(&x, &spec, &ForwardCtx::train(0, 0)));
    }

    #[test]
    fn inverted_dropout_preserves_mean() {
        let mut d = Dropout::<f64>::new(DropoutSpec::new(0.5, 1).unwrap());
        let y = d.forward(RealTensor4::filled([1, 100, 100, 1], 1.0), &ForwardCtx::train(0, 0));
        let mean = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.03);
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
