use crate::error::Result;
use crate::scalar::Scalar;
use crate::spectral::Dft2Plan;
use crate::tensor::{ComplexTensor4, RealTensor4};

fn plan_for<T: Scalar>(slot: &mut Option<Dft2Plan<T>>, h: usize, w: usize) -> Dft2Plan<T> {
    match slot {
        Some(p) if p.height() == h && p.width() == w => p.clone(),
        _ => {
            let p = Dft2Plan::new(h, w);
            *slot = Some(p.clone());
            p
        }
    }
}

pub fn bridge_to_freq<T: Scalar>(x: &RealTensor4<T>) -> Result<ComplexTensor4<T>> {
    BridgeToFreq::new().forward(x.clone())
}

/// Real part of the inverse transform, with the relative size of the
/// discarded imaginary part.
pub fn bridge_to_time<T: Scalar>(x: &ComplexTensor4<T>) -> Result<(RealTensor4<T>, f64)> {
    let mut b = BridgeToTime::new();
    let y = b.forward(x.clone())?;
    Ok((y, b.last_residual()))
}

/// Time → frequency transition (forward DFT).
#[derive(Debug, Clone, Default)]
pub struct BridgeToFreq<T: Scalar> {
    plan: Option<Dft2Plan<T>>,
}

impl<T: Scalar> BridgeToFreq<T> {
    pub fn new() -> Self {
        Self { plan: None }
    }

    pub fn forward(&mut self, x: RealTensor4<T>) -> Result<ComplexTensor4<T>> {
        plan_for(&mut self.plan, x.height(), x.width()).forward_real(&x)
    }

    pub fn backward(&mut self, g: ComplexTensor4<T>) -> Result<RealTensor4<T>> {
        let [_, h, w, _] = g.shape();
        let n = T::of((h * w) as f64);
        Ok(plan_for(&mut self.plan, h, w).inverse(&g)?.re.scale(n))
    }
}

/// Frequency → time transition (real part of the inverse DFT).
#[derive(Debug, Clone, Default)]
pub struct BridgeToTime<T: Scalar> {
    plan: Option<Dft2Plan<T>>,
    last_residual: f64,
}

impl<T: Scalar> BridgeToTime<T> {
    pub fn new() -> Self {
        Self {
            plan: None,
            last_residual: 0.0,
        }
    }

    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    pub fn forward(&mut self, x: ComplexTensor4<T>) -> Result<RealTensor4<T>> {
        let z = plan_for(&mut self.plan, x.shape()[1], x.shape()[2]).inverse(&x)?;
        let scale = z.re.max_abs().as_f64();
        let resid = z.im.max_abs().as_f64();
        self.last_residual = if scale > 0.0 { resid / scale } else { resid };
        Ok(z.re)
    }

    pub fn backward(&mut self, g: RealTensor4<T>) -> Result<ComplexTensor4<T>> {
        let (h, w) = (g.height(), g.width());
        let n = T::one() / T::of((h * w) as f64);
        let gx = plan_for(&mut self.plan, h, w).forward_real(&g)?;
        Ok(ComplexTensor4 {
            re: gx.re.scale(n),
            im: gx.im.scale(n),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn round_trip() {
        let x = reference::random_real::<f32>([2, 7, 9, 3], 4);
        let (back, resid) = bridge_to_time(&bridge_to_freq(&x).unwrap()).unwrap();
        assert!(reference::max_rel_diff_real(&back, &x) < 1e-5);
        assert!(resid < 1e-5);
    }

    #[test]
    fn zeros_stay_zero() {
        let z = bridge_to_freq(&RealTensor4::<f64>::zeros([1, 3, 3, 1])).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let (t, resid) = bridge_to_time(&z).unwrap();
        assert_eq!(t.max_abs(), 0.0);
        assert_eq!(resid, 0.0);
    }

    #[test]
    fn conjugate_symmetric_input_has_no_residual() {
        let (m, n) = (5, 6);
        let raw = reference::random_complex::<f64>([1, m, n, 1], 12);
        // symmetrize: X[u,v] = (Y[u,v] + conj(Y[-u,-v])) / 2
        let sym = ComplexTensor4 {
            re: RealTensor4::from_fn([1, m, n, 1], |[_, u, v, _]| {
                0.5 * (raw.re.get([0, u, v, 0]) + raw.re.get([0, (m - u) % m, (n - v) % n, 0]))
            }),
            im: RealTensor4::from_fn([1, m, n, 1], |[_, u, v, _]| {
                0.5 * (raw.im.get([0, u, v, 0]) - raw.im.get([0, (m - u) % m, (n - v) % n, 0]))
            }),
        };
        let (_, resid) = bridge_to_time(&sym).unwrap();
        assert!(resid < 1e-6);
    }
}
