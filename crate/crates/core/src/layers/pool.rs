use crate::error::{check_dim, Error, Result};
use crate::layers::ForwardCtx;
use crate::scalar::Scalar;
use crate::spectral::Dft2Plan;
use crate::tensor::{ComplexTensor4, RealTensor4, Shape4};

fn pooled_dim(n: usize, window: usize, stride: usize, axis: &str) -> Result<usize> {
    if window == 0 || stride == 0 {
        return Err(Error::invalid("pooling window and stride must be >= 1"));
    }
    if window > n {
        return Err(Error::invalid(format!("pooling window {window} exceeds {axis} {n}")));
    }
    Ok((n - window) / stride + 1)
}

/// Max pooling with no padding; returns the pooled map and, per output
/// element, the flat input offset that won. Ties go to the first element
/// in row-major scan order.
pub fn maxpool_forward<T: Scalar>(
    x: &RealTensor4<T>,
    window: usize,
    stride: usize,
) -> Result<(RealTensor4<T>, Vec<usize>)> {
    let [b, h, w, c] = x.shape();
    let ho = pooled_dim(h, window, stride, "height")?;
    let wo = pooled_dim(w, window, stride, "width")?;
    let mut out = RealTensor4::zeros([b, ho, wo, c]);
    let mut arg = vec![0usize; out.len()];
    let mut o = 0;
    for bi in 0..b {
        for oy in 0..ho {
            for ox in 0..wo {
                for ch in 0..c {
                    let mut best = x.offset([bi, oy * stride, ox * stride, ch]);
                    for dy in 0..window {
                        for dx in 0..window {
                            let i = x.offset([bi, oy * stride + dy, ox * stride + dx, ch]);
                            if x.data()[i] > x.data()[best] {
                                best = i;
                            }
                        }
                    }
                    out.data_mut()[o] = x.data()[best];
                    arg[o] = best;
                    o += 1;
                }
            }
        }
    }
    Ok((out, arg))
}

fn unpool<T: Scalar>(g: &RealTensor4<T>, arg: &[usize], in_shape: Shape4) -> Result<RealTensor4<T>> {
    check_dim("pool grad", arg.len(), g.len())?;
    let mut gx = RealTensor4::zeros(in_shape);
    for (&i, &v) in arg.iter().zip(g.data()) {
        gx.data_mut()[i] = gx.data()[i] + v;
    }
    Ok(gx)
}

#[derive(Debug, Clone)]
pub struct MaxPool {
    pub window: usize,
    pub stride: usize,
    cache: Option<(Shape4, Vec<usize>)>,
}

impl MaxPool {
    pub fn new(window: usize, stride: usize) -> Self {
        Self {
            window,
            stride,
            cache: None,
        }
    }

    pub fn forward<T: Scalar>(&mut self, x: RealTensor4<T>, ctx: &ForwardCtx) -> Result<RealTensor4<T>> {
        let (y, arg) = maxpool_forward(&x, self.window, self.stride)?;
        if ctx.training() {
            self.cache = Some((x.shape(), arg));
        }
        Ok(y)
    }

    pub fn backward<T: Scalar>(&mut self, g: RealTensor4<T>) -> Result<RealTensor4<T>> {
        let (shape, arg) = self.cache.as_ref().ok_or(Error::MissingCache("maxpool"))?;
        unpool(&g, arg, *shape)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    /// Winning input offsets of the last training forward pass.
    pub fn pattern(&self) -> Option<&[usize]> {
        self.cache.as_ref().map(|(_, arg)| arg.as_slice())
    }
}

/// Max pooling for frequency-domain maps: back to the time domain, pool the
/// real part, transform the pooled map forward again. The imaginary part of
/// the inverse transform is discarded; its size is kept in
/// [`FreqMaxPool::last_residual`].
#[derive(Debug, Clone)]
pub struct FreqMaxPool<T: Scalar> {
    pub window: usize,
    pub stride: usize,
    plans: Option<(Dft2Plan<T>, Dft2Plan<T>)>,
    cache: Option<(Shape4, Vec<usize>)>,
    last_residual: f64,
}

impl<T: Scalar> FreqMaxPool<T> {
    pub fn new(window: usize, stride: usize) -> Self {
        Self {
            window,
            stride,
            plans: None,
            cache: None,
            last_residual: 0.0,
        }
    }

    /// Largest |imaginary| part seen in the last inverse transform, relative
    /// to the largest |real| part.
    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    fn plans(&mut self, h: usize, w: usize) -> Result<(Dft2Plan<T>, Dft2Plan<T>)> {
        let ho = pooled_dim(h, self.window, self.stride, "height")?;
        let wo = pooled_dim(w, self.window, self.stride, "width")?;
        match &self.plans {
            Some((pin, pout)) if pin.height() == h && pin.width() == w && pout.height() == ho && pout.width() == wo => {}
            _ => self.plans = Some((Dft2Plan::new(h, w), Dft2Plan::new(ho, wo))),
        }
        Ok(self.plans.clone().expect("set above"))
    }

    pub fn forward(&mut self, x: ComplexTensor4<T>, ctx: &ForwardCtx) -> Result<ComplexTensor4<T>> {
        let [_, h, w, _] = x.shape();
        let (pin, pout) = self.plans(h, w)?;
        let z = pin.inverse(&x)?;
        let scale = z.re.max_abs().as_f64();
        let resid = z.im.max_abs().as_f64();
        self.last_residual = if scale > 0.0 { resid / scale } else { resid };
        let (pooled, arg) = maxpool_forward(&z.re, self.window, self.stride)?;
        if ctx.training() {
            self.cache = Some((z.re.shape(), arg));
        }
        pout.forward_real(&pooled)
    }

    pub fn backward(&mut self, g: ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
        let (shape, arg) = self.cache.clone().ok_or(Error::MissingCache("freq_maxpool"))?;
        let (pin, pout) = self.plans(shape[1], shape[2])?;
        // adjoint of the forward DFT is MN·iDFT
        let n_out = T::of((pout.height() * pout.width()) as f64);
        let g_pooled = pout.inverse(&g)?.re.scale(n_out);
        let g_time = unpool(&g_pooled, &arg, shape)?;
        // adjoint of Re∘iDFT is DFT/(MN)
        let n_in = T::one() / T::of((shape[1] * shape[2]) as f64);
        let gx = pin.forward_real(&g_time)?;
        Ok(ComplexTensor4 {
            re: gx.re.scale(n_in),
            im: gx.im.scale(n_in),
        })
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    /// Winning input offsets of the last training forward pass.
    pub fn pattern(&self) -> Option<&[usize]> {
        self.cache.as_ref().map(|(_, arg)| arg.as_slice())
    }
}

/// Stateless frequency-domain max pooling; also returns the relative
/// imaginary residual of the inverse transform.
pub fn freq_maxpool<T: Scalar>(x: &ComplexTensor4<T>, window: usize, stride: usize) -> Result<(ComplexTensor4<T>, f64)> {
    let mut pool = FreqMaxPool::new(window, stride);
    let y = pool.forward(x.clone(), &ForwardCtx::eval())?;
    Ok((y, pool.last_residual()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use crate::spectral::dft2;

    #[test]
    fn pools_2x2_to_its_max() {
        let x = RealTensor4::<f64>::from_vec([1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, resid) = freq_maxpool(&dft2(&x).unwrap(), 2, 2).unwrap();
        assert_eq!(y.shape(), [1, 1, 1, 1]);
        assert!((y.re.data()[0] - 4.0).abs() < 1e-12 && y.im.data()[0].abs() < 1e-12);
        assert!(resid < 1e-12);
    }

    #[test]
    fn constant_plane_stays_constant() {
        let x = RealTensor4::<f64>::filled([2, 6, 6, 3], -1.25);
        let (y, _) = freq_maxpool(&dft2(&x).unwrap(), 2, 2).unwrap();
        let want = dft2(&RealTensor4::<f64>::filled([2, 3, 3, 3], -1.25)).unwrap();
        assert!(reference::max_rel_diff(&y, &want) < 1e-12);
    }

    #[test]
    fn pooling_is_position_sensitive() {
        let x = reference::random_real::<f64>([1, 4, 4, 1], 3);
        let shifted = RealTensor4::from_fn([1, 4, 4, 1], |[b, h, w, c]| x.get([b, h, (w + 1) % 4, c]));
        let (a, _) = freq_maxpool(&dft2(&x).unwrap(), 2, 2).unwrap();
        let (b, _) = freq_maxpool(&dft2(&shifted).unwrap(), 2, 2).unwrap();
        let oracle = |t: &RealTensor4<f64>| dft2(&maxpool_forward(t, 2, 2).unwrap().0).unwrap();
        assert!(reference::max_rel_diff(&a, &oracle(&x)) < 1e-12);
        assert!(reference::max_rel_diff(&b, &oracle(&shifted)) < 1e-12);
        assert!(reference::max_rel_diff(&a, &b) > 1e-3);
    }

    #[test]
    fn ties_go_to_first_in_scan_order() {
        let x = RealTensor4::<f64>::filled([1, 2, 2, 1], 1.0);
        let (_, arg) = maxpool_forward(&x, 2, 2).unwrap();
        assert_eq!(arg, vec![0]);
    }

    #[test]
    fn window_larger_than_plane_rejected() {
        let x = ComplexTensor4::<f64>::zeros([1, 2, 3, 1]);
        assert!(freq_maxpool(&x, 3, 1).is_err());
    }

    #[test]
    fn output_dims_floor() {
        let x = RealTensor4::<f32>::zeros([1, 7, 5, 2]);
        let (y, _) = maxpool_forward(&x, 3, 2).unwrap();
        assert_eq!(y.shape(), [1, 3, 2, 2]);
    }
}
