use std::hash::{Hash, Hasher};

use crate::error::{check_dim, Error, Result};
use crate::layers::ForwardCtx;
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor4, RealTensor4};

pub fn relu<T: Scalar>(x: &RealTensor4<T>) -> RealTensor4<T> {
    x.map(|v| v.max(T::zero()))
}

/// ReLU applied to the real and imaginary branches independently.
pub fn split_relu<T: Scalar>(x: &ComplexTensor4<T>) -> ComplexTensor4<T> {
    ComplexTensor4 {
        re: relu(&x.re),
        im: relu(&x.im),
    }
}

/// Which side of zero each ReLU input fell on. Inputs within round-off of
/// zero (relative to the largest magnitude in the tensor) are tagged
/// separately: they are usually structural zeros, such as the imaginary
/// part of a real signal's DC bin, whose sign is noise.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReluMask(Vec<i8>);

const ROUND_OFF: f64 = 1e-10;

impl ReluMask {
    pub fn of<T: Scalar>(x: &[T]) -> Self {
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
        let tiny = scale * ROUND_OFF;
        Self(
            x.iter()
                .map(|v| {
                    let v = v.as_f64();
                    match (v > 0.0, v.abs() <= tiny) {
                        (true, false) => 1,
                        (true, true) => 2,
                        (false, true) => -2,
                        (false, false) => -1,
                    }
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn active(&self, i: usize) -> bool {
        self.0[i] > 0
    }

    /// Zero the entries of `g` whose input was not positive.
    pub fn apply<T: Scalar>(&self, g: &mut [T]) -> Result<()> {
        check_dim("elements", self.0.len(), g.len())?;
        for (v, &s) in g.iter_mut().zip(&self.0) {
            if s <= 0 {
                *v = T::zero();
            }
        }
        Ok(())
    }
}

/// Hashes the sign decisions, treating round-off zeros as one state.
impl Hash for ReluMask {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.0.len().hash(h);
        for &s in &self.0 {
            (if s.abs() == 2 { 0 } else { s }).hash(h);
        }
    }
}

#[derive(Debug, Default)]
pub struct Relu {
    mask: Option<ReluMask>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward<T: Scalar>(&mut self, x: RealTensor4<T>, ctx: &ForwardCtx) -> RealTensor4<T> {
        if ctx.training() {
            self.mask = Some(ReluMask::of(x.data()));
        }
        relu(&x)
    }

    pub fn backward<T: Scalar>(&mut self, mut g: RealTensor4<T>) -> Result<RealTensor4<T>> {
        let mask = self.mask.as_ref().ok_or(Error::MissingCache("relu"))?;
        mask.apply(g.data_mut())?;
        Ok(g)
    }

    pub fn clear_cache(&mut self) {
        self.mask = None;
    }

    /// Active-unit mask of the last training forward pass.
    pub fn pattern(&self) -> Option<&ReluMask> {
        self.mask.as_ref()
    }
}

#[derive(Debug, Default)]
pub struct SplitRelu {
    masks: Option<(ReluMask, ReluMask)>,
}

impl SplitRelu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward<T: Scalar>(&mut self, x: ComplexTensor4<T>, ctx: &ForwardCtx) -> ComplexTensor4<T> {
        if ctx.training() {
            self.masks = Some((ReluMask::of(x.re.data()), ReluMask::of(x.im.data())));
        }
        split_relu(&x)
    }

    pub fn backward<T: Scalar>(&mut self, mut g: ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
        let (mre, mim) = self.masks.as_ref().ok_or(Error::MissingCache("split_relu"))?;
        mre.apply(g.re.data_mut())?;
        mim.apply(g.im.data_mut())?;
        Ok(g)
    }

    pub fn clear_cache(&mut self) {
        self.masks = None;
    }

    pub fn pattern(&self) -> Option<&(ReluMask, ReluMask)> {
        self.masks.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        let x = RealTensor4::<f64>::from_vec([1, 1, 3, 1], vec![0.0, 2.0, 3.5]).unwrap();
        assert_eq!(relu(&x), x);
        let x = RealTensor4::<f64>::from_vec([1, 1, 1, 1], vec![-1.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0]);
    }

    #[test]
    fn split_relu_per_branch() {
        let x = ComplexTensor4::from_parts(
            RealTensor4::<f64>::from_vec([1, 1, 1, 1], vec![1.0]).unwrap(),
            RealTensor4::from_vec([1, 1, 1, 1], vec![-2.0]).unwrap(),
        )
        .unwrap();
        let y = split_relu(&x);
        assert_eq!((y.re.data()[0], y.im.data()[0]), (1.0, 0.0));
    }

    #[test]
    fn backward_needs_forward() {
        let mut r = Relu::new();
        assert!(matches!(
            r.backward(RealTensor4::<f32>::zeros([1, 1, 1, 1])),
            Err(Error::MissingCache(_))
        ));
    }
}
