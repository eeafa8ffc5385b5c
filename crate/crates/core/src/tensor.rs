//! Dense 4-axis tensors.
//!
//! Feature maps use the axis order (batch, height, width, channels) and are
//! stored row-major, so channels are innermost. Weight grids reuse the same
//! container with axes (height, width, in-channels, out-channels).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Shape4 = [usize; 4];

pub fn numel(shape: Shape4) -> usize {
    shape.iter().product()
}

fn unravel(shape: Shape4, mut flat: usize) -> [usize; 4] {
    let mut idx = [0; 4];
    for axis in (0..4).rev() {
        idx[axis] = flat % shape[axis];
        flat /= shape[axis];
    }
    idx
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealTensor4<T> {
    shape: Shape4,
    data: Vec<T>,
}

impl<T: Scalar> RealTensor4<T> {
    pub fn zeros(shape: Shape4) -> Self {
        Self {
            shape,
            data: vec![T::zero(); numel(shape)],
        }
    }

    pub fn filled(shape: Shape4, value: T) -> Self {
        Self {
            shape,
            data: vec![value; numel(shape)],
        }
    }

    pub fn from_vec(shape: Shape4, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid(format!("tensor dims must be >= 1, got {shape:?}")));
        }
        if data.len() != numel(shape) {
            return Err(Error::invalid(format!(
                "data length {} does not match shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: Shape4, mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let data = (0..numel(shape)).map(|i| f(unravel(shape, i))).collect();
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn height(&self) -> usize {
        self.shape[1]
    }

    pub fn width(&self) -> usize {
        self.shape[2]
    }

    pub fn channels(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn offset(&self, idx: [usize; 4]) -> usize {
        let s = self.shape;
        ((idx[0] * s[1] + idx[1]) * s[2] + idx[2]) * s[3] + idx[3]
    }

    pub fn get(&self, idx: [usize; 4]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: [usize; 4], value: T) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    /// Contiguous slice holding everything under the first axis index `i`.
    pub fn outer(&self, i: usize) -> &[T] {
        let n = self.shape[1] * self.shape[2] * self.shape[3];
        &self.data[i * n..(i + 1) * n]
    }

    pub fn outer_mut(&mut self, i: usize) -> &mut [T] {
        let n = self.shape[1] * self.shape[2] * self.shape[3];
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn reshape(mut self, shape: Shape4) -> Result<Self> {
        if numel(shape) != self.data.len() {
            return Err(Error::invalid(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn sum_squares(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    /// First non-finite element, reported with its 4-axis index.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NonFinite {
                index: unravel(self.shape, i),
                value: self.data[i].as_f64(),
            }),
        }
    }

    pub fn cast<U: Scalar>(&self) -> RealTensor4<U> {
        RealTensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::of(v.as_f64())).collect(),
        }
    }

    /// Select samples along the first axis.
    pub fn gather(&self, rows: &[usize]) -> Self {
        let n = self.shape[1] * self.shape[2] * self.shape[3];
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            data.extend_from_slice(self.outer(r));
        }
        Self {
            shape: [rows.len(), self.shape[1], self.shape[2], self.shape[3]],
            data,
        }
    }
}

/// Complex tensor stored as two real planes, one per branch.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor4<T> {
    pub re: RealTensor4<T>,
    pub im: RealTensor4<T>,
}

impl<T: Scalar> ComplexTensor4<T> {
    pub fn zeros(shape: Shape4) -> Self {
        Self {
            re: RealTensor4::zeros(shape),
            im: RealTensor4::zeros(shape),
        }
    }

    pub fn from_parts(re: RealTensor4<T>, im: RealTensor4<T>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::invalid(format!(
                "real plane {:?} and imaginary plane {:?} differ in shape",
                re.shape(),
                im.shape()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn from_real(re: RealTensor4<T>) -> Self {
        let im = RealTensor4::zeros(re.shape());
        Self { re, im }
    }

    pub fn shape(&self) -> Shape4 {
        self.re.shape()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.map(|v| -v),
        }
    }

    pub fn reshape(self, shape: Shape4) -> Result<Self> {
        Ok(Self {
            re: self.re.reshape(shape)?,
            im: self.im.reshape(shape)?,
        })
    }

    pub fn check_finite(&self) -> Result<()> {
        self.re.check_finite()?;
        self.im.check_finite()
    }

    pub fn max_abs(&self) -> T {
        self.re
            .data()
            .iter()
            .zip(self.im.data())
            .fold(T::zero(), |m, (&a, &b)| m.max(a.hypot(b)))
    }

    pub fn energy(&self) -> T {
        self.re.sum_squares() + self.im.sum_squares()
    }

    pub fn cast<U: Scalar>(&self) -> ComplexTensor4<U> {
        ComplexTensor4 {
            re: self.re.cast(),
            im: self.im.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_row_major() {
        let t = RealTensor4::<f64>::from_fn([2, 3, 4, 5], |[b, h, w, c]| {
            (((b * 3 + h) * 4 + w) * 5 + c) as f64
        });
        for (i, v) in t.data().iter().enumerate() {
            assert_eq!(*v, i as f64);
        }
        assert_eq!(t.get([1, 2, 3, 4]), 119.0);
    }

    #[test]
    fn non_finite_reports_index() {
        let mut t = RealTensor4::<f32>::zeros([1, 2, 2, 1]);
        t.set([0, 1, 0, 0], f32::NAN);
        match t.check_finite() {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, [0, 1, 0, 0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(RealTensor4::<f32>::from_vec([1, 0, 2, 1], vec![]).is_err());
        assert!(RealTensor4::<f32>::from_vec([1, 2, 2, 1], vec![0.0; 3]).is_err());
    }

    #[test]
    fn mismatched_planes_rejected() {
        let a = RealTensor4::<f32>::zeros([1, 2, 2, 1]);
        let b = RealTensor4::<f32>::zeros([1, 2, 1, 2]);
        assert!(ComplexTensor4::from_parts(a, b).is_err());
    }
}
