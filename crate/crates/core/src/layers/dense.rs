use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::layers::{glorot_uniform, ForwardCtx, ParamView};
use crate::scalar::{mat, Scalar};
use crate::tensor::RealTensor4;

/// Fully connected layer `y = x·W + b`. Inputs of shape [B, H, W, C] are
/// flattened row-major (H, then W, then C); outputs are [B, 1, 1, units].
#[derive(Debug, Clone)]
pub struct Dense<T> {
    fan_in: usize,
    units: usize,
    /// fan_in × units, row-major
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    grad_weight: Vec<T>,
    grad_bias: Vec<T>,
    input: Option<(usize, Vec<T>)>,
    input_shape: Option<[usize; 4]>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(fan_in: usize, units: usize, rng: &mut ChaCha8Rng) -> Self {
        let weight = glorot_uniform(fan_in * units, fan_in, units, rng);
        Self::from_weights(fan_in, units, weight, vec![T::zero(); units]).expect("sizes agree")
    }

    pub fn from_weights(fan_in: usize, units: usize, weight: Vec<T>, bias: Vec<T>) -> Result<Self> {
        check_dim("dense weight", fan_in * units, weight.len())?;
        check_dim("dense bias", units, bias.len())?;
        Ok(Self {
            fan_in,
            units,
            weight,
            bias,
            grad_weight: vec![T::zero(); fan_in * units],
            grad_bias: vec![T::zero(); units],
            input: None,
            input_shape: None,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn units(&self) -> usize {
        self.units
    }

    /// Row-major [batch × fan_in] → [batch × units].
    pub fn forward_rows(&mut self, batch: usize, x: &[T], training: bool) -> Result<Vec<T>> {
        check_dim("dense input features", self.fan_in * batch, x.len())?;
        let mut out = Vec::with_capacity(batch * self.units);
        for _ in 0..batch {
            out.extend_from_slice(&self.bias);
        }
        mat::matmul(batch, self.fan_in, self.units, x, &self.weight, T::one(), &mut out);
        if training {
            self.input = Some((batch, x.to_vec()));
        }
        Ok(out)
    }

    pub fn backward_rows(&mut self, g: &[T]) -> Result<Vec<T>> {
        let (batch, x) = self.input.as_ref().ok_or(Error::MissingCache("dense"))?;
        let batch = *batch;
        check_dim("dense grad", batch * self.units, g.len())?;
        mat::matmul_at(self.fan_in, batch, self.units, x, g, T::one(), &mut self.grad_weight);
        for row in g.chunks(self.units) {
            for (gb, &v) in self.grad_bias.iter_mut().zip(row) {
                *gb = *gb + v;
            }
        }
        let mut gx = vec![T::zero(); batch * self.fan_in];
        mat::matmul_bt(batch, self.units, self.fan_in, g, &self.weight, T::zero(), &mut gx);
        Ok(gx)
    }

    pub fn forward(&mut self, x: RealTensor4<T>, ctx: &ForwardCtx) -> Result<RealTensor4<T>> {
        let b = x.batch();
        let out = self.forward_rows(b, x.data(), ctx.training())?;
        if ctx.training() {
            self.input_shape = Some(x.shape());
        }
        RealTensor4::from_vec([b, 1, 1, self.units], out)
    }

    pub fn backward(&mut self, g: RealTensor4<T>) -> Result<RealTensor4<T>> {
        let shape = self.input_shape.ok_or(Error::MissingCache("dense"))?;
        let gx = self.backward_rows(g.data())?;
        RealTensor4::from_vec(shape, gx)
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView<'_, T>), prefix: &str) {
        f(ParamView {
            name: format!("{prefix}weight"),
            value: &mut self.weight,
            grad: &mut self.grad_weight,
        });
        f(ParamView {
            name: format!("{prefix}bias"),
            value: &mut self.bias,
            grad: &mut self.grad_bias,
        });
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
        self.input_shape = None;
    }
}
