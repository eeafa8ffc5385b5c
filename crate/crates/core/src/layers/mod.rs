//! Network layers. Time-domain layers consume and produce [`RealTensor4`];
//! frequency-domain layers consume and produce [`ComplexTensor4`] whose two
//! planes are the real and imaginary branches.
//!
//! Gradients follow split-complex differentiation: the real and imaginary
//! planes are independent real variables of a real-valued loss, and a
//! complex gradient `g` packs `∂L/∂re + i·∂L/∂im`.

mod activation;
mod batchnorm;
mod bridge;
mod conv;
mod dense;
mod dropout;
mod eml;
mod head;
mod pool;

pub use activation::{relu, split_relu, Relu, ReluMask, SplitRelu};
pub use batchnorm::{BatchNorm, BatchNormCore, FreqBatchNorm, DEFAULT_EPS as BN_EPS};
pub use bridge::{bridge_to_freq, bridge_to_time, BridgeToFreq, BridgeToTime};
pub use conv::{conv2d_backward, conv2d_forward, Conv2d};
pub use dense::Dense;
pub use dropout::{approx_dropout, dropout_multipliers, noise_rng, ApproxDropout, Dropout, DropoutSpec};
pub use eml::{eml_backward, eml_forward, weight_fixation, Eml};
pub use head::TwoBranchHead;
pub use pool::{freq_maxpool, maxpool_forward, FreqMaxPool, MaxPool};

use std::hash::{Hash, Hasher};

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor4, RealTensor4};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-call context handed to every layer.
#[derive(Clone, Copy, Debug)]
pub struct ForwardCtx {
    pub mode: Mode,
    /// Global optimizer step; keys dropout noise together with the layer index.
    pub step: u64,
    pub layer_index: usize,
}

impl ForwardCtx {
    pub fn eval() -> Self {
        Self {
            mode: Mode::Eval,
            step: 0,
            layer_index: 0,
        }
    }

    pub fn train(step: u64, layer_index: usize) -> Self {
        Self {
            mode: Mode::Train,
            step,
            layer_index,
        }
    }

    pub fn training(&self) -> bool {
        self.mode == Mode::Train
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Activation<T> {
    Time(RealTensor4<T>),
    Freq(ComplexTensor4<T>),
}

impl<T: Scalar> Activation<T> {
    pub fn into_time(self, layer: &'static str) -> Result<RealTensor4<T>> {
        match self {
            Activation::Time(t) => Ok(t),
            Activation::Freq(_) => Err(Error::invalid(format!(
                "{layer} expects a time-domain tensor but received a frequency-domain one"
            ))),
        }
    }

    pub fn into_freq(self, layer: &'static str) -> Result<ComplexTensor4<T>> {
        match self {
            Activation::Freq(t) => Ok(t),
            Activation::Time(_) => Err(Error::invalid(format!(
                "{layer} expects a frequency-domain tensor but received a time-domain one"
            ))),
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        match self {
            Activation::Time(t) => t.shape(),
            Activation::Freq(t) => t.shape(),
        }
    }
}

/// A trainable tensor and its accumulated gradient.
pub struct ParamView<'a, T> {
    pub name: String,
    pub value: &'a mut [T],
    pub grad: &'a mut [T],
}

pub(crate) fn glorot_uniform<T: Scalar>(len: usize, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    use rand::Rng;
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| T::of(rng.random_range(-limit..limit))).collect()
}

pub enum Layer<T: Scalar> {
    Conv(Conv2d<T>),
    Eml(Eml<T>),
    BatchNorm(BatchNorm<T>),
    FreqBatchNorm(FreqBatchNorm<T>),
    Relu(Relu),
    SplitRelu(SplitRelu),
    MaxPool(MaxPool),
    FreqMaxPool(FreqMaxPool<T>),
    Dropout(Dropout<T>),
    FreqDropout(ApproxDropout<T>),
    BridgeToFreq(BridgeToFreq<T>),
    BridgeToTime(BridgeToTime<T>),
    Dense(Dense<T>),
    Head(TwoBranchHead<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Eml(_) => "eml",
            Layer::BatchNorm(_) => "bn",
            Layer::FreqBatchNorm(_) => "freq_bn",
            Layer::Relu(_) => "relu",
            Layer::SplitRelu(_) => "split_relu",
            Layer::MaxPool(_) => "maxpool",
            Layer::FreqMaxPool(_) => "freq_maxpool",
            Layer::Dropout(_) => "dropout",
            Layer::FreqDropout(_) => "freq_dropout",
            Layer::BridgeToFreq(_) => "bridge_to_freq",
            Layer::BridgeToTime(_) => "bridge_to_time",
            Layer::Dense(_) => "dense",
            Layer::Head(_) => "flatten_head",
        }
    }

    pub fn forward(&mut self, x: Activation<T>, ctx: &ForwardCtx) -> Result<Activation<T>> {
        let kind = self.kind();
        Ok(match self {
            Layer::Conv(l) => Activation::Time(l.forward(x.into_time(kind)?, ctx)?),
            Layer::Eml(l) => Activation::Freq(l.forward(x.into_freq(kind)?, ctx)?),
            Layer::BatchNorm(l) => Activation::Time(l.forward(x.into_time(kind)?, ctx)?),
            Layer::FreqBatchNorm(l) => Activation::Freq(l.forward(x.into_freq(kind)?, ctx)?),
            Layer::Relu(l) => Activation::Time(l.forward(x.into_time(kind)?, ctx)),
            Layer::SplitRelu(l) => Activation::Freq(l.forward(x.into_freq(kind)?, ctx)),
            Layer::MaxPool(l) => Activation::Time(l.forward(x.into_time(kind)?, ctx)?),
            Layer::FreqMaxPool(l) => Activation::Freq(l.forward(x.into_freq(kind)?, ctx)?),
            Layer::Dropout(l) => Activation::Time(l.forward(x.into_time(kind)?, ctx)),
            Layer::FreqDropout(l) => Activation::Freq(l.forward(x.into_freq(kind)?, ctx)),
            Layer::BridgeToFreq(l) => Activation::Freq(l.forward(x.into_time(kind)?)?),
            Layer::BridgeToTime(l) => Activation::Time(l.forward(x.into_freq(kind)?)?),
            Layer::Dense(l) => Activation::Time(l.forward(x.into_time(kind)?, ctx)?),
            Layer::Head(l) => Activation::Time(l.forward(x.into_freq(kind)?, ctx)?),
        })
    }

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the layer input.
    pub fn backward(&mut self, g: Activation<T>) -> Result<Activation<T>> {
        let kind = self.kind();
        Ok(match self {
            Layer::Conv(l) => Activation::Time(l.backward(g.into_time(kind)?)?),
            Layer::Eml(l) => Activation::Freq(l.backward(g.into_freq(kind)?)?),
            Layer::BatchNorm(l) => Activation::Time(l.backward(g.into_time(kind)?)?),
            Layer::FreqBatchNorm(l) => Activation::Freq(l.backward(g.into_freq(kind)?)?),
            Layer::Relu(l) => Activation::Time(l.backward(g.into_time(kind)?)?),
            Layer::SplitRelu(l) => Activation::Freq(l.backward(g.into_freq(kind)?)?),
            Layer::MaxPool(l) => Activation::Time(l.backward(g.into_time(kind)?)?),
            Layer::FreqMaxPool(l) => Activation::Freq(l.backward(g.into_freq(kind)?)?),
            Layer::Dropout(l) => Activation::Time(l.backward(g.into_time(kind)?)?),
            Layer::FreqDropout(l) => Activation::Freq(l.backward(g.into_freq(kind)?)?),
            Layer::BridgeToFreq(l) => Activation::Time(l.backward(g.into_freq(kind)?)?),
            Layer::BridgeToTime(l) => Activation::Freq(l.backward(g.into_time(kind)?)?),
            Layer::Dense(l) => Activation::Time(l.backward(g.into_time(kind)?)?),
            Layer::Head(l) => Activation::Freq(l.backward(g.into_time(kind)?)?),
        })
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView<'_, T>)) {
        match self {
            Layer::Conv(l) => l.visit_params(f),
            Layer::Eml(l) => l.visit_params(f),
            Layer::BatchNorm(l) => l.visit_params(f),
            Layer::FreqBatchNorm(l) => l.visit_params(f),
            Layer::Dense(l) => l.visit_params(f, ""),
            Layer::Head(l) => l.visit_params(f),
            _ => {}
        }
    }

    /// Non-trainable state that must survive a checkpoint round trip.
    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(String, &mut [T])) {
        match self {
            Layer::BatchNorm(l) => l.visit_buffers(f),
            Layer::FreqBatchNorm(l) => l.visit_buffers(f),
            _ => {}
        }
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.grad.fill(T::zero()));
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.value.len());
        n
    }

    /// Feed the piecewise-linear decisions (ReLU masks, pooling winners)
    /// made during the last training forward pass into `h`.
    pub fn hash_pattern(&self, h: &mut impl Hasher) {
        match self {
            Layer::Relu(l) => l.pattern().hash(h),
            Layer::SplitRelu(l) => l.pattern().hash(h),
            Layer::MaxPool(l) => l.pattern().hash(h),
            Layer::FreqMaxPool(l) => l.pattern().hash(h),
            Layer::Head(l) => l.pattern().hash(h),
            _ => {}
        }
    }

    /// Drop any activations cached for backward.
    pub fn clear_cache(&mut self) {
        match self {
            Layer::Conv(l) => l.clear_cache(),
            Layer::Eml(l) => l.clear_cache(),
            Layer::BatchNorm(l) => l.core.clear_cache(),
            Layer::FreqBatchNorm(l) => {
                l.re.clear_cache();
                l.im.clear_cache();
            }
            Layer::Relu(l) => l.clear_cache(),
            Layer::SplitRelu(l) => l.clear_cache(),
            Layer::MaxPool(l) => l.clear_cache(),
            Layer::FreqMaxPool(l) => l.clear_cache(),
            Layer::Dropout(l) => l.clear_cache(),
            Layer::FreqDropout(l) => l.clear_cache(),
            Layer::Dense(l) => l.clear_cache(),
            Layer::Head(l) => l.clear_cache(),
            Layer::BridgeToFreq(_) | Layer::BridgeToTime(_) => {}
        }
    }
}
