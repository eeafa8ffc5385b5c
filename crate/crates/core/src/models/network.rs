use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::layers::{
    Activation, ApproxDropout, BatchNorm, BridgeToFreq, BridgeToTime, Conv2d, Dense, Dropout, DropoutSpec, Eml,
    ForwardCtx, FreqBatchNorm, FreqMaxPool, Layer, MaxPool, Mode, ParamView, Relu, SplitRelu, TwoBranchHead,
};
use crate::models::config::{LayerSpec, LayerTrace, NetworkConfig};
use crate::models::checkpoint::NamedTensor;
use crate::scalar::Scalar;
use crate::tensor::RealTensor4;

const DROPOUT_SEED_SALT: u64 = 0x6a09_e667_f3bc_c909;

/// An instantiated network: one [`Layer`] per config entry.
pub struct Network<T: Scalar> {
    config: NetworkConfig,
    seed: u64,
    trace: Vec<LayerTrace>,
    pub layers: Vec<Layer<T>>,
}

/// Validate `cfg` and instantiate it with parameters drawn from `seed`.
pub fn build_network<T: Scalar>(cfg: &NetworkConfig, seed: u64) -> Result<Network<T>> {
    let trace = cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dropout_seed = seed ^ DROPOUT_SEED_SALT;
    let mut layers = Vec::with_capacity(trace.len());
    for t in &trace {
        let (i, o) = (t.input, t.output);
        let layer = match &t.spec {
            LayerSpec::Conv { k, channels, stride } => {
                Layer::Conv(Conv2d::new(*k, i.channels, *channels, *stride, &mut rng))
            }
            LayerSpec::Eml { k, channels } => {
                Layer::Eml(Eml::new_random(i.height, i.width, *k, i.channels, *channels, &mut rng)?)
            }
            LayerSpec::Bn => Layer::BatchNorm(BatchNorm::new(i.channels)),
            LayerSpec::FreqBn => Layer::FreqBatchNorm(FreqBatchNorm::new(i.channels)),
            LayerSpec::Relu => Layer::Relu(Relu::new()),
            LayerSpec::SplitRelu => Layer::SplitRelu(SplitRelu::new()),
            LayerSpec::Maxpool { window, stride } => Layer::MaxPool(MaxPool::new(*window, *stride)),
            LayerSpec::FreqMaxpool { window, stride } => Layer::FreqMaxPool(FreqMaxPool::new(*window, *stride)),
            LayerSpec::Dropout { p } => Layer::Dropout(Dropout::new(DropoutSpec::new(*p, dropout_seed)?)),
            LayerSpec::FreqDropout { p } => {
                Layer::FreqDropout(ApproxDropout::new(DropoutSpec::new(*p, dropout_seed)?))
            }
            LayerSpec::BridgeToFreq => Layer::BridgeToFreq(BridgeToFreq::new()),
            LayerSpec::BridgeToTime => Layer::BridgeToTime(BridgeToTime::new()),
            LayerSpec::FlattenHead { hidden } => {
                Layer::Head(TwoBranchHead::new(i.numel(), hidden, o.channels, &mut rng))
            }
            LayerSpec::Dense { units } => Layer::Dense(Dense::new(i.numel(), *units, &mut rng)),
        };
        layers.push(layer);
    }
    Ok(Network {
        config: cfg.clone(),
        seed,
        trace,
        layers,
    })
}

impl<T: Scalar> Network<T> {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trace(&self) -> &[LayerTrace] {
        &self.trace
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    /// Logits of shape [B, 1, 1, classes]. `step` keys dropout noise.
    pub fn forward(&mut self, x: &RealTensor4<T>, mode: Mode, step: u64) -> Result<RealTensor4<T>> {
        let [_, h, w, c] = x.shape();
        check_dim("input height", self.config.input[0], h)?;
        check_dim("input width", self.config.input[1], w)?;
        check_dim("input channels", self.config.input[2], c)?;
        let mut a = Activation::Time(x.clone());
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let ctx = ForwardCtx {
                mode,
                step,
                layer_index: i,
            };
            a = layer.forward(a, &ctx)?;
        }
        a.into_time("network output")
    }

    /// Backpropagate logit gradients through every layer, accumulating
    /// parameter gradients; returns the gradient with respect to the input.
    pub fn backward(&mut self, g: RealTensor4<T>) -> Result<RealTensor4<T>> {
        let mut a = Activation::Time(g);
        for layer in self.layers.iter_mut().rev() {
            a = layer.backward(a)?;
        }
        a.into_time("network input gradient")
    }

    /// Visit every trainable tensor; names are `<index>.<kind>.<param>`.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView<'_, T>)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let kind = layer.kind();
            layer.visit_params(&mut |p: ParamView<'_, T>| {
                f(ParamView {
                    name: format!("{i:02}.{kind}.{}", p.name),
                    value: p.value,
                    grad: p.grad,
                })
            });
        }
    }

    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(String, &mut [T])) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let kind = layer.kind();
            layer.visit_buffers(&mut |name, v| f(format!("{i:02}.{kind}.{name}"), v));
        }
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(Layer::zero_grad);
    }

    pub fn clear_cache(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }

    /// Fingerprint of every ReLU mask and pooling winner chosen in the last
    /// training forward pass. Two passes with equal fingerprints ran the
    /// same linear piece of the network.
    pub fn activation_pattern(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for l in &self.layers {
            l.hash_pattern(&mut h);
        }
        std::hash::Hasher::finish(&h)
    }

    /// Stored real parameters (an EML stores 2·H·W·Cin·Cout).
    pub fn param_count(&mut self) -> usize {
        self.layers.iter_mut().map(Layer::param_count).sum()
    }

    /// Free real parameters once fixation constrains every EML to a K×K
    /// support: K²·Cin·Cout per EML, the stored count for everything else.
    pub fn free_param_count(&mut self) -> usize {
        self.layers
            .iter_mut()
            .map(|l| match l {
                Layer::Eml(e) => e.weights.support_k().pow(2) * e.in_channels() * e.out_channels(),
                other => other.param_count(),
            })
            .sum()
    }

    pub fn apply_weight_fixation(&mut self) -> Result<()> {
        for layer in &mut self.layers {
            if let Layer::Eml(e) = layer {
                e.fix()?;
            }
        }
        Ok(())
    }

    /// For every EML: (layer index, fraction of time-domain weight energy
    /// outside the K×K corner).
    pub fn eml_outside_energy(&self) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if let Layer::Eml(e) = layer {
                out.push((i, e.weights.outside_energy_fraction(e.plan())?));
            }
        }
        Ok(out)
    }

    /// Largest relative imaginary residual discarded by a frequency →
    /// time transition during the last forward pass.
    pub fn max_bridge_residual(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::BridgeToTime(b) => b.last_residual(),
                Layer::FreqMaxPool(p) => p.last_residual(),
                _ => 0.0,
            })
            .fold(0.0, f64::max)
    }

    /// Parameters followed by buffers, in layer order.
    pub fn state_tensors(&mut self) -> Vec<NamedTensor<T>> {
        let mut out = Vec::new();
        self.visit_params(&mut |p| out.push(NamedTensor::flat(p.name, p.value.to_vec())));
        self.visit_buffers(&mut |name, v| out.push(NamedTensor::flat(name, v.to_vec())));
        out
    }

    /// Overwrite parameters and buffers from `tensors`; every entry of
    /// [`Network::state_tensors`] must be present with a matching length.
    pub fn load_state(&mut self, tensors: &[NamedTensor<T>]) -> Result<()> {
        let lookup = |name: &str| tensors.iter().find(|t| t.name == name);
        let mut failure: Option<String> = None;
        let mut assign = |name: String, value: &mut [T]| {
            if failure.is_some() {
                return;
            }
            match lookup(&name) {
                Some(t) if t.data.len() == value.len() => value.copy_from_slice(&t.data),
                Some(t) => failure = Some(format!("`{name}` has {} values, expected {}", t.data.len(), value.len())),
                None => failure = Some(format!("missing tensor `{name}`")),
            }
        };
        self.visit_params(&mut |p| assign(p.name, p.value));
        self.visit_buffers(&mut |name, v| assign(name, v));
        match failure {
            Some(reason) => Err(Error::Checkpoint(crate::error::CheckpointError::Malformed(reason))),
            None => Ok(()),
        }
    }
}
