use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::ParamView;
use crate::models::{NamedTensor, Network};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Rmsprop,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// RMSProp moving-average decay.
    #[serde(default = "default_decay")]
    pub decay: f64,
    /// RMSProp denominator epsilon.
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    /// SGD momentum.
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

fn default_decay() -> f64 {
    0.9
}

fn default_eps() -> f64 {
    1e-7
}

fn default_momentum() -> f64 {
    0.9
}

impl OptimizerConfig {
    pub fn rmsprop(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Rmsprop,
            learning_rate,
            decay: default_decay(),
            epsilon: default_eps(),
            momentum: default_momentum(),
            weight_decay: 0.0,
        }
    }

    pub fn sgd(learning_rate: f64, momentum: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            momentum,
            ..Self::rmsprop(learning_rate)
        }
    }
}

/// Per-parameter optimizer state (RMSProp mean square or SGD velocity),
/// keyed by parameter name.
#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    pub config: OptimizerConfig,
    state: BTreeMap<String, Vec<T>>,
}

const STATE_PREFIX: &str = "optimizer.";

impl<T: Scalar> Optimizer<T> {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            state: BTreeMap::new(),
        }
    }

    /// Apply one update with learning rate `lr` to every parameter of
    /// `net`. Any non-finite gradient rejects the whole step before a
    /// single parameter changes.
    pub fn step(&mut self, net: &mut Network<T>, lr: f64) -> Result<()> {
        let mut bad: Option<String> = None;
        net.visit_params(&mut |p| {
            if bad.is_none() && p.grad.iter().any(|g| !g.is_finite()) {
                bad = Some(p.name);
            }
        });
        if let Some(name) = bad {
            return Err(Error::NonFiniteGradient(name));
        }
        net.visit_params(&mut |p| self.update(p, lr));
        Ok(())
    }

    /// Update one tensor in place.
    pub fn update(&mut self, p: ParamView<'_, T>, lr: f64) {
        let cfg = &self.config;
        let len = p.value.len();
        let state = self.state.entry(p.name).or_insert_with(|| vec![T::zero(); len]);
        let lr = T::of(lr);
        let wd = T::of(cfg.weight_decay);
        match cfg.kind {
            OptimizerKind::Rmsprop => {
                let (rho, eps) = (T::of(cfg.decay), T::of(cfg.epsilon));
                let keep = T::one() - rho;
                for ((v, &g), acc) in p.value.iter_mut().zip(p.grad.iter()).zip(state.iter_mut()) {
                    let g = g + wd * *v;
                    *acc = rho * *acc + keep * g * g;
                    *v = *v - lr * g / (*acc + eps).sqrt();
                }
            }
            OptimizerKind::Sgd => {
                let m = T::of(cfg.momentum);
                for ((v, &g), vel) in p.value.iter_mut().zip(p.grad.iter()).zip(state.iter_mut()) {
                    let g = g + wd * *v;
                    *vel = m * *vel - lr * g;
                    *v = *v + *vel;
                }
            }
        }
    }

    pub fn state_tensors(&self) -> Vec<NamedTensor<T>> {
        self.state
            .iter()
            .map(|(k, v)| NamedTensor::flat(format!("{STATE_PREFIX}{k}"), v.clone()))
            .collect()
    }

    /// Restore state saved by [`Optimizer::state_tensors`]; other tensors
    /// are ignored.
    pub fn load_state(&mut self, tensors: &[NamedTensor<T>]) {
        for t in tensors {
            if let Some(name) = t.name.strip_prefix(STATE_PREFIX) {
                self.state.insert(name.to_string(), t.data.clone());
            }
        }
    }
}

/// Piecewise-constant learning rate: `base` until the first boundary, then
/// the rate of the last boundary whose epoch (0-based) has been reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    #[serde(default)]
    pub boundaries: Vec<(usize, f64)>,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            base: lr,
            boundaries: vec![],
        }
    }

    pub fn at(&self, epoch: usize) -> f64 {
        self.boundaries
            .iter()
            .filter(|(e, _)| *e <= epoch)
            .max_by_key(|(e, _)| *e)
            .map_or(self.base, |&(_, lr)| lr)
    }
}
