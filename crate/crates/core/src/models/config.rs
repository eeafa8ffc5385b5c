use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

fn one() -> usize {
    1
}

/// Which representation a tensor is in between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Time,
    Freq,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Time => "time",
            Domain::Freq => "freq",
        })
    }
}

/// One entry of a network's layer list, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv {
        k: usize,
        channels: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    Eml {
        k: usize,
        channels: usize,
    },
    Bn,
    FreqBn,
    Relu,
    SplitRelu,
    Maxpool {
        window: usize,
        stride: usize,
    },
    FreqMaxpool {
        window: usize,
        stride: usize,
    },
    Dropout {
        p: f64,
    },
    FreqDropout {
        p: f64,
    },
    BridgeToFreq,
    BridgeToTime,
    FlattenHead {
        #[serde(default)]
        hidden: Vec<usize>,
    },
    Dense {
        units: usize,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Eml { .. } => "eml",
            LayerSpec::Bn => "bn",
            LayerSpec::FreqBn => "freq_bn",
            LayerSpec::Relu => "relu",
            LayerSpec::SplitRelu => "split_relu",
            LayerSpec::Maxpool { .. } => "maxpool",
            LayerSpec::FreqMaxpool { .. } => "freq_maxpool",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::FreqDropout { .. } => "freq_dropout",
            LayerSpec::BridgeToFreq => "bridge_to_freq",
            LayerSpec::BridgeToTime => "bridge_to_time",
            LayerSpec::FlattenHead { .. } => "flatten_head",
            LayerSpec::Dense { .. } => "dense",
        }
    }

    /// Domain of the tensor this layer consumes.
    pub fn domain(&self) -> Domain {
        match self {
            LayerSpec::Eml { .. }
            | LayerSpec::FreqBn
            | LayerSpec::SplitRelu
            | LayerSpec::FreqMaxpool { .. }
            | LayerSpec::FreqDropout { .. }
            | LayerSpec::BridgeToTime
            | LayerSpec::FlattenHead { .. } => Domain::Freq,
            _ => Domain::Time,
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv { .. }
                | LayerSpec::Eml { .. }
                | LayerSpec::Bn
                | LayerSpec::FreqBn
                | LayerSpec::Dense { .. }
                | LayerSpec::FlattenHead { .. }
        )
    }
}

/// Activation dimensions between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub domain: Domain,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Dims {
    pub fn numel(&self) -> usize {
        self.height * self.width * self.channels
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{} ({})", self.height, self.width, self.channels, self.domain)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    pub index: usize,
    pub spec: LayerSpec,
    pub input: Dims,
    pub output: Dims,
}

/// A named architecture: input dimensions (H, W, C), class count and an
/// ordered layer list. `assumed` marks configs whose shapes fill gaps with
/// conventional choices; `assumptions` lists them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub name: String,
    pub input: [usize; 3],
    pub classes: usize,
    #[serde(default)]
    pub assumed: bool,
    #[serde(default)]
    pub assumptions: Vec<String>,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
}

fn config_err(index: usize, spec: &LayerSpec, reason: impl Into<String>) -> Error {
    Error::Config {
        index,
        kind: spec.kind().to_string(),
        reason: reason.into(),
    }
}

fn pooled(n: usize, window: usize, stride: usize) -> Option<usize> {
    (window >= 1 && stride >= 1 && window <= n).then(|| (n - window) / stride + 1)
}

impl NetworkConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Data {
            path: path.into(),
            reason: e.to_string(),
        })
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_toml_string().as_bytes()).into()
    }

    pub fn input_dims(&self) -> Dims {
        Dims {
            domain: Domain::Time,
            height: self.input[0],
            width: self.input[1],
            channels: self.input[2],
        }
    }

    /// Walks the layer list, checking domain transitions and shape
    /// arithmetic, and returns every layer's input and output dims. The
    /// first offending layer index is reported on failure.
    pub fn trace(&self) -> Result<Vec<LayerTrace>> {
        if self.input.contains(&0) {
            return Err(Error::invalid(format!("input dims {:?} must be positive", self.input)));
        }
        let mut cur = self.input_dims();
        let mut bridged = false;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, spec) in self.layers.iter().enumerate() {
            let err = |reason: String| config_err(i, spec, reason);
            if spec.domain() != cur.domain {
                return Err(err(match cur.domain {
                    Domain::Time => "frequency-domain layer fed a time-domain tensor (insert bridge_to_freq first)".into(),
                    Domain::Freq => "time-domain layer fed a frequency-domain tensor (insert bridge_to_time first)".into(),
                }));
            }
            let input = cur;
            let next = match spec {
                LayerSpec::Conv { k, channels, stride } => {
                    if *k == 0 || *channels == 0 || *stride == 0 {
                        return Err(err("k, channels and stride must be positive".into()));
                    }
                    Dims {
                        height: cur.height.div_ceil(*stride),
                        width: cur.width.div_ceil(*stride),
                        channels: *channels,
                        ..cur
                    }
                }
                LayerSpec::Eml { k, channels } => {
                    if *k == 0 || *channels == 0 {
                        return Err(err("k and channels must be positive".into()));
                    }
                    if *k > cur.height.min(cur.width) {
                        return Err(err(format!("filter {k}x{k} larger than the {}x{} plane", cur.height, cur.width)));
                    }
                    Dims {
                        channels: *channels,
                        ..cur
                    }
                }
                LayerSpec::Maxpool { window, stride } | LayerSpec::FreqMaxpool { window, stride } => {
                    match (pooled(cur.height, *window, *stride), pooled(cur.width, *window, *stride)) {
                        (Some(height), Some(width)) => Dims { height, width, ..cur },
                        _ => {
                            return Err(err(format!(
                                "window {window} / stride {stride} invalid for a {}x{} plane",
                                cur.height, cur.width
                            )))
                        }
                    }
                }
                LayerSpec::Dropout { p } | LayerSpec::FreqDropout { p } => {
                    if !(0.0..1.0).contains(p) {
                        return Err(err(format!("dropout rate {p} outside [0, 1)")));
                    }
                    cur
                }
                LayerSpec::BridgeToFreq => {
                    if bridged {
                        return Err(err("a network may contain at most one bridge_to_freq".into()));
                    }
                    bridged = true;
                    Dims {
                        domain: Domain::Freq,
                        ..cur
                    }
                }
                LayerSpec::BridgeToTime => Dims {
                    domain: Domain::Time,
                    ..cur
                },
                LayerSpec::FlattenHead { hidden } => {
                    if hidden.contains(&0) {
                        return Err(err("hidden widths must be positive".into()));
                    }
                    if i + 1 != self.layers.len() {
                        return Err(err("flatten_head must be the last layer".into()));
                    }
                    Dims {
                        domain: Domain::Time,
                        height: 1,
                        width: 1,
                        channels: self.classes,
                    }
                }
                LayerSpec::Dense { units } => {
                    if *units == 0 {
                        return Err(err("units must be positive".into()));
                    }
                    Dims {
                        domain: Domain::Time,
                        height: 1,
                        width: 1,
                        channels: *units,
                    }
                }
                LayerSpec::Bn | LayerSpec::FreqBn | LayerSpec::Relu | LayerSpec::SplitRelu => cur,
            };
            out.push(LayerTrace {
                index: i,
                spec: spec.clone(),
                input,
                output: next,
            });
            cur = next;
        }
        Ok(out)
    }

    /// Full validation: the chain must trace and end in `classes` logits.
    pub fn validate(&self) -> Result<Vec<LayerTrace>> {
        if self.classes < 2 {
            return Err(Error::invalid(format!("classes must be >= 2, got {}", self.classes)));
        }
        let trace = self.trace()?;
        let Some(last) = trace.last() else {
            return Err(Error::invalid(format!("network `{}` has no layers", self.name)));
        };
        let want = Dims {
            domain: Domain::Time,
            height: 1,
            width: 1,
            channels: self.classes,
        };
        if last.output != want {
            return Err(config_err(
                last.index,
                &last.spec,
                format!("network must end in {} logits, got {}", self.classes, last.output),
            ));
        }
        Ok(trace)
    }
}
