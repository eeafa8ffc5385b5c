//! Finite-difference verification of every analytic gradient in a network.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layers::Mode;
use crate::models::Network;
use crate::tensor::RealTensor4;
use crate::training::loss::softmax_cross_entropy;

#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error, so that near-zero
    /// gradients are compared on an absolute scale.
    pub floor: f64,
    /// Check at most this many entries per tensor (sampled); `None` checks all.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
    /// Negative control: scale the analytic gradient of this layer index.
    pub corrupt_layer: Option<(usize, f64)>,
    pub check_input: bool,
    /// An entry whose ±step evaluations change a ReLU mask or pooling
    /// winner straddles a kink, where the central difference is not a
    /// derivative estimate. The step is divided by 10 until both sides stay
    /// on the base point's linear piece or it falls below `min_step`; then
    /// the entry is excluded and counted.
    pub min_step: f64,
    /// The check fails when more than this fraction of all entries, or
    /// every entry of some layer, is excluded.
    pub max_kink_fraction: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            tolerance: 1e-4,
            floor: 1e-3,
            max_per_tensor: None,
            seed: 0,
            corrupt_layer: None,
            check_input: true,
            min_step: 1e-6,
            max_kink_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradReport {
    /// Layer index, or `None` for the network input.
    pub index: Option<usize>,
    pub kind: String,
    pub checked: usize,
    /// Entries excluded because the perturbation crossed a kink.
    pub kinks: usize,
    pub max_rel_error: f64,
    /// Parameter name and entry with the largest error.
    pub worst: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub max_kink_fraction: f64,
    pub layers: Vec<LayerGradReport>,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.layers.iter().map(|l| l.max_rel_error).fold(0.0, f64::max)
    }

    pub fn layer_passed(&self, l: &LayerGradReport) -> bool {
        l.max_rel_error < self.tolerance && l.kinks < l.checked
    }

    pub fn checked(&self) -> usize {
        self.layers.iter().map(|l| l.checked).sum()
    }

    pub fn passed(&self) -> bool {
        self.layers.iter().all(|l| self.layer_passed(l))
            && self.kinks() as f64 <= self.max_kink_fraction * self.checked() as f64
    }

    pub fn failing(&self) -> Vec<&LayerGradReport> {
        self.layers.iter().filter(|l| !self.layer_passed(l)).collect()
    }

    pub fn kinks(&self) -> usize {
        self.layers.iter().map(|l| l.kinks).sum()
    }
}

/// Loss and activation pattern of one training-mode pass.
fn loss_of(net: &mut Network<f64>, x: &RealTensor4<f64>, labels: &[usize]) -> Result<(f64, u64)> {
    let logits = net.forward(x, Mode::Train, 0)?;
    let loss = softmax_cross_entropy(logits.data(), net.classes(), labels)?.0;
    Ok((loss, net.activation_pattern()))
}

/// Central difference of `eval` at 0 with step `h`, shrinking the step
/// while either side runs a different linear piece than `base`.
fn central(
    mut eval: impl FnMut(f64) -> Result<(f64, u64)>,
    base: u64,
    mut h: f64,
    min_step: f64,
) -> Result<Option<f64>> {
    while h >= min_step {
        let up = eval(h)?;
        let down = eval(-h)?;
        if up.1 == base && down.1 == base {
            return Ok(Some((up.0 - down.0) / (2.0 * h)));
        }
        h /= 10.0;
    }
    Ok(None)
}

fn entries(len: usize, cap: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match cap {
        Some(k) if k < len => {
            let mut v = sample(rng, len, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..len).collect(),
    }
}

/// Add uniform noise in `[-scale, scale]` to every parameter. Fresh
/// initializations have zero biases and BN shifts, which park structurally
/// zero features (the imaginary DC bin of a real signal's spectrum, for
/// instance) exactly on a ReLU kink; a jittered point is generic.
pub fn jitter_params(net: &mut Network<f64>, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    net.visit_params(&mut |p| {
        for v in p.value.iter_mut() {
            *v += rng.random_range(-scale..=scale);
        }
    });
}

/// Compare analytic gradients of the mean cross-entropy against central
/// differences for every parameter (and optionally the input). The
/// network runs in training mode with a fixed step, so dropout noise is
/// identical across evaluations; BN running statistics are restored.
pub fn gradcheck(
    net: &mut Network<f64>,
    x: &RealTensor4<f64>,
    labels: &[usize],
    opts: &GradcheckOptions,
) -> Result<GradcheckReport> {
    let buffers: Vec<Vec<f64>> = {
        let mut v = Vec::new();
        net.visit_buffers(&mut |_, b| v.push(b.to_vec()));
        v
    };
    net.zero_grad();
    let logits = net.forward(x, Mode::Train, 0)?;
    let base = net.activation_pattern();
    let (_, g) = softmax_cross_entropy(logits.data(), net.classes(), labels)?;
    let input_grad = net.backward(RealTensor4::from_vec(logits.shape(), g)?)?;

    // (layer index, kind, param name, analytic gradient)
    let mut analytic: Vec<(usize, &'static str, String, Vec<f64>)> = Vec::new();
    for (i, layer) in net.layers.iter_mut().enumerate() {
        let kind = layer.kind();
        let scale = match opts.corrupt_layer {
            Some((c, s)) if c == i => s,
            _ => 1.0,
        };
        layer.visit_params(&mut |p| {
            analytic.push((i, kind, p.name, p.grad.iter().map(|g| g * scale).collect()));
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut reports: Vec<LayerGradReport> = Vec::new();
    let h = opts.step;
    for (t, (li, kind, pname, grad)) in analytic.iter().enumerate() {
        let picks = entries(grad.len(), opts.max_per_tensor, &mut rng);
        let mut worst = (0.0f64, String::new());
        let mut kinks = 0;
        for &e in &picks {
            let orig = param_get(net, t, e);
            let numeric = central(
                |d| {
                    param_set(net, t, e, orig + d);
                    loss_of(net, x, labels)
                },
                base,
                h,
                opts.min_step,
            );
            param_set(net, t, e, orig);
            let Some(numeric) = numeric? else {
                kinks += 1;
                continue;
            };
            let err = crate::reference::grad_rel_error(grad[e], numeric, opts.floor);
            if err > worst.0 || worst.1.is_empty() {
                worst = (err, format!("{pname}[{e}]: analytic {:.6e}, numeric {numeric:.6e}", grad[e]));
            }
        }
        match reports.iter_mut().find(|r| r.index == Some(*li)) {
            Some(r) => {
                r.checked += picks.len();
                r.kinks += kinks;
                if worst.0 > r.max_rel_error {
                    r.max_rel_error = worst.0;
                    r.worst = worst.1;
                }
            }
            None => reports.push(LayerGradReport {
                index: Some(*li),
                kind: kind.to_string(),
                checked: picks.len(),
                kinks,
                max_rel_error: worst.0,
                worst: worst.1,
            }),
        }
    }

    if opts.check_input {
        let picks = entries(x.len(), opts.max_per_tensor, &mut rng);
        let mut xs = x.clone();
        let mut worst = (0.0f64, String::new());
        let mut kinks = 0;
        for &e in &picks {
            let orig = xs.data()[e];
            let numeric = central(
                |d| {
                    xs.data_mut()[e] = orig + d;
                    loss_of(net, &xs, labels)
                },
                base,
                h,
                opts.min_step,
            );
            xs.data_mut()[e] = orig;
            let Some(numeric) = numeric? else {
                kinks += 1;
                continue;
            };
            let a = input_grad.data()[e];
            let err = crate::reference::grad_rel_error(a, numeric, opts.floor);
            if err > worst.0 || worst.1.is_empty() {
                worst = (err, format!("input[{e}]: analytic {a:.6e}, numeric {numeric:.6e}"));
            }
        }
        reports.push(LayerGradReport {
            index: None,
            kind: "input".into(),
            checked: picks.len(),
            kinks,
            max_rel_error: worst.0,
            worst: worst.1,
        });
    }

    let mut it = buffers.into_iter();
    net.visit_buffers(&mut |_, b| {
        if let Some(saved) = it.next() {
            b.copy_from_slice(&saved);
        }
    });
    net.clear_cache();
    Ok(GradcheckReport {
        tolerance: opts.tolerance,
        max_kink_fraction: opts.max_kink_fraction,
        layers: reports,
    })
}

fn with_param<R>(net: &mut Network<f64>, tensor: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    let mut f = Some(f);
    let mut out = None;
    let mut t = 0;
    net.visit_params(&mut |p| {
        if t == tensor {
            out = Some((f.take().expect("visited once"))(p.value));
        }
        t += 1;
    });
    out.expect("tensor index in range")
}

fn param_get(net: &mut Network<f64>, tensor: usize, e: usize) -> f64 {
    with_param(net, tensor, |v| v[e])
}

fn param_set(net: &mut Network<f64>, tensor: usize, e: usize, value: f64) {
    with_param(net, tensor, |v| v[e] = value)
}
