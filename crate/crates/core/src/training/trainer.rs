use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{batches, Dataset, Split};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::models::{NamedTensor, Network};
use crate::scalar::Scalar;
use crate::tensor::RealTensor4;
use crate::training::loss::{argmax_rows, softmax_cross_entropy};
use crate::training::optim::{LrSchedule, Optimizer, OptimizerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub lr_boundaries: Vec<(usize, f64)>,
    /// Evaluate on the test set every this many epochs (and after the last).
    #[serde(default = "one")]
    pub eval_every: usize,
    #[serde(default = "default_eval_batch")]
    pub eval_batch_size: usize,
    /// Stop after this many optimizer steps (whole run), if set.
    #[serde(default)]
    pub max_steps: Option<u64>,
    /// Measure EML support leakage every this many steps (0 disables).
    #[serde(default = "default_fixation_check")]
    pub fixation_check_every: u64,
}

fn one() -> usize {
    1
}

fn default_eval_batch() -> usize {
    500
}

fn default_fixation_check() -> u64 {
    100
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize, seed: u64, optimizer: OptimizerConfig) -> Self {
        Self {
            epochs,
            batch_size,
            seed,
            optimizer,
            lr_boundaries: vec![],
            eval_every: 1,
            eval_batch_size: default_eval_batch(),
            max_steps: None,
            fixation_check_every: default_fixation_check(),
        }
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            base: self.optimizer.learning_rate,
            boundaries: self.lr_boundaries.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::invalid("batch size must be at least 2 (batch normalization)"));
        }
        if self.eval_every == 0 || self.eval_batch_size == 0 {
            return Err(Error::invalid("eval_every and eval_batch_size must be positive"));
        }
        Ok(())
    }
}

/// One line of the metrics file.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub epoch: usize,
    pub step: u64,
    pub split: &'static str,
    pub loss: f64,
    pub error: f64,
    pub lr: f64,
    pub seconds: Option<f64>,
}

pub const METRICS_HEADER: &str = "epoch,step,split,loss,error,lr,seconds";

impl MetricRow {
    pub fn to_csv(&self) -> String {
        let secs = self.seconds.map(|s| format!("{s:.3}")).unwrap_or_default();
        format!(
            "{},{},{},{:.8},{:.6},{:e},{secs}",
            self.epoch, self.step, self.split, self.loss, self.error, self.lr
        )
    }
}

/// Append-only metrics CSV.
pub struct MetricsWriter {
    file: std::fs::File,
    path: std::path::PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(file, "{METRICS_HEADER}").map_err(|e| Error::io(path, e))?;
        Ok(Self {
            file,
            path: path.into(),
        })
    }

    pub fn write(&mut self, row: &MetricRow) -> Result<()> {
        writeln!(self.file, "{}", row.to_csv()).map_err(|e| Error::io(&self.path, e))?;
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub step: u64,
    pub lr: f64,
    pub train_loss: f64,
    pub train_error: f64,
    pub test: Option<EvalResult>,
    pub seconds: f64,
}

impl EpochRecord {
    /// Rows for the metrics file; `with_time` fills the seconds column.
    pub fn rows(&self, with_time: bool) -> Vec<MetricRow> {
        let seconds = with_time.then_some(self.seconds);
        let mut out = vec![MetricRow {
            epoch: self.epoch,
            step: self.step,
            split: "train",
            loss: self.train_loss,
            error: self.train_error,
            lr: self.lr,
            seconds,
        }];
        if let Some(t) = &self.test {
            out.push(MetricRow {
                epoch: self.epoch,
                step: self.step,
                split: "test",
                loss: t.loss,
                error: t.error,
                lr: self.lr,
                seconds,
            });
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub epoch: usize,
    pub step: u64,
    pub loss: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub steps: u64,
    /// Largest EML support leakage seen at the periodic spot checks.
    pub max_fixation_leakage: f64,
    /// Set when training stopped on a non-finite loss or gradient; the
    /// network then holds the state from the end of the last good epoch.
    pub diverged: Option<Divergence>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub loss: f64,
    pub error: f64,
    pub samples: usize,
}

/// Mean loss and top-1 error in inference mode.
pub fn evaluate<T: Scalar>(net: &mut Network<T>, ds: &Dataset, batch_size: usize) -> Result<EvalResult> {
    if ds.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let (mut loss, mut wrong) = (0.0, 0usize);
    for rows in batches(ds.len(), batch_size, 0, 0, Split::Test)? {
        let (x, labels) = ds.batch::<T>(&rows);
        let logits = net.forward(&x, Mode::Eval, 0)?;
        let (l, _) = softmax_cross_entropy(logits.data(), net.classes(), &labels)?;
        loss += l * rows.len() as f64;
        let pred = argmax_rows(logits.data(), net.classes());
        wrong += pred.iter().zip(&labels).filter(|(p, l)| p != l).count();
    }
    Ok(EvalResult {
        loss: loss / ds.len() as f64,
        error: wrong as f64 / ds.len() as f64,
        samples: ds.len(),
    })
}

/// Forward, loss, backward, optimizer update and weight fixation for one
/// batch. Returns the batch loss and number of misclassified samples.
pub fn train_step<T: Scalar>(
    net: &mut Network<T>,
    opt: &mut Optimizer<T>,
    x: &RealTensor4<T>,
    labels: &[usize],
    step: u64,
    lr: f64,
) -> Result<(f64, usize)> {
    net.zero_grad();
    let logits = net.forward(x, Mode::Train, step)?;
    let (loss, g) = softmax_cross_entropy(logits.data(), net.classes(), labels)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { epoch: 0, step, loss });
    }
    let wrong = argmax_rows(logits.data(), net.classes())
        .iter()
        .zip(labels)
        .filter(|(p, l)| p != l)
        .count();
    net.backward(RealTensor4::from_vec(logits.shape(), g)?)?;
    opt.step(net, lr)?;
    // With lr = 0 nothing moved, and re-projecting would only add round-off.
    if lr != 0.0 {
        net.apply_weight_fixation()?;
    }
    net.clear_cache();
    Ok((loss, wrong))
}

fn snapshot<T: Scalar>(net: &mut Network<T>, opt: &Optimizer<T>) -> (Vec<NamedTensor<T>>, Vec<NamedTensor<T>>) {
    (net.state_tensors(), opt.state_tensors())
}

/// Train for `cfg.epochs` epochs. `on_epoch` runs after every epoch (for
/// metrics and checkpoints); an error from it aborts training.
pub fn train<T: Scalar>(
    net: &mut Network<T>,
    opt: &mut Optimizer<T>,
    train_ds: &Dataset,
    test_ds: Option<&Dataset>,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord, &mut Network<T>, &Optimizer<T>) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    let schedule = cfg.schedule();
    let mut report = TrainReport::default();
    let mut step: u64 = 0;
    let mut last_good = snapshot(net, opt);
    'epochs: for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = schedule.at(epoch);
        let (mut loss_sum, mut wrong, mut seen) = (0.0, 0usize, 0usize);
        for rows in batches(train_ds.len(), cfg.batch_size, cfg.seed, epoch as u64, Split::Train)? {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break;
            }
            let (x, labels) = train_ds.batch::<T>(&rows);
            match train_step(net, opt, &x, &labels, step, lr) {
                Ok((loss, w)) => {
                    loss_sum += loss * rows.len() as f64;
                    wrong += w;
                    seen += rows.len();
                }
                Err(e @ (Error::Diverged { .. } | Error::NonFiniteGradient(_))) => {
                    let loss = match &e {
                        Error::Diverged { loss, .. } => *loss,
                        _ => f64::NAN,
                    };
                    net.load_state(&last_good.0)?;
                    opt.load_state(&last_good.1);
                    net.clear_cache();
                    report.diverged = Some(Divergence {
                        epoch: epoch + 1,
                        step,
                        loss,
                        reason: e.to_string(),
                    });
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
            step += 1;
            if cfg.fixation_check_every > 0 && step % cfg.fixation_check_every == 0 {
                for (_, leak) in net.eml_outside_energy()? {
                    report.max_fixation_leakage = report.max_fixation_leakage.max(leak);
                }
            }
        }
        let is_last = epoch + 1 == cfg.epochs || cfg.max_steps.is_some_and(|m| step >= m);
        let test = match test_ds {
            Some(ds) if (epoch + 1) % cfg.eval_every == 0 || is_last => Some(evaluate(net, ds, cfg.eval_batch_size)?),
            _ => None,
        };
        let seen = seen.max(1) as f64;
        let record = EpochRecord {
            epoch: epoch + 1,
            step,
            lr,
            train_loss: loss_sum / seen,
            train_error: wrong as f64 / seen,
            test,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record, net, opt)?;
        report.history.push(record);
        last_good = snapshot(net, opt);
        if is_last {
            break;
        }
    }
    report.steps = step;
    Ok(report)
}
