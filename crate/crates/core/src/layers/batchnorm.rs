use crate::error::{check_dim, Error, Result};
use crate::layers::{ForwardCtx, ParamView};
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor4, RealTensor4};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

/// Batch normalization of one real plane: per-channel statistics over
/// (batch, height, width), biased in-batch variance, running statistics as
/// an exponential moving average.
#[derive(Debug, Clone)]
pub struct BatchNormCore<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: T,
    pub momentum: T,
    grad_gamma: Vec<T>,
    grad_beta: Vec<T>,
    cache: Option<(RealTensor4<T>, Vec<T>)>,
}

impl<T: Scalar> BatchNormCore<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            eps: T::of(DEFAULT_EPS),
            momentum: T::of(DEFAULT_MOMENTUM),
            grad_gamma: vec![T::zero(); channels],
            grad_beta: vec![T::zero(); channels],
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Per-channel batch mean and biased variance.
    pub fn batch_stats(x: &RealTensor4<T>) -> (Vec<f64>, Vec<f64>) {
        let c = x.channels();
        let n = (x.len() / c) as f64;
        let mut mean = vec![0.0f64; c];
        for row in x.data().chunks(c) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; c];
        for row in x.data().chunks(c) {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v.as_f64() - m).powi(2);
            }
        }
        var.iter_mut().for_each(|s| *s /= n);
        (mean, var)
    }

    pub fn forward(&mut self, x: &RealTensor4<T>, ctx: &ForwardCtx) -> Result<RealTensor4<T>> {
        let c = self.channels();
        check_dim("batchnorm channels", c, x.channels())?;
        if !ctx.training() {
            let mut y = x.clone();
            let scale: Vec<T> = (0..c)
                .map(|i| self.gamma[i] / (self.running_var[i] + self.eps).sqrt())
                .collect();
            for row in y.data_mut().chunks_mut(c) {
                for i in 0..c {
                    row[i] = (row[i] - self.running_mean[i]) * scale[i] + self.beta[i];
                }
            }
            return Ok(y);
        }
        if x.batch() < 2 {
            return Err(Error::invalid(
                "batch normalization in training mode needs a batch of at least 2",
            ));
        }
        let (mean, var) = Self::batch_stats(x);
        let inv_std: Vec<T> = var.iter().map(|&v| T::of(1.0 / (v + self.eps.as_f64()).sqrt())).collect();
        let mean_t: Vec<T> = mean.iter().map(|&m| T::of(m)).collect();
        let mut xhat = x.clone();
        for row in xhat.data_mut().chunks_mut(c) {
            for i in 0..c {
                row[i] = (row[i] - mean_t[i]) * inv_std[i];
            }
        }
        let mut y = xhat.clone();
        for row in y.data_mut().chunks_mut(c) {
            for i in 0..c {
                row[i] = self.gamma[i] * row[i] + self.beta[i];
            }
        }
        let keep = self.momentum;
        let take = T::one() - keep;
        for i in 0..c {
            self.running_mean[i] = keep * self.running_mean[i] + take * mean_t[i];
            self.running_var[i] = (keep * self.running_var[i] + take * T::of(var[i])).max(T::zero());
        }
        self.cache = Some((xhat, inv_std));
        Ok(y)
    }

    pub fn backward(&mut self, g: &RealTensor4<T>) -> Result<RealTensor4<T>> {
        let (xhat, inv_std) = self.cache.as_ref().ok_or(Error::MissingCache("batchnorm"))?;
        let c = self.channels();
        check_dim("batchnorm grad", xhat.len(), g.len())?;
        let n = T::of((g.len() / c) as f64);
        let mut sum_g = vec![T::zero(); c];
        let mut sum_gx = vec![T::zero(); c];
        for (grow, xrow) in g.data().chunks(c).zip(xhat.data().chunks(c)) {
            for i in 0..c {
                sum_g[i] = sum_g[i] + grow[i];
                sum_gx[i] = sum_gx[i] + grow[i] * xrow[i];
            }
        }
        for i in 0..c {
            self.grad_beta[i] = self.grad_beta[i] + sum_g[i];
            self.grad_gamma[i] = self.grad_gamma[i] + sum_gx[i];
        }
        let mut gx = g.clone();
        for (grow, xrow) in gx.data_mut().chunks_mut(c).zip(xhat.data().chunks(c)) {
            for i in 0..c {
                let scale = self.gamma[i] * inv_std[i];
                grow[i] = scale * (grow[i] - sum_g[i] / n - xrow[i] * sum_gx[i] / n);
            }
        }
        Ok(gx)
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView<'_, T>), suffix: &str) {
        f(ParamView {
            name: format!("gamma{suffix}"),
            value: &mut self.gamma,
            grad: &mut self.grad_gamma,
        });
        f(ParamView {
            name: format!("beta{suffix}"),
            value: &mut self.beta,
            grad: &mut self.grad_beta,
        });
    }

    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(String, &mut [T]), suffix: &str) {
        f(format!("running_mean{suffix}"), &mut self.running_mean);
        f(format!("running_var{suffix}"), &mut self.running_var);
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Time-domain batch normalization.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub core: BatchNormCore<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            core: BatchNormCore::new(channels),
        }
    }

    pub fn forward(&mut self, x: RealTensor4<T>, ctx: &ForwardCtx) -> Result<RealTensor4<T>> {
        self.core.forward(&x, ctx)
    }

    pub fn backward(&mut self, g: RealTensor4<T>) -> Result<RealTensor4<T>> {
        self.core.backward(&g)
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView<'_, T>)) {
        self.core.visit_params(f, "");
    }

    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(String, &mut [T])) {
        self.core.visit_buffers(f, "");
    }
}

/// Frequency-domain batch normalization: an independent [`BatchNormCore`]
/// on each branch, each with its own per-channel scale and shift.
#[derive(Debug, Clone)]
pub struct FreqBatchNorm<T> {
    pub re: BatchNormCore<T>,
    pub im: BatchNormCore<T>,
}

impl<T: Scalar> FreqBatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            re: BatchNormCore::new(channels),
            im: BatchNormCore::new(channels),
        }
    }

    pub fn forward(&mut self, x: ComplexTensor4<T>, ctx: &ForwardCtx) -> Result<ComplexTensor4<T>> {
        Ok(ComplexTensor4 {
            re: self.re.forward(&x.re, ctx)?,
            im: self.im.forward(&x.im, ctx)?,
        })
    }

    pub fn backward(&mut self, g: ComplexTensor4<T>) -> Result<ComplexTensor4<T>> {
        Ok(ComplexTensor4 {
            re: self.re.backward(&g.re)?,
            im: self.im.backward(&g.im)?,
        })
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView<'_, T>)) {
        self.re.visit_params(f, ".re");
        self.im.visit_params(f, ".im");
    }

    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(String, &mut [T])) {
        self.re.visit_buffers(f, ".re");
        self.im.visit_buffers(f, ".im");
    }
}
