use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::layers::{Dense, ForwardCtx, ParamView, ReluMask};
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor4, RealTensor4, Shape4};

/// Classifier for a frequency-domain feature map. The real and imaginary
/// planes are flattened row-major (H, then W, then C) and run through their
/// own dense stacks (ReLU after every layer); the two feature vectors are
/// concatenated real-then-imaginary and fed to one final dense layer.
#[derive(Debug, Clone)]
pub struct TwoBranchHead<T> {
    pub branch_re: Vec<Dense<T>>,
    pub branch_im: Vec<Dense<T>>,
    pub output: Dense<T>,
    cache: Option<HeadCache>,
}

#[derive(Debug, Clone)]
struct HeadCache {
    shape: Shape4,
    masks_re: Vec<ReluMask>,
    masks_im: Vec<ReluMask>,
}

fn branch_width<T: Scalar>(stack: &[Dense<T>], features: usize) -> usize {
    stack.last().map_or(features, |d| d.units())
}

impl<T: Scalar> TwoBranchHead<T> {
    pub fn new(features: usize, hidden: &[usize], classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let stack = |rng: &mut ChaCha8Rng| {
            let mut fan_in = features;
            hidden
                .iter()
                .map(|&u| {
                    let d = Dense::new(fan_in, u, rng);
                    fan_in = u;
                    d
                })
                .collect::<Vec<_>>()
        };
        let branch_re = stack(rng);
        let branch_im = stack(rng);
        let width = hidden.last().copied().unwrap_or(features);
        let output = Dense::new(2 * width, classes, rng);
        Self::from_layers(features, branch_re, branch_im, output).expect("consistent dims")
    }

    pub fn from_layers(
        features: usize,
        branch_re: Vec<Dense<T>>,
        branch_im: Vec<Dense<T>>,
        output: Dense<T>,
    ) -> Result<Self> {
        for stack in [&branch_re, &branch_im] {
            let mut fan_in = features;
            for d in stack.iter() {
                check_dim("head dense input", fan_in, d.fan_in())?;
                fan_in = d.units();
            }
        }
        let (wr, wi) = (branch_width(&branch_re, features), branch_width(&branch_im, features));
        check_dim("head final input", wr + wi, output.fan_in())?;
        Ok(Self {
            branch_re,
            branch_im,
            output,
            cache: None,
        })
    }

    pub fn features(&self) -> usize {
        self.branch_re.first().map_or(self.output.fan_in() / 2, |d| d.fan_in())
    }

    pub fn classes(&self) -> usize {
        self.output.units()
    }

    fn run_branch(
        stack: &mut [Dense<T>],
        batch: usize,
        x: &[T],
        training: bool,
    ) -> Result<(Vec<T>, Vec<ReluMask>)> {
        let mut h = x.to_vec();
        let mut masks = Vec::with_capacity(stack.len());
        for d in stack.iter_mut() {
            h = d.forward_rows(batch, &h, training)?;
            let mask = ReluMask::of(&h);
            mask.apply(&mut h)?;
            masks.push(mask);
        }
        Ok((h, masks))
    }

    fn back_branch(stack: &mut [Dense<T>], masks: &[ReluMask], mut g: Vec<T>) -> Result<Vec<T>> {
        for (d, mask) in stack.iter_mut().zip(masks).rev() {
            mask.apply(&mut g)?;
            g = d.backward_rows(&g)?;
        }
        Ok(g)
    }

    pub fn forward(&mut self, x: ComplexTensor4<T>, ctx: &ForwardCtx) -> Result<RealTensor4<T>> {
        let [b, h, w, c] = x.shape();
        let features = h * w * c;
        check_dim("head features", self.features(), features)?;
        let training = ctx.training();
        let (fr, masks_re) = Self::run_branch(&mut self.branch_re, b, x.re.data(), training)?;
        let (fi, masks_im) = Self::run_branch(&mut self.branch_im, b, x.im.data(), training)?;
        let (wr, wi) = (fr.len() / b, fi.len() / b);
        let mut cat = Vec::with_capacity(b * (wr + wi));
        for i in 0..b {
            cat.extend_from_slice(&fr[i * wr..(i + 1) * wr]);
            cat.extend_from_slice(&fi[i * wi..(i + 1) * wi]);
        }
        let logits = self.output.forward_rows(b, &cat, training)?;
        if training {
            self.cache = Some(HeadCache {
                shape: x.shape(),
                masks_re,
                masks_im,
            });
        }
        RealTensor4::from_vec([b, 1, 1, self.classes()], logits)
    }

    pub fn backward(&mut self, g: RealTensor4<T>) -> Result<ComplexTensor4<T>> {
        let cache = self.cache.take().ok_or(Error::MissingCache("flatten_head"))?;
        let b = cache.shape[0];
        let features = cache.shape[1] * cache.shape[2] * cache.shape[3];
        let gcat = self.output.backward_rows(g.data())?;
        let wr = branch_width(&self.branch_re, features);
        let wi = branch_width(&self.branch_im, features);
        let mut gr = Vec::with_capacity(b * wr);
        let mut gi = Vec::with_capacity(b * wi);
        for row in gcat.chunks(wr + wi) {
            gr.extend_from_slice(&row[..wr]);
            gi.extend_from_slice(&row[wr..]);
        }
        let gr = Self::back_branch(&mut self.branch_re, &cache.masks_re, gr)?;
        let gi = Self::back_branch(&mut self.branch_im, &cache.masks_im, gi)?;
        let out = ComplexTensor4::from_parts(
            RealTensor4::from_vec(cache.shape, gr)?,
            RealTensor4::from_vec(cache.shape, gi)?,
        );
        self.cache = Some(cache);
        out
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView<'_, T>)) {
        for (i, d) in self.branch_re.iter_mut().enumerate() {
            d.visit_params(f, &format!("re.{i}."));
        }
        for (i, d) in self.branch_im.iter_mut().enumerate() {
            d.visit_params(f, &format!("im.{i}."));
        }
        self.output.visit_params(f, "out.");
    }

    /// Branch ReLU masks of the last training forward pass.
    pub fn pattern(&self) -> Option<(&[ReluMask], &[ReluMask])> {
        self.cache.as_ref().map(|c| (c.masks_re.as_slice(), c.masks_im.as_slice()))
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
        self.branch_re.iter_mut().for_each(Dense::clear_cache);
        self.branch_im.iter_mut().for_each(Dense::clear_cache);
        self.output.clear_cache();
    }
}
