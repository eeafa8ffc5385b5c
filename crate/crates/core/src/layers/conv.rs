use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::layers::{glorot_uniform, ForwardCtx, ParamView};
use crate::reference::same_padding;
use crate::scalar::{mat, Scalar};
use crate::tensor::RealTensor4;

/// Time-domain convolution (CNN cross-correlation convention) with `same`
/// zero padding. Kernel layout is [K, K, Cin, Cout].
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    k: usize,
    cin: usize,
    cout: usize,
    stride: usize,
    pub kernel: RealTensor4<T>,
    pub bias: Vec<T>,
    grad_kernel: Vec<T>,
    grad_bias: Vec<T>,
    input: Option<RealTensor4<T>>,
}

struct Geometry {
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    pad_top: usize,
    pad_left: usize,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(k: usize, cin: usize, cout: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = k * k * cin * cout;
        let data = glorot_uniform(n, k * k * cin, k * k * cout, rng);
        let kernel = RealTensor4::from_vec([k, k, cin, cout], data).expect("sizes agree");
        Self::from_kernel(kernel, vec![T::zero(); cout], stride).expect("sizes agree")
    }

    pub fn from_kernel(kernel: RealTensor4<T>, bias: Vec<T>, stride: usize) -> Result<Self> {
        let [k, kw, cin, cout] = kernel.shape();
        check_dim("kernel width", k, kw)?;
        check_dim("bias", cout, bias.len())?;
        if stride == 0 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        Ok(Self {
            k,
            cin,
            cout,
            stride,
            grad_kernel: vec![T::zero(); kernel.len()],
            grad_bias: vec![T::zero(); cout],
            kernel,
            bias,
            input: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn out_channels(&self) -> usize {
        self.cout
    }

    fn geometry(&self, h: usize, w: usize) -> Geometry {
        let (ho, pad_top) = same_padding(h, self.k, self.stride);
        let (wo, pad_left) = same_padding(w, self.k, self.stride);
        Geometry {
            h,
            w,
            ho,
            wo,
            pad_top,
            pad_left,
        }
    }

    fn im2col(&self, g: &Geometry, x: &[T], col: &mut [T]) {
        let (k, cin) = (self.k, self.cin);
        let row_len = k * k * cin;
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let row = &mut col[(oy * g.wo + ox) * row_len..][..row_len];
                for ky in 0..k {
                    let iy = (oy * self.stride + ky) as isize - g.pad_top as isize;
                    for kx in 0..k {
                        let ix = (ox * self.stride + kx) as isize - g.pad_left as isize;
                        let dst = &mut row[(ky * k + kx) * cin..][..cin];
                        if iy >= 0 && iy < g.h as isize && ix >= 0 && ix < g.w as isize {
                            let src = ((iy as usize) * g.w + ix as usize) * cin;
                            dst.copy_from_slice(&x[src..src + cin]);
                        } else {
                            dst.fill(T::zero());
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, g: &Geometry, col: &[T], gx: &mut [T]) {
        let (k, cin) = (self.k, self.cin);
        let row_len = k * k * cin;
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let row = &col[(oy * g.wo + ox) * row_len..][..row_len];
                for ky in 0..k {
                    let iy = (oy * self.stride + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * self.stride + kx) as isize - g.pad_left as isize;
                        if ix < 0 || ix >= g.w as isize {
                            continue;
                        }
                        let dst = ((iy as usize) * g.w + ix as usize) * cin;
                        let src = &row[(ky * k + kx) * cin..][..cin];
                        for (d, &s) in gx[dst..dst + cin].iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&mut self, x: RealTensor4<T>, ctx: &ForwardCtx) -> Result<RealTensor4<T>> {
        let [b, h, w, cin] = x.shape();
        check_dim("conv input channels", self.cin, cin)?;
        let g = self.geometry(h, w);
        let row_len = self.k * self.k * self.cin;
        let mut out = RealTensor4::zeros([b, g.ho, g.wo, self.cout]);
        let block = g.ho * g.wo * self.cout;
        out.data_mut()
            .par_chunks_mut(block)
            .enumerate()
            .for_each(|(bi, dst)| {
                let mut col = vec![T::zero(); g.ho * g.wo * row_len];
                self.im2col(&g, x.outer(bi), &mut col);
                for row in dst.chunks_mut(self.cout) {
                    row.copy_from_slice(&self.bias);
                }
                mat::matmul(g.ho * g.wo, row_len, self.cout, &col, self.kernel.data(), T::one(), dst);
            });
        if ctx.training() {
            self.input = Some(x);
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad: RealTensor4<T>) -> Result<RealTensor4<T>> {
        let x = self.input.take().ok_or(Error::MissingCache("conv"))?;
        let [b, h, w, _] = x.shape();
        let g = self.geometry(h, w);
        check_dim("conv grad height", g.ho, grad.height())?;
        check_dim("conv grad width", g.wo, grad.width())?;
        check_dim("conv grad channels", self.cout, grad.channels())?;
        let row_len = self.k * self.k * self.cin;
        let npos = g.ho * g.wo;
        let mut gx = RealTensor4::zeros(x.shape());
        let mut col = vec![T::zero(); npos * row_len];
        let mut gcol = vec![T::zero(); npos * row_len];
        // Samples in fixed order so kernel-gradient accumulation is reproducible.
        for bi in 0..b {
            let gb = grad.outer(bi);
            self.im2col(&g, x.outer(bi), &mut col);
            mat::matmul_at(row_len, npos, self.cout, &col, gb, T::one(), &mut self.grad_kernel);
            for row in gb.chunks(self.cout) {
                for (acc, &v) in self.grad_bias.iter_mut().zip(row) {
                    *acc = *acc + v;
                }
            }
            mat::matmul_bt(npos, self.cout, row_len, gb, self.kernel.data(), T::zero(), &mut gcol);
            self.col2im(&g, &gcol, gx.outer_mut(bi));
        }
        self.input = Some(x);
        Ok(gx)
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamView<'_, T>)) {
        f(ParamView {
            name: "kernel".into(),
            value: self.kernel.data_mut(),
            grad: &mut self.grad_kernel,
        });
        f(ParamView {
            name: "bias".into(),
            value: &mut self.bias,
            grad: &mut self.grad_bias,
        });
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}

pub fn conv2d_forward<T: Scalar>(x: &RealTensor4<T>, layer: &mut Conv2d<T>) -> Result<RealTensor4<T>> {
    layer.forward(x.clone(), &ForwardCtx::train(0, 0))
}

/// Gradient with respect to the input of the most recent `conv2d_forward`;
/// kernel and bias gradients accumulate inside the layer.
pub fn conv2d_backward<T: Scalar>(grad: &RealTensor4<T>, layer: &mut Conv2d<T>) -> Result<RealTensor4<T>> {
    layer.backward(grad.clone())
}
