use crate::error::{Error, Result};
use crate::layers::{glorot_uniform, LayerGrads, WindowShape};
use crate::rng::RngStream;
use crate::tensor::{dot, Tensor};

/// Stride-1, unpadded 1D convolution with ReLU over a (possibly gapped)
/// window. The kernel holds weights for activated offsets only:
/// `kernel[f][r][c]` multiplies channel `c` at the `r`-th activated offset.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub shape: WindowShape,
    pub kernel: Tensor,
    pub bias: Tensor,
}

/// Pre-activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ConvCache {
    pub preact: Tensor,
}

impl ConvLayer {
    pub fn new(shape: WindowShape, kernel: Tensor, bias: Tensor) -> Result<Self> {
        let f = bias.len();
        let a = shape.active_len();
        if kernel.rank() != 3 || kernel.shape()[0] != f || kernel.shape()[1] != a || bias.rank() != 1 {
            return Err(Error::shape(format!(
                "conv {shape}: kernel {:?} / bias {:?} inconsistent (need [F, {a}, d] and [F])",
                kernel.shape(),
                bias.shape()
            )));
        }
        Ok(ConvLayer { shape, kernel, bias })
    }

    /// Glorot-uniform kernel, zero bias.
    pub fn init(shape: WindowShape, in_dim: usize, filters: usize, rng: &mut RngStream) -> Self {
        let a = shape.active_len();
        let kernel = glorot_uniform(rng, &[filters, a, in_dim], a * in_dim, a * filters);
        ConvLayer {
            shape,
            kernel,
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn filters(&self) -> usize {
        self.bias.len()
    }

    pub fn in_dim(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn output_len(&self, t: usize) -> Option<usize> {
        (t >= self.shape.size()).then(|| t - self.shape.size() + 1)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.kernel, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernel, &mut self.bias]
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        let j = self.shape.size();
        if input.rank() != 2 || input.cols() != self.in_dim() {
            return Err(Error::shape(format!(
                "conv {}: input {:?}, expected [T, {}]",
                self.shape,
                input.shape(),
                self.in_dim()
            )));
        }
        if input.rows() < j {
            return Err(Error::shape(format!(
                "conv {}: sequence length {} shorter than window {j}",
                self.shape,
                input.rows()
            )));
        }
        Ok(input.rows() - j + 1)
    }

    /// Concatenated activated rows for output position `p`.
    fn gather(&self, input: &Tensor, offsets: &[usize], p: usize, buf: &mut Vec<f64>) {
        buf.clear();
        for &o in offsets {
            buf.extend_from_slice(input.row(p + o));
        }
    }

    /// Affine part of the convolution, before ReLU.
    pub fn preactivation(&self, input: &Tensor) -> Result<Tensor> {
        let t_out = self.check_input(input)?;
        let offsets = self.shape.active_offsets();
        let f = self.filters();
        let width = offsets.len() * self.in_dim();
        let kernel = self.kernel.data();
        let bias = self.bias.data();
        let mut out = Tensor::zeros(&[t_out, f]);
        let mut window = Vec::with_capacity(width);
        for p in 0..t_out {
            self.gather(input, &offsets, p, &mut window);
            let row = out.row_mut(p);
            for (fi, o) in row.iter_mut().enumerate() {
                *o = bias[fi] + dot(&kernel[fi * width..(fi + 1) * width], &window);
            }
        }
        Ok(out)
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ConvCache)> {
        let preact = self.preactivation(input)?;
        let out = preact.map(|x| x.max(0.0));
        Ok((out, ConvCache { preact }))
    }

    pub fn backward(&self, input: &Tensor, cache: &ConvCache, upstream: &Tensor) -> Result<LayerGrads> {
        let t_out = self.check_input(input)?;
        let f = self.filters();
        upstream.expect_shape(&[t_out, f], "conv upstream")?;
        cache.preact.expect_shape(&[t_out, f], "conv cache")?;
        let offsets = self.shape.active_offsets();
        let d = self.in_dim();
        let width = offsets.len() * d;
        let kernel = self.kernel.data();

        let mut d_kernel = Tensor::zeros(self.kernel.shape());
        let mut d_bias = Tensor::zeros(&[f]);
        let mut d_input = Tensor::zeros(input.shape());
        let mut window = Vec::with_capacity(width);
        let mut d_window = vec![0.0; width];
        for p in 0..t_out {
            let pre = cache.preact.row(p);
            let up = upstream.row(p);
            let mut gathered = false;
            d_window.iter_mut().for_each(|x| *x = 0.0);
            for fi in 0..f {
                // ReLU sub-gradient is 0 at exactly 0.
                if pre[fi] <= 0.0 || up[fi] == 0.0 {
                    continue;
                }
                let g = up[fi];
                if !gathered {
                    self.gather(input, &offsets, p, &mut window);
                    gathered = true;
                }
                d_bias.data_mut()[fi] += g;
                let dk = &mut d_kernel.data_mut()[fi * width..(fi + 1) * width];
                for (dkv, &w) in dk.iter_mut().zip(&window) {
                    *dkv += g * w;
                }
                for (dw, &k) in d_window.iter_mut().zip(&kernel[fi * width..(fi + 1) * width]) {
                    *dw += g * k;
                }
            }
            if gathered {
                for (r, &o) in offsets.iter().enumerate() {
                    let row = d_input.row_mut(p + o);
                    for (x, &g) in row.iter_mut().zip(&d_window[r * d..(r + 1) * d]) {
                        *x += g;
                    }
                }
            }
        }
        Ok(LayerGrads {
            params: vec![d_kernel, d_bias],
            input: d_input,
        })
    }
}
