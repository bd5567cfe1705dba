//! Layer kernels with explicit forward and backward passes.

mod conv;
mod dense;
mod dropout;
mod gru;
mod pool;
mod window;

pub use conv::{ConvCache, ConvLayer};
pub use dense::{dense_forward, DenseLayer};
pub use dropout::{dropout, dropout_backward, Mode};
pub use gru::{GruCache, GruLayer, GRU_PARAM_NAMES};
pub use pool::{global_maxpool, global_maxpool_backward, maxpool1d, maxpool1d_backward, pooled_len, PoolCache};
pub use window::{gapped_window_shapes, WindowShape};

use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Gradients for one layer: one tensor per parameter (in the layer's
/// `params()` order) plus the gradient with respect to the layer input.
#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

/// Uniform `[-L, L)` with `L = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rng: &mut RngStream, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = rng
        .uniform(-limit, limit, n)
        .expect("positive fan sizes give a non-empty range")
        .into_data();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}
