use crate::error::{Error, Result};
use crate::layers::{glorot_uniform, LayerGrads};
use crate::rng::RngStream;
use crate::tensor::{matvec_acc, outer_acc, vecmat_into, Tensor};

/// Fully connected layer producing logits; softmax lives in the model head.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.rank() != 2 || bias.rank() != 1 || weights.cols() != bias.len() {
            return Err(Error::shape(format!(
                "dense: weights {:?} / bias {:?}",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn init(in_dim: usize, out_dim: usize, rng: &mut RngStream) -> Self {
        DenseLayer {
            weights: glorot_uniform(rng, &[in_dim, out_dim], in_dim, out_dim),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.weights, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights, &mut self.bias]
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        dense_forward(input, &self.weights, &self.bias)
    }

    pub fn backward(&self, input: &Tensor, upstream: &Tensor) -> Result<LayerGrads> {
        input.expect_shape(&[self.in_dim()], "dense input")?;
        upstream.expect_shape(&[self.out_dim()], "dense upstream")?;
        let mut dw = Tensor::zeros(self.weights.shape());
        outer_acc(&mut dw, input.data(), upstream.data());
        let mut dx = vec![0.0; self.in_dim()];
        matvec_acc(&self.weights, upstream.data(), &mut dx);
        Ok(LayerGrads {
            params: vec![dw, upstream.clone()],
            input: Tensor::vector(dx),
        })
    }
}

/// `input · weights + bias`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if input.rank() != 1 || weights.rank() != 2 || input.len() != weights.rows() || bias.len() != weights.cols() {
        return Err(Error::shape(format!(
            "dense: input {:?}, weights {:?}, bias {:?}",
            input.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    let mut out = bias.data().to_vec();
    vecmat_into(input.data(), weights, &mut out);
    Ok(Tensor::vector(out))
}
