use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout. Returns the output and, in training mode, the
/// per-element scale (`0` or `1 / (1 − ratio)`) for the backward pass.
pub fn dropout(input: &Tensor, ratio: f64, mode: Mode, rng: &mut RngStream) -> Result<(Tensor, Option<Tensor>)> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::arg(format!("dropout ratio {ratio} outside [0, 1)")));
    }
    if mode == Mode::Eval || ratio == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - ratio);
    let mask: Vec<f64> = (0..input.len())
        .map(|_| if rng.next_f64() < ratio { 0.0 } else { keep })
        .collect();
    let mask = Tensor::new(input.shape().to_vec(), mask)?;
    let out = Tensor::new(
        input.shape().to_vec(),
        input.data().iter().zip(mask.data()).map(|(x, m)| x * m).collect(),
    )?;
    Ok((out, Some(mask)))
}

pub fn dropout_backward(upstream: &Tensor, mask: Option<&Tensor>) -> Result<Tensor> {
    match mask {
        None => Ok(upstream.clone()),
        Some(m) => {
            if m.shape() != upstream.shape() {
                return Err(Error::shape(format!(
                    "dropout backward: mask {:?} vs upstream {:?}",
                    m.shape(),
                    upstream.shape()
                )));
            }
            Tensor::new(
                upstream.shape().to_vec(),
                upstream.data().iter().zip(m.data()).map(|(g, s)| g * s).collect(),
            )
        }
    }
}
