use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Max pooling over time, per channel. `argmax[q * F + c]` is the input
/// row that won output row `q`, channel `c`.
#[derive(Clone, Debug)]
pub struct PoolCache {
    pub input_rows: usize,
    pub argmax: Vec<usize>,
}

pub fn pooled_len(t: usize, pool: usize, stride: usize) -> Option<usize> {
    (t >= pool && pool > 0 && stride > 0).then(|| (t - pool) / stride + 1)
}

/// Valid max pooling; ties go to the lowest index.
pub fn maxpool1d(input: &Tensor, pool: usize, stride: usize) -> Result<(Tensor, PoolCache)> {
    if input.rank() != 2 {
        return Err(Error::shape(format!("maxpool1d: expected [T, F], got {:?}", input.shape())));
    }
    let (t, f) = (input.rows(), input.cols());
    let out_len = pooled_len(t, pool, stride).ok_or_else(|| {
        Error::shape(format!("maxpool1d: length {t} shorter than pool {pool}"))
    })?;
    let mut out = Tensor::zeros(&[out_len, f]);
    let mut argmax = vec![0usize; out_len * f];
    for q in 0..out_len {
        let start = q * stride;
        for c in 0..f {
            let mut best = start;
            let mut best_v = input.get2(start, c);
            for r in start + 1..start + pool {
                let v = input.get2(r, c);
                if v > best_v {
                    best_v = v;
                    best = r;
                }
            }
            out.set2(q, c, best_v);
            argmax[q * f + c] = best;
        }
    }
    Ok((out, PoolCache { input_rows: t, argmax }))
}

/// Scatters `upstream` back onto the winning input positions.
pub fn maxpool1d_backward(upstream: &Tensor, cache: &PoolCache) -> Result<Tensor> {
    if upstream.rank() != 2 || upstream.len() != cache.argmax.len() {
        return Err(Error::shape(format!(
            "maxpool backward: upstream {:?} does not match cached output of {} values",
            upstream.shape(),
            cache.argmax.len()
        )));
    }
    let f = upstream.cols();
    let mut d = Tensor::zeros(&[cache.input_rows, f]);
    for (k, (&src, &g)) in cache.argmax.iter().zip(upstream.data()).enumerate() {
        let c = k % f;
        d.data_mut()[src * f + c] += g;
    }
    Ok(d)
}

/// Per-feature maximum over all timesteps.
pub fn global_maxpool(input: &Tensor) -> Result<(Tensor, PoolCache)> {
    if input.rank() != 2 || input.rows() == 0 {
        return Err(Error::shape(format!(
            "global_maxpool: need at least one timestep, got {:?}",
            input.shape()
        )));
    }
    let (out, cache) = maxpool1d(input, input.rows(), 1)?;
    Ok((out.reshape(vec![input.cols()])?, cache))
}

pub fn global_maxpool_backward(upstream: &Tensor, cache: &PoolCache) -> Result<Tensor> {
    let f = upstream.len();
    let up = upstream.clone().reshape(vec![1, f])?;
    maxpool1d_backward(&up, cache)
}
