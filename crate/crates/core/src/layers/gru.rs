use crate::error::{Error, Result};
use crate::layers::{glorot_uniform, LayerGrads};
use crate::rng::RngStream;
use crate::tensor::{matvec_acc, outer_acc, sigmoid, vecmat_into, Tensor};

/// Gated recurrent unit over a `T × d_in` sequence, returning every hidden
/// state. Gates follow `h_t = (1 − z) ⊙ h_{t−1} + z ⊙ ĥ`, starting from
/// `h_0 = 0`.
#[derive(Clone, Debug)]
pub struct GruLayer {
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub u_z: Tensor,
    pub u_r: Tensor,
    pub u_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
}

/// Per-step gate values saved by the forward pass.
#[derive(Clone, Debug)]
pub struct GruCache {
    /// `h_{t−1}` for each step (row 0 is the zero state).
    pub h_prev: Tensor,
    pub z: Tensor,
    pub r: Tensor,
    pub h_cand: Tensor,
}

pub const GRU_PARAM_NAMES: [&str; 9] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];

impl GruLayer {
    pub fn init(in_dim: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let mut w = || glorot_uniform(rng, &[in_dim, hidden], in_dim, hidden);
        let (w_z, w_r, w_h) = (w(), w(), w());
        let mut u = || glorot_uniform(rng, &[hidden, hidden], hidden, hidden);
        let (u_z, u_r, u_h) = (u(), u(), u());
        let b = || Tensor::zeros(&[hidden]);
        GruLayer {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z: b(),
            b_r: b(),
            b_h: b(),
        }
    }

    pub fn zeros(in_dim: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[in_dim, hidden]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        GruLayer {
            w_z: w(),
            w_r: w(),
            w_h: w(),
            u_z: u(),
            u_r: u(),
            u_h: u(),
            b_z: b(),
            b_r: b(),
            b_h: b(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn hidden(&self) -> usize {
        self.b_z.len()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r, &self.b_h,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.in_dim(), self.hidden());
        for (name, t) in GRU_PARAM_NAMES.iter().zip(self.params()) {
            let want: &[usize] = match name.as_bytes()[0] {
                b'w' => &[d, h],
                b'u' => &[h, h],
                _ => &[h],
            };
            t.expect_shape(want, &format!("gru {name}"))?;
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, GruCache)> {
        self.validate()?;
        let (d, h) = (self.in_dim(), self.hidden());
        if input.rank() != 2 || input.cols() != d || input.rows() == 0 {
            return Err(Error::shape(format!(
                "gru: input {:?}, expected [T >= 1, {d}]",
                input.shape()
            )));
        }
        let t_len = input.rows();
        let mut out = Tensor::zeros(&[t_len, h]);
        let mut cache = GruCache {
            h_prev: Tensor::zeros(&[t_len, h]),
            z: Tensor::zeros(&[t_len, h]),
            r: Tensor::zeros(&[t_len, h]),
            h_cand: Tensor::zeros(&[t_len, h]),
        };
        let mut state = vec![0.0; h];
        let mut a_z = vec![0.0; h];
        let mut a_r = vec![0.0; h];
        let mut a_h = vec![0.0; h];
        let mut gated = vec![0.0; h];
        for t in 0..t_len {
            let x = input.row(t);
            cache.h_prev.row_mut(t).copy_from_slice(&state);

            a_z.copy_from_slice(self.b_z.data());
            vecmat_into(x, &self.w_z, &mut a_z);
            vecmat_into(&state, &self.u_z, &mut a_z);
            a_r.copy_from_slice(self.b_r.data());
            vecmat_into(x, &self.w_r, &mut a_r);
            vecmat_into(&state, &self.u_r, &mut a_r);
            let z: Vec<f64> = a_z.iter().map(|&v| sigmoid(v)).collect();
            let r: Vec<f64> = a_r.iter().map(|&v| sigmoid(v)).collect();

            for k in 0..h {
                gated[k] = r[k] * state[k];
            }
            a_h.copy_from_slice(self.b_h.data());
            vecmat_into(x, &self.w_h, &mut a_h);
            vecmat_into(&gated, &self.u_h, &mut a_h);
            let cand: Vec<f64> = a_h.iter().map(|v| v.tanh()).collect();

            for k in 0..h {
                state[k] = (1.0 - z[k]) * state[k] + z[k] * cand[k];
            }
            out.row_mut(t).copy_from_slice(&state);
            cache.z.row_mut(t).copy_from_slice(&z);
            cache.r.row_mut(t).copy_from_slice(&r);
            cache.h_cand.row_mut(t).copy_from_slice(&cand);
        }
        Ok((out, cache))
    }

    /// Backpropagation through time. Parameter gradients follow
    /// [`GRU_PARAM_NAMES`] order.
    pub fn backward(&self, input: &Tensor, cache: &GruCache, upstream: &Tensor) -> Result<LayerGrads> {
        let (d, h) = (self.in_dim(), self.hidden());
        let t_len = input.rows();
        input.expect_shape(&[t_len, d], "gru input")?;
        upstream.expect_shape(&[t_len, h], "gru upstream")?;
        cache.z.expect_shape(&[t_len, h], "gru cache")?;

        let mut g: Vec<Tensor> = self.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut d_input = Tensor::zeros(&[t_len, d]);
        let mut dh_next = vec![0.0; h];
        let mut dh = vec![0.0; h];
        let mut da_z = vec![0.0; h];
        let mut da_r = vec![0.0; h];
        let mut da_h = vec![0.0; h];
        let mut gated = vec![0.0; h];
        for t in (0..t_len).rev() {
            let x = input.row(t);
            let h_prev = cache.h_prev.row(t);
            let z = cache.z.row(t);
            let r = cache.r.row(t);
            let cand = cache.h_cand.row(t);
            for k in 0..h {
                dh[k] = upstream.get2(t, k) + dh_next[k];
            }
            let mut dh_prev = vec![0.0; h];
            for k in 0..h {
                let dz = dh[k] * (cand[k] - h_prev[k]);
                da_z[k] = dz * z[k] * (1.0 - z[k]);
                da_h[k] = dh[k] * z[k] * (1.0 - cand[k] * cand[k]);
                dh_prev[k] = dh[k] * (1.0 - z[k]);
                gated[k] = r[k] * h_prev[k];
            }
            // Through the candidate: d(r ⊙ h_prev) = U_h · da_h.
            let mut d_gated = vec![0.0; h];
            matvec_acc(&self.u_h, &da_h, &mut d_gated);
            for k in 0..h {
                da_r[k] = d_gated[k] * h_prev[k] * r[k] * (1.0 - r[k]);
                dh_prev[k] += d_gated[k] * r[k];
            }
            matvec_acc(&self.u_z, &da_z, &mut dh_prev);
            matvec_acc(&self.u_r, &da_r, &mut dh_prev);

            outer_acc(&mut g[0], x, &da_z);
            outer_acc(&mut g[1], x, &da_r);
            outer_acc(&mut g[2], x, &da_h);
            outer_acc(&mut g[3], h_prev, &da_z);
            outer_acc(&mut g[4], h_prev, &da_r);
            outer_acc(&mut g[5], &gated, &da_h);
            for k in 0..h {
                g[6].data_mut()[k] += da_z[k];
                g[7].data_mut()[k] += da_r[k];
                g[8].data_mut()[k] += da_h[k];
            }
            let dx = d_input.row_mut(t);
            matvec_acc(&self.w_z, &da_z, dx);
            matvec_acc(&self.w_r, &da_r, dx);
            matvec_acc(&self.w_h, &da_h, dx);
            dh_next = dh_prev;
        }
        Ok(LayerGrads {
            params: g,
            input: d_input,
        })
    }
}
