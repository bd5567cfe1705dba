//! The three classifier architectures assembled from [`crate::layers`].
//!
//! Every variant embeds the index sequence, applies dropout, runs parallel
//! convolution branches each followed by 4/4 max pooling, and concatenates
//! the pooled maps along time. `base_cnn` and `cnn_scnn` then pool once more
//! and flatten into the softmax head; `cnn_gru` runs a GRU over the
//! concatenated sequence and global-max-pools its states.

mod config;
pub mod weights;

use std::io::{Read, Write};

use rayon::prelude::*;

pub use config::{parse_kv, Layout, ModelConfig, ModelKind, SkipSpec};

use crate::embeddings::{EmbeddingMatrix, PAD};
use crate::error::{Error, Result};
use crate::layers::{
    dropout, dropout_backward, global_maxpool, global_maxpool_backward, maxpool1d, maxpool1d_backward, ConvCache,
    ConvLayer, DenseLayer, GruCache, GruLayer, Mode, PoolCache, GRU_PARAM_NAMES,
};
use crate::rng::RngStream;
use crate::tensor::{softmax_slice, Tensor};

/// Samples per gradient-reduction chunk. Fixed so the summation order, and
/// hence the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 8;

pub const EMBEDDING_NAME: &str = "embedding";

/// Ordered name → tensor collection (parameters or their gradients).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    entries: Vec<(String, Tensor)>,
}

impl ModelParams {
    pub fn new(entries: Vec<(String, Tensor)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (name, _) in &entries {
            if !seen.insert(name.as_str()) {
                return Err(Error::arg(format!("duplicate parameter name {name:?}")));
            }
        }
        Ok(ModelParams { entries })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.is_finite())
    }
}

/// Everything one sample's forward pass keeps for backward.
#[derive(Clone, Debug)]
pub struct SampleTrace {
    indices: Vec<usize>,
    /// Dropped-out embedding per branch, or a single shared one.
    inputs: Vec<Tensor>,
    masks: Vec<Option<Tensor>>,
    convs: Vec<ConvCache>,
    pools: Vec<PoolCache>,
    second: Option<PoolCache>,
    gru: Option<(Tensor, GruCache, PoolCache)>,
    features: Tensor,
    probs: Vec<f64>,
}

impl SampleTrace {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Vector fed to the dense head.
    pub fn features(&self) -> &Tensor {
        &self.features
    }

    /// Concatenated pooled branch outputs are not stored; this exposes the
    /// winning input rows of branch `b`'s first pooling stage.
    pub fn branch_pool(&self, b: usize) -> &PoolCache {
        &self.pools[b]
    }
}

/// Cached forward pass over a batch.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub traces: Vec<SampleTrace>,
}

impl ForwardPass {
    /// `B × n_classes` probabilities.
    pub fn probs(&self) -> Tensor {
        let n = self.traces.first().map_or(0, |t| t.probs.len());
        let data = self.traces.iter().flat_map(|t| t.probs.iter().copied()).collect();
        Tensor::new(vec![self.traces.len(), n], data).expect("rows share class count")
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    layout: Layout,
    embedding: Tensor,
    branches: Vec<ConvLayer>,
    gru: Option<GruLayer>,
    dense: DenseLayer,
}

/// Builds a freshly initialized model over a vocabulary-aligned embedding.
pub fn build_model(config: &ModelConfig, emb: &EmbeddingMatrix) -> Result<Model> {
    Model::build(config, emb.weights.clone())
}

impl Model {
    pub fn build(config: &ModelConfig, embedding: Tensor) -> Result<Model> {
        let layout = config.layout()?;
        if embedding.rank() != 2 || embedding.cols() != config.emb_dim {
            return Err(Error::build(
                "embedding",
                format!("matrix {:?} does not have emb_dim {} columns", embedding.shape(), config.emb_dim),
            ));
        }
        if embedding.rows() < 2 {
            return Err(Error::build("embedding", "matrix lacks PAD/UNK rows"));
        }
        let mut rng = RngStream::new(config.seed);
        let branches = layout
            .shapes
            .iter()
            .map(|s| ConvLayer::init(s.clone(), config.emb_dim, config.filters, &mut rng))
            .collect();
        let gru = (config.kind == ModelKind::CnnGru).then(|| GruLayer::init(config.filters, config.gru_units, &mut rng));
        let dense = DenseLayer::init(layout.feature_dim, config.n_classes, &mut rng);
        Ok(Model {
            config: config.clone(),
            layout,
            embedding,
            branches,
            gru,
            dense,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn embedding(&self) -> &Tensor {
        &self.embedding
    }

    pub fn branches(&self) -> &[ConvLayer] {
        &self.branches
    }

    pub fn branches_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.branches
    }

    pub fn gru(&self) -> Option<&GruLayer> {
        self.gru.as_ref()
    }

    pub fn dense(&self) -> &DenseLayer {
        &self.dense
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.config.trainable_embeddings {
            names.push(EMBEDDING_NAME.to_string());
        }
        for (i, b) in self.branches.iter().enumerate() {
            names.push(format!("branch{i}.{}.kernel", b.shape));
            names.push(format!("branch{i}.{}.bias", b.shape));
        }
        if self.gru.is_some() {
            names.extend(GRU_PARAM_NAMES.iter().map(|n| format!("gru.{n}")));
        }
        names.push("dense.weights".to_string());
        names.push("dense.bias".to_string());
        names
    }

    fn param_refs(&self) -> Vec<&Tensor> {
        let mut refs = Vec::new();
        if self.config.trainable_embeddings {
            refs.push(&self.embedding);
        }
        for b in &self.branches {
            refs.extend(b.params());
        }
        if let Some(g) = &self.gru {
            refs.extend(g.params());
        }
        refs.extend(self.dense.params());
        refs
    }

    /// Trainable tensors, mutably, in [`param_names`](Self::param_names) order.
    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let names = self.param_names();
        let Model {
            config,
            embedding,
            branches,
            gru,
            dense,
            ..
        } = self;
        let mut refs: Vec<&mut Tensor> = Vec::new();
        if config.trainable_embeddings {
            refs.push(embedding);
        }
        for b in branches.iter_mut() {
            refs.extend(b.params_mut());
        }
        if let Some(g) = gru {
            refs.extend(g.params_mut());
        }
        refs.extend(dense.params_mut());
        names.into_iter().zip(refs).collect()
    }

    /// Snapshot of the trainable tensors.
    pub fn params(&self) -> ModelParams {
        let entries = self
            .param_names()
            .into_iter()
            .zip(self.param_refs().into_iter().cloned())
            .collect();
        ModelParams { entries }
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.param_refs().iter().map(|t| t.len()).sum()
    }

    /// PAD always embeds as zeros, whatever its stored row holds.
    fn lookup(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.len() != self.config.seq_len {
            return Err(Error::shape(format!(
                "sequence has {} indices, model expects {}",
                indices.len(),
                self.config.seq_len
            )));
        }
        let d = self.config.emb_dim;
        let mut data = Vec::with_capacity(indices.len() * d);
        for (pos, &i) in indices.iter().enumerate() {
            if i >= self.embedding.rows() {
                return Err(Error::data(format!(
                    "token index {i} at position {pos} is outside the vocabulary of {}",
                    self.embedding.rows()
                )));
            }
            if i == PAD {
                data.extend(std::iter::repeat(0.0).take(d));
            } else {
                data.extend_from_slice(self.embedding.row(i));
            }
        }
        Tensor::new(vec![indices.len(), d], data)
    }

    pub fn forward_sample(&self, indices: &[usize], mode: Mode, rng: &mut RngStream) -> Result<SampleTrace> {
        let cfg = &self.config;
        let x = self.lookup(indices)?;
        let slots = if cfg.dropout_per_branch { self.branches.len() } else { 1 };
        let mut inputs = Vec::with_capacity(slots);
        let mut masks = Vec::with_capacity(slots);
        for _ in 0..slots {
            let (xi, m) = dropout(&x, cfg.dropout, mode, rng)?;
            inputs.push(xi);
            masks.push(m);
        }

        let f = cfg.filters;
        let mut convs = Vec::with_capacity(self.branches.len());
        let mut pools = Vec::with_capacity(self.branches.len());
        let mut concat = Vec::with_capacity(self.layout.concat_len * f);
        for (b, conv) in self.branches.iter().enumerate() {
            let input = &inputs[if cfg.dropout_per_branch { b } else { 0 }];
            let (out, cc) = conv.forward(input)?;
            let (pooled, pc) = maxpool1d(&out, cfg.pool, cfg.pool_stride)?;
            concat.extend_from_slice(pooled.data());
            convs.push(cc);
            pools.push(pc);
        }
        let concat = Tensor::new(vec![self.layout.concat_len, f], concat)?;
        let (seq, second) = if cfg.second_pooling {
            let (s, c) = maxpool1d(&concat, cfg.pool, cfg.pool_stride)?;
            (s, Some(c))
        } else {
            (concat, None)
        };
        let (features, gru) = match &self.gru {
            Some(g) => {
                let (states, gc) = g.forward(&seq)?;
                let (pooled, gp) = global_maxpool(&states)?;
                (pooled, Some((seq, gc, gp)))
            }
            None => {
                let n = seq.len();
                (seq.reshape(vec![n])?, None)
            }
        };
        let logits = self.dense.forward(&features)?;
        let probs = softmax_slice(logits.data());
        Ok(SampleTrace {
            indices: indices.to_vec(),
            inputs,
            masks,
            convs,
            pools,
            second,
            gru,
            features,
            probs,
        })
    }

    /// Forward pass with caches. Each sample gets its own dropout stream
    /// split off `rng` in batch order.
    pub fn forward_pass(&self, batch: &[Vec<usize>], mode: Mode, rng: &mut RngStream) -> Result<ForwardPass> {
        let seeds: Vec<u64> = batch.iter().map(|_| rng.next_u64()).collect();
        let traces = batch
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(seq, &seed)| self.forward_sample(seq, mode, &mut RngStream::new(seed)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ForwardPass { traces })
    }

    /// `B × n_classes` class distributions.
    /// Unlike [`forward_pass`](Self::forward_pass) this drops the caches as
    /// it goes, so it suits large evaluation sets. Same dropout streams.
    pub fn forward(&self, batch: &[Vec<usize>], mode: Mode, rng: &mut RngStream) -> Result<Tensor> {
        let seeds: Vec<u64> = batch.iter().map(|_| rng.next_u64()).collect();
        let rows = batch
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(seq, &seed)| Ok(self.forward_sample(seq, mode, &mut RngStream::new(seed))?.probs))
            .collect::<Result<Vec<_>>>()?;
        let n = self.config.n_classes;
        Tensor::new(vec![rows.len(), n], rows.concat())
    }

    /// Evaluation-mode probabilities.
    pub fn predict_proba(&self, batch: &[Vec<usize>]) -> Result<Tensor> {
        self.forward(batch, Mode::Eval, &mut RngStream::new(0))
    }

    /// Most probable class per sequence (ties → lowest index).
    pub fn predict(&self, batch: &[Vec<usize>]) -> Result<Vec<usize>> {
        let probs = self.predict_proba(batch)?;
        Ok((0..probs.rows())
            .map(|i| {
                let row = probs.row(i);
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }

    /// Gradient of the mean batch cross-entropy with respect to every
    /// trainable tensor, aligned with [`params`](Self::params).
    pub fn backward(&self, pass: &ForwardPass, targets: &Tensor) -> Result<ModelParams> {
        let b = pass.traces.len();
        let n = self.config.n_classes;
        targets.expect_shape(&[b, n], "targets")?;
        if b == 0 {
            return Err(Error::arg("empty batch"));
        }
        let scale = 1.0 / b as f64;
        let chunk_sums = pass
            .traces
            .par_chunks(GRAD_CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut acc: Option<Vec<Tensor>> = None;
                for (k, tr) in chunk.iter().enumerate() {
                    let row = targets.row(ci * GRAD_CHUNK + k);
                    let dlogits = Tensor::vector(tr.probs.iter().zip(row).map(|(p, y)| (p - y) * scale).collect());
                    let g = self.sample_grads(tr, &dlogits)?;
                    match &mut acc {
                        None => acc = Some(g),
                        Some(a) => {
                            for (x, y) in a.iter_mut().zip(&g) {
                                x.add_assign(y)?;
                            }
                        }
                    }
                }
                Ok(acc.expect("chunks are non-empty"))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = chunk_sums.into_iter();
        let mut sum = total.next().expect("at least one chunk");
        for part in total {
            for (x, y) in sum.iter_mut().zip(&part) {
                x.add_assign(y)?;
            }
        }
        Ok(ModelParams {
            entries: self.param_names().into_iter().zip(sum).collect(),
        })
    }

    fn sample_grads(&self, tr: &SampleTrace, dlogits: &Tensor) -> Result<Vec<Tensor>> {
        let cfg = &self.config;
        let f = cfg.filters;
        let dense_g = self.dense.backward(&tr.features, dlogits)?;

        let mut gru_grads = None;
        let d_seq = match (&self.gru, &tr.gru) {
            (Some(g), Some((gin, gc, gp))) => {
                let d_states = global_maxpool_backward(&dense_g.input, gp)?;
                let gg = g.backward(gin, gc, &d_states)?;
                gru_grads = Some(gg.params);
                gg.input
            }
            _ => {
                let rows = dense_g.input.len() / f;
                dense_g.input.reshape(vec![rows, f])?
            }
        };
        let d_concat = match &tr.second {
            Some(sc) => maxpool1d_backward(&d_seq, sc)?,
            None => d_seq,
        };

        let mut branch_grads = Vec::with_capacity(self.branches.len() * 2);
        let mut d_inputs: Vec<Tensor> = tr.inputs.iter().map(|t| Tensor::zeros(t.shape())).collect();
        let mut offset = 0;
        for (b, conv) in self.branches.iter().enumerate() {
            let rows = self.layout.pooled_lens[b];
            let d_pool = Tensor::new(vec![rows, f], d_concat.data()[offset * f..(offset + rows) * f].to_vec())?;
            offset += rows;
            let d_conv = maxpool1d_backward(&d_pool, &tr.pools[b])?;
            let slot = if cfg.dropout_per_branch { b } else { 0 };
            let cg = conv.backward(&tr.inputs[slot], &tr.convs[b], &d_conv)?;
            d_inputs[slot].add_assign(&cg.input)?;
            branch_grads.extend(cg.params);
        }

        let mut grads = Vec::new();
        if cfg.trainable_embeddings {
            let mut d_emb = Tensor::zeros(self.embedding.shape());
            for (d_x, mask) in d_inputs.iter().zip(&tr.masks) {
                let d_x = dropout_backward(d_x, mask.as_ref())?;
                for (pos, &idx) in tr.indices.iter().enumerate() {
                    if idx == PAD {
                        continue;
                    }
                    for (e, g) in d_emb.row_mut(idx).iter_mut().zip(d_x.row(pos)) {
                        *e += g;
                    }
                }
            }
            grads.push(d_emb);
        }
        grads.extend(branch_grads);
        if let Some(g) = gru_grads {
            grads.extend(g);
        }
        grads.extend(dense_g.params);
        Ok(grads)
    }

    /// Writes the embedding and every trainable tensor in the `LTNN` container.
    pub fn save(&self, w: impl Write) -> std::io::Result<()> {
        let names = self.param_names();
        let mut tensors: Vec<(&str, &Tensor)> = vec![(EMBEDDING_NAME, &self.embedding)];
        for (name, t) in names.iter().zip(self.param_refs()) {
            if name != EMBEDDING_NAME {
                tensors.push((name.as_str(), t));
            }
        }
        weights::write_tensors(w, tensors)
    }

    /// Rebuilds a model from a weight container written by [`save`](Self::save).
    pub fn load(config: &ModelConfig, r: impl Read) -> Result<Model> {
        let mut tensors = weights::read_tensors(r)?;
        let emb_pos = tensors
            .iter()
            .position(|(n, _)| n == EMBEDDING_NAME)
            .ok_or_else(|| Error::format("weight file lacks tensor \"embedding\""))?;
        let (_, embedding) = tensors.remove(emb_pos);
        let mut model = Model::build(config, embedding.clone())
            .map_err(|e| Error::format(format!("tensor \"embedding\": {e}")))?;
        let mut by_name: std::collections::HashMap<String, Tensor> = tensors.into_iter().collect();
        for (name, slot) in model.params_mut() {
            if name == EMBEDDING_NAME {
                continue;
            }
            let t = by_name
                .remove(&name)
                .ok_or_else(|| Error::format(format!("weight file lacks tensor {name:?}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::format(format!(
                    "tensor {name:?} has shape {:?}, architecture expects {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        if let Some(extra) = by_name.keys().min() {
            return Err(Error::format(format!("unexpected tensor {extra:?} in weight file")));
        }
        Ok(model)
    }
}

/// One-hot rows for class indices.
pub fn one_hot(classes: &[usize], n_classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[classes.len(), n_classes]);
    for (i, &c) in classes.iter().enumerate() {
        t.set2(i, c, 1.0);
    }
    t
}
