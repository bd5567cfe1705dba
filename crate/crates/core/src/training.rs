//! Loss, Adam, the mini-batch loop, stratified k-fold splitting and the
//! cross-validation driver.

use std::collections::BTreeMap;
use std::time::Instant;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::evaluation::{average, ConfusionMatrix, EvalReport};
use crate::layers::Mode;
use crate::model::{one_hot, Model, ModelConfig, ModelParams};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean categorical cross-entropy of `pred` (`B × n` distributions)
/// against one-hot `targets`.
pub fn cross_entropy(pred: &Tensor, targets: &Tensor) -> Result<f64> {
    if pred.rank() != 2 || pred.shape() != targets.shape() {
        return Err(Error::shape(format!(
            "cross_entropy: predictions {:?} vs targets {:?}",
            pred.shape(),
            targets.shape()
        )));
    }
    let b = pred.rows();
    if b == 0 {
        return Err(Error::shape("cross_entropy: empty batch"));
    }
    let total: f64 = pred
        .data()
        .iter()
        .zip(targets.data())
        .filter(|(_, &y)| y != 0.0)
        .map(|(&p, &y)| -y * p.max(PROB_FLOOR).ln())
        .sum();
    Ok(total / b as f64)
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    names: Vec<String>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Default for AdamState {
    fn default() -> Self {
        AdamState {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            names: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.m[i])
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.v[i])
    }

    /// One update. Moments are created lazily on the first call; later calls
    /// must pass the same parameter names in the same order.
    pub fn step(&mut self, params: Vec<(String, &mut Tensor)>, grads: &ModelParams) -> Result<()> {
        let names: Vec<&str> = grads.names().collect();
        if params.len() != names.len() || params.iter().zip(&names).any(|((p, _), g)| p != g) {
            return Err(Error::arg(format!(
                "gradients {names:?} are not aligned with parameters {:?}",
                params.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>()
            )));
        }
        if self.t == 0 && self.names.is_empty() {
            self.names = params.iter().map(|(n, _)| n.clone()).collect();
            self.m = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
            self.v = self.m.clone();
        } else if self.names.len() != params.len() || self.names.iter().zip(&params).any(|(a, (b, _))| a != b) {
            return Err(Error::arg("parameter names changed between optimizer steps"));
        }
        for ((name, theta), (_, g)) in params.iter().zip(grads.iter()) {
            if g.shape() != theta.shape() {
                return Err(Error::shape(format!(
                    "gradient for {name:?} has shape {:?}, parameter {:?}",
                    g.shape(),
                    theta.shape()
                )));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((_, theta), (_, g)), (m, v)) in params
            .into_iter()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let (theta, m, v) = (theta.data_mut(), m.data_mut(), v.data_mut());
            for (k, &gk) in g.data().iter().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                theta[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Batch sizes for `n` rows: full batches then a possibly smaller last one.
pub fn batch_partition(n: usize, batch: usize) -> Vec<usize> {
    let mut sizes = vec![batch; n / batch];
    if n % batch != 0 {
        sizes.push(n % batch);
    }
    sizes
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 10,
            batch_size: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub seed: u64,
    pub epoch_loss: Vec<f64>,
    pub wall_seconds: f64,
    pub config: IndexMap<String, String>,
}

fn config_snapshot(cfg: &ModelConfig) -> IndexMap<String, String> {
    cfg.to_kv()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Mini-batch Adam over `(seqs, classes)`. Rows are reshuffled every epoch
/// from a stream seeded with `opts.seed`; dropout draws from the same stream.
pub fn train(model: &mut Model, seqs: &[Vec<usize>], classes: &[usize], opts: &TrainOptions) -> Result<TrainRecord> {
    if seqs.is_empty() {
        return Err(Error::arg("cannot train on an empty fold"));
    }
    if seqs.len() != classes.len() {
        return Err(Error::arg(format!("{} sequences but {} labels", seqs.len(), classes.len())));
    }
    if opts.batch_size == 0 {
        return Err(Error::arg("batch size must be positive"));
    }
    let n_classes = model.config().n_classes;
    if let Some(&c) = classes.iter().find(|&&c| c >= n_classes) {
        return Err(Error::data(format!("class index {c} but the model has {n_classes} classes")));
    }
    let start = Instant::now();
    let mut rng = RngStream::new(opts.seed);
    let mut adam = AdamState::new();
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut epoch_loss = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut offset = 0;
        for (bi, size) in batch_partition(order.len(), opts.batch_size).into_iter().enumerate() {
            let rows = &order[offset..offset + size];
            offset += size;
            let batch: Vec<Vec<usize>> = rows.iter().map(|&r| seqs[r].clone()).collect();
            let targets = one_hot(&rows.iter().map(|&r| classes[r]).collect::<Vec<_>>(), n_classes);
            let pass = model.forward_pass(&batch, Mode::Train, &mut rng)?;
            let loss = cross_entropy(&pass.probs(), &targets)?;
            let grads = model.backward(&pass, &targets)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss or gradient at epoch {epoch}, batch {bi}")));
            }
            adam.step(model.params_mut(), &grads)?;
            loss_sum += loss * size as f64;
        }
        let mean = loss_sum / seqs.len() as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.6}");
        epoch_loss.push(mean);
    }
    Ok(TrainRecord {
        seed: opts.seed,
        epoch_loss,
        wall_seconds: start.elapsed().as_secs_f64(),
        config: config_snapshot(model.config()),
    })
}

/// Row indices of each fold, ascending within a fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn test(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every row outside `fold`, ascending.
    pub fn train(&self, fold: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }

    /// Fold index of every row.
    pub fn assignment(&self) -> Vec<usize> {
        let n = self.folds.iter().map(Vec::len).sum();
        let mut out = vec![0; n];
        for (i, f) in self.folds.iter().enumerate() {
            for &r in f {
                out[r] = i;
            }
        }
        out
    }
}

/// Shuffled round-robin fold assignment. With `stratified`, rows are dealt
/// class by class (classes in sorted order) and the dealing position carries
/// over between classes, so fold sizes also stay within one of each other.
pub fn kfold_split<S: AsRef<str>>(labels: &[S], k: usize, seed: u64, stratified: bool) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::arg(format!("k-fold needs k >= 2, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::data(format!("{} rows cannot fill {k} folds", labels.len())));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        let key = if stratified { l.as_ref() } else { "" };
        groups.entry(key).or_default().push(i);
    }
    if stratified {
        if let Some((class, rows)) = groups.iter().find(|(_, rows)| rows.len() < k) {
            return Err(Error::data(format!(
                "class {class:?} has {} members, fewer than k = {k}",
                rows.len()
            )));
        }
    }
    let mut rng = RngStream::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for rows in groups.values_mut() {
        rng.shuffle(rows);
        for &r in rows.iter() {
            folds[next % k].push(r);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldSplit { folds })
}

#[derive(Clone, Debug)]
pub struct CvOptions {
    pub k: usize,
    pub train: TrainOptions,
    pub non_hate_label: Option<String>,
}

/// Everything one fold produced.
#[derive(Clone, Debug)]
pub struct FoldOutcome {
    pub fold: usize,
    pub seed: u64,
    pub model: Model,
    pub record: TrainRecord,
    pub report: EvalReport,
    /// Predicted class index per held-out row, in `FoldSplit::test` order.
    pub predictions: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CvResult {
    pub split: FoldSplit,
    pub folds: Vec<FoldOutcome>,
    pub average: EvalReport,
}

/// k-fold cross validation. Fold `f` initialises and trains its model from
/// seed `train.seed + f`; folds run in parallel but share nothing mutable,
/// so the result does not depend on scheduling.
pub fn cross_validate(
    config: &ModelConfig,
    embedding: &EmbeddingMatrix,
    seqs: &[Vec<usize>],
    labels: &[String],
    class_names: &[String],
    opts: &CvOptions,
) -> Result<CvResult> {
    if config.n_classes != class_names.len() {
        return Err(Error::build(
            "config",
            format!("n_classes = {} but the data has {} classes", config.n_classes, class_names.len()),
        ));
    }
    let classes = labels
        .iter()
        .map(|l| {
            class_names
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::data(format!("label {l:?} is not a known class")))
        })
        .collect::<Result<Vec<_>>>()?;
    let split = kfold_split(labels, opts.k, opts.train.seed, true)?;
    let folds = (0..opts.k)
        .into_par_iter()
        .map(|fold| {
            let seed = opts.train.seed.wrapping_add(fold as u64);
            let mut cfg = config.clone();
            cfg.seed = seed;
            let mut model = Model::build(&cfg, embedding.weights.clone())?;
            let train_rows = split.train(fold);
            let train_seqs: Vec<Vec<usize>> = train_rows.iter().map(|&r| seqs[r].clone()).collect();
            let train_classes: Vec<usize> = train_rows.iter().map(|&r| classes[r]).collect();
            let topts = TrainOptions { seed, ..opts.train.clone() };
            let record = train(&mut model, &train_seqs, &train_classes, &topts)?;
            let test_rows = split.test(fold);
            let test_seqs: Vec<Vec<usize>> = test_rows.iter().map(|&r| seqs[r].clone()).collect();
            let predictions = model.predict(&test_seqs)?;
            let gold: Vec<usize> = test_rows.iter().map(|&r| classes[r]).collect();
            let cm = ConfusionMatrix::from_indices(class_names.to_vec(), &gold, &predictions)?;
            let report = EvalReport::from_confusion(&cm, opts.non_hate_label.as_deref())?;
            log::info!("fold {fold}: macro F1 {:.4}", report.macro_avg().f1);
            Ok(FoldOutcome {
                fold,
                seed,
                model,
                record,
                report,
                predictions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<EvalReport> = folds.iter().map(|f| f.report.clone()).collect();
    let average = average(&reports)?;
    Ok(CvResult { split, folds, average })
}
