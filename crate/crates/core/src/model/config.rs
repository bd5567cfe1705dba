use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::{gapped_window_shapes, pooled_len, WindowShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    BaseCnn,
    CnnGru,
    CnnScnn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::BaseCnn => "base_cnn",
            ModelKind::CnnGru => "cnn_gru",
            ModelKind::CnnScnn => "cnn_scnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base_cnn" => Ok(ModelKind::BaseCnn),
            "cnn_gru" => Ok(ModelKind::CnnGru),
            "cnn_scnn" => Ok(ModelKind::CnnScnn),
            other => Err(Error::arg(format!(
                "unknown model kind {other:?} (expected base_cnn, cnn_gru or cnn_scnn)"
            ))),
        }
    }
}

/// A gap of `gap` positions in a window of `size` (e.g. `1:4`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SkipSpec {
    pub gap: usize,
    pub size: usize,
}

impl fmt::Display for SkipSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.gap, self.size)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub seq_len: usize,
    pub emb_dim: usize,
    pub plain_window_sizes: Vec<usize>,
    pub filters: usize,
    pub pool: usize,
    pub pool_stride: usize,
    pub skipped_specs: Vec<SkipSpec>,
    pub gru_units: usize,
    pub dropout: f64,
    /// Separate dropout mask per convolution branch instead of one shared mask.
    pub dropout_per_branch: bool,
    pub n_classes: usize,
    pub second_pooling: bool,
    pub trainable_embeddings: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// Published hyperparameters for `kind`. The GRU variant feeds the
    /// first pooling stage straight into the recurrent layer.
    pub fn new(kind: ModelKind, n_classes: usize) -> Self {
        ModelConfig {
            kind,
            seq_len: 100,
            emb_dim: 300,
            plain_window_sizes: vec![2, 3, 4],
            filters: 100,
            pool: 4,
            pool_stride: 4,
            skipped_specs: vec![
                SkipSpec { gap: 1, size: 3 },
                SkipSpec { gap: 1, size: 4 },
                SkipSpec { gap: 2, size: 4 },
            ],
            gru_units: 100,
            dropout: 0.2,
            dropout_per_branch: false,
            n_classes,
            second_pooling: kind != ModelKind::CnnGru,
            trainable_embeddings: false,
            seed: 0,
        }
    }

    /// Plain windows first, then (for `cnn_scnn`) every gapped shape.
    pub fn branch_shapes(&self) -> Result<Vec<WindowShape>> {
        let mut shapes = self
            .plain_window_sizes
            .iter()
            .map(|&j| WindowShape::plain(j))
            .collect::<Result<Vec<_>>>()?;
        if self.kind == ModelKind::CnnScnn {
            for spec in &self.skipped_specs {
                shapes.extend(gapped_window_shapes(spec.gap, spec.size)?);
            }
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |stage: &str, msg: String| Err(Error::build(stage, msg));
        if self.n_classes < 2 {
            return bad("softmax", format!("need at least 2 classes, got {}", self.n_classes));
        }
        for (name, v) in [
            ("seq_len", self.seq_len),
            ("emb_dim", self.emb_dim),
            ("filters", self.filters),
            ("pool", self.pool),
            ("pool_stride", self.pool_stride),
            ("gru_units", self.gru_units),
        ] {
            if v == 0 {
                return bad("config", format!("{name} must be positive"));
            }
        }
        if self.plain_window_sizes.is_empty() {
            return bad("config", "at least one plain window size is required".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", format!("ratio {} outside [0, 1)", self.dropout));
        }
        for spec in &self.skipped_specs {
            let ok = spec.gap > 0 && spec.gap + 2 <= spec.size;
            if !ok {
                return bad("config", format!("skipped spec {spec} yields no gapped window"));
            }
        }
        Ok(())
    }

    /// Sequence lengths through every stage, checked against the pooling
    /// and window sizes.
    pub fn layout(&self) -> Result<Layout> {
        self.validate()?;
        let shapes = self.branch_shapes()?;
        let mut conv_lens = Vec::new();
        let mut pooled_lens = Vec::new();
        for s in &shapes {
            let stage = format!("conv {s}");
            let t = self.seq_len.checked_sub(s.size()).map(|v| v + 1).ok_or_else(|| {
                Error::build(&stage, format!("sequence length {} shorter than window", self.seq_len))
            })?;
            let p = pooled_len(t, self.pool, self.pool_stride).ok_or_else(|| {
                Error::build(format!("pool after {stage}"), format!("length {t} shorter than pool {}", self.pool))
            })?;
            conv_lens.push(t);
            pooled_lens.push(p);
        }
        let concat_len: usize = pooled_lens.iter().sum();
        let second_pool_len = if self.second_pooling {
            Some(pooled_len(concat_len, self.pool, self.pool_stride).ok_or_else(|| {
                Error::build("second pool", format!("concatenated length {concat_len} shorter than pool {}", self.pool))
            })?)
        } else {
            None
        };
        let seq_after_pool = second_pool_len.unwrap_or(concat_len);
        let feature_dim = match self.kind {
            ModelKind::CnnGru => self.gru_units,
            _ => seq_after_pool * self.filters,
        };
        Ok(Layout {
            shapes,
            conv_lens,
            pooled_lens,
            concat_len,
            second_pool_len,
            feature_dim,
        })
    }

    /// Flat `key = value` text, one key per line, in fixed order.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("kind", self.kind.to_string());
        put("seq_len", self.seq_len.to_string());
        put("emb_dim", self.emb_dim.to_string());
        put("plain_window_sizes", join(&self.plain_window_sizes));
        put("filters", self.filters.to_string());
        put("pool", self.pool.to_string());
        put("pool_stride", self.pool_stride.to_string());
        put("skipped_specs", join(&self.skipped_specs));
        put("gru_units", self.gru_units.to_string());
        put("dropout", self.dropout.to_string());
        put("dropout_per_branch", self.dropout_per_branch.to_string());
        put("n_classes", self.n_classes.to_string());
        put("second_pooling", self.second_pooling.to_string());
        put("trainable_embeddings", self.trainable_embeddings.to_string());
        put("seed", self.seed.to_string());
        s
    }

    /// Applies recognised keys from `kv` on top of `self`; returns the keys
    /// it did not recognise.
    pub fn apply_kv(&mut self, kv: &BTreeMap<String, String>) -> Result<Vec<String>> {
        let mut rest = Vec::new();
        let kind_changed = kv.contains_key("kind") && !kv.contains_key("second_pooling");
        for (k, v) in kv {
            match k.as_str() {
                "kind" => self.kind = v.parse()?,
                "seq_len" => self.seq_len = num(k, v)?,
                "emb_dim" => self.emb_dim = num(k, v)?,
                "plain_window_sizes" => {
                    self.plain_window_sizes = list(v).map(|x| num(k, x)).collect::<Result<_>>()?
                }
                "filters" => self.filters = num(k, v)?,
                "pool" => self.pool = num(k, v)?,
                "pool_stride" => self.pool_stride = num(k, v)?,
                "skipped_specs" => {
                    self.skipped_specs = list(v)
                        .map(|x| {
                            let (g, s) = x
                                .split_once(':')
                                .ok_or_else(|| Error::arg(format!("{k}: expected gap:size, got {x:?}")))?;
                            Ok(SkipSpec { gap: num(k, g)?, size: num(k, s)? })
                        })
                        .collect::<Result<_>>()?
                }
                "gru_units" => self.gru_units = num(k, v)?,
                "dropout" => self.dropout = num(k, v)?,
                "dropout_per_branch" => self.dropout_per_branch = num(k, v)?,
                "n_classes" => self.n_classes = num(k, v)?,
                "second_pooling" => self.second_pooling = num(k, v)?,
                "trainable_embeddings" => self.trainable_embeddings = num(k, v)?,
                "seed" => self.seed = num(k, v)?,
                _ => rest.push(k.clone()),
            }
        }
        if kind_changed {
            self.second_pooling = self.kind != ModelKind::CnnGru;
        }
        Ok(rest)
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let kv = parse_kv(text, "model config")?;
        let kind: ModelKind = kv
            .get("kind")
            .ok_or_else(|| Error::format("model config lacks `kind`"))?
            .parse()?;
        let mut cfg = ModelConfig::new(kind, 2);
        cfg.apply_kv(&kv)?;
        Ok(cfg)
    }
}

/// Stage-by-stage sequence lengths of a configured model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub shapes: Vec<WindowShape>,
    pub conv_lens: Vec<usize>,
    pub pooled_lens: Vec<usize>,
    pub concat_len: usize,
    pub second_pool_len: Option<usize>,
    /// Width of the vector fed to the dense head.
    pub feature_dim: usize,
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::arg(format!("{key}: cannot parse {v:?}")))
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_kv(text: &str, source: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(source, i + 1, "expected `key = value`"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::parse(source, i + 1, "empty key"));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::parse(source, i + 1, format!("duplicate key {k:?}")));
        }
    }
    Ok(out)
}
