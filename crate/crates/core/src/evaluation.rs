//! Confusion-matrix metrics: per-class precision/recall/F1, micro and macro
//! averages, and the macro average restricted to the hate classes.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square count matrix, `counts[gold][pred]`, over a fixed label list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    /// Builds from class indices into `labels`.
    pub fn from_indices(labels: Vec<String>, gold: &[usize], pred: &[usize]) -> Result<Self> {
        if gold.len() != pred.len() {
            return Err(Error::arg(format!("{} gold labels but {} predictions", gold.len(), pred.len())));
        }
        let mut cm = ConfusionMatrix::zeros(labels);
        let n = cm.labels.len();
        for (&g, &p) in gold.iter().zip(pred) {
            if g >= n || p >= n {
                return Err(Error::data(format!("class index {} out of range for {n} labels", g.max(p))));
            }
            cm.counts[g][p] += 1;
        }
        Ok(cm)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn tp_fp_fn(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.counts[c][c];
        let predicted: u64 = self.counts.iter().map(|row| row[c]).sum();
        let gold: u64 = self.counts[c].iter().sum();
        (tp, predicted - tp, gold - tp)
    }
}

/// Counts `(gold, pred)` label pairs. Every label must appear in `labels`.
pub fn confusion<S: AsRef<str>>(gold: &[S], pred: &[S], labels: &[String]) -> Result<ConfusionMatrix> {
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let lookup = |l: &S| {
        index
            .get(l.as_ref())
            .copied()
            .ok_or_else(|| Error::data(format!("unknown label {:?}", l.as_ref())))
    };
    let g = gold.iter().map(lookup).collect::<Result<Vec<_>>>()?;
    let p = pred.iter().map(lookup).collect::<Result<Vec<_>>>()?;
    ConfusionMatrix::from_indices(labels.to_vec(), &g, &p)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Prf {
    /// From raw counts; any 0/0 is taken as 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }

    fn mean<'a>(items: impl IntoIterator<Item = &'a Prf>) -> Prf {
        let mut sum = Prf::default();
        let mut n = 0usize;
        for p in items {
            sum.precision += p.precision;
            sum.recall += p.recall;
            sum.f1 += p.f1;
            n += 1;
        }
        let n = n as f64;
        Prf {
            precision: sum.precision / n,
            recall: sum.recall / n,
            f1: sum.f1 / n,
        }
    }
}

pub fn prf_per_class(cm: &ConfusionMatrix) -> Vec<Prf> {
    (0..cm.labels.len())
        .map(|c| {
            let (tp, fp, fn_) = cm.tp_fp_fn(c);
            Prf::from_counts(tp, fp, fn_)
        })
        .collect()
}

/// Pooled TP/FP/FN over all classes.
pub fn micro_f1(cm: &ConfusionMatrix) -> Prf {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for c in 0..cm.labels.len() {
        let (a, b, d) = cm.tp_fp_fn(c);
        tp += a;
        fp += b;
        fn_ += d;
    }
    Prf::from_counts(tp, fp, fn_)
}

/// Unweighted mean of per-class metrics, optionally over a label subset.
pub fn macro_f1(per_class: &[Prf], labels: &[String], restrict_to: Option<&[String]>) -> Result<Prf> {
    if per_class.len() != labels.len() {
        return Err(Error::arg("per-class metrics and labels differ in length"));
    }
    match restrict_to {
        None => {
            if per_class.is_empty() {
                return Err(Error::arg("macro average over no classes"));
            }
            Ok(Prf::mean(per_class))
        }
        Some(subset) => {
            if subset.is_empty() {
                return Err(Error::arg("macro average over an empty label subset"));
            }
            let picked = subset
                .iter()
                .map(|l| {
                    labels
                        .iter()
                        .position(|x| x == l)
                        .map(|i| &per_class[i])
                        .ok_or_else(|| Error::data(format!("unknown label {l:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Prf::mean(picked))
        }
    }
}

pub const MICRO_KEY: &str = "micro";
pub const MACRO_KEY: &str = "macro";
pub const MACRO_HATE_KEY: &str = "macro_hate";

/// Metrics of one evaluation. Serialized as
/// `{"non_hate_label": .., "metrics": {<label>.., "micro", "macro", "macro_hate"}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub non_hate_label: Option<String>,
    pub metrics: IndexMap<String, Prf>,
}

impl EvalReport {
    /// `non_hate_label`, when given, must be one of the matrix labels; the
    /// hate-only macro average covers every other label.
    pub fn from_confusion(cm: &ConfusionMatrix, non_hate_label: Option<&str>) -> Result<Self> {
        let labels = cm.labels();
        for l in labels {
            if [MICRO_KEY, MACRO_KEY, MACRO_HATE_KEY].contains(&l.as_str()) {
                return Err(Error::data(format!("class label {l:?} clashes with a report key")));
            }
        }
        let per_class = prf_per_class(cm);
        let mut metrics: IndexMap<String, Prf> = labels.iter().cloned().zip(per_class.iter().copied()).collect();
        metrics.insert(MICRO_KEY.into(), micro_f1(cm));
        metrics.insert(MACRO_KEY.into(), macro_f1(&per_class, labels, None)?);
        if let Some(nh) = non_hate_label {
            if !labels.iter().any(|l| l == nh) {
                return Err(Error::data(format!("non-hate label {nh:?} is not among the classes {labels:?}")));
            }
            let hate: Vec<String> = labels.iter().filter(|l| *l != nh).cloned().collect();
            metrics.insert(MACRO_HATE_KEY.into(), macro_f1(&per_class, labels, Some(&hate))?);
        }
        Ok(EvalReport {
            non_hate_label: non_hate_label.map(str::to_string),
            metrics,
        })
    }

    pub fn get(&self, key: &str) -> Option<&Prf> {
        self.metrics.get(key)
    }

    pub fn micro(&self) -> Prf {
        self.metrics[MICRO_KEY]
    }

    pub fn macro_avg(&self) -> Prf {
        self.metrics[MACRO_KEY]
    }

    pub fn macro_hate(&self) -> Option<Prf> {
        self.metrics.get(MACRO_HATE_KEY).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Arithmetic mean of every metric across reports with identical keys.
pub fn average(reports: &[EvalReport]) -> Result<EvalReport> {
    let first = reports.first().ok_or_else(|| Error::arg("no reports to average"))?;
    for r in &reports[1..] {
        if !r.metrics.keys().eq(first.metrics.keys()) || r.non_hate_label != first.non_hate_label {
            return Err(Error::arg("reports to average have different classes"));
        }
    }
    let metrics = first
        .metrics
        .keys()
        .map(|k| (k.clone(), Prf::mean(reports.iter().map(|r| &r.metrics[k]))))
        .collect();
    Ok(EvalReport {
        non_hate_label: first.non_hate_label.clone(),
        metrics,
    })
}
