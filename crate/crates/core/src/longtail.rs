//! Long-tail corpus analysis: per-tweet class-uniqueness scores, their
//! 11-range histogram, and where additional true positives fall on it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::Prediction;
use crate::error::{Error, Result};
use crate::preprocess::ProcessedTweet;

pub const N_BINS: usize = 11;

/// Report keys, named by each range's upper bound.
pub const BIN_LABELS: [&str; N_BINS] = ["0", "0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9", "1.0"];

/// Words that occur in tweets of exactly one class, grouped by that class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UniqueWordIndex {
    by_class: BTreeMap<String, BTreeSet<String>>,
}

impl UniqueWordIndex {
    pub fn get(&self, class: &str) -> Option<&BTreeSet<String>> {
        self.by_class.get(class)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.by_class.keys().map(String::as_str)
    }

    pub fn is_unique(&self, word: &str, class: &str) -> bool {
        self.by_class.get(class).is_some_and(|s| s.contains(word))
    }
}

pub fn unique_words(tweets: &[ProcessedTweet]) -> UniqueWordIndex {
    let mut seen: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    let mut by_class: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for t in tweets {
        by_class.entry(t.label.clone()).or_default();
        for w in &t.tokens {
            seen.entry(w.as_str()).or_default().insert(t.label.as_str());
        }
    }
    for (word, classes) in seen {
        if classes.len() == 1 {
            let class = classes.into_iter().next().expect("one class");
            by_class.get_mut(class).expect("class registered").insert(word.to_string());
        }
    }
    UniqueWordIndex { by_class }
}

/// Share of a tweet's distinct tokens that are unique to its class, or
/// `None` for a tweet without tokens.
pub fn uniqueness(tweet: &ProcessedTweet, index: &UniqueWordIndex) -> Option<f64> {
    let distinct: BTreeSet<&str> = tweet.tokens.iter().map(String::as_str).collect();
    if distinct.is_empty() {
        return None;
    }
    let hits = distinct.iter().filter(|w| index.is_unique(w, &tweet.label)).count();
    Some(hits as f64 / distinct.len() as f64)
}

/// `0` for a score of exactly zero, else `ceil(10·score)`, so `(0, 0.1]` is
/// bin 1 and `(0.9, 1]` bin 10.
pub fn bin(score: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::arg(format!("uniqueness score {score} outside [0, 1]")));
    }
    if score == 0.0 {
        return Ok(0);
    }
    let x = score * 10.0;
    // 0.3 * 10 is 3.0000000000000004; snap products that are integral up to
    // rounding so upper bounds stay inside their range.
    let r = x.round();
    let b = if r >= 1.0 && (x - r).abs() < 1e-9 { r } else { x.ceil() };
    Ok(b as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TweetScore {
    pub id: String,
    pub label: String,
    pub score: f64,
    pub bin: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub count: usize,
    pub percent: f64,
    pub cumulative_percent: f64,
    /// Per class, the share of that class's tweets that land in this bin.
    pub class_fraction: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub tweets: usize,
    pub class_counts: BTreeMap<String, usize>,
    /// Tweets left out because normalization emptied them.
    pub skipped: Vec<String>,
    pub bins: IndexMap<String, BinRow>,
    #[serde(skip)]
    pub scores: Vec<TweetScore>,
}

impl UniquenessReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Score per tweet id.
    pub fn score_map(&self) -> HashMap<&str, f64> {
        self.scores.iter().map(|s| (s.id.as_str(), s.score)).collect()
    }
}

/// Scores every tweet and tabulates the 11-bin histogram.
pub fn distribution(tweets: &[ProcessedTweet]) -> Result<UniquenessReport> {
    if tweets.is_empty() {
        return Err(Error::data("cannot analyse an empty dataset"));
    }
    let index = unique_words(tweets);
    let mut scores = Vec::with_capacity(tweets.len());
    let mut skipped = Vec::new();
    let mut counts = [0usize; N_BINS];
    let mut class_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut class_bins: BTreeMap<String, [usize; N_BINS]> = BTreeMap::new();
    for t in tweets {
        let Some(score) = uniqueness(t, &index) else {
            log::warn!("tweet {} has no tokens after normalization; skipped", t.id);
            skipped.push(t.id.clone());
            continue;
        };
        let b = bin(score)?;
        counts[b] += 1;
        *class_counts.entry(t.label.clone()).or_default() += 1;
        class_bins.entry(t.label.clone()).or_insert([0; N_BINS])[b] += 1;
        scores.push(TweetScore {
            id: t.id.clone(),
            label: t.label.clone(),
            score,
            bin: BIN_LABELS[b].to_string(),
        });
    }
    let scored = scores.len();
    if scored == 0 {
        return Err(Error::data("every tweet is empty after normalization"));
    }
    let mut cumulative = 0;
    let bins = (0..N_BINS)
        .map(|b| {
            cumulative += counts[b];
            let class_fraction = class_bins
                .iter()
                .map(|(c, per)| (c.clone(), per[b] as f64 / class_counts[c] as f64))
                .collect();
            let row = BinRow {
                count: counts[b],
                percent: 100.0 * counts[b] as f64 / scored as f64,
                cumulative_percent: 100.0 * cumulative as f64 / scored as f64,
                class_fraction,
            };
            (BIN_LABELS[b].to_string(), row)
        })
        .collect();
    Ok(UniquenessReport {
        tweets: scored,
        class_counts,
        skipped,
        bins,
        scores,
    })
}

/// Ids that `pred_a` gets right and `pred_b` gets wrong. All three lists
/// must name the same ids in the same order.
pub fn additional_true_positives(gold: &[Prediction], pred_a: &[Prediction], pred_b: &[Prediction]) -> Result<Vec<String>> {
    for (name, preds) in [("first", pred_a), ("second", pred_b)] {
        if preds.len() != gold.len() {
            return Err(Error::data(format!(
                "{name} prediction file has {} rows, gold has {}",
                preds.len(),
                gold.len()
            )));
        }
        if let Some((row, (g, p))) = gold.iter().zip(preds).enumerate().find(|(_, (g, p))| g.id != p.id) {
            return Err(Error::data(format!(
                "{name} prediction file row {}: id {:?} does not match gold id {:?}",
                row + 1,
                p.id,
                g.id
            )));
        }
    }
    Ok(gold
        .iter()
        .zip(pred_a.iter().zip(pred_b))
        .filter(|(g, (a, b))| a.label == g.label && b.label != g.label)
        .map(|(g, _)| g.id.clone())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtpReport {
    pub ids: Vec<String>,
    /// Share of the ATPs per bin, in percent; all zero when there are none.
    pub percent: IndexMap<String, f64>,
    pub counts: IndexMap<String, usize>,
}

impl AtpReport {
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn atp_distribution(ids: &[String], scores: &HashMap<&str, f64>) -> Result<AtpReport> {
    let mut counts = [0usize; N_BINS];
    for id in ids {
        let s = scores
            .get(id.as_str())
            .ok_or_else(|| Error::data(format!("no uniqueness score for tweet {id:?}")))?;
        counts[bin(*s)?] += 1;
    }
    let total = ids.len();
    let percent = (0..N_BINS)
        .map(|b| {
            let p = if total == 0 {
                0.0
            } else {
                100.0 * counts[b] as f64 / total as f64
            };
            (BIN_LABELS[b].to_string(), p)
        })
        .collect();
    Ok(AtpReport {
        ids: ids.to_vec(),
        percent,
        counts: (0..N_BINS).map(|b| (BIN_LABELS[b].to_string(), counts[b])).collect(),
    })
}
