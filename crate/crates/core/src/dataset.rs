//! Labeled corpora and prediction files.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::preprocess::{Normalizer, ProcessedTweet, RawTweet};

/// Raw labeled tweets, in file order.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub tweets: Vec<RawTweet>,
}

#[derive(Deserialize)]
struct CsvRow {
    id: String,
    label: String,
    text: String,
}

impl Dataset {
    pub fn new(tweets: Vec<RawTweet>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &tweets {
            if !seen.insert(t.id.as_str()) {
                return Err(Error::data(format!("duplicate tweet id {:?}", t.id)));
            }
        }
        Ok(Dataset { tweets })
    }

    /// Reads a CSV with header `id,label,text`.
    pub fn from_reader(reader: impl Read, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(source, 1, e.to_string()))?
            .clone();
        let names: Vec<&str> = headers.iter().collect();
        if names != ["id", "label", "text"] {
            return Err(Error::parse(
                source,
                1,
                format!("expected header id,label,text, got {}", names.join(",")),
            ));
        }
        let mut tweets = Vec::new();
        for rec in rdr.deserialize::<CsvRow>() {
            let row = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::parse(source, line, e.to_string())
            })?;
            if row.label.is_empty() {
                return Err(Error::data(format!("{source}: tweet {:?} has an empty label", row.id)));
            }
            tweets.push(RawTweet {
                id: row.id,
                label: row.label,
                text: row.text,
            });
        }
        Dataset::new(tweets)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_reader(f, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    /// Sorted distinct labels.
    pub fn labels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.tweets.iter().map(|t| t.label.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn normalize(&self, normalizer: &Normalizer) -> Vec<ProcessedTweet> {
        self.tweets.iter().map(|t| normalizer.normalize(t)).collect()
    }
}

/// One row of a prediction file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub id: String,
    pub label: String,
}

pub fn write_predictions(mut w: impl Write, preds: &[Prediction]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        wtr.write_record(["id", "pred_label"]).expect("in-memory write");
        for p in preds {
            wtr.write_record([&p.id, &p.label]).expect("in-memory write");
        }
        wtr.flush().expect("in-memory flush");
    }
    w.write_all(&buf)
        .map_err(|e| Error::io("<predictions>", e))
}

pub fn read_predictions(reader: impl Read, source: &str) -> Result<Vec<Prediction>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "pred_label"] {
        return Err(Error::parse(source, 1, "expected header id,pred_label"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(source, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::parse(source, line, "expected 2 fields"));
        }
        out.push(Prediction {
            id: rec[0].to_string(),
            label: rec[1].to_string(),
        });
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(f, &path.display().to_string())
}
