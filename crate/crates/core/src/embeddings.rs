//! Vocabulary construction, pretrained vector ingestion and fixed-length
//! sequence encoding.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::preprocess::ProcessedTweet;
use crate::rng::RngStream;
use crate::tensor::Tensor;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const DEFAULT_SEQ_LEN: usize = 100;
/// Half-width of the uniform range used for words without a pretrained vector.
pub const OOV_RANGE: f64 = 0.25;

/// Word ↔ index map. Index 0 is padding, 1 is unknown, words start at 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    words: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            index: HashMap::new(),
            words: vec!["<pad>".to_string(), "<unk>".to_string()],
        }
    }
}

impl Vocabulary {
    /// Indexes words in first-seen order.
    pub fn build<'a>(tweets: impl IntoIterator<Item = &'a ProcessedTweet>) -> Self {
        let mut v = Vocabulary::default();
        for t in tweets {
            for tok in &t.tokens {
                v.add(tok);
            }
        }
        v
    }

    pub fn add(&mut self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let i = self.words.len();
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), i);
        i
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        (index >= 2).then(|| self.words.get(index).map(String::as_str)).flatten()
    }

    /// Total rows including PAD and UNK.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// True when no surface words are indexed.
    pub fn is_empty(&self) -> bool {
        self.words.len() == 2
    }

    /// Surface words in index order (excluding PAD/UNK).
    pub fn words(&self) -> &[String] {
        &self.words[2..]
    }

    /// One word per line, in index order starting at index 2.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for w in self.words() {
            s.push_str(w);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut v = Vocabulary::default();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.chars().any(char::is_whitespace) {
                return Err(Error::parse("vocabulary", i + 1, "expected one word per line"));
            }
            if v.get(line).is_some() {
                return Err(Error::parse("vocabulary", i + 1, format!("duplicate word {line:?}")));
            }
            v.add(line);
        }
        Ok(v)
    }

    /// Maps tokens to indices, truncating to `max_len` or post-padding with PAD.
    pub fn encode(&self, tokens: &[String], max_len: usize) -> Vec<usize> {
        let mut out: Vec<usize> = tokens
            .iter()
            .take(max_len)
            .map(|t| self.get(t).unwrap_or(UNK))
            .collect();
        out.resize(max_len, PAD);
        out
    }

    /// Inverse of [`encode`](Self::encode); padding is dropped, UNK shown as `<unk>`.
    pub fn decode(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .filter(|&&i| i != PAD)
            .map(|&i| self.words.get(i).cloned().unwrap_or_else(|| "<unk>".to_string()))
            .collect()
    }
}

pub fn encode(tweet: &ProcessedTweet, vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    vocab.encode(&tweet.tokens, max_len)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingFormat {
    /// `V d` header line, then `word v1 … vd`.
    Word2VecText,
    /// No header; dimension taken from the first line.
    GloveText,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec-text" | "word2vec" => Ok(EmbeddingFormat::Word2VecText),
            "glove-text" | "glove" => Ok(EmbeddingFormat::GloveText),
            other => Err(Error::arg(format!(
                "unknown embedding format {other:?} (expected word2vec-text or glove-text)"
            ))),
        }
    }
}

impl EmbeddingFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingFormat::Word2VecText => "word2vec-text",
            EmbeddingFormat::GloveText => "glove-text",
        }
    }
}

/// Pretrained word vectors.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn parse(text: &str, format: EmbeddingFormat, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut dim = None;
        let mut declared_rows = None;
        if format == EmbeddingFormat::Word2VecText {
            let (_, header) = lines
                .next()
                .ok_or_else(|| Error::parse(source, 1, "missing `V d` header"))?;
            let nums: Vec<&str> = header.split_whitespace().collect();
            let parsed: Option<(usize, usize)> = match nums.as_slice() {
                [v, d] => v.parse().ok().zip(d.parse().ok()),
                _ => None,
            };
            let (v, d) = parsed.ok_or_else(|| Error::parse(source, 1, "header must be `V d`"))?;
            if d == 0 {
                return Err(Error::parse(source, 1, "dimension must be positive"));
            }
            dim = Some(d);
            declared_rows = Some(v);
        }

        let mut vectors = HashMap::new();
        let mut rows = 0usize;
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line");
            let values: Vec<f64> = parts
                .map(|p| {
                    p.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::parse(source, lineno, format!("bad value {p:?}")))
                })
                .collect::<Result<_>>()?;
            if values.is_empty() {
                return Err(Error::parse(source, lineno, "word without a vector"));
            }
            let d = *dim.get_or_insert(values.len());
            if values.len() != d {
                return Err(Error::format(format!(
                    "{source}:{lineno}: vector has {} values, expected {d}",
                    values.len()
                )));
            }
            rows += 1;
            vectors.entry(word.to_string()).or_insert(values);
        }
        if let Some(v) = declared_rows {
            if v != rows {
                return Err(Error::format(format!(
                    "{source}: header declares {v} vectors, found {rows}"
                )));
            }
        }
        let dim = dim.ok_or_else(|| Error::format(format!("{source}: no vectors")))?;
        Ok(EmbeddingTable { dim, vectors })
    }

    pub fn load(path: &Path, format: EmbeddingFormat) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EmbeddingTable::parse(&text, format, &path.display().to_string())
    }
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingTable> {
    EmbeddingTable::load(path, format)
}

/// Vocabulary-aligned lookup table (`V × d`).
#[derive(Clone, Debug)]
pub struct EmbeddingMatrix {
    pub weights: Tensor,
    pub oov_words: BTreeSet<String>,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn rows(&self) -> usize {
        self.weights.rows()
    }

    /// Share of surface words without a pretrained vector.
    pub fn oov_rate(&self) -> f64 {
        let words = self.rows().saturating_sub(2);
        if words == 0 {
            0.0
        } else {
            self.oov_words.len() as f64 / words as f64
        }
    }

    /// Gathers rows for an index sequence into a `T × d` tensor.
    pub fn lookup(&self, indices: &[usize]) -> Result<Tensor> {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for (pos, &i) in indices.iter().enumerate() {
            if i >= self.rows() {
                return Err(Error::data(format!(
                    "token index {i} at position {pos} exceeds vocabulary size {}",
                    self.rows()
                )));
            }
            data.extend_from_slice(self.weights.row(i));
        }
        Tensor::new(vec![indices.len(), d], data)
    }
}

/// Builds the lookup matrix: pretrained rows copied, UNK and OOV rows drawn
/// from `uniform[-0.25, 0.25)`, PAD left at zero.
pub fn build_matrix(vocab: &Vocabulary, table: &EmbeddingTable, seed: u64) -> Result<EmbeddingMatrix> {
    if vocab.is_empty() {
        return Err(Error::arg("cannot build an embedding matrix for an empty vocabulary"));
    }
    let d = table.dim();
    if d == 0 {
        return Err(Error::arg("embedding dimension must be positive"));
    }
    let mut rng = RngStream::new(seed);
    let mut weights = Tensor::zeros(&[vocab.len(), d]);
    let unk = rng.uniform(-OOV_RANGE, OOV_RANGE, d)?;
    weights.row_mut(UNK).copy_from_slice(unk.data());
    let mut oov_words = BTreeSet::new();
    for (offset, word) in vocab.words().iter().enumerate() {
        let row = offset + 2;
        match table.get(word) {
            Some(v) => weights.row_mut(row).copy_from_slice(v),
            None => {
                let r = rng.uniform(-OOV_RANGE, OOV_RANGE, d)?;
                weights.row_mut(row).copy_from_slice(r.data());
                oov_words.insert(word.clone());
            }
        }
    }
    let m = EmbeddingMatrix { weights, oov_words };
    log::info!(
        "embedding matrix {}x{}, OOV rate {:.1}%",
        m.rows(),
        d,
        100.0 * m.oov_rate()
    );
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(tokens: &[&str]) -> ProcessedTweet {
        ProcessedTweet {
            id: "x".into(),
            label: "l".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn word2vec_and_glove_parse() {
        let w2v = "3 4\na 1 2 3 4\nb 0 0 0 1\nc -1 0.5 2e-1 3\n";
        let t = EmbeddingTable::parse(w2v, EmbeddingFormat::Word2VecText, "m").unwrap();
        assert_eq!((t.len(), t.dim()), (3, 4));
        assert_eq!(t.get("c").unwrap(), &[-1.0, 0.5, 0.2, 3.0]);

        let glove = "a 1 2 3\nb 4 5 6\n";
        let t = EmbeddingTable::parse(glove, EmbeddingFormat::GloveText, "m").unwrap();
        assert_eq!(t.dim(), 3);
    }

    #[test]
    fn duplicate_keeps_first() {
        let mut text = String::new();
        for (i, w) in ["a", "b", "c", "d", "dup", "e", "f", "g", "dup"].iter().enumerate() {
            text.push_str(&format!("{w} {i} {i}\n"));
        }
        let t = EmbeddingTable::parse(&text, EmbeddingFormat::GloveText, "m").unwrap();
        // First "dup" is on line 5 with value 4.
        assert_eq!(t.get("dup").unwrap(), &[4.0, 4.0]);
    }

    #[test]
    fn malformed_lines() {
        let err = EmbeddingTable::parse("a 1 2\nb 1 x\n", EmbeddingFormat::GloveText, "e.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = EmbeddingTable::parse("a 1 2\nb 1 2 3\n", EmbeddingFormat::GloveText, "e.txt").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        let err = EmbeddingTable::parse("2 2\na 1 2\n", EmbeddingFormat::Word2VecText, "e").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(EmbeddingTable::parse("x y\n", EmbeddingFormat::Word2VecText, "e").is_err());
    }

    #[test]
    fn vocabulary_order_and_reserved() {
        let v = Vocabulary::build(&[tweet(&["b", "a", "b"]), tweet(&["c"])]);
        assert_eq!(v.get("b"), Some(2));
        assert_eq!(v.get("a"), Some(3));
        assert_eq!(v.get("c"), Some(4));
        assert_eq!(v.word(PAD), None);
        assert_eq!(v.word(UNK), None);
        assert_eq!(Vocabulary::from_text(&v.to_text()).unwrap(), v);
    }

    #[test]
    fn encode_pads_and_truncates() {
        let toks: Vec<String> = (0..150).map(|i| format!("w{i}")).collect();
        let v = Vocabulary::build(&[tweet(&[])]);
        assert_eq!(v.encode(&[], 100), vec![PAD; 100]);
        let mut v2 = Vocabulary::default();
        for t in &toks {
            v2.add(t);
        }
        let three = v2.encode(&toks[..3], 100);
        assert_eq!(&three[..3], &[2, 3, 4]);
        assert!(three[3..].iter().all(|&i| i == PAD));
        assert_eq!(three.len(), 100);
        let long = v2.encode(&toks, 100);
        assert_eq!(long, (2..102).collect::<Vec<_>>());
        assert_eq!(v2.encode(&["nope".to_string()], 2), vec![UNK, PAD]);
        assert_eq!(v2.decode(&long), toks[..100].to_vec());
    }

    #[test]
    fn matrix_rows() {
        let table = EmbeddingTable::parse("a 1 2\nb 3 4\n", EmbeddingFormat::GloveText, "m").unwrap();
        let vocab = Vocabulary::build(&[tweet(&["a", "b"])]);
        let m = build_matrix(&vocab, &table, 5).unwrap();
        assert_eq!(m.weights.row(PAD), &[0.0, 0.0]);
        assert_eq!(m.weights.row(2), &[1.0, 2.0]);
        assert_eq!(m.weights.row(3), &[3.0, 4.0]);
        assert!(m.oov_words.is_empty());
        assert_eq!(m.oov_rate(), 0.0);

        let vocab = Vocabulary::build(&[tweet(&["a", "zz", "yy"])]);
        let m1 = build_matrix(&vocab, &table, 9).unwrap();
        let m2 = build_matrix(&vocab, &table, 9).unwrap();
        assert_eq!(m1.weights, m2.weights);
        assert_eq!(m1.oov_words.len(), 2);
        assert!(m1.weights.row(3).iter().all(|x| x.abs() <= OOV_RANGE));
        assert!(build_matrix(&Vocabulary::default(), &table, 1).is_err());
    }

    #[test]
    fn lookup_rejects_out_of_range() {
        let table = EmbeddingTable::parse("a 1\n", EmbeddingFormat::GloveText, "m").unwrap();
        let vocab = Vocabulary::build(&[tweet(&["a"])]);
        let m = build_matrix(&vocab, &table, 1).unwrap();
        let err = m.lookup(&[2, 0, 7]).unwrap_err().to_string();
        assert!(err.contains("position 2"), "{err}");
    }
}
