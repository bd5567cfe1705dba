//! Tweet normalization: placeholder substitution, contraction unpacking,
//! tokenization, hashtag segmentation and elongation collapsing.
//!
//! Spelling correction and lemmatization are not performed. Callers that
//! have the resources for them can install a [`WordRewriter`], which sees
//! every word token after the built-in steps.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const URL_TOKEN: &str = "<url>";
pub const MENTION_TOKEN: &str = "<mention>";
pub const NUMBER_TOKEN: &str = "<number>";

const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.txt");
const BUNDLED_CONTRACTIONS: &str = include_str!("../data/contractions.tsv");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTweet {
    pub id: String,
    pub label: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedTweet {
    pub id: String,
    pub label: String,
    pub tokens: Vec<String>,
}

/// Unigram word frequencies backing segmentation and elongation decisions.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    counts: HashMap<String, u64>,
    total: u64,
    longest: usize,
}

impl Lexicon {
    pub fn from_counts<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut lex = Lexicon::default();
        for (word, count) in entries {
            let word = word.into();
            lex.insert(word, count)?;
        }
        Ok(lex)
    }

    fn insert(&mut self, word: String, count: u64) -> Result<()> {
        if count == 0 {
            return Err(Error::arg(format!("lexicon count for {word:?} must be >= 1")));
        }
        let word = word.to_lowercase();
        self.longest = self.longest.max(word.chars().count());
        self.total += count;
        *self.counts.entry(word).or_insert(0) += count;
        Ok(())
    }

    /// Parses `word count` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("# ") {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(word), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(source, i + 1, "expected `word count`"));
            };
            let count: u64 = count
                .parse()
                .map_err(|_| Error::parse(source, i + 1, format!("bad count {count:?}")))?;
            if count == 0 {
                return Err(Error::parse(source, i + 1, "count must be >= 1"));
            }
            lex.insert(word.to_string(), count)?;
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::parse(&text, &path.display().to_string())
    }

    /// The general-English lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Lexicon::parse(BUNDLED_LEXICON, "bundled lexicon").expect("bundled lexicon is valid")
    }

    pub fn contains(&self, word: &str) -> bool {
        self.counts.contains_key(word)
    }

    pub fn freq(&self, word: &str) -> Option<u64> {
        self.counts.get(word).copied()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Lowercase contraction → expansion, e.g. `can't` → `can not`.
#[derive(Clone, Debug, Default)]
pub struct Contractions {
    map: HashMap<String, Vec<String>>,
}

impl Contractions {
    /// Parses `contraction<TAB>expansion` lines.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with("# ") {
                continue;
            }
            let Some((short, long)) = line.split_once('\t') else {
                return Err(Error::parse(source, i + 1, "expected `contraction<TAB>expansion`"));
            };
            let expansion: Vec<String> = long.split_whitespace().map(str::to_lowercase).collect();
            if short.trim().is_empty() || expansion.is_empty() {
                return Err(Error::parse(source, i + 1, "empty contraction or expansion"));
            }
            map.insert(normalize_apostrophes(&short.trim().to_lowercase()), expansion);
        }
        Ok(Contractions { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Contractions::parse(&text, &path.display().to_string())
    }

    pub fn bundled() -> Self {
        Contractions::parse(BUNDLED_CONTRACTIONS, "bundled contractions")
            .expect("bundled contractions are valid")
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.map.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Hook for spelling correction or lemmatization.
pub trait WordRewriter: Send + Sync {
    fn rewrite(&self, word: &str) -> Option<String>;
}

fn normalize_apostrophes(s: &str) -> String {
    s.replace(['\u{2019}', '\u{2018}'], "'")
}

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)
            (?P<url>(?i:https?://|www\.)\S+)
            | (?P<ph>(?i:<(?:url|mention|number)>))
            | (?P<mention>@[\p{L}\p{N}_]+)
            | (?P<hashtag>\#[\p{L}\p{N}_]+)
            | (?P<number>\b\p{N}+(?:[.,:]\p{N}+)*\b)
            | (?P<word>[\p{L}\p{N}]+(?:['\u{2019}][\p{L}\p{N}]+)*)
            ",
        )
        .expect("token regex compiles")
    })
}

/// Collapses elongated character runs.
///
/// Runs of three or more identical characters become two; if that form is
/// not a lexicon word the runs become one; if that is not a lexicon word
/// either, the two-character form is kept. Words without a run of three
/// are returned unchanged.
pub fn collapse_elongation(word: &str, lexicon: &Lexicon) -> String {
    let twice = collapse_runs(word, 2);
    if twice == word {
        return twice;
    }
    if lexicon.contains(&twice) {
        return twice;
    }
    let once = collapse_runs(word, 1);
    if lexicon.contains(&once) {
        return once;
    }
    twice
}

/// Caps every run of 3+ identical chars at `keep` characters.
fn collapse_runs(word: &str, keep: usize) -> String {
    let chars: Vec<char> = word.chars().collect();
    let mut out = String::with_capacity(word.len());
    let mut i = 0;
    while i < chars.len() {
        let mut j = i;
        while j < chars.len() && chars[j] == chars[i] {
            j += 1;
        }
        let run = j - i;
        let n = if run >= 3 { keep } else { run };
        out.extend(std::iter::repeat(chars[i]).take(n));
        i = j;
    }
    out
}

/// Splits a hashtag into words.
///
/// The `#` is stripped, the body is cut at case changes, letter/digit
/// transitions and underscores, and each chunk is segmented with a unigram
/// Viterbi search over the lexicon. Characters the lexicon cannot cover are
/// kept together as one token, so a chunk with no known words comes back
/// whole.
pub fn segment_hashtag(tag: &str, lexicon: &Lexicon) -> Result<Vec<String>> {
    let Some(body) = tag.strip_prefix('#') else {
        return Err(Error::arg(format!("hashtag {tag:?} does not start with '#'")));
    };
    let mut out = Vec::new();
    for chunk in camel_chunks(body) {
        out.extend(segment_chunk(&chunk.to_lowercase(), lexicon));
    }
    Ok(out)
}

fn camel_chunks(body: &str) -> Vec<String> {
    let chars: Vec<char> = body.chars().collect();
    let mut chunks = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' {
            if !current.is_empty() {
                chunks.push(std::mem::take(&mut current));
            }
            continue;
        }
        if let Some(&prev) = i.checked_sub(1).and_then(|p| chars.get(p)) {
            let next = chars.get(i + 1).copied();
            let boundary = (c.is_uppercase() && (prev.is_lowercase() || prev.is_numeric()))
                || (c.is_uppercase()
                    && prev.is_uppercase()
                    && next.is_some_and(char::is_lowercase))
                || (c.is_numeric() != prev.is_numeric() && prev != '_');
            if boundary && !current.is_empty() {
                chunks.push(std::mem::take(&mut current));
            }
        }
        current.push(c);
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

/// Viterbi segmentation of a lowercase chunk.
fn segment_chunk(chunk: &str, lexicon: &Lexicon) -> Vec<String> {
    let chars: Vec<char> = chunk.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    // +1 keeps the penalty finite for an empty lexicon.
    let total = (lexicon.total() as f64).max(1.0);
    let unknown = (1.0 / total).ln();
    let max_len = lexicon.longest.max(1);

    let mut best = vec![f64::NEG_INFINITY; n + 1];
    // back[end] = (start, known word?)
    let mut back = vec![(0usize, false); n + 1];
    best[0] = 0.0;
    let mut word = String::new();
    for end in 1..=n {
        for start in end.saturating_sub(max_len)..end {
            if best[start] == f64::NEG_INFINITY {
                continue;
            }
            word.clear();
            word.extend(&chars[start..end]);
            let step = match lexicon.freq(&word) {
                Some(f) => Some(((f as f64) / total).ln()),
                None if end - start == 1 => Some(unknown),
                None => None,
            };
            if let Some(s) = step {
                let known = end - start > 1 || lexicon.contains(&word);
                let score = best[start] + s;
                if score > best[end] {
                    best[end] = score;
                    back[end] = (start, known);
                }
            }
        }
    }

    let mut pieces: Vec<(String, bool)> = Vec::new();
    let mut end = n;
    while end > 0 {
        let (start, known) = back[end];
        pieces.push((chars[start..end].iter().collect(), known));
        end = start;
    }
    pieces.reverse();

    // Glue runs of uncovered characters back together.
    let mut out: Vec<String> = Vec::new();
    let mut prev_unknown = false;
    for (piece, known) in pieces {
        if !known && prev_unknown {
            out.last_mut().expect("previous piece").push_str(&piece);
        } else {
            out.push(piece);
        }
        prev_unknown = !known;
    }
    out
}

/// Text normalizer bound to a lexicon and contraction table.
pub struct Normalizer {
    lexicon: Lexicon,
    contractions: Contractions,
    rewriter: Option<Box<dyn WordRewriter>>,
}

impl Normalizer {
    pub fn new(lexicon: Lexicon, contractions: Contractions) -> Self {
        Normalizer {
            lexicon,
            contractions,
            rewriter: None,
        }
    }

    pub fn bundled() -> Self {
        Normalizer::new(Lexicon::bundled(), Contractions::bundled())
    }

    pub fn with_rewriter(mut self, rewriter: Box<dyn WordRewriter>) -> Self {
        self.rewriter = Some(rewriter);
        self
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn normalize(&self, raw: &RawTweet) -> ProcessedTweet {
        ProcessedTweet {
            id: raw.id.clone(),
            label: raw.label.clone(),
            tokens: self.tokenize(&raw.text),
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        for caps in token_regex().captures_iter(text) {
            if caps.name("url").is_some() {
                tokens.push(URL_TOKEN.to_string());
            } else if let Some(ph) = caps.name("ph") {
                tokens.push(ph.as_str().to_lowercase());
            } else if caps.name("mention").is_some() {
                tokens.push(MENTION_TOKEN.to_string());
            } else if caps.name("number").is_some() {
                tokens.push(NUMBER_TOKEN.to_string());
            } else if let Some(tag) = caps.name("hashtag") {
                let pieces = segment_hashtag(tag.as_str(), &self.lexicon)
                    .expect("regex guarantees leading '#'");
                for piece in pieces {
                    if piece.chars().all(char::is_numeric) {
                        tokens.push(NUMBER_TOKEN.to_string());
                    } else {
                        self.push_word(&piece, &mut tokens);
                    }
                }
            } else if let Some(word) = caps.name("word") {
                self.push_word(&word.as_str().to_lowercase(), &mut tokens);
            }
        }
        tokens
    }

    fn push_word(&self, word: &str, out: &mut Vec<String>) {
        let word = normalize_apostrophes(word);
        let parts: Vec<&str> = match self.contractions.get(&word) {
            Some(expansion) => expansion.iter().map(String::as_str).collect(),
            None => word.split('\'').filter(|p| !p.is_empty()).collect(),
        };
        for part in parts {
            let mut w = collapse_elongation(part, &self.lexicon);
            if let Some(rw) = &self.rewriter {
                if let Some(replacement) = rw.rewrite(&w) {
                    w = replacement;
                }
            }
            out.extend(w.split_whitespace().map(str::to_string));
        }
    }
}

/// Free-function form of [`Normalizer::normalize`].
pub fn normalize(raw: &RawTweet, lexicon: &Lexicon, contractions: &Contractions) -> ProcessedTweet {
    Normalizer::new(lexicon.clone(), contractions.clone()).normalize(raw)
}
