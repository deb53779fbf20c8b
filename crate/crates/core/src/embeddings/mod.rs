//! Per-time-slice word embeddings and the semantic-stability features.
//!
//! The corpus is cut into consecutive time slices, one skip-gram model is
//! trained per slice, and a word's stability is the Jaccard similarity of its
//! top-K neighbour sets in consecutive slices (min / max / mean).

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document, SENTENCE_MARKS};
use crate::seed;
use crate::time::Span;

pub mod skipgram;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("invalid embedding parameter: {0}")]
    InvalidParams(&'static str),
    #[error("no documents to train on")]
    NoDocuments,
    #[error("vocabulary is empty after min_count filtering")]
    EmptyVocabulary,
    #[error("semantic stability needs at least two slice models, got {0}")]
    TooFewModels(usize),
    #[error("model file line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EmbeddingError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Decays linearly to 1e-4 over training.
    pub initial_learning_rate: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dim: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_learning_rate: 0.025,
            min_count: 5,
            seed: 1,
        }
    }
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what| {
            if ok {
                Ok(())
            } else {
                Err(EmbeddingError::InvalidParams(what))
            }
        };
        check(self.dim >= 1, "dim must be >= 1")?;
        check(self.window >= 1, "window must be >= 1")?;
        check(self.negatives >= 1, "negatives must be >= 1")?;
        check(self.epochs >= 1, "epochs must be >= 1")?;
        check(self.min_count >= 1, "min_count must be >= 1")?;
        check(
            self.initial_learning_rate > 0.0 && self.initial_learning_rate.is_finite(),
            "learning rate must be > 0",
        )
    }
}

/// Split text into sentences of word tokens. Tokens are whitespace-delimited
/// with leading and trailing non-alphanumeric characters stripped; case is
/// preserved.
pub fn tokenize(text: &str) -> Vec<Vec<String>> {
    let chars: Vec<char> = text.chars().collect();
    let piece = |s: usize, e: usize| chars[s..e].iter().collect::<String>();
    let mut out = Vec::new();
    let mut push_sentence = |sentence: &str| {
        let words: Vec<String> = sentence
            .split_whitespace()
            .filter_map(clean_token)
            .collect();
        if !words.is_empty() {
            out.push(words);
        }
    };
    let mut start = 0;
    for (i, c) in chars.iter().enumerate() {
        if SENTENCE_MARKS.contains(c) {
            push_sentence(&piece(start, i));
            start = i + 1;
        }
    }
    push_sentence(&piece(start, chars.len()));
    out
}

fn clean_token(raw: &str) -> Option<String> {
    let t = raw.trim_matches(|c: char| !c.is_alphanumeric());
    (!t.is_empty()).then(|| t.to_string())
}

/// The word used to look up a (possibly multi-word) mention: its longest
/// token by character count, lexicographically smallest on ties.
pub fn mention_word(surface: &str) -> Option<String> {
    surface
        .split_whitespace()
        .filter_map(clean_token)
        .min_by(|a, b| {
            b.chars()
                .count()
                .cmp(&a.chars().count())
                .then_with(|| a.cmp(b))
        })
}

/// Documents published within one time slice.
#[derive(Debug, Clone)]
pub struct TimeSlice<'a> {
    /// ISO date of the slice start.
    pub label: String,
    pub documents: Vec<&'a Document>,
}

/// Group documents into consecutive `granularity`-sized slices, aligned to
/// the start of the first document's year (or month, for month spans).
/// Empty slices are omitted.
pub fn slice_corpus(corpus: &Corpus, granularity: Span) -> Vec<TimeSlice<'_>> {
    let Some((first, _)) = corpus.period() else {
        return Vec::new();
    };
    let origin = granularity.origin(first);
    let mut buckets: std::collections::BTreeMap<u64, Vec<&Document>> = Default::default();
    for doc in corpus.documents() {
        buckets
            .entry(granularity.bucket(origin, doc.publication_date))
            .or_default()
            .push(doc);
    }
    buckets
        .into_iter()
        .map(|(b, documents)| TimeSlice {
            label: granularity.bucket_start(origin, b).to_string(),
            documents,
        })
        .collect()
}

/// A trained word-vector table for one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    slice_label: String,
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vectors: Vec<f32>,
}

/// Neighbours of a query word; `oov` is set when the query is not in the
/// vocabulary (and `words` is then empty).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopK {
    pub words: Vec<String>,
    pub oov: bool,
}

impl EmbeddingModel {
    pub fn from_parts(
        slice_label: &str,
        words: Vec<String>,
        dim: usize,
        vectors: Vec<f32>,
    ) -> Result<Self> {
        if dim == 0 || vectors.len() != words.len() * dim {
            return Err(EmbeddingError::InvalidParams(
                "vector table does not match vocabulary size and dim",
            ));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::InvalidParams("vectors must be finite"));
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect::<HashMap<_, _>>();
        if index.len() != words.len() {
            return Err(EmbeddingError::InvalidParams("duplicate vocabulary word"));
        }
        Ok(EmbeddingModel {
            slice_label: slice_label.replace(char::is_whitespace, "_"),
            words,
            index,
            dim,
            vectors,
        })
    }

    pub fn slice_label(&self) -> &str {
        &self.slice_label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Cosine similarity; 0 when either vector has zero norm.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.vector(a)?, self.vector(b)?))
    }

    /// The `k` most cosine-similar other words, ties broken by word order.
    pub fn top_k_similar(&self, word: &str, k: usize) -> TopK {
        let Some(query) = self.vector(word) else {
            return TopK {
                words: Vec::new(),
                oov: true,
            };
        };
        let mut scored: Vec<(f64, &str)> = self
            .words
            .iter()
            .filter(|w| w.as_str() != word)
            .map(|w| {
                (
                    cosine(query, self.vector(w).expect("vocabulary word")),
                    w.as_str(),
                )
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        TopK {
            words: scored
                .into_iter()
                .take(k)
                .map(|(_, w)| w.to_string())
                .collect(),
            oov: false,
        }
    }

    /// Text format: a `|vocab| dim slice_label` header, then `word v1 .. vdim`
    /// per line. Values are written in shortest round-trip form (at most nine
    /// significant digits for `f32`).
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.words.len(), self.dim, self.slice_label)?;
        for (i, word) in self.words.iter().enumerate() {
            w.write_all(word.as_bytes())?;
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {v}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let corrupt = |line: usize, message: &str| EmbeddingError::Corrupt {
            line,
            message: message.to_string(),
        };
        let header = lines.next().ok_or_else(|| corrupt(1, "missing header"))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [n, dim, label] = parts[..] else {
            return Err(corrupt(1, "expected `size dim label`"));
        };
        let n: usize = n.parse().map_err(|_| corrupt(1, "bad vocabulary size"))?;
        let dim: usize = dim.parse().map_err(|_| corrupt(1, "bad dimension"))?;
        let mut words = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * dim);
        for i in 0..n {
            let lineno = i + 2;
            let line = lines
                .next()
                .ok_or_else(|| corrupt(lineno, "truncated file"))??;
            let mut fields = line.split(' ');
            let word = fields
                .next()
                .filter(|w| !w.is_empty())
                .ok_or_else(|| corrupt(lineno, "missing word"))?;
            let before = vectors.len();
            for f in fields {
                vectors.push(
                    f.parse::<f32>()
                        .map_err(|_| corrupt(lineno, "bad number"))?,
                );
            }
            if vectors.len() - before != dim {
                return Err(corrupt(lineno, "wrong number of components"));
            }
            words.push(word.to_string());
        }
        EmbeddingModel::from_parts(label, words, dim, vectors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Train one skip-gram model on `docs`. Single-threaded and deterministic
/// for a fixed `params.seed`.
pub fn train_skipgram(
    docs: &[&Document],
    params: &EmbeddingParams,
    slice_label: &str,
) -> Result<EmbeddingModel> {
    skipgram::train(docs, params, slice_label)
}

/// Train one model per slice, in parallel across slices. Slice `i` uses the
/// seed `derive(params.seed, i)`, so output does not depend on thread count.
/// Slices whose vocabulary is empty after filtering are skipped.
pub fn train_slices(
    slices: &[TimeSlice<'_>],
    params: &EmbeddingParams,
) -> Result<Vec<EmbeddingModel>> {
    params.validate()?;
    let results: Vec<Result<EmbeddingModel>> = slices
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let p = EmbeddingParams {
                seed: seed::derive(params.seed, i as u64),
                ..params.clone()
            };
            train_skipgram(&s.documents, &p, &s.label)
        })
        .collect();
    let mut models = Vec::with_capacity(results.len());
    for (slice, r) in slices.iter().zip(results) {
        match r {
            Ok(m) => models.push(m),
            Err(EmbeddingError::EmptyVocabulary) => {
                log::warn!("slice {} has no word above min_count; skipped", slice.label);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(models)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jaccard {
    pub value: f64,
    /// Both sets were empty; `value` is then 0 by convention.
    pub both_empty: bool,
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Jaccard {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        Jaccard {
            value: 0.0,
            both_empty: true,
        }
    } else {
        Jaccard {
            value: inter as f64 / union as f64,
            both_empty: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
}

/// Jaccard similarity of `word`'s top-`k` neighbours over consecutive model
/// pairs that both contain the word. `None` when no such pair exists.
pub fn semantic_stability(
    models: &[EmbeddingModel],
    word: &str,
    k: usize,
) -> Result<Option<Stability>> {
    if models.len() < 2 {
        return Err(EmbeddingError::TooFewModels(models.len()));
    }
    let sets: Vec<Option<BTreeSet<String>>> = models
        .iter()
        .map(|m| {
            let top = m.top_k_similar(word, k);
            (!top.oov).then(|| top.words.into_iter().collect())
        })
        .collect();
    Ok(stability_of_sets(&sets))
}

/// Stability over consecutive neighbour sets; `None` entries mark slices
/// where the word is out of vocabulary.
pub fn stability_of_sets(sets: &[Option<BTreeSet<String>>]) -> Option<Stability> {
    let values: Vec<f64> = sets
        .windows(2)
        .filter_map(|w| match (&w[0], &w[1]) {
            (Some(a), Some(b)) => Some(jaccard(a, b).value),
            _ => None,
        })
        .collect();
    if values.is_empty() {
        return None;
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let avg = (values.iter().sum::<f64>() / values.len() as f64).clamp(min, max);
    Some(Stability { min, max, avg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn hand_model(label: &str, rows: &[(&str, [f32; 2])]) -> EmbeddingModel {
        let words = rows.iter().map(|r| r.0.to_string()).collect();
        let vectors = rows.iter().flat_map(|r| r.1).collect();
        EmbeddingModel::from_parts(label, words, 2, vectors).unwrap()
    }

    fn doc(id: &str, date: &str) -> Document {
        Document::new(id, date.parse::<NaiveDate>().unwrap(), None, "x").unwrap()
    }

    #[test]
    fn jaccard_cases() {
        assert_eq!(
            jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])).value,
            0.5
        );
        assert_eq!(jaccard(&set(&["a", "b"]), &set(&["a", "b"])).value, 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&["b"])).value, 0.0);
        let e = jaccard::<String>(&set(&[]), &set(&[]));
        assert!(e.both_empty);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn top_k_on_hand_vectors() {
        // cos(q,a) = 1/sqrt(2) ~ 0.707, cos(q,b) = 0.6, so a comes first
        let m = hand_model(
            "s",
            &[("q", [1.0, 0.0]), ("a", [1.0, 1.0]), ("b", [3.0, 4.0])],
        );
        assert_eq!(m.top_k_similar("q", 1).words, vec!["a"]);
        assert_eq!(m.top_k_similar("q", 5).words, vec!["a", "b"]);
        let oov = m.top_k_similar("zzz", 3);
        assert!(oov.oov && oov.words.is_empty());
    }

    #[test]
    fn top_k_ties_break_lexicographically() {
        let m = hand_model(
            "s",
            &[
                ("q", [1.0, 0.0]),
                ("zeta", [2.0, 0.0]),
                ("alpha", [1.0, 0.0]),
            ],
        );
        assert_eq!(m.top_k_similar("q", 1).words, vec!["alpha"]);
    }

    #[test]
    fn stability_from_hand_sets() {
        // {a,b,c} vs {a,d,e}: 1 shared of 5 = 0.2; {a,d,e} vs {a,d,e,f,g}: 3 of 5 = 0.6
        let sets = vec![
            Some(set(&["a", "b", "c"])),
            Some(set(&["a", "d", "e"])),
            Some(set(&["a", "d", "e", "f", "g"])),
        ];
        let st = stability_of_sets(&sets).unwrap();
        assert!((st.min - 0.2).abs() < 1e-12);
        assert!((st.max - 0.6).abs() < 1e-12);
        assert!((st.avg - 0.4).abs() < 1e-12);

        // an out-of-vocabulary middle slice leaves no consecutive valid pair
        let gaps = vec![Some(set(&["a"])), None, Some(set(&["a"]))];
        assert_eq!(stability_of_sets(&gaps), None);
    }

    #[test]
    fn stability_with_identical_slices_and_oov() {
        let rows = [
            ("w", [1.0, 0.0]),
            ("a", [1.0, 0.1]),
            ("b", [0.0, 1.0]),
            ("c", [-1.0, 0.0]),
        ];
        let models = vec![
            hand_model("1", &rows),
            hand_model("2", &rows),
            hand_model("3", &rows),
        ];
        let st = semantic_stability(&models, "w", 2).unwrap().unwrap();
        assert_eq!((st.min, st.max, st.avg), (1.0, 1.0, 1.0));
        assert_eq!(semantic_stability(&models, "nowhere", 2).unwrap(), None);
        assert!(matches!(
            semantic_stability(&models[..1], "w", 2),
            Err(EmbeddingError::TooFewModels(1))
        ));
    }

    #[test]
    fn mention_word_rule() {
        assert_eq!(mention_word("John McCain").as_deref(), Some("McCain"));
        assert_eq!(mention_word("Ab Cd").as_deref(), Some("Ab"));
        assert_eq!(mention_word("New York Times").as_deref(), Some("Times"));
        assert_eq!(mention_word("...").as_deref(), None);
    }

    #[test]
    fn tokenizer_splits_sentences_and_strips_punctuation() {
        assert_eq!(
            tokenize("Hello, world. (Big) day!"),
            vec![vec!["Hello", "world"], vec!["Big", "day"]]
        );
    }

    #[test]
    fn slicing_by_year() {
        let c = Corpus::from_documents(vec![
            doc("a", "1990-03-01"),
            doc("b", "1990-11-01"),
            doc("c", "1992-05-05"),
        ])
        .unwrap();
        let slices = slice_corpus(&c, Span::years(1).unwrap());
        assert_eq!(slices.len(), 2);
        assert_eq!(
            (slices[0].label.as_str(), slices[0].documents.len()),
            ("1990-01-01", 2)
        );
        assert_eq!(
            (slices[1].label.as_str(), slices[1].documents.len()),
            ("1992-01-01", 1)
        );

        let one = Corpus::from_documents(vec![doc("a", "1990-03-01")]).unwrap();
        assert_eq!(slice_corpus(&one, Span::years(1).unwrap()).len(), 1);
        assert_eq!(slice_corpus(&c, Span::years(3).unwrap()).len(), 1);
    }

    #[test]
    fn persistence_round_trip() {
        let m = hand_model(
            "1990-01-01",
            &[("a", [0.1, -1.0e-7]), ("b", [1.0 / 3.0, 12345.679])],
        );
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("2 2 1990-01-01\n"));
        assert_eq!(EmbeddingModel::read(buf.as_slice()).unwrap(), m);
        let truncated = &buf[..buf.len() - 10];
        assert!(matches!(
            EmbeddingModel::read(truncated),
            Err(EmbeddingError::Corrupt { .. })
        ));
    }

    #[test]
    fn params_are_validated() {
        let p = EmbeddingParams {
            window: 0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(EmbeddingParams::default().validate().is_ok());
    }
}
