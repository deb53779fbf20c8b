//! The mention / document / temporal feature vector of a mention.
//!
//! | column | meaning |
//! |---|---|
//! | `m_len` | characters in the mention |
//! | `m_words` | whitespace-delimited words in the mention |
//! | `m_freq` | occurrences of the mention in its document |
//! | `m_df` | documents containing the mention |
//! | `m_cand` | candidate entities in the anchor dictionary |
//! | `m_pos` | mention start offset / document length |
//! | `m_sent` | characters of the sentence holding the mention |
//! | `d_words` | words in the document |
//! | `d_topic` | document topic (categorical) |
//! | `d_ents` | distinct mention spans any system found in the document |
//! | `t_age` | `kb_year` minus publication year |
//! | `t_df` | documents containing the mention within the temporal window |
//! | `t_j_min`, `t_j_max`, `t_j_avg` | semantic stability across time slices |

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::Datelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{DifficultyLabel, MentionKey, MentionRecord, SystemAnnotation};
use crate::corpus::{self, Corpus, CorpusError, MatchMode, SurfaceIndex};
use crate::embeddings::{self, EmbeddingModel, Stability};
use crate::time::{Span, Window};

mod dictionary;
mod table;

pub use dictionary::{load_candidate_dictionary, CandidateDictionary};
pub use table::{impute, FeatureSchema, FeatureTable, ImputePolicy, UNKNOWN_TOPIC};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("mention {0} extends beyond its document")]
    OffsetOutOfRange(MentionKey),
    #[error("mention #{index} ({key}): {source}")]
    AtMention {
        index: usize,
        key: MentionKey,
        #[source]
        source: Box<FeatureError>,
    },
    #[error("candidate dictionary line {line}: {message}")]
    MalformedDictionary { line: usize, message: String },
    #[error("feature table: {0}")]
    Table(String),
    #[error("unknown feature column {0:?}")]
    UnknownColumn(String),
    #[error("feature schema must name at least one column")]
    EmptySchema,
    #[error("column {0} is missing in every row")]
    AllMissing(Feature),
    #[error("cannot impute an empty table")]
    EmptyTable,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// One column of the feature table, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Feature {
    MLen,
    MWords,
    MFreq,
    MDf,
    MCand,
    MPos,
    MSent,
    DWords,
    DTopic,
    DEnts,
    TAge,
    TDf,
    TJMin,
    TJMax,
    TJAvg,
}

pub const N_FEATURES: usize = 15;

impl Feature {
    pub const ALL: [Feature; N_FEATURES] = [
        Feature::MLen,
        Feature::MWords,
        Feature::MFreq,
        Feature::MDf,
        Feature::MCand,
        Feature::MPos,
        Feature::MSent,
        Feature::DWords,
        Feature::DTopic,
        Feature::DEnts,
        Feature::TAge,
        Feature::TDf,
        Feature::TJMin,
        Feature::TJMax,
        Feature::TJAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::MLen => "m_len",
            Feature::MWords => "m_words",
            Feature::MFreq => "m_freq",
            Feature::MDf => "m_df",
            Feature::MCand => "m_cand",
            Feature::MPos => "m_pos",
            Feature::MSent => "m_sent",
            Feature::DWords => "d_words",
            Feature::DTopic => "d_topic",
            Feature::DEnts => "d_ents",
            Feature::TAge => "t_age",
            Feature::TDf => "t_df",
            Feature::TJMin => "t_j_min",
            Feature::TJMax => "t_j_max",
            Feature::TJAvg => "t_j_avg",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_categorical(self) -> bool {
        self == Feature::DTopic
    }

    pub fn is_temporal(self) -> bool {
        matches!(
            self,
            Feature::TAge | Feature::TDf | Feature::TJMin | Feature::TJMax | Feature::TJAvg
        )
    }

    /// Columns that may be missing in a freshly extracted table.
    pub fn may_be_missing(self) -> bool {
        matches!(
            self,
            Feature::DTopic | Feature::TJMin | Feature::TJMax | Feature::TJAvg
        )
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| FeatureError::UnknownColumn(s.to_string()))
    }
}

/// The value of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Num(Option<f64>),
    Cat(Option<&'a str>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub m_len: usize,
    pub m_words: usize,
    pub m_freq: usize,
    pub m_df: usize,
    pub m_cand: usize,
    pub m_pos: f64,
    pub m_sent: usize,
    pub d_words: usize,
    pub d_topic: Option<String>,
    pub d_ents: usize,
    /// May be negative for documents newer than the knowledge base.
    pub t_age: i32,
    pub t_df: usize,
    pub t_j_min: Option<f64>,
    pub t_j_max: Option<f64>,
    pub t_j_avg: Option<f64>,
    pub label: Option<DifficultyLabel>,
    /// Set for every column whose value was missing at extraction time.
    /// Imputation fills values but keeps these flags.
    pub missing_mask: [bool; N_FEATURES],
}

impl FeatureVector {
    pub fn cell(&self, f: Feature) -> Cell<'_> {
        let n = |v: usize| Cell::Num(Some(v as f64));
        match f {
            Feature::MLen => n(self.m_len),
            Feature::MWords => n(self.m_words),
            Feature::MFreq => n(self.m_freq),
            Feature::MDf => n(self.m_df),
            Feature::MCand => n(self.m_cand),
            Feature::MPos => Cell::Num(Some(self.m_pos)),
            Feature::MSent => n(self.m_sent),
            Feature::DWords => n(self.d_words),
            Feature::DTopic => Cell::Cat(self.d_topic.as_deref()),
            Feature::DEnts => n(self.d_ents),
            Feature::TAge => Cell::Num(Some(f64::from(self.t_age))),
            Feature::TDf => n(self.t_df),
            Feature::TJMin => Cell::Num(self.t_j_min),
            Feature::TJMax => Cell::Num(self.t_j_max),
            Feature::TJAvg => Cell::Num(self.t_j_avg),
        }
    }

    /// Numeric value of a continuous column; `None` when missing.
    pub fn numeric(&self, f: Feature) -> Option<f64> {
        match self.cell(f) {
            Cell::Num(v) => v,
            Cell::Cat(_) => None,
        }
    }

    pub fn is_missing(&self, f: Feature) -> bool {
        self.missing_mask[f.index()]
    }

    fn set_stability(&mut self, s: Option<Stability>) {
        match s {
            Some(s) => {
                self.t_j_min = Some(s.min);
                self.t_j_max = Some(s.max);
                self.t_j_avg = Some(s.avg);
            }
            None => {
                self.t_j_min = None;
                self.t_j_max = None;
                self.t_j_avg = None;
                for f in [Feature::TJMin, Feature::TJMax, Feature::TJAvg] {
                    self.missing_mask[f.index()] = true;
                }
            }
        }
    }

    /// Check the value-range invariants; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.m_words > self.m_len {
            return Err(format!("m_words {} > m_len {}", self.m_words, self.m_len));
        }
        if !(0.0..=1.0).contains(&self.m_pos) {
            return Err(format!("m_pos {} outside [0, 1]", self.m_pos));
        }
        let unit = |v: Option<f64>| v.is_none_or(|x| (0.0..=1.0).contains(&x));
        if !(unit(self.t_j_min) && unit(self.t_j_max) && unit(self.t_j_avg)) {
            return Err("stability value outside [0, 1]".into());
        }
        if let (Some(lo), Some(mid), Some(hi)) = (self.t_j_min, self.t_j_avg, self.t_j_max) {
            if !(lo <= mid && mid <= hi) {
                return Err(format!("stability order violated: {lo} {mid} {hi}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub kb_year: i32,
    /// Window for `t_df`.
    pub window: Window,
    /// Neighbours compared for semantic stability.
    pub top_k: usize,
    /// Time-slice length for the embedding models.
    pub granularity: Span,
    pub match_mode: MatchMode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            kb_year: 2016,
            window: Window::Around(Span::months(6).expect("non-zero")),
            top_k: 50,
            granularity: Span::years(1).expect("non-zero"),
            match_mode: MatchMode::Substring,
        }
    }
}

/// Number of distinct `(offset, surface)` spans per document, over the
/// union of every system's annotations.
#[derive(Debug, Clone, Default)]
pub struct DocumentEntityCounts {
    counts: HashMap<String, usize>,
}

impl DocumentEntityCounts {
    pub fn from_annotations<'a, I>(systems: I) -> Self
    where
        I: IntoIterator<Item = &'a [SystemAnnotation]>,
    {
        let mut spans: HashMap<&str, HashSet<(usize, &str)>> = HashMap::new();
        for anns in systems {
            for a in anns {
                spans
                    .entry(a.doc_id.as_str())
                    .or_default()
                    .insert((a.offset, a.surface.as_str()));
            }
        }
        DocumentEntityCounts {
            counts: spans
                .into_iter()
                .map(|(d, s)| (d.to_string(), s.len()))
                .collect(),
        }
    }

    pub fn get(&self, doc_id: &str) -> usize {
        self.counts.get(doc_id).copied().unwrap_or(0)
    }
}

/// Shared, read-only inputs of feature extraction.
#[derive(Debug, Clone, Copy)]
pub struct FeatureContext<'a> {
    pub corpus: &'a Corpus,
    pub dictionary: &'a CandidateDictionary,
    /// Slice models in chronological order. With fewer than two models the
    /// stability columns are reported missing.
    pub models: &'a [EmbeddingModel],
    pub entity_counts: &'a DocumentEntityCounts,
    pub config: &'a FeatureConfig,
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

enum Frequencies<'a> {
    Scan,
    Indexed(&'a SurfaceIndex),
}

impl<'a> FeatureContext<'a> {
    fn stability(&self, surface: &str) -> Option<Stability> {
        if self.models.len() < 2 {
            return None;
        }
        let word = embeddings::mention_word(surface)?;
        embeddings::semantic_stability(self.models, &word, self.config.top_k)
            .ok()
            .flatten()
    }

    fn compute(
        &self,
        mention: &MentionKey,
        freqs: &Frequencies<'_>,
        stability: impl FnOnce(&str) -> Option<Stability>,
    ) -> Result<FeatureVector> {
        let doc = self
            .corpus
            .get(&mention.doc_id)
            .ok_or_else(|| FeatureError::UnknownDocument(mention.doc_id.clone()))?;
        let m_len = mention.surface.chars().count();
        if m_len == 0 {
            return Err(CorpusError::EmptySurface.into());
        }
        let len = doc.char_len();
        if mention.offset + m_len > len {
            return Err(FeatureError::OffsetOutOfRange(mention.clone()));
        }
        let mode = self.config.match_mode;
        let (m_df, t_df) = match freqs {
            Frequencies::Scan => (
                self.corpus.temporal_document_frequency_with(
                    &mention.surface,
                    None,
                    Window::Unbounded,
                    mode,
                )?,
                self.corpus.temporal_document_frequency_with(
                    &mention.surface,
                    Some(doc.publication_date),
                    self.config.window,
                    mode,
                )?,
            ),
            Frequencies::Indexed(index) => {
                let missing =
                    || FeatureError::Table(format!("surface {:?} not indexed", mention.surface));
                (
                    index
                        .document_frequency(&mention.surface)
                        .ok_or_else(missing)?,
                    index
                        .temporal_document_frequency(
                            &mention.surface,
                            doc.publication_date,
                            self.config.window,
                        )
                        .ok_or_else(missing)?,
                )
            }
        };
        let m_sent = corpus::segment_sentences(doc)
            .into_iter()
            .find(|s| s.contains(mention.offset))
            .map_or(0, |s| s.len());
        let mut fv = FeatureVector {
            m_len,
            m_words: word_count(&mention.surface),
            m_freq: corpus::count_occurrences_with(doc, &mention.surface, mode)?,
            m_df,
            m_cand: self.dictionary.lookup(&mention.surface),
            m_pos: mention.offset as f64 / len as f64,
            m_sent,
            d_words: word_count(&doc.text),
            d_topic: doc.topic.clone(),
            d_ents: self.entity_counts.get(&doc.id),
            t_age: self.config.kb_year - doc.publication_date.year(),
            t_df,
            ..Default::default()
        };
        if fv.d_topic.is_none() {
            fv.missing_mask[Feature::DTopic.index()] = true;
        }
        fv.set_stability(stability(&mention.surface));
        Ok(fv)
    }

    /// Features of one mention, computed directly against the corpus.
    pub fn extract(&self, mention: &MentionKey) -> Result<FeatureVector> {
        self.compute(mention, &Frequencies::Scan, |s| self.stability(s))
    }

    /// Features of many mentions, in input order. Document frequencies come
    /// from one shared surface index and stability is computed once per
    /// distinct lookup word; results equal per-mention [`Self::extract`].
    pub fn extract_all(&self, mentions: &[MentionKey]) -> Result<Vec<FeatureVector>> {
        let index = self.corpus.surface_index(
            mentions
                .iter()
                .map(|m| m.surface.as_str())
                .filter(|s| !s.is_empty()),
            self.config.match_mode,
        )?;
        let mut words: Vec<String> = if self.models.len() >= 2 {
            mentions
                .iter()
                .filter_map(|m| embeddings::mention_word(&m.surface))
                .collect()
        } else {
            Vec::new()
        };
        words.sort_unstable();
        words.dedup();
        let stab: HashMap<String, Option<Stability>> = words
            .into_par_iter()
            .map(|w| {
                let s = embeddings::semantic_stability(self.models, &w, self.config.top_k)
                    .ok()
                    .flatten();
                (w, s)
            })
            .collect();
        let freqs = Frequencies::Indexed(&index);
        mentions
            .par_iter()
            .enumerate()
            .map(|(i, m)| {
                self.compute(m, &freqs, |s| {
                    embeddings::mention_word(s).and_then(|w| stab.get(&w).copied().flatten())
                })
                .map_err(|e| FeatureError::AtMention {
                    index: i,
                    key: m.clone(),
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// [`Self::extract_all`] over a labels file, carrying labels through.
    pub fn extract_records(&self, records: &[MentionRecord]) -> Result<FeatureTable> {
        let keys: Vec<MentionKey> = records.iter().map(|r| r.key.clone()).collect();
        let mut rows = self.extract_all(&keys)?;
        for (row, rec) in rows.iter_mut().zip(records) {
            row.label = rec.label;
        }
        Ok(FeatureTable::new(FeatureSchema::all(), rows))
    }
}
