//! Document collection: loading, sentence segmentation and frequency queries.
//!
//! All offsets and lengths are measured in Unicode scalar values (`char`s),
//! never bytes. EL system dumps reference character positions and the same
//! unit is used by annotation alignment and feature extraction.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Window;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {0:?} has empty text")]
    EmptyText(String),
    #[error("surface string must not be empty")]
    EmptySurface,
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("synthetic corpus configuration: {0}")]
    Generator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Sentence punctuation. Sentences are the text strictly between two marks.
pub const SENTENCE_MARKS: [char; 4] = ['.', '!', '?', ';'];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub publication_date: NaiveDate,
    pub topic: Option<String>,
    pub text: String,
    char_len: usize,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        publication_date: NaiveDate,
        topic: Option<String>,
        text: impl Into<String>,
    ) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if text.is_empty() {
            return Err(CorpusError::EmptyText(id));
        }
        let char_len = text.chars().count();
        let topic = topic.filter(|t| !t.is_empty());
        Ok(Document {
            id,
            publication_date,
            topic,
            text,
            char_len,
        })
    }

    /// Text length in characters.
    pub fn char_len(&self) -> usize {
        self.char_len
    }

    /// The substring covering characters `[start, end)`.
    pub fn slice_chars(&self, start: usize, end: usize) -> &str {
        let mut it = self
            .text
            .char_indices()
            .map(|(b, _)| b)
            .chain(std::iter::once(self.text.len()));
        let b0 = it.nth(start).unwrap_or(self.text.len());
        let b1 = if end > start {
            it.nth(end - start - 1).unwrap_or(self.text.len())
        } else {
            b0
        };
        &self.text[b0..b1]
    }

    pub fn sentences(&self) -> Vec<SentenceSpan> {
        segment_sentences(self)
    }
}

/// A sentence as a half-open character range; excludes the boundary marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

impl SentenceSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

/// Split `doc` at every occurrence of `. ! ? ;`. Empty spans between
/// adjacent marks are dropped.
pub fn segment_sentences(doc: &Document) -> Vec<SentenceSpan> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut pos = 0;
    for c in doc.text.chars() {
        if SENTENCE_MARKS.contains(&c) {
            if pos > start {
                spans.push(SentenceSpan { start, end: pos });
            }
            start = pos + 1;
        }
        pos += 1;
    }
    if pos > start {
        spans.push(SentenceSpan { start, end: pos });
    }
    spans
}

/// How surface strings are matched against document text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    /// Case-sensitive exact substring, no boundary requirement.
    #[default]
    Substring,
    /// As `Substring`, but the match must not be flanked by alphanumerics.
    TokenBounded,
}

/// Non-overlapping, left-to-right, case-sensitive occurrences of `surface`.
pub fn count_occurrences(doc: &Document, surface: &str) -> Result<usize> {
    count_occurrences_with(doc, surface, MatchMode::Substring)
}

pub fn count_occurrences_with(doc: &Document, surface: &str, mode: MatchMode) -> Result<usize> {
    if surface.is_empty() {
        return Err(CorpusError::EmptySurface);
    }
    Ok(scan(&doc.text, surface, mode, usize::MAX))
}

fn contains_with(text: &str, surface: &str, mode: MatchMode) -> bool {
    scan(text, surface, mode, 1) > 0
}

fn scan(text: &str, surface: &str, mode: MatchMode, limit: usize) -> usize {
    match mode {
        MatchMode::Substring => text.matches(surface).take(limit).count(),
        MatchMode::TokenBounded => {
            let mut count = 0;
            let mut from = 0;
            while count < limit {
                let Some(rel) = text[from..].find(surface) else {
                    break;
                };
                let start = from + rel;
                let end = start + surface.len();
                let before_ok = !text[..start]
                    .chars()
                    .next_back()
                    .is_some_and(char::is_alphanumeric);
                let after_ok = !text[end..]
                    .chars()
                    .next()
                    .is_some_and(char::is_alphanumeric);
                if before_ok && after_ok {
                    count += 1;
                    from = end;
                } else {
                    from = start + text[start..].chars().next().map_or(1, char::len_utf8);
                }
            }
            count
        }
    }
}

/// An immutable, indexed document collection.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    by_id: HashMap<String, usize>,
    date_index: BTreeMap<NaiveDate, Vec<usize>>,
}

#[derive(Deserialize, Serialize)]
struct Record {
    id: String,
    date: NaiveDate,
    #[serde(default)]
    topic: Option<String>,
    text: String,
}

impl Corpus {
    pub fn from_documents(documents: Vec<Document>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for doc in documents {
            corpus.push(doc)?;
        }
        Ok(corpus)
    }

    fn push(&mut self, doc: Document) -> Result<()> {
        let idx = self.documents.len();
        if self.by_id.contains_key(&doc.id) {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        self.by_id.insert(doc.id.clone(), idx);
        self.date_index
            .entry(doc.publication_date)
            .or_default()
            .push(idx);
        self.documents.push(doc);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.documents[i])
    }

    pub fn document(&self, id: &str) -> Result<&Document> {
        self.get(id)
            .ok_or_else(|| CorpusError::UnknownDocument(id.to_string()))
    }

    /// Documents published on `date`, in corpus order.
    pub fn published_on(&self, date: NaiveDate) -> impl Iterator<Item = &Document> {
        self.date_index
            .get(&date)
            .into_iter()
            .flatten()
            .map(move |&i| &self.documents[i])
    }

    /// The earliest and latest publication dates.
    pub fn period(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = *self.date_index.keys().next()?;
        let last = *self.date_index.keys().next_back()?;
        Some((first, last))
    }

    /// Number of documents containing `surface` at least once.
    pub fn document_frequency(&self, surface: &str) -> Result<usize> {
        self.temporal_document_frequency_with(
            surface,
            None,
            Window::Unbounded,
            MatchMode::Substring,
        )
    }

    /// As [`Corpus::document_frequency`], restricted to documents published
    /// within `window` of `anchor` (inclusive).
    pub fn temporal_document_frequency(
        &self,
        surface: &str,
        anchor: NaiveDate,
        window: Window,
    ) -> Result<usize> {
        self.temporal_document_frequency_with(surface, Some(anchor), window, MatchMode::Substring)
    }

    pub fn temporal_document_frequency_with(
        &self,
        surface: &str,
        anchor: Option<NaiveDate>,
        window: Window,
        mode: MatchMode,
    ) -> Result<usize> {
        if surface.is_empty() {
            return Err(CorpusError::EmptySurface);
        }
        let (lo, hi) = match anchor {
            Some(a) => window.bounds(a),
            None => (NaiveDate::MIN, NaiveDate::MAX),
        };
        Ok(self
            .date_index
            .range(lo..=hi)
            .flat_map(|(_, ids)| ids)
            .filter(|&&i| contains_with(&self.documents[i].text, surface, mode))
            .count())
    }

    /// Precompute, for each surface, the sorted publication dates of the
    /// documents containing it. One pass answers every df / temporal df query.
    pub fn surface_index<'a, I>(&self, surfaces: I, mode: MatchMode) -> Result<SurfaceIndex>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut unique: Vec<&str> = surfaces.into_iter().collect();
        unique.sort_unstable();
        unique.dedup();
        if unique.iter().any(|s| s.is_empty()) {
            return Err(CorpusError::EmptySurface);
        }
        let dates: Vec<(String, Vec<NaiveDate>)> = unique
            .par_iter()
            .map(|surface| {
                let mut dates: Vec<NaiveDate> = self
                    .documents
                    .iter()
                    .filter(|d| contains_with(&d.text, surface, mode))
                    .map(|d| d.publication_date)
                    .collect();
                dates.sort_unstable();
                (surface.to_string(), dates)
            })
            .collect();
        Ok(SurfaceIndex {
            dates: dates.into_iter().collect(),
        })
    }

    /// Write the corpus in the canonical line-delimited JSON format.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for d in &self.documents {
            let rec = Record {
                id: d.id.clone(),
                date: d.publication_date,
                topic: Some(d.topic.clone().unwrap_or_default()),
                text: d.text.clone(),
            };
            serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut corpus = Corpus::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i + 1;
            let rec: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
            let doc =
                Document::new(rec.id, rec.date, rec.topic, rec.text).map_err(|e| match e {
                    CorpusError::EmptyText(id) => CorpusError::Malformed {
                        line: lineno,
                        message: format!("document {id:?} has empty text"),
                    },
                    other => other,
                })?;
            corpus.push(doc)?;
        }
        Ok(corpus)
    }
}

/// Load a corpus file: one JSON object per line with `id`, `date`
/// (`YYYY-MM-DD`), `topic` (may be empty) and `text`.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let file = File::open(path)?;
    Corpus::read_jsonl(BufReader::new(file))
}

/// Surface → sorted publication dates of containing documents.
#[derive(Debug, Clone, Default)]
pub struct SurfaceIndex {
    dates: HashMap<String, Vec<NaiveDate>>,
}

impl SurfaceIndex {
    /// Document frequency; `None` if the surface was not indexed.
    pub fn document_frequency(&self, surface: &str) -> Option<usize> {
        self.dates.get(surface).map(Vec::len)
    }

    pub fn temporal_document_frequency(
        &self,
        surface: &str,
        anchor: NaiveDate,
        window: Window,
    ) -> Option<usize> {
        let dates = self.dates.get(surface)?;
        let (lo, hi) = window.bounds(anchor);
        let a = dates.partition_point(|d| *d < lo);
        let b = dates.partition_point(|d| *d <= hi);
        Some(b - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Span;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn doc(id: &str, d: &str, text: &str) -> Document {
        Document::new(id, date(d), None, text).unwrap()
    }

    fn span_texts(d: &Document) -> Vec<&str> {
        segment_sentences(d)
            .iter()
            .map(|s| d.slice_chars(s.start, s.end))
            .collect()
    }

    #[test]
    fn segments_on_marks() {
        assert_eq!(
            span_texts(&doc("a", "2000-01-01", "A b. C d!")),
            vec!["A b", " C d"]
        );
        assert_eq!(
            span_texts(&doc("a", "2000-01-01", "no marks at all")),
            vec!["no marks at all"]
        );
        // boundaries at 1 and 2; the empty span between them is dropped
        let d = doc("a", "2000-01-01", "x;;y");
        assert_eq!(
            segment_sentences(&d),
            vec![
                SentenceSpan { start: 0, end: 1 },
                SentenceSpan { start: 3, end: 4 }
            ]
        );
    }

    #[test]
    fn segments_use_char_offsets() {
        let d = doc("a", "2000-01-01", "Zürich ist schön. Ja");
        let spans = segment_sentences(&d);
        assert_eq!(spans[0], SentenceSpan { start: 0, end: 16 });
        assert_eq!(d.slice_chars(spans[1].start, spans[1].end), " Ja");
    }

    #[test]
    fn occurrence_counting() {
        assert_eq!(
            count_occurrences(&doc("a", "2000-01-01", "aa aa"), "aa").unwrap(),
            2
        );
        assert_eq!(
            count_occurrences(&doc("a", "2000-01-01", "aaa"), "aa").unwrap(),
            1
        );
        assert_eq!(
            count_occurrences(&doc("a", "2000-01-01", "Bonn"), "bonn").unwrap(),
            0
        );
        assert!(matches!(
            count_occurrences(&doc("a", "2000-01-01", "x"), ""),
            Err(CorpusError::EmptySurface)
        ));
    }

    #[test]
    fn token_bounded_mode() {
        let d = doc("a", "2000-01-01", "Paris Parisian (Paris) xParis");
        assert_eq!(
            count_occurrences_with(&d, "Paris", MatchMode::Substring).unwrap(),
            4
        );
        assert_eq!(
            count_occurrences_with(&d, "Paris", MatchMode::TokenBounded).unwrap(),
            2
        );
    }

    #[test]
    fn document_frequencies() {
        let mut docs = Vec::new();
        for i in 0..10 {
            let text = if i < 5 {
                "the Bonn summit"
            } else {
                "nothing here"
            };
            docs.push(doc(&format!("d{i}"), "2000-01-01", text));
        }
        docs.push(doc(
            "many",
            "2000-01-01",
            "Rome Rome Rome Rome Rome Rome Rome",
        ));
        let c = Corpus::from_documents(docs).unwrap();
        assert_eq!(c.document_frequency("Bonn").unwrap(), 5);
        assert_eq!(c.document_frequency("Rome").unwrap(), 1);
        assert_eq!(c.document_frequency("Oslo").unwrap(), 0);
        assert!(c.document_frequency("").is_err());
    }

    #[test]
    fn temporal_window_is_inclusive() {
        let anchor = date("2000-06-15");
        let six = Window::Around(Span::months(6).unwrap());
        // anchor - 5 months is inside, anchor + 7 months is outside
        let c = Corpus::from_documents(vec![
            doc("early", "2000-01-15", "Bonn"),
            doc("late", "2001-01-15", "Bonn"),
        ])
        .unwrap();
        assert_eq!(
            c.temporal_document_frequency("Bonn", anchor, six).unwrap(),
            1
        );

        let edge = Corpus::from_documents(vec![doc("edge", "2000-12-15", "Bonn")]).unwrap();
        assert_eq!(
            edge.temporal_document_frequency("Bonn", anchor, six)
                .unwrap(),
            1
        );

        let far = Corpus::from_documents(vec![doc("far", "1990-01-01", "Bonn")]).unwrap();
        assert_eq!(
            far.temporal_document_frequency("Bonn", anchor, six)
                .unwrap(),
            0
        );
    }

    #[test]
    fn load_reports_line_numbers_and_duplicates() {
        let ok = "{\"id\":\"d1\",\"date\":\"1990-01-01\",\"topic\":\"Sports\",\"text\":\"a\"}\n\
                  {\"id\":\"d2\",\"date\":\"1990-01-02\",\"topic\":\"\",\"text\":\"b\"}\n\
                  {\"id\":\"d3\",\"date\":\"1990-01-03\",\"topic\":\"World\",\"text\":\"c\"}\n";
        let c = Corpus::read_jsonl(ok.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.documents()[1].topic, None);
        assert_eq!(c.documents()[0].id, "d1");

        assert!(Corpus::read_jsonl("".as_bytes()).unwrap().is_empty());

        let dup = "{\"id\":\"d1\",\"date\":\"1990-01-01\",\"text\":\"a\"}\n{\"id\":\"d1\",\"date\":\"1990-01-01\",\"text\":\"b\"}\n";
        match Corpus::read_jsonl(dup.as_bytes()) {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id, "d1"),
            other => panic!("unexpected {other:?}"),
        }

        let bad = "{\"id\":\"d1\",\"date\":\"1990-01-01\",\"text\":\"a\"}\n{\"id\":\"d2\",\"date\":\"1990-13-01\",\"text\":\"b\"}\n";
        match Corpus::read_jsonl(bad.as_bytes()) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let c = Corpus::from_documents(vec![
            Document::new(
                "a",
                date("1991-02-03"),
                Some("Arts".into()),
                "Tab\there \"quoted\". Ünï",
            )
            .unwrap(),
            doc("b", "1992-02-03", "x"),
        ])
        .unwrap();
        let mut buf = Vec::new();
        c.write_jsonl(&mut buf).unwrap();
        let back = Corpus::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.documents(), c.documents());
    }
}
