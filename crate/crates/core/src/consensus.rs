//! Consensus labelling of mentions recognised by several EL systems.
//!
//! Mentions linked by every system are aligned into [`AlignedMention`]s and
//! labelled by the size of the largest group of systems agreeing on one
//! entity: all distinct is `HARD`, unanimous is `EASY`, anything in between
//! is `MEDIUM`. For three systems this is exactly "all disagree / all agree /
//! two of three agree".

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("entity identifier must not be empty")]
    EmptyEntity,
    #[error("alignment needs at least two systems, got {0}")]
    TooFewSystems(usize),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("annotation {doc_id}:{offset} {surface:?} does not fit its document")]
    OutOfBounds {
        doc_id: String,
        offset: usize,
        surface: String,
    },
    #[error("annotation references unknown document {0:?}")]
    UnknownDocument(String),
    #[error("unknown difficulty label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ConsensusError> = std::result::Result<T, E>;

/// One link `<d, m, p, e>` produced by one system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemAnnotation {
    pub system_id: String,
    pub doc_id: String,
    pub surface: String,
    /// Character offset of the mention start.
    pub offset: usize,
    pub entity_id: String,
}

impl SystemAnnotation {
    pub fn key(&self) -> MentionKey {
        MentionKey::new(&self.doc_id, self.offset, &self.surface)
    }

    fn end(&self) -> usize {
        self.offset + self.surface.chars().count()
    }
}

/// Identity of a mention occurrence: document, character offset, surface.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MentionKey {
    pub doc_id: String,
    pub offset: usize,
    pub surface: String,
}

impl MentionKey {
    pub fn new(doc_id: &str, offset: usize, surface: &str) -> Self {
        MentionKey {
            doc_id: doc_id.to_string(),
            offset,
            surface: surface.to_string(),
        }
    }
}

impl fmt::Display for MentionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{:?}", self.doc_id, self.offset, self.surface)
    }
}

/// A mention linked by all `n` systems: `<d, m, p, e_1 .. e_n>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedMention {
    pub doc_id: String,
    pub surface: String,
    pub offset: usize,
    /// One entity per system, in system order.
    pub entities: Vec<String>,
}

impl AlignedMention {
    pub fn key(&self) -> MentionKey {
        MentionKey::new(&self.doc_id, self.offset, &self.surface)
    }
}

/// Difficulty class. The derived order `Hard < Medium < Easy` is the
/// canonical tie-breaking order everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DifficultyLabel {
    Hard,
    Medium,
    Easy,
}

impl DifficultyLabel {
    pub const ALL: [DifficultyLabel; 3] = [
        DifficultyLabel::Hard,
        DifficultyLabel::Medium,
        DifficultyLabel::Easy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyLabel::Hard => "HARD",
            DifficultyLabel::Medium => "MEDIUM",
            DifficultyLabel::Easy => "EASY",
        }
    }
}

impl fmt::Display for DifficultyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DifficultyLabel {
    type Err = ConsensusError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HARD" => Ok(DifficultyLabel::Hard),
            "MEDIUM" => Ok(DifficultyLabel::Medium),
            "EASY" => Ok(DifficultyLabel::Easy),
            other => Err(ConsensusError::UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledMention {
    pub mention: AlignedMention,
    pub label: DifficultyLabel,
}

/// Title redirects (`from -> to`), applied for one hop after normalization.
#[derive(Debug, Clone, Default)]
pub struct RedirectMap {
    map: HashMap<String, String>,
}

impl RedirectMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Both sides are normalized on insertion.
    pub fn insert(&mut self, from: &str, to: &str) -> Result<()> {
        let from = normalize_entity(from, None)?;
        let to = normalize_entity(to, None)?;
        self.map.insert(from, to);
        Ok(())
    }

    pub fn get(&self, title: &str) -> Option<&str> {
        self.map.get(title).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Lines of `from<TAB>to`.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut out = RedirectMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: &str| ConsensusError::Malformed {
                line: i + 1,
                message: message.to_string(),
            };
            let (from, to) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected from<TAB>to"))?;
            out.insert(from, to).map_err(|_| malformed("empty title"))?;
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

/// Normalize a KB title: trim, spaces to underscores, uppercase the first
/// character only, then follow one redirect hop.
pub fn normalize_entity(raw: &str, redirects: Option<&RedirectMap>) -> Result<String> {
    let trimmed = raw.trim();
    let mut chars = trimmed.chars();
    let first = chars.next().ok_or(ConsensusError::EmptyEntity)?;
    let mut title: String = first.to_uppercase().collect();
    title.extend(chars.map(|c| if c == ' ' { '_' } else { c }));
    if let Some(target) = redirects.and_then(|r| r.get(&title)) {
        return Ok(target.to_string());
    }
    Ok(title)
}

/// How mentions of different systems are matched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignPolicy {
    /// Identical `(doc_id, offset, surface)` in every system.
    #[default]
    Exact,
    /// Pairwise-overlapping character spans in the same document.
    Overlap,
}

impl FromStr for AlignPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(AlignPolicy::Exact),
            "overlap" => Ok(AlignPolicy::Overlap),
            other => Err(format!("unknown alignment policy {other:?}")),
        }
    }
}

/// Keep only mentions linked by every system.
///
/// Under [`AlignPolicy::Overlap`], exact matches are grouped first; the
/// remaining annotations of the first system are then visited in
/// `(doc_id, offset)` order and each other system contributes its earliest
/// unused annotation overlapping every span already in the group. Each
/// annotation joins at most one group and the group takes the first system's
/// surface and offset. Output is ordered by `(doc_id, offset, surface)`.
pub fn align(sets: &[Vec<SystemAnnotation>], policy: AlignPolicy) -> Result<Vec<AlignedMention>> {
    let n = sets.len();
    if n < 2 {
        return Err(ConsensusError::TooFewSystems(n));
    }
    let mut used: Vec<Vec<bool>> = sets.iter().map(|s| vec![false; s.len()]).collect();
    let mut groups: Vec<AlignedMention> = Vec::new();

    // exact phase
    let by_key: Vec<HashMap<MentionKey, Vec<usize>>> = sets
        .iter()
        .map(|set| {
            let mut m: HashMap<MentionKey, Vec<usize>> = HashMap::new();
            for (i, a) in set.iter().enumerate() {
                m.entry(a.key()).or_default().push(i);
            }
            m
        })
        .collect();
    let mut order0: Vec<usize> = (0..sets[0].len()).collect();
    order0.sort_by(|&a, &b| sets[0][a].key().cmp(&sets[0][b].key()).then(a.cmp(&b)));
    for &i0 in &order0 {
        if used[0][i0] {
            continue;
        }
        let key = sets[0][i0].key();
        let picks: Option<Vec<usize>> = (1..n)
            .map(|s| {
                by_key[s]
                    .get(&key)
                    .and_then(|idx| idx.iter().copied().find(|&j| !used[s][j]))
            })
            .collect();
        let Some(picks) = picks else { continue };
        // mark the first system's duplicates of this key as consumed too
        for &j in &by_key[0][&key] {
            used[0][j] = true;
        }
        let mut entities = vec![sets[0][i0].entity_id.clone()];
        for (s, j) in (1..n).zip(picks) {
            used[s][j] = true;
            entities.push(sets[s][j].entity_id.clone());
        }
        groups.push(AlignedMention {
            doc_id: key.doc_id,
            surface: key.surface,
            offset: key.offset,
            entities,
        });
    }

    if policy == AlignPolicy::Overlap {
        let per_doc: Vec<BTreeMap<&str, Vec<usize>>> = sets
            .iter()
            .map(|set| {
                let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
                for (i, a) in set.iter().enumerate() {
                    m.entry(a.doc_id.as_str()).or_default().push(i);
                }
                for v in m.values_mut() {
                    v.sort_by_key(|&i| (set[i].offset, set[i].end(), i));
                }
                m
            })
            .collect();
        for &i0 in &order0 {
            if used[0][i0] {
                continue;
            }
            let anchor = &sets[0][i0];
            let mut spans = vec![(anchor.offset, anchor.end())];
            let mut picks = Vec::with_capacity(n - 1);
            for s in 1..n {
                let Some(cands) = per_doc[s].get(anchor.doc_id.as_str()) else {
                    break;
                };
                let found = cands.iter().copied().find(|&j| {
                    let a = &sets[s][j];
                    let (lo, hi) = (a.offset, a.end());
                    !used[s][j] && spans.iter().all(|&(o, e)| lo < e && o < hi)
                });
                match found {
                    Some(j) => {
                        spans.push((sets[s][j].offset, sets[s][j].end()));
                        picks.push(j);
                    }
                    None => break,
                }
            }
            if picks.len() != n - 1 {
                continue;
            }
            used[0][i0] = true;
            let mut entities = vec![anchor.entity_id.clone()];
            for (s, j) in (1..n).zip(picks) {
                used[s][j] = true;
                entities.push(sets[s][j].entity_id.clone());
            }
            groups.push(AlignedMention {
                doc_id: anchor.doc_id.clone(),
                surface: anchor.surface.clone(),
                offset: anchor.offset,
                entities,
            });
        }
    }

    groups
        .sort_by(|a, b| (&a.doc_id, a.offset, &a.surface).cmp(&(&b.doc_id, b.offset, &b.surface)));
    Ok(groups)
}

/// Label from the entity choices of all systems.
pub fn label_entities<S: AsRef<str>>(entities: &[S]) -> DifficultyLabel {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for e in entities {
        *counts.entry(e.as_ref()).or_default() += 1;
    }
    let largest = counts.values().copied().max().unwrap_or(0);
    if largest == entities.len() {
        DifficultyLabel::Easy
    } else if largest <= 1 {
        DifficultyLabel::Hard
    } else {
        DifficultyLabel::Medium
    }
}

pub fn label(mention: &AlignedMention) -> DifficultyLabel {
    label_entities(&mention.entities)
}

pub fn label_all(mentions: Vec<AlignedMention>) -> Vec<LabelledMention> {
    mentions
        .into_iter()
        .map(|m| {
            let label = label(&m);
            LabelledMention { mention: m, label }
        })
        .collect()
}

/// Counts and fractions per class, indexed by [`DifficultyLabel::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: [usize; 3],
    /// `None` for an empty input.
    pub fractions: Option<[f64; 3]>,
}

impl ClassDistribution {
    pub fn from_labels<I: IntoIterator<Item = DifficultyLabel>>(labels: I) -> Self {
        let mut counts = [0usize; 3];
        for l in labels {
            counts[l.index()] += 1;
        }
        let total: usize = counts.iter().sum();
        let fractions = (total > 0).then(|| counts.map(|c| c as f64 / total as f64));
        ClassDistribution { counts, fractions }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

impl fmt::Display for ClassDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "class\tcount\tfraction")?;
        for l in DifficultyLabel::ALL {
            let frac = self.fractions.map_or_else(
                || "undefined".to_string(),
                |fr| format!("{:.6}", fr[l.index()]),
            );
            writeln!(f, "{l}\t{}\t{frac}", self.counts[l.index()])?;
        }
        write!(f, "TOTAL\t{}", self.total())
    }
}

pub fn class_distribution(labelled: &[LabelledMention]) -> ClassDistribution {
    ClassDistribution::from_labels(labelled.iter().map(|m| m.label))
}

/// Check that every annotation fits inside its document.
pub fn validate_annotations(annotations: &[SystemAnnotation], corpus: &Corpus) -> Result<()> {
    for a in annotations {
        let doc = corpus
            .get(&a.doc_id)
            .ok_or_else(|| ConsensusError::UnknownDocument(a.doc_id.clone()))?;
        if a.end() > doc.char_len() {
            return Err(ConsensusError::OutOfBounds {
                doc_id: a.doc_id.clone(),
                offset: a.offset,
                surface: a.surface.clone(),
            });
        }
    }
    Ok(())
}

/// Parse a system dump: `doc_id<TAB>offset<TAB>surface<TAB>entity_id`.
pub fn read_annotation_dump<R: BufRead>(
    reader: R,
    system_id: &str,
    redirects: Option<&RedirectMap>,
) -> Result<Vec<SystemAnnotation>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| ConsensusError::Malformed {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [doc_id, offset, surface, entity] = fields[..] else {
            return Err(malformed(format!(
                "expected 4 tab-separated fields, got {}",
                fields.len()
            )));
        };
        let offset = offset
            .parse()
            .map_err(|_| malformed(format!("bad offset {offset:?}")))?;
        if doc_id.is_empty() || surface.is_empty() {
            return Err(malformed("empty document id or surface".into()));
        }
        let entity_id =
            normalize_entity(entity, redirects).map_err(|_| malformed("empty entity".into()))?;
        out.push(SystemAnnotation {
            system_id: system_id.to_string(),
            doc_id: doc_id.to_string(),
            surface: surface.to_string(),
            offset,
            entity_id,
        });
    }
    Ok(out)
}

pub fn load_annotation_dump(
    path: impl AsRef<Path>,
    system_id: &str,
    redirects: Option<&RedirectMap>,
) -> Result<Vec<SystemAnnotation>> {
    read_annotation_dump(BufReader::new(File::open(path)?), system_id, redirects)
}

pub fn write_annotation_dump<W: Write>(mut w: W, annotations: &[SystemAnnotation]) -> Result<()> {
    for a in annotations {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            a.doc_id, a.offset, a.surface, a.entity_id
        )?;
    }
    Ok(())
}

// Entity lists are comma-joined; escape the separator inside titles.
fn escape_entity(e: &str) -> String {
    e.replace('%', "%25").replace(',', "%2C")
}

fn unescape_entity(e: &str) -> String {
    e.replace("%2C", ",").replace("%25", "%")
}

/// Write `doc_id<TAB>offset<TAB>surface<TAB>label<TAB>e1,...,en`.
pub fn write_labels<W: Write>(mut w: W, labelled: &[LabelledMention]) -> Result<()> {
    for lm in labelled {
        let m = &lm.mention;
        let ents: Vec<String> = m.entities.iter().map(|e| escape_entity(e)).collect();
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            m.doc_id,
            m.offset,
            m.surface,
            lm.label,
            ents.join(",")
        )?;
    }
    Ok(())
}

/// A row of a labels file or of a raw mention list
/// (`doc_id<TAB>offset<TAB>surface`, no label or entities).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionRecord {
    pub key: MentionKey,
    pub label: Option<DifficultyLabel>,
    pub entities: Vec<String>,
}

pub fn read_mentions<R: BufRead>(reader: R) -> Result<Vec<MentionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| ConsensusError::Malformed {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let (doc_id, offset, surface, label, entities) = match fields[..] {
            [d, o, s] => (d, o, s, None, Vec::new()),
            [d, o, s, l, e] => {
                let label = l
                    .parse::<DifficultyLabel>()
                    .map_err(|e| malformed(e.to_string()))?;
                let ents = e.split(',').map(unescape_entity).collect();
                (d, o, s, Some(label), ents)
            }
            _ => {
                return Err(malformed(format!(
                    "expected 3 or 5 tab-separated fields, got {}",
                    fields.len()
                )))
            }
        };
        let offset: usize = offset
            .parse()
            .map_err(|_| malformed(format!("bad offset {offset:?}")))?;
        out.push(MentionRecord {
            key: MentionKey::new(doc_id, offset, surface),
            label,
            entities,
        });
    }
    Ok(out)
}

pub fn load_mentions(path: impl AsRef<Path>) -> Result<Vec<MentionRecord>> {
    read_mentions(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(sys: &str, doc: &str, offset: usize, surface: &str, entity: &str) -> SystemAnnotation {
        SystemAnnotation {
            system_id: sys.into(),
            doc_id: doc.into(),
            surface: surface.into(),
            offset,
            entity_id: entity.into(),
        }
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(
            normalize_entity("barack obama", None).unwrap(),
            "Barack_obama"
        );
        assert_eq!(normalize_entity("  Paris ", None).unwrap(), "Paris");
        let mut r = RedirectMap::new();
        r.insert("Obama", "Barack Obama").unwrap();
        assert_eq!(normalize_entity("Obama", Some(&r)).unwrap(), "Barack_Obama");
        assert_eq!(
            normalize_entity("X", Some(&RedirectMap::new())).unwrap(),
            "X"
        );
        assert!(matches!(
            normalize_entity("   ", None),
            Err(ConsensusError::EmptyEntity)
        ));
    }

    #[test]
    fn redirects_follow_one_hop_only() {
        let mut r = RedirectMap::new();
        r.insert("A", "B").unwrap();
        r.insert("B", "C").unwrap();
        assert_eq!(normalize_entity("A", Some(&r)).unwrap(), "B");
    }

    #[test]
    fn labels_for_three_systems() {
        assert_eq!(label_entities(&["Q1", "Q1", "Q1"]), DifficultyLabel::Easy);
        assert_eq!(label_entities(&["Q1", "Q2", "Q3"]), DifficultyLabel::Hard);
        assert_eq!(label_entities(&["Q1", "Q1", "Q2"]), DifficultyLabel::Medium);
        assert_eq!(label_entities(&["Q2", "Q1", "Q1"]), DifficultyLabel::Medium);
    }

    #[test]
    fn labels_generalize_beyond_three() {
        assert_eq!(label_entities(&["a", "b", "c", "d"]), DifficultyLabel::Hard);
        assert_eq!(
            label_entities(&["a", "a", "c", "d"]),
            DifficultyLabel::Medium
        );
        assert_eq!(label_entities(&["a", "a", "a", "a"]), DifficultyLabel::Easy);
        assert_eq!(label_entities(&["a", "b"]), DifficultyLabel::Hard);
    }

    #[test]
    fn exact_alignment_of_three_systems() {
        let sets = vec![
            vec![ann("a", "d1", 10, "Paris", "Paris")],
            vec![ann("b", "d1", 10, "Paris", "Paris_Hilton")],
            vec![ann("c", "d1", 10, "Paris", "Paris")],
        ];
        let out = align(&sets, AlignPolicy::Exact).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].entities, vec!["Paris", "Paris_Hilton", "Paris"]);
    }

    #[test]
    fn policy_contrast() {
        let sets = vec![
            vec![ann("a", "d1", 10, "Paris", "P")],
            vec![ann("b", "d1", 11, "aris", "P")],
        ];
        assert!(align(&sets, AlignPolicy::Exact).unwrap().is_empty());
        let o = align(&sets, AlignPolicy::Overlap).unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!((o[0].offset, o[0].surface.as_str()), (10, "Paris"));
    }

    #[test]
    fn mention_missing_from_one_system_is_dropped() {
        let sets = vec![
            vec![ann("a", "d1", 0, "X", "X"), ann("a", "d1", 5, "Y", "Y")],
            vec![ann("b", "d1", 0, "X", "X"), ann("b", "d1", 5, "Y", "Y")],
            vec![ann("c", "d1", 0, "X", "X")],
        ];
        let out = align(&sets, AlignPolicy::Exact).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].surface, "X");
    }

    #[test]
    fn overlap_prefers_exact_matches() {
        // a long span of system a would otherwise steal b's exact partner
        let sets = vec![
            vec![
                ann("a", "d", 0, "New York Times Square", "A"),
                ann("a", "d", 9, "Times", "T"),
            ],
            vec![ann("b", "d", 9, "Times", "T2")],
        ];
        let exact = align(&sets, AlignPolicy::Exact).unwrap();
        let overlap = align(&sets, AlignPolicy::Overlap).unwrap();
        assert_eq!(exact.len(), 1);
        assert!(overlap.iter().any(|m| m.key() == exact[0].key()));
    }

    #[test]
    fn alignment_rejects_single_system() {
        assert!(matches!(
            align(&[vec![]], AlignPolicy::Exact),
            Err(ConsensusError::TooFewSystems(1))
        ));
    }

    #[test]
    fn output_sorted_by_doc_and_offset() {
        let a = vec![
            ann("a", "d2", 0, "Z", "Z"),
            ann("a", "d1", 7, "Y", "Y"),
            ann("a", "d1", 2, "X", "X"),
        ];
        let b: Vec<_> = a.iter().rev().cloned().collect();
        let out = align(&[a, b], AlignPolicy::Exact).unwrap();
        let keys: Vec<_> = out.iter().map(|m| (m.doc_id.as_str(), m.offset)).collect();
        assert_eq!(keys, vec![("d1", 2), ("d1", 7), ("d2", 0)]);
    }

    #[test]
    fn distribution_counts_and_fractions() {
        use DifficultyLabel::*;
        let d = ClassDistribution::from_labels([Easy, Easy, Hard, Medium]);
        assert_eq!(d.counts, [1, 1, 2]);
        assert_eq!(d.fractions, Some([0.25, 0.25, 0.5]));
        let empty = ClassDistribution::from_labels([]);
        assert_eq!(empty.counts, [0, 0, 0]);
        assert_eq!(empty.fractions, None);
    }

    #[test]
    fn dump_parsing() {
        let text = "d1\t10\tParis\tparis\nd1\t20\tBonn\tBonn\n";
        let anns = read_annotation_dump(text.as_bytes(), "sys", None).unwrap();
        assert_eq!(anns.len(), 2);
        assert_eq!(anns[0].entity_id, "Paris");
        let bad = "d1\tten\tParis\tParis\n";
        match read_annotation_dump(bad.as_bytes(), "sys", None) {
            Err(ConsensusError::Malformed { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labels_file_round_trip_with_commas() {
        let lm = LabelledMention {
            mention: AlignedMention {
                doc_id: "d1".into(),
                surface: "Paris".into(),
                offset: 3,
                entities: vec!["Paris,_Texas".into(), "Paris".into(), "100%_Pure".into()],
            },
            label: DifficultyLabel::Hard,
        };
        let mut buf = Vec::new();
        write_labels(&mut buf, std::slice::from_ref(&lm)).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "d1\t3\tParis\tHARD\tParis%2C_Texas,Paris,100%25_Pure\n"
        );
        let back = read_mentions(buf.as_slice()).unwrap();
        assert_eq!(back[0].entities, lm.mention.entities);
        assert_eq!(back[0].label, Some(DifficultyLabel::Hard));

        let raw = read_mentions("d1\t3\tParis\n".as_bytes()).unwrap();
        assert_eq!(raw[0].label, None);
    }

    #[test]
    fn validation_against_corpus() {
        use crate::corpus::Document;
        let corpus = Corpus::from_documents(vec![Document::new(
            "d1",
            "2000-01-01".parse().unwrap(),
            None,
            "Paris is big",
        )
        .unwrap()])
        .unwrap();
        assert!(validate_annotations(&[ann("a", "d1", 0, "Paris", "P")], &corpus).is_ok());
        assert!(validate_annotations(&[ann("a", "d1", 9, "bigger", "P")], &corpus).is_err());
        assert!(validate_annotations(&[ann("a", "d9", 0, "P", "P")], &corpus).is_err());
    }
}
