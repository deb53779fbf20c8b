use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::FeatureError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Entry {
    count: usize,
    ids: Option<BTreeSet<String>>,
}

/// Anchor-text dictionary: surface → number of candidate entities.
///
/// File lines are either `surface<TAB>count` or `surface<TAB>e1,e2,...`.
/// A second field made only of digits is read as a count. Repeated surfaces
/// merge by maximum count, or by union when both lines list ids.
#[derive(Debug, Clone, Default)]
pub struct CandidateDictionary {
    entries: HashMap<String, Entry>,
}

impl CandidateDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_count(&mut self, surface: &str, count: usize) {
        let e = self.entries.entry(surface.to_string()).or_default();
        e.count = e.count.max(count);
    }

    pub fn insert_ids<I, S>(&mut self, surface: &str, ids: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let e = self.entries.entry(surface.to_string()).or_default();
        let set = e.ids.get_or_insert_with(BTreeSet::new);
        set.extend(ids.into_iter().map(Into::into));
        e.count = e.count.max(set.len());
    }

    /// Candidate count; 0 for unknown surfaces.
    pub fn lookup(&self, surface: &str) -> usize {
        self.entries.get(surface).map_or(0, |e| e.count)
    }

    pub fn candidates(&self, surface: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(surface)?.ids.as_ref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, FeatureError> {
        let mut dict = CandidateDictionary::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: &str| FeatureError::MalformedDictionary {
                line: i + 1,
                message: message.into(),
            };
            let (surface, rest) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected surface<TAB>value"))?;
            if surface.is_empty() || rest.is_empty() {
                return Err(malformed("empty surface or value"));
            }
            if rest.bytes().all(|b| b.is_ascii_digit()) {
                let count: usize = rest.parse().map_err(|_| malformed("count out of range"))?;
                if count == 0 {
                    return Err(malformed("candidate count must be at least 1"));
                }
                dict.insert_count(surface, count);
            } else {
                let ids: Vec<&str> = rest.split(',').map(str::trim).collect();
                if ids.iter().any(|id| id.is_empty()) {
                    return Err(malformed("empty candidate id"));
                }
                dict.insert_ids(surface, ids);
            }
        }
        Ok(dict)
    }
}

/// Load a candidate dictionary file.
pub fn load_candidate_dictionary(
    path: impl AsRef<Path>,
) -> Result<CandidateDictionary, FeatureError> {
    CandidateDictionary::read(BufReader::new(File::open(path)?))
}
