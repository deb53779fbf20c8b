//! Seeded synthetic corpora and EL fixtures.
//!
//! [`generate_synthetic_corpus`] produces topic-clustered documents.
//! [`generate_fixture`] additionally plants ambiguous entity mentions in the
//! text and simulates several EL systems linking them, so every stage of the
//! pipeline (labelling through simulation) can run without licensed data.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::consensus::{write_annotation_dump, MentionKey, SystemAnnotation};
use crate::corpus::{Corpus, CorpusError, Document};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCluster {
    pub name: String,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub topics: Vec<TopicCluster>,
    /// Inclusive range.
    pub sentences_per_doc: (usize, usize),
    /// Inclusive range.
    pub words_per_sentence: (usize, usize),
}

const SPORTS: &str = "match goal coach striker league season stadium referee penalty keeper \
    tournament champion trophy defender midfield fans score victory defeat transfer \
    captain injury training squad derby final semifinal kickoff halftime whistle";
const FINANCE: &str = "market shares stock investor bank interest inflation bond dividend \
    earnings revenue profit merger acquisition currency exchange trader index rally \
    recession budget deficit loan credit fund portfolio equity yield audit";
const ARTS: &str = "gallery painting museum sculpture exhibit canvas artist portrait opera \
    concert orchestra symphony theater ballet novel poetry critic premiere curator \
    festival film director actor stage chorus sonata mural album lyric";

fn words(list: &str) -> Vec<String> {
    list.split_whitespace().map(str::to_string).collect()
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            documents: 200,
            start: NaiveDate::from_ymd_opt(1990, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(1995, 12, 31).expect("valid date"),
            topics: vec![
                TopicCluster {
                    name: "Sports".into(),
                    words: words(SPORTS),
                },
                TopicCluster {
                    name: "Business".into(),
                    words: words(FINANCE),
                },
                TopicCluster {
                    name: "Arts".into(),
                    words: words(ARTS),
                },
            ],
            sentences_per_doc: (4, 9),
            words_per_sentence: (6, 14),
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::Generator(m.to_string()));
        if self.topics.is_empty() || self.topics.iter().any(|t| t.words.is_empty()) {
            return bad("empty vocabulary");
        }
        if self.start > self.end {
            return bad("start date after end date");
        }
        let (s0, s1) = self.sentences_per_doc;
        let (w0, w1) = self.words_per_sentence;
        if s0 == 0 || s0 > s1 || w0 == 0 || w0 > w1 {
            return bad("sentence and word ranges must be non-empty and positive");
        }
        Ok(())
    }
}

/// An ambiguous surface and its candidate entities (most popular first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub surface: String,
    pub candidates: Vec<String>,
}

/// A simulated EL system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSystem {
    pub name: String,
    /// Probability of linking an unambiguous, recent mention correctly.
    pub skill: f64,
    /// Probability of recognising a planted mention at all.
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub corpus: SyntheticConfig,
    pub lexicon: Vec<LexiconEntry>,
    pub systems: Vec<SimulatedSystem>,
    /// Probability that a word slot is replaced by a lexicon mention.
    pub mention_rate: f64,
    /// Reference year of the simulated knowledge base.
    pub kb_year: i32,
    /// Per extra candidate, the chance of a correct link is multiplied by this.
    pub ambiguity_decay: f64,
    /// Per year of document age, the chance of a correct link drops by this.
    pub age_penalty: f64,
    /// Probability that a wrong link goes to the most popular wrong candidate
    /// rather than a uniformly chosen one.
    pub popular_error: f64,
}

const SURFACES: &[&str] = &[
    "Jordan",
    "Paris",
    "Adams",
    "Washington",
    "Ronaldo",
    "Georgia",
    "Mercury",
    "Apple",
    "Jaguar",
    "Phoenix",
    "Columbia",
    "Lincoln",
    "Victoria",
    "Kennedy",
    "Madison",
    "Orlando",
    "Houston",
    "Dallas",
    "Clinton",
    "Chelsea",
    "Milan",
    "Turin",
    "Athens",
    "Cambridge",
    "Boston Celtics",
    "New York Times",
    "John McCain",
    "Arnold Schwarzenegger",
    "European Central Bank",
    "Federal Reserve",
    "Dow Jones",
    "Nelson Mandela",
    "Wall Street",
    "Berlin Wall",
    "Warsaw Pact",
    "United Nations",
    "World Bank",
    "Real Madrid",
];

/// Single-word surfaces get 4-15 candidates, multi-word ones 1-3.
pub fn default_lexicon() -> Vec<LexiconEntry> {
    SURFACES
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let base = s.replace(' ', "_");
            let n = if s.contains(' ') {
                1 + i % 3
            } else {
                4 + (i * 7) % 12
            };
            let candidates = (0..n)
                .map(|j| {
                    if j == 0 {
                        base.clone()
                    } else {
                        format!("{base}_({j})")
                    }
                })
                .collect();
            LexiconEntry {
                surface: s.to_string(),
                candidates,
            }
        })
        .collect()
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            corpus: SyntheticConfig::default(),
            lexicon: default_lexicon(),
            systems: vec![
                SimulatedSystem {
                    name: "alpha".into(),
                    skill: 0.97,
                    recall: 0.9,
                },
                SimulatedSystem {
                    name: "beta".into(),
                    skill: 0.93,
                    recall: 0.85,
                },
                SimulatedSystem {
                    name: "gamma".into(),
                    skill: 0.9,
                    recall: 0.88,
                },
            ],
            mention_rate: 0.06,
            kb_year: 2016,
            ambiguity_decay: 0.97,
            age_penalty: 0.005,
            popular_error: 0.6,
        }
    }
}

/// A mention planted in the text together with its true entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub key: MentionKey,
    pub entity: String,
    pub candidates: usize,
}

/// Corpus plus everything an end-to-end run needs.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub corpus: Corpus,
    /// `(system name, annotations)` in system order.
    pub systems: Vec<(String, Vec<SystemAnnotation>)>,
    pub lexicon: Vec<LexiconEntry>,
    pub gold: Vec<Placement>,
}

struct Builder<'a> {
    cfg: &'a SyntheticConfig,
    lexicon: &'a [LexiconEntry],
    mention_rate: f64,
}

impl Builder<'_> {
    fn build(&self, rng: &mut Rng) -> Result<(Corpus, Vec<Placement>), CorpusError> {
        self.cfg.validate()?;
        let span_days = (self.cfg.end - self.cfg.start).num_days();
        let marks = ['.', '.', '.', '.', '!', '?', ';'];
        let mut docs = Vec::with_capacity(self.cfg.documents);
        let mut placements = Vec::new();
        for i in 0..self.cfg.documents {
            let id = format!("doc{i:05}");
            let date = self.cfg.start + chrono::Duration::days(rng.gen_range(0..=span_days));
            let topic = &self.cfg.topics[rng.gen_range(0..self.cfg.topics.len())];
            let mut text = String::new();
            let mut chars = 0usize;
            let n_sent = rng.gen_range(self.cfg.sentences_per_doc.0..=self.cfg.sentences_per_doc.1);
            for s in 0..n_sent {
                if s > 0 {
                    text.push(' ');
                    chars += 1;
                }
                let n_words =
                    rng.gen_range(self.cfg.words_per_sentence.0..=self.cfg.words_per_sentence.1);
                for w in 0..n_words {
                    if w > 0 {
                        text.push(' ');
                        chars += 1;
                    }
                    let plant = !self.lexicon.is_empty() && rng.gen_bool(self.mention_rate);
                    let word = if plant {
                        let entry = &self.lexicon[rng.gen_range(0..self.lexicon.len())];
                        let entity = pick_true_entity(&entry.candidates, rng);
                        placements.push(Placement {
                            key: MentionKey::new(&id, chars, &entry.surface),
                            entity,
                            candidates: entry.candidates.len(),
                        });
                        entry.surface.as_str()
                    } else {
                        topic.words[rng.gen_range(0..topic.words.len())].as_str()
                    };
                    text.push_str(word);
                    chars += word.chars().count();
                }
                let mark = marks[rng.gen_range(0..marks.len())];
                text.push(mark);
                chars += 1;
            }
            docs.push(Document::new(id, date, Some(topic.name.clone()), text)?);
        }
        Ok((Corpus::from_documents(docs)?, placements))
    }
}

fn pick_true_entity(candidates: &[String], rng: &mut Rng) -> String {
    if candidates.len() == 1 || rng.gen_bool(0.5) {
        candidates[0].clone()
    } else {
        candidates[rng.gen_range(1..candidates.len())].clone()
    }
}

/// Deterministic topic-clustered corpus. Publication dates are uniform over
/// `[start, end]`; each document draws all its words from one topic.
pub fn generate_synthetic_corpus(cfg: &SyntheticConfig, seed: u64) -> Result<Corpus, CorpusError> {
    let builder = Builder {
        cfg,
        lexicon: &[],
        mention_rate: 0.0,
    };
    Ok(builder.build(&mut seed::rng(seed))?.0)
}

/// Corpus with planted mentions, simulated system dumps and gold links.
///
/// A system links a mention correctly with probability
/// `skill * ambiguity_decay^(candidates-1) * (1 - age_penalty * age)` where
/// `age` is the document's distance in years from `kb_year`. Otherwise it
/// picks the most popular wrong candidate with probability `popular_error`
/// and a uniformly chosen wrong candidate else (an unrelated lexicon entity
/// when the surface is unambiguous).
pub fn generate_fixture(cfg: &FixtureConfig, seed: u64) -> Result<Fixture, CorpusError> {
    if cfg.systems.len() < 2 {
        return Err(CorpusError::Generator(
            "a fixture needs at least two systems".into(),
        ));
    }
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    if !(unit(cfg.mention_rate)
        && unit(cfg.ambiguity_decay)
        && unit(cfg.age_penalty)
        && unit(cfg.popular_error))
    {
        return Err(CorpusError::Generator(
            "mention_rate, ambiguity_decay, age_penalty and popular_error must lie in [0, 1]"
                .into(),
        ));
    }
    let builder = Builder {
        cfg: &cfg.corpus,
        lexicon: &cfg.lexicon,
        mention_rate: cfg.mention_rate,
    };
    let (corpus, placements) = builder.build(&mut seed::rng(seed::derive_named(seed, "corpus")))?;
    let all_entities: Vec<&String> = cfg.lexicon.iter().flat_map(|e| &e.candidates).collect();
    let candidates_of: BTreeMap<&str, &[String]> = cfg
        .lexicon
        .iter()
        .map(|e| (e.surface.as_str(), e.candidates.as_slice()))
        .collect();

    let mut systems = Vec::with_capacity(cfg.systems.len());
    for (si, sys) in cfg.systems.iter().enumerate() {
        let mut rng = seed::rng(seed::derive(seed::derive_named(seed, "systems"), si as u64));
        let mut anns = Vec::new();
        for p in &placements {
            if !rng.gen_bool(sys.recall.clamp(0.0, 1.0)) {
                continue;
            }
            let doc = corpus
                .get(&p.key.doc_id)
                .expect("placement refers to a generated document");
            let age =
                f64::from((cfg.kb_year - chrono::Datelike::year(&doc.publication_date)).max(0));
            let p_ok = (sys.skill
                * cfg.ambiguity_decay.powi(p.candidates as i32 - 1)
                * (1.0 - cfg.age_penalty * age))
                .clamp(0.0, 1.0);
            let entity = if rng.gen_bool(p_ok) {
                p.entity.clone()
            } else {
                let wrong: Vec<&String> = candidates_of[p.key.surface.as_str()]
                    .iter()
                    .filter(|c| **c != p.entity)
                    .collect();
                let popular = rng.gen_bool(cfg.popular_error);
                let pool = if wrong.is_empty() {
                    &all_entities
                } else {
                    &wrong
                };
                let mut pick = if popular && !wrong.is_empty() {
                    wrong[0].clone()
                } else {
                    (*pool.choose(&mut rng).expect("non-empty pool")).clone()
                };
                if pick == p.entity {
                    pick = format!("{}_(other)", p.entity);
                }
                pick
            };
            anns.push(SystemAnnotation {
                system_id: sys.name.clone(),
                doc_id: p.key.doc_id.clone(),
                surface: p.key.surface.clone(),
                offset: p.key.offset,
                entity_id: entity,
            });
        }
        systems.push((sys.name.clone(), anns));
    }
    Ok(Fixture {
        corpus,
        systems,
        lexicon: cfg.lexicon.clone(),
        gold: placements,
    })
}

impl Fixture {
    /// Write `corpus.jsonl`, `systems/<name>.tsv`, `candidates.tsv` and
    /// `gold.tsv` under `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir.join("systems"))?;
        let mut w = BufWriter::new(File::create(dir.join("corpus.jsonl"))?);
        self.corpus
            .write_jsonl(&mut w)
            .map_err(std::io::Error::other)?;
        w.flush()?;
        for (name, anns) in &self.systems {
            let mut w = BufWriter::new(File::create(
                dir.join("systems").join(format!("{name}.tsv")),
            )?);
            write_annotation_dump(&mut w, anns).map_err(std::io::Error::other)?;
            w.flush()?;
        }
        // alternate the two dictionary formats so both are exercised
        let mut w = BufWriter::new(File::create(dir.join("candidates.tsv"))?);
        for (i, e) in self.lexicon.iter().enumerate() {
            if i % 2 == 0 {
                writeln!(w, "{}\t{}", e.surface, e.candidates.len())?;
            } else {
                writeln!(w, "{}\t{}", e.surface, e.candidates.join(","))?;
            }
        }
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join("gold.tsv"))?);
        for p in &self.gold {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                p.key.doc_id, p.key.offset, p.key.surface, p.entity
            )?;
        }
        w.flush()
    }
}
