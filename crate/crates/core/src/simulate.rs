//! Oracle-feedback simulation: how much would each system's accuracy rise
//! if a human fixed the links of `N` selected mentions?

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{
    self, AlignedMention, ConsensusError, DifficultyLabel, MentionKey, RedirectMap,
};
use crate::seed;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("no mention is both recognised by every system and present in the gold standard")]
    EmptyEvaluation,
    #[error("mention {0} has no gold-standard entity")]
    MissingGold(MentionKey),
    #[error("mention {0} is not in the evaluated set")]
    NotEvaluated(MentionKey),
    #[error("gold standard lists {0} twice with different entities")]
    ConflictingGold(MentionKey),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("strategy {0} needs predicted labels")]
    MissingPredictions(Strategy),
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SimulateError> = std::result::Result<T, E>;

/// Correct entity per mention.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldStandard {
    links: BTreeMap<MentionKey, String>,
}

impl GoldStandard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a link; the entity is normalized like system annotations.
    pub fn insert(
        &mut self,
        key: MentionKey,
        entity: &str,
        redirects: Option<&RedirectMap>,
    ) -> Result<()> {
        let entity = consensus::normalize_entity(entity, redirects)?;
        match self.links.get(&key) {
            Some(existing) if *existing != entity => Err(SimulateError::ConflictingGold(key)),
            Some(_) => Ok(()),
            None => {
                self.links.insert(key, entity);
                Ok(())
            }
        }
    }

    pub fn get(&self, key: &MentionKey) -> Option<&str> {
        self.links.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &MentionKey) -> bool {
        self.links.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Same line format as a system dump.
    pub fn read<R: BufRead>(reader: R, redirects: Option<&RedirectMap>) -> Result<Self> {
        let mut gold = GoldStandard::new();
        for a in consensus::read_annotation_dump(reader, "gold", redirects)? {
            let key = a.key();
            gold.insert(key, &a.entity_id, None)?;
        }
        Ok(gold)
    }

    pub fn load(path: impl AsRef<Path>, redirects: Option<&RedirectMap>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?), redirects)
    }
}

/// `correct / total`, kept as counts so differences are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Entity chosen for each mention by one system.
pub type Choices = BTreeMap<MentionKey, String>;

/// Fraction of `choices` that agree with `gold`.
pub fn accuracy(choices: &Choices, gold: &GoldStandard) -> Result<Accuracy> {
    if choices.is_empty() {
        return Err(SimulateError::EmptyEvaluation);
    }
    let mut correct = 0;
    for (key, entity) in choices {
        let g = gold
            .get(key)
            .ok_or_else(|| SimulateError::MissingGold(key.clone()))?;
        correct += usize::from(g == entity);
    }
    Ok(Accuracy {
        correct,
        total: choices.len(),
    })
}

/// Replace the entities of `selected` mentions with their gold entity.
pub fn apply_feedback(
    choices: &Choices,
    selected: &[MentionKey],
    gold: &GoldStandard,
) -> Result<Choices> {
    let mut out = choices.clone();
    for key in selected {
        let g = gold
            .get(key)
            .ok_or_else(|| SimulateError::MissingGold(key.clone()))?;
        let slot = out
            .get_mut(key)
            .ok_or_else(|| SimulateError::NotEvaluated(key.clone()))?;
        *slot = g.to_string();
    }
    Ok(out)
}

/// Mentions every system recognised that also appear in the gold standard.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSet {
    pub keys: Vec<MentionKey>,
    pub gold: Vec<String>,
    pub systems: Vec<String>,
    /// `[system][mention]`.
    pub choices: Vec<Vec<String>>,
}

impl EvaluationSet {
    /// Build from exact-aligned mentions whose entity lists follow the
    /// order of `systems`.
    pub fn from_aligned(
        aligned: &[AlignedMention],
        systems: &[String],
        gold: &GoldStandard,
    ) -> Result<Self> {
        let mut rows: Vec<&AlignedMention> =
            aligned.iter().filter(|m| gold.contains(&m.key())).collect();
        rows.sort_by_key(|m| m.key());
        if rows.is_empty() {
            return Err(SimulateError::EmptyEvaluation);
        }
        if let Some(bad) = rows.iter().find(|m| m.entities.len() != systems.len()) {
            return Err(SimulateError::LengthMismatch(format!(
                "mention {} has {} entities for {} systems",
                bad.key(),
                bad.entities.len(),
                systems.len()
            )));
        }
        let keys: Vec<MentionKey> = rows.iter().map(|m| m.key()).collect();
        let gold_entities = keys
            .iter()
            .map(|k| gold.get(k).expect("filtered").to_string())
            .collect();
        let choices = (0..systems.len())
            .map(|s| rows.iter().map(|m| m.entities[s].clone()).collect())
            .collect();
        Ok(EvaluationSet {
            keys,
            gold: gold_entities,
            systems: systems.to_vec(),
            choices,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn system_choices(&self, system: usize) -> Choices {
        self.keys
            .iter()
            .cloned()
            .zip(self.choices[system].iter().cloned())
            .collect()
    }

    pub fn gold_standard(&self) -> GoldStandard {
        GoldStandard {
            links: self
                .keys
                .iter()
                .cloned()
                .zip(self.gold.iter().cloned())
                .collect(),
        }
    }

    fn wrong(&self, system: usize) -> Vec<bool> {
        self.choices[system]
            .iter()
            .zip(&self.gold)
            .map(|(c, g)| c != g)
            .collect()
    }

    pub fn before(&self, system: usize) -> Accuracy {
        let wrong = self.wrong(system).iter().filter(|&&w| w).count();
        Accuracy {
            correct: self.len() - wrong,
            total: self.len(),
        }
    }

    /// Accuracy once the mentions at `selected` carry their gold entity.
    pub fn after(&self, system: usize, selected: &[usize]) -> Accuracy {
        let wrong = self.wrong(system);
        let fixed = selected.iter().filter(|&&i| wrong[i]).count();
        let before = self.before(system);
        Accuracy {
            correct: before.correct + fixed,
            total: before.total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    /// Consensus-HARD mentions, filled up with consensus-MEDIUM ones.
    Difficult,
    /// Like `Difficult` over classifier-predicted labels.
    PredDifficult,
    Random,
    /// Most candidate entities first.
    Candidates,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Difficult,
        Strategy::PredDifficult,
        Strategy::Random,
        Strategy::Candidates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Difficult => "DIFFICULT",
            Strategy::PredDifficult => "PRED_DIFFICULT",
            Strategy::Random => "RANDOM",
            Strategy::Candidates => "CANDIDATES",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = SimulateError;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', '.'], "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == norm)
            .ok_or_else(|| SimulateError::UnknownStrategy(s.to_string()))
    }
}

/// Per evaluated mention: consensus label, predicted label, candidate count.
#[derive(Debug, Clone, Copy)]
pub struct SelectionInputs<'a> {
    pub labels: &'a [DifficultyLabel],
    pub predicted: Option<&'a [DifficultyLabel]>,
    pub candidates: &'a [usize],
}

impl SelectionInputs<'_> {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn check(&self, expected: usize) -> Result<()> {
        let bad = self.labels.len() != expected
            || self.candidates.len() != expected
            || self.predicted.is_some_and(|p| p.len() != expected);
        if bad {
            return Err(SimulateError::LengthMismatch(format!(
                "selection inputs must all cover {expected} mentions"
            )));
        }
        Ok(())
    }
}

fn sample(rng: &mut seed::Rng, pool: &[usize], n: usize) -> Vec<usize> {
    if n >= pool.len() {
        return pool.to_vec();
    }
    index::sample(rng, pool.len(), n)
        .into_iter()
        .map(|j| pool[j])
        .collect()
}

fn hard_first(labels: &[DifficultyLabel], n: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let with = |l: DifficultyLabel| -> Vec<usize> {
        (0..labels.len()).filter(|&i| labels[i] == l).collect()
    };
    let hard = with(DifficultyLabel::Hard);
    let mut out = sample(rng, &hard, n);
    if out.len() < n {
        out.extend(sample(rng, &with(DifficultyLabel::Medium), n - out.len()));
    }
    out
}

/// Indices of up to `n` mentions chosen by `strategy`, sorted ascending.
/// The result has `min(n, pool)` entries where the pool is HARD ∪ MEDIUM
/// for the difficulty strategies and every mention otherwise.
pub fn select_mentions(
    strategy: Strategy,
    n: usize,
    inputs: &SelectionInputs<'_>,
    seed: u64,
) -> Result<Vec<usize>> {
    inputs.check(inputs.len())?;
    let mut rng = seed::rng(seed);
    let mut out = match strategy {
        Strategy::Difficult => hard_first(inputs.labels, n, &mut rng),
        Strategy::PredDifficult => hard_first(
            inputs
                .predicted
                .ok_or(SimulateError::MissingPredictions(strategy))?,
            n,
            &mut rng,
        ),
        Strategy::Random => sample(&mut rng, &(0..inputs.len()).collect::<Vec<_>>(), n),
        Strategy::Candidates => {
            let mut order: Vec<usize> = (0..inputs.len()).collect();
            order.shuffle(&mut rng);
            order.sort_by(|&a, &b| inputs.candidates[b].cmp(&inputs.candidates[a]));
            order.truncate(n);
            order
        }
    };
    out.sort_unstable();
    Ok(out)
}

/// Number of mentions to hand to the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Count(usize),
    /// Fraction of the evaluated mentions, rounded half-up.
    Fraction(f64),
}

impl Budget {
    pub fn resolve(&self, evaluated: usize) -> usize {
        match *self {
            Budget::Count(n) => n,
            Budget::Fraction(f) => (f * evaluated as f64 + 0.5).floor() as usize,
        }
    }
}

impl FromStr for Budget {
    type Err = SimulateError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || SimulateError::InvalidBudget(s.to_string());
        if let Some(p) = s.strip_suffix('%') {
            let v: f64 = p.trim().parse().map_err(|_| bad())?;
            return if (0.0..=100.0).contains(&v) {
                Ok(Budget::Fraction(v / 100.0))
            } else {
                Err(bad())
            };
        }
        if let Ok(n) = s.parse::<usize>() {
            return Ok(Budget::Count(n));
        }
        let v: f64 = s.parse().map_err(|_| bad())?;
        if (0.0..=1.0).contains(&v) {
            Ok(Budget::Fraction(v))
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Count(n) => write!(f, "{n}"),
            Budget::Fraction(v) => write!(f, "{}%", v * 100.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub strategies: Vec<Strategy>,
    pub budgets: Vec<Budget>,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            strategies: Strategy::ALL.to_vec(),
            budgets: vec![
                Budget::Fraction(0.05),
                Budget::Fraction(0.10),
                Budget::Fraction(0.15),
            ],
            repetitions: 10,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub system: String,
    pub strategy: Strategy,
    pub budget: usize,
    pub before: Accuracy,
    /// One entry per repetition.
    pub after: Vec<Accuracy>,
    pub after_mean: f64,
    pub after_stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub seed: u64,
    pub repetitions: usize,
    pub evaluated: usize,
    pub rows: Vec<SimulationRow>,
}

/// Seed of repetition `rep`; shared by every strategy and budget.
pub fn repetition_seed(master: u64, rep: usize) -> u64 {
    seed::derive(seed::derive_named(master, "simulate"), rep as u64)
}

/// Run every (strategy, budget) for `cfg.repetitions` repetitions. Within a
/// repetition one selection is applied to all systems. Rows are ordered by
/// system, strategy, then budget.
pub fn run_simulation(
    eval: &EvaluationSet,
    inputs: &SelectionInputs<'_>,
    cfg: &SimulationConfig,
) -> Result<SimulationResult> {
    if eval.is_empty() {
        return Err(SimulateError::EmptyEvaluation);
    }
    inputs.check(eval.len())?;
    if cfg.repetitions == 0 {
        return Err(SimulateError::InvalidBudget(
            "at least one repetition is needed".into(),
        ));
    }
    let budgets: Vec<usize> = cfg.budgets.iter().map(|b| b.resolve(eval.len())).collect();
    // selections[strategy][budget][rep]
    let selections: Vec<Vec<Vec<Vec<usize>>>> = cfg
        .strategies
        .iter()
        .map(|&st| {
            budgets
                .iter()
                .map(|&n| {
                    (0..cfg.repetitions)
                        .into_par_iter()
                        .map(|rep| select_mentions(st, n, inputs, repetition_seed(cfg.seed, rep)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (s, name) in eval.systems.iter().enumerate() {
        let before = eval.before(s);
        for (si, &strategy) in cfg.strategies.iter().enumerate() {
            for (bi, &budget) in budgets.iter().enumerate() {
                let after: Vec<Accuracy> = selections[si][bi]
                    .iter()
                    .map(|sel| eval.after(s, sel))
                    .collect();
                let vals: Vec<f64> = after.iter().map(Accuracy::value).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let sd = if vals.len() > 1 {
                    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64)
                        .sqrt()
                } else {
                    0.0
                };
                rows.push(SimulationRow {
                    system: name.clone(),
                    strategy,
                    budget,
                    before,
                    after,
                    after_mean: mean,
                    after_stddev: sd,
                });
            }
        }
    }
    Ok(SimulationResult {
        seed: cfg.seed,
        repetitions: cfg.repetitions,
        evaluated: eval.len(),
        rows,
    })
}

impl SimulationResult {
    /// Tab-separated report, one line per (system, strategy, budget).
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "system\tstrategy\tbudget\tbefore\tafter_mean\tafter_stddev\trepetitions\tseed"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}",
                r.system,
                r.strategy,
                r.budget,
                r.before.value(),
                r.after_mean,
                r.after_stddev,
                self.repetitions,
                self.seed
            )?;
        }
        Ok(())
    }

    /// One panel per budget: rows are systems, columns BEFORE and each strategy.
    pub fn write_panels<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut budgets: Vec<usize> = self.rows.iter().map(|r| r.budget).collect();
        budgets.sort_unstable();
        budgets.dedup();
        let mut strategies: Vec<Strategy> = self.rows.iter().map(|r| r.strategy).collect();
        strategies.sort();
        strategies.dedup();
        let mut systems: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !systems.contains(&r.system.as_str()) {
                systems.push(&r.system);
            }
        }
        for b in budgets {
            writeln!(w, "N = {b}")?;
            write!(w, "{:<12} {:>8}", "system", "BEFORE")?;
            for s in &strategies {
                write!(w, " {:>14}", s.as_str())?;
            }
            writeln!(w)?;
            for sys in &systems {
                let row = |st: Strategy| {
                    self.rows
                        .iter()
                        .find(|r| r.system == *sys && r.strategy == st && r.budget == b)
                };
                let before = self
                    .rows
                    .iter()
                    .find(|r| r.system == *sys)
                    .map_or(0.0, |r| r.before.value());
                write!(w, "{sys:<12} {before:>8.4}")?;
                for &s in &strategies {
                    match row(s) {
                        Some(r) => write!(w, " {:>14.4}", r.after_mean)?,
                        None => write!(w, " {:>14}", "-")?,
                    }
                }
                writeln!(w)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
