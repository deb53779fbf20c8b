//! Pipeline configuration file.
//!
//! A TOML file with a global seed, input paths and one table per stage.
//! Relative paths are resolved against the directory of the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use linkdiff::consensus::AlignPolicy;
use linkdiff::embeddings::EmbeddingParams;
use linkdiff::features::{FeatureConfig, FeatureSchema, ImputePolicy};
use linkdiff::learn::{Hyperparams, Variant};
use linkdiff::simulate::{Budget, Strategy};
use serde::{Deserialize, Serialize};

use crate::failure::IoFailure;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Output directory.
    pub out: Option<PathBuf>,
    pub paths: Paths,
    pub consensus: ConsensusSection,
    pub features: FeatureConfig,
    pub embeddings: EmbeddingParams,
    pub learn: LearnSection,
    pub simulate: SimulateSection,
}

/// Inputs. Artifacts produced by earlier stages default to the output
/// directory when left unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    /// One annotation dump per system; the file stem names the system.
    pub systems: Vec<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub redirects: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusSection {
    pub policy: AlignPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnSection {
    /// Variant used by `train`.
    pub variant: Variant,
    /// Variants compared by `eval`.
    pub eval_variants: Vec<Variant>,
    /// Feature selection, e.g. `all`, `no-temporal`, `m_cand,m_len`.
    pub schema: String,
    /// `mean` or `constant:<value>`.
    pub impute: String,
    pub folds: usize,
    /// Balancing settings evaluated by `eval`; `train` uses the first.
    pub balance: Vec<bool>,
    /// Per-class sample fractions evaluated by `eval`; `train` uses the first.
    pub sample: Vec<f64>,
    pub alpha: f64,
    pub hyperparams: Hyperparams,
}

impl Default for LearnSection {
    fn default() -> Self {
        LearnSection {
            variant: Variant::RandomForest,
            eval_variants: Variant::ALL.to_vec(),
            schema: "all".into(),
            impute: "mean".into(),
            folds: 10,
            balance: vec![false, true],
            sample: vec![1.0],
            alpha: 0.05,
            hyperparams: Hyperparams::default(),
        }
    }
}

impl LearnSection {
    pub fn schema(&self) -> Result<FeatureSchema> {
        FeatureSchema::parse(&self.schema)
            .with_context(|| format!("learn.schema {:?}", self.schema))
    }

    pub fn impute(&self) -> Result<ImputePolicy> {
        self.impute
            .parse()
            .map_err(|e: String| anyhow::anyhow!("learn.impute: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub strategies: Vec<Strategy>,
    /// `5%`, `0.05` or an absolute count.
    pub budgets: Vec<String>,
    pub repetitions: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            strategies: Strategy::ALL.to_vec(),
            budgets: vec!["5%".into(), "10%".into(), "15%".into()],
            repetitions: 10,
        }
    }
}

impl SimulateSection {
    pub fn budgets(&self) -> Result<Vec<Budget>> {
        self.budgets
            .iter()
            .map(|b| {
                b.parse()
                    .with_context(|| format!("simulate.budgets entry {b:?}"))
            })
            .collect()
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| IoFailure::read(path))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for slot in [
            &mut p.corpus,
            &mut p.candidates,
            &mut p.redirects,
            &mut p.gold,
            &mut p.labels,
            &mut p.features,
            &mut p.model,
            &mut p.predictions,
        ]
        .into_iter()
        .flatten()
        {
            fix(slot);
        }
        p.systems.iter_mut().for_each(fix);
        if let Some(out) = &mut self.out {
            fix(out);
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// A configured path or its default file name inside the output directory.
    pub fn artifact(&self, configured: &Option<PathBuf>, default_name: &str) -> PathBuf {
        configured
            .clone()
            .unwrap_or_else(|| self.out_dir().join(default_name))
    }

    pub fn labels_path(&self) -> PathBuf {
        self.artifact(&self.paths.labels, "labels.tsv")
    }

    pub fn features_path(&self) -> PathBuf {
        self.artifact(&self.paths.features, "features.csv")
    }

    pub fn model_path(&self) -> PathBuf {
        self.artifact(&self.paths.model, "model.json")
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.artifact(&self.paths.predictions, "predictions.tsv")
    }

    pub fn require<'a>(&self, slot: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        match slot {
            Some(p) => Ok(p),
            None => bail!("paths.{key} is not configured"),
        }
    }

    /// Every configured input that must exist.
    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        let inputs = [&p.corpus, &p.candidates, &p.redirects, &p.gold]
            .into_iter()
            .flatten()
            .chain(&p.systems);
        for path in inputs {
            if !path.exists() {
                return Err(anyhow::Error::new(IoFailure::missing(path)));
            }
        }
        if self.learn.folds < 2 {
            bail!("learn.folds must be at least 2");
        }
        if self.learn.balance.is_empty() || self.learn.sample.is_empty() {
            bail!("learn.balance and learn.sample need at least one entry");
        }
        if self.learn.eval_variants.is_empty() {
            bail!("learn.eval_variants needs at least one entry");
        }
        self.learn.schema()?;
        self.learn.impute()?;
        self.simulate.budgets()?;
        self.embeddings
            .validate()
            .context("invalid embeddings section")?;
        Ok(())
    }
}
