mod learn;
mod pipeline;
mod simulate;

use std::path::Path;

use anyhow::{Context, Result};
use linkdiff::consensus::{read_annotation_dump, read_mentions, MentionRecord, RedirectMap};
use linkdiff::features::{CandidateDictionary, FeatureTable};
use linkdiff::{seed, Corpus, SystemAnnotation};

pub use learn::{correlate, eval, importance, predict, train};
pub use pipeline::{features, gen_synthetic, label};
pub use simulate::simulate;

use crate::config::PipelineConfig;
use crate::files;

/// Seed of a named stage; logged so the stage can be rerun alone.
fn stage_seed(cfg: &PipelineConfig, stage: &str) -> u64 {
    let s = seed::derive_named(cfg.seed(), stage);
    log::info!("stage {stage}: seed {s}");
    s
}

fn load_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    let path = cfg.require(&cfg.paths.corpus, "corpus")?;
    Corpus::read_jsonl(files::open(path)?).with_context(|| format!("corpus {}", path.display()))
}

fn load_redirects(cfg: &PipelineConfig) -> Result<Option<RedirectMap>> {
    cfg.paths
        .redirects
        .as_deref()
        .map(|p| {
            RedirectMap::read(files::open(p)?).with_context(|| format!("redirects {}", p.display()))
        })
        .transpose()
}

fn system_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// `(system names, annotations)` in configuration order.
fn load_systems(
    cfg: &PipelineConfig,
    redirects: Option<&RedirectMap>,
) -> Result<(Vec<String>, Vec<Vec<SystemAnnotation>>)> {
    let mut names = Vec::new();
    let mut sets = Vec::new();
    for path in &cfg.paths.systems {
        let name = system_name(path);
        let anns = read_annotation_dump(files::open(path)?, &name, redirects)
            .with_context(|| format!("annotation dump {}", path.display()))?;
        log::info!("system {name}: {} annotations", anns.len());
        names.push(name);
        sets.push(anns);
    }
    Ok((names, sets))
}

fn load_dictionary(cfg: &PipelineConfig) -> Result<CandidateDictionary> {
    let path = cfg
        .paths
        .candidates
        .as_deref()
        .context("a candidate dictionary is required (paths.candidates)")?;
    CandidateDictionary::read(files::open(path)?)
        .with_context(|| format!("candidate dictionary {}", path.display()))
}

fn load_mentions(path: &Path) -> Result<Vec<MentionRecord>> {
    read_mentions(files::open(path)?).with_context(|| format!("mentions {}", path.display()))
}

fn load_table(path: &Path) -> Result<FeatureTable> {
    FeatureTable::read_csv(files::open(path)?)
        .with_context(|| format!("feature table {}", path.display()))
}
