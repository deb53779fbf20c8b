use std::fmt::Write as _;
use std::io::Write as _;

use anyhow::{bail, Context, Result};
use linkdiff::consensus::{
    align, class_distribution, label_all, validate_annotations, write_labels, AlignPolicy,
};
use linkdiff::embeddings::{slice_corpus, train_slices, EmbeddingParams};
use linkdiff::features::{DocumentEntityCounts, Feature, FeatureContext, FeatureSchema};
use linkdiff::synthetic::{generate_fixture, FixtureConfig};

use super::{
    load_corpus, load_dictionary, load_mentions, load_redirects, load_systems, stage_seed,
};
use crate::config::{Paths, PipelineConfig};
use crate::failure::{Degenerate, IoFailure};
use crate::{files, FeaturesArgs};

pub fn label(cfg: &PipelineConfig, policy: Option<AlignPolicy>) -> Result<()> {
    if cfg.paths.systems.len() < 2 {
        bail!(
            "labelling needs at least two annotation dumps in paths.systems, got {}",
            cfg.paths.systems.len()
        );
    }
    let policy = policy.unwrap_or(cfg.consensus.policy);
    let redirects = load_redirects(cfg)?;
    let (names, sets) = load_systems(cfg, redirects.as_ref())?;
    if cfg.paths.corpus.is_some() {
        let corpus = load_corpus(cfg)?;
        for (name, anns) in names.iter().zip(&sets) {
            validate_annotations(anns, &corpus).with_context(|| format!("system {name}"))?;
        }
    }
    let labelled = label_all(align(&sets, policy)?);
    let dist = class_distribution(&labelled);
    let out = cfg.out_dir();
    let labels_path = cfg.labels_path();
    files::write_with(&labels_path, |w| {
        write_labels(w, &labelled).with_context(|| IoFailure::write(&labels_path))
    })?;
    let mut summary = String::new();
    writeln!(summary, "systems\t{}", names.join(","))?;
    writeln!(summary, "policy\t{}", format!("{policy:?}").to_lowercase())?;
    writeln!(summary, "{dist}")?;
    files::write_string(&out.join("label_summary.txt"), &summary)?;
    log::info!("{} aligned mentions labelled", labelled.len());
    if labelled.is_empty() {
        return Err(Degenerate("no mention is recognised by every system".into()).into());
    }
    Ok(())
}

fn needs_embeddings(schema: &FeatureSchema) -> bool {
    [Feature::TJMin, Feature::TJMax, Feature::TJAvg]
        .into_iter()
        .any(|f| schema.contains(f))
}

pub fn features(cfg: &PipelineConfig, args: &FeaturesArgs) -> Result<()> {
    let mut schema = match &args.schema {
        Some(spec) => FeatureSchema::parse(spec).with_context(|| format!("--schema {spec:?}"))?,
        None => FeatureSchema::all(),
    };
    if args.no_temporal {
        schema = schema
            .intersect(&FeatureSchema::without_temporal())
            .context("--no-temporal leaves no columns")?;
    }
    let corpus = load_corpus(cfg)?;
    let dictionary = load_dictionary(cfg)?;
    let mentions_path = args.mentions.clone().unwrap_or_else(|| cfg.labels_path());
    let records = load_mentions(&mentions_path)?;
    let redirects = load_redirects(cfg)?;
    let (_, sets) = load_systems(cfg, redirects.as_ref())?;
    if sets.is_empty() {
        log::warn!("no annotation dumps configured; d_ents will be 0 for every document");
    }
    let counts = DocumentEntityCounts::from_annotations(sets.iter().map(Vec::as_slice));

    let models = if needs_embeddings(&schema) {
        let params = EmbeddingParams {
            seed: stage_seed(cfg, "embeddings"),
            ..cfg.embeddings.clone()
        };
        let slices = slice_corpus(&corpus, cfg.features.granularity);
        let models = train_slices(&slices, &params)?;
        let dir = cfg.out_dir().join("embeddings");
        for m in &models {
            let path = dir.join(format!("{}.vec", m.slice_label()));
            files::write_with(&path, |w| {
                m.write(w).with_context(|| IoFailure::write(&path))
            })?;
        }
        log::info!("{} slice models trained", models.len());
        if models.len() < 2 {
            log::warn!("fewer than two slice models; stability columns will be missing");
        }
        models
    } else {
        Vec::new()
    };

    let ctx = FeatureContext {
        corpus: &corpus,
        dictionary: &dictionary,
        models: &models,
        entity_counts: &counts,
        config: &cfg.features,
    };
    let table = ctx.extract_records(&records)?.project(&schema)?;
    let missing = table
        .rows
        .iter()
        .filter(|r| schema.columns().iter().any(|&f| r.is_missing(f)))
        .count();
    log::info!(
        "{} feature rows, {missing} with missing values",
        table.len()
    );
    let path = cfg.features_path();
    files::write_with(&path, |w| {
        table.write_csv(w).with_context(|| IoFailure::write(&path))
    })
}

pub fn gen_synthetic(cfg: &PipelineConfig, documents: usize) -> Result<()> {
    let mut fx_cfg = FixtureConfig::default();
    fx_cfg.corpus.documents = documents;
    let fixture = generate_fixture(&fx_cfg, stage_seed(cfg, "synthetic"))?;
    let dir = cfg.out_dir();
    fixture
        .write_to(&dir)
        .with_context(|| IoFailure::write(&dir))?;

    let mut generated = PipelineConfig {
        seed: Some(cfg.seed()),
        out: Some("results".into()),
        paths: Paths {
            corpus: Some("corpus.jsonl".into()),
            systems: fixture
                .systems
                .iter()
                .map(|(name, _)| format!("systems/{name}.tsv").into())
                .collect(),
            candidates: Some("candidates.tsv".into()),
            gold: Some("gold.tsv".into()),
            ..Default::default()
        },
        ..Default::default()
    };
    generated.features.kb_year = fx_cfg.kb_year;
    generated.embeddings.dim = 25;
    generated.embeddings.min_count = 2;
    let text = toml::to_string_pretty(&generated).context("cannot serialise the config")?;
    let path = dir.join("config.toml");
    files::write_with(&path, |w| {
        w.write_all(b"# Generated by `linkdiff gen-synthetic`.\n")
            .and_then(|()| w.write_all(text.as_bytes()))
            .with_context(|| IoFailure::write(&path))
    })?;
    log::info!(
        "{} documents, {} gold mentions, {} systems",
        fixture.corpus.len(),
        fixture.gold.len(),
        fixture.systems.len()
    );
    Ok(())
}
