use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use linkdiff::consensus::DifficultyLabel;
use linkdiff::features::{FeatureSchema, FeatureTable};
use linkdiff::learn::{
    cross_validate, mdi, paired_t_test, read_model, table_correlations, train as fit, undersample,
    write_model, CvConfig, CvReport, Dataset, TTest, TableEncoder, Variant,
};
use linkdiff::seed;
use serde::Serialize;

use super::{load_mentions, load_table, stage_seed};
use crate::config::PipelineConfig;
use crate::failure::{Degenerate, IoFailure};
use crate::{files, EvalArgs, TrainArgs};

/// An explicit `--schema` must be covered by the table; the configured
/// schema is narrowed to the columns the table has.
fn schema_for(
    cfg: &PipelineConfig,
    flag: &Option<String>,
    table: &FeatureTable,
) -> Result<FeatureSchema> {
    match flag {
        Some(spec) => FeatureSchema::parse(spec).with_context(|| format!("--schema {spec:?}")),
        None => {
            let wanted = cfg.learn.schema()?;
            let schema = wanted
                .intersect(&table.schema)
                .context("the feature table has none of the configured learn.schema columns")?;
            if schema != wanted {
                log::info!(
                    "using the {} configured column(s) present in the feature table",
                    schema.columns().len()
                );
            }
            Ok(schema)
        }
    }
}

/// Encoder and labelled dataset for the requested columns.
fn encode(
    cfg: &PipelineConfig,
    table: &FeatureTable,
    schema: &FeatureSchema,
) -> Result<(TableEncoder, Dataset)> {
    if !schema.is_subset_of(&table.schema) {
        bail!(
            "the feature table has no column(s) {}",
            schema
                .columns()
                .iter()
                .filter(|f| !table.schema.contains(**f))
                .map(|f| f.name())
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    let encoder = TableEncoder::fit(table, schema, cfg.learn.impute()?)?;
    let data = encoder.dataset(table)?;
    Ok((encoder, data))
}

fn resample(data: Dataset, fraction: f64, balance: bool, seed: u64) -> Result<Dataset> {
    let data = if fraction < 1.0 {
        data.stratified_sample(fraction, seed::derive_named(seed, "sample"))?
    } else {
        data
    };
    if balance {
        let all: Vec<usize> = (0..data.len()).collect();
        let keep = undersample(&all, data.labels(), seed::derive_named(seed, "balance"));
        Ok(data.subset(&keep))
    } else {
        Ok(data)
    }
}

pub fn train(cfg: &PipelineConfig, args: &TrainArgs) -> Result<()> {
    let table = load_table(&args.features.clone().unwrap_or_else(|| cfg.features_path()))?;
    let schema = schema_for(cfg, &args.schema, &table)?;
    let variant = args.variant.unwrap_or(cfg.learn.variant);
    let (encoder, data) = encode(cfg, &table, &schema)?;
    let balance = args.balance || cfg.learn.balance[0];
    let fraction = args.sample.unwrap_or(cfg.learn.sample[0]);
    let data = resample(data, fraction, balance, stage_seed(cfg, "resample"))?;
    log::info!(
        "training {variant} on {} rows x {} columns (class counts {:?})",
        data.len(),
        data.n_features(),
        data.class_counts()
    );
    let model = fit(
        &data,
        variant,
        &cfg.learn.hyperparams,
        stage_seed(cfg, "train"),
    )?
    .with_encoder(encoder);
    let path = cfg.model_path();
    files::write_with(&path, |w| {
        write_model(&model, w).with_context(|| IoFailure::write(&path))
    })
}

#[derive(Debug, Serialize)]
struct EvalCell {
    variant: Variant,
    balance: bool,
    sample: f64,
    rows: usize,
    report: CvReport,
}

#[derive(Debug, Serialize)]
struct Comparison {
    baseline: Variant,
    variant: Variant,
    balance: bool,
    sample: f64,
    test: TTest,
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    seed: u64,
    folds: usize,
    schema: Vec<String>,
    cells: Vec<EvalCell>,
    comparisons: Vec<Comparison>,
}

pub fn eval(cfg: &PipelineConfig, args: &EvalArgs) -> Result<()> {
    let table = load_table(&args.features.clone().unwrap_or_else(|| cfg.features_path()))?;
    let schema = schema_for(cfg, &args.schema, &table)?;
    let variants = if args.variants.is_empty() {
        cfg.learn.eval_variants.clone()
    } else {
        args.variants.clone()
    };
    let folds = args.folds.unwrap_or(cfg.learn.folds);
    let (_, data) = encode(cfg, &table, &schema)?;
    let cv_seed = stage_seed(cfg, "eval");
    let sample_seed = stage_seed(cfg, "sample");

    let mut cells = Vec::new();
    for (si, &fraction) in cfg.learn.sample.iter().enumerate() {
        let sampled = if fraction < 1.0 {
            data.stratified_sample(fraction, seed::derive(sample_seed, si as u64))?
        } else {
            data.clone()
        };
        for &balance in &cfg.learn.balance {
            for &variant in &variants {
                let cv = CvConfig {
                    folds,
                    balance,
                    seed: cv_seed,
                };
                let report = cross_validate(&sampled, variant, &cfg.learn.hyperparams, &cv)
                    .with_context(|| format!("{variant}, balance={balance}, sample={fraction}"))?;
                log::info!(
                    "{variant} balance={balance} sample={fraction}: macro F1 {:.4}",
                    report.pooled.macro_avg.f1
                );
                cells.push(EvalCell {
                    variant,
                    balance,
                    sample: fraction,
                    rows: sampled.len(),
                    report,
                });
            }
        }
    }

    let mut comparisons = Vec::new();
    for group in cells.chunks(variants.len()) {
        let base = &group[0];
        for other in &group[1..] {
            let test = paired_t_test(
                &other.report.fold_macro_f1(),
                &base.report.fold_macro_f1(),
                cfg.learn.alpha,
            )?;
            comparisons.push(Comparison {
                baseline: base.variant,
                variant: other.variant,
                balance: other.balance,
                sample: other.sample,
                test,
            });
        }
    }

    let mut text = String::new();
    for c in &cells {
        writeln!(
            text,
            "== {} | balance={} | sample={} | rows={} | folds={folds}",
            c.variant, c.balance, c.sample, c.rows
        )?;
        writeln!(text, "{}", c.report.pooled)?;
    }
    if !comparisons.is_empty() {
        writeln!(
            text,
            "== paired t-test on per-fold macro F1 (alpha={})",
            cfg.learn.alpha
        )?;
        for c in &comparisons {
            let t = c
                .test
                .t
                .map_or_else(|| "undefined".to_string(), |t| format!("{t:.4}"));
            writeln!(
                text,
                "{} vs {} | balance={} | sample={} | mean diff {:+.4} | t {t} | critical {:.3} | {}",
                c.variant,
                c.baseline,
                c.balance,
                c.sample,
                c.test.mean_difference,
                c.test.critical,
                if c.test.significant {
                    "significant"
                } else {
                    "not significant"
                }
            )?;
        }
    }
    let out = cfg.out_dir();
    files::write_string(&out.join("eval.txt"), &text)?;
    let json = EvalOutput {
        seed: cfg.seed(),
        folds,
        schema: schema
            .columns()
            .iter()
            .map(|f| f.name().to_string())
            .collect(),
        cells,
        comparisons,
    };
    let path = out.join("eval.json");
    files::write_with(&path, |w| {
        serde_json::to_writer_pretty(&mut *w, &json).context("cannot serialise the report")?;
        w.write_all(b"\n").with_context(|| IoFailure::write(&path))
    })
}

pub fn predict(
    cfg: &PipelineConfig,
    model: Option<PathBuf>,
    features: Option<PathBuf>,
    mentions: Option<PathBuf>,
) -> Result<()> {
    let model_path = model.unwrap_or_else(|| cfg.model_path());
    let model = read_model(files::open(&model_path)?)
        .with_context(|| format!("model {}", model_path.display()))?;
    let table = load_table(&features.unwrap_or_else(|| cfg.features_path()))?;
    let records = load_mentions(&mentions.unwrap_or_else(|| cfg.labels_path()))?;
    if records.len() != table.len() {
        bail!(
            "{} mentions for {} feature rows; the mention list must follow the table order",
            records.len(),
            table.len()
        );
    }
    let predictions = model.predict_table(&table)?;
    let mut correct = 0;
    let mut labelled = 0;
    let path = cfg.predictions_path();
    files::write_with(&path, |w| {
        let io = || IoFailure::write(&path);
        writeln!(
            w,
            "doc_id\toffset\tsurface\tpredicted\tp_hard\tp_medium\tp_easy\tlabel"
        )
        .with_context(io)?;
        for (rec, p) in records.iter().zip(&predictions) {
            if let Some(l) = rec.label {
                labelled += 1;
                correct += usize::from(l == p.label);
            }
            let [h, m, e] = p.probabilities;
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{h:.6}\t{m:.6}\t{e:.6}\t{}",
                rec.key.doc_id,
                rec.key.offset,
                rec.key.surface,
                p.label,
                rec.label.map(|l| l.to_string()).unwrap_or_default()
            )
            .with_context(io)?;
        }
        Ok(())
    })?;
    if labelled > 0 {
        log::info!(
            "accuracy against consensus labels: {:.4} ({correct}/{labelled})",
            correct as f64 / labelled as f64
        );
    }
    let mut counts = [0usize; 3];
    for p in &predictions {
        counts[p.label.index()] += 1;
    }
    log::info!(
        "predicted {}",
        DifficultyLabel::ALL
            .iter()
            .map(|l| format!("{l}={}", counts[l.index()]))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}

pub fn importance(cfg: &PipelineConfig, model: Option<PathBuf>) -> Result<()> {
    let model_path = model.unwrap_or_else(|| cfg.model_path());
    let model = read_model(files::open(&model_path)?)
        .with_context(|| format!("model {}", model_path.display()))?;
    let imp = mdi(&model)?;
    let path = cfg.out_dir().join("importance.txt");
    files::write_with(&path, |w| {
        imp.write_text(w).with_context(|| IoFailure::write(&path))
    })?;
    if imp.raw.iter().all(|&v| v == 0.0) {
        return Err(Degenerate("the model never splits; every importance is 0".into()).into());
    }
    Ok(())
}

pub fn correlate(cfg: &PipelineConfig, features: Option<PathBuf>) -> Result<()> {
    let table = load_table(&features.unwrap_or_else(|| cfg.features_path()))?;
    let m = table_correlations(&table)?;
    if !m.zero_variance.is_empty() {
        log::warn!(
            "constant column(s) with undefined correlation: {}",
            m.zero_variance.join(",")
        );
    }
    let path = cfg.out_dir().join("correlation.csv");
    files::write_with(&path, |w| {
        m.write_csv(w).with_context(|| IoFailure::write(&path))
    })
}
