use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use anyhow::{bail, Context, Result};
use linkdiff::consensus::{align, label, AlignPolicy, DifficultyLabel, MentionKey};
use linkdiff::simulate::{
    repetition_seed, run_simulation, EvaluationSet, SelectionInputs, SimulateError,
    SimulationConfig, Strategy,
};
use linkdiff::GoldStandard;

use super::{load_dictionary, load_redirects, load_systems};
use crate::config::PipelineConfig;
use crate::failure::{Degenerate, IoFailure};
use crate::{files, SimulateArgs};

/// Predicted labels keyed by mention, from a predictions file.
fn load_predictions(path: &Path) -> Result<HashMap<MentionKey, DifficultyLabel>> {
    let mut out = HashMap::new();
    for (i, line) in files::open(path)?.lines().enumerate() {
        let line = line.with_context(|| IoFailure::read(path))?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [doc, offset, surface, predicted, ..] = fields[..] else {
            bail!("{}:{}: expected at least 4 fields", path.display(), i + 1);
        };
        let offset = offset
            .parse()
            .with_context(|| format!("{}:{}: bad offset", path.display(), i + 1))?;
        let predicted = predicted
            .parse()
            .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        out.insert(MentionKey::new(doc, offset, surface), predicted);
    }
    Ok(out)
}

pub fn simulate(cfg: &PipelineConfig, args: &SimulateArgs) -> Result<()> {
    let redirects = load_redirects(cfg)?;
    let gold_path = cfg.require(&cfg.paths.gold, "gold")?;
    let gold = GoldStandard::read(files::open(gold_path)?, redirects.as_ref())
        .with_context(|| format!("gold standard {}", gold_path.display()))?;
    let (names, sets) = load_systems(cfg, redirects.as_ref())?;
    if sets.len() < 2 {
        bail!("simulation needs at least two annotation dumps in paths.systems");
    }
    if cfg.consensus.policy != AlignPolicy::Exact {
        log::info!("simulation compares exact mentions; using exact alignment");
    }
    let aligned = align(&sets, AlignPolicy::Exact)?;
    let eval = match EvaluationSet::from_aligned(&aligned, &names, &gold) {
        Err(SimulateError::EmptyEvaluation) => {
            return Err(
                Degenerate("no commonly recognised mention is in the gold standard".into()).into(),
            )
        }
        other => other?,
    };
    let by_key: HashMap<MentionKey, DifficultyLabel> =
        aligned.iter().map(|m| (m.key(), label(m))).collect();
    let labels: Vec<DifficultyLabel> = eval.keys.iter().map(|k| by_key[k]).collect();

    let mut strategies = if args.strategies.is_empty() {
        cfg.simulate.strategies.clone()
    } else {
        args.strategies.clone()
    };
    let predictions_path = args
        .predictions
        .clone()
        .unwrap_or_else(|| cfg.predictions_path());
    let predicted: Option<Vec<DifficultyLabel>> = if strategies.contains(&Strategy::PredDifficult) {
        if predictions_path.exists() {
            let map = load_predictions(&predictions_path)?;
            let preds = eval
                .keys
                .iter()
                .map(|k| {
                    map.get(k)
                        .copied()
                        .with_context(|| format!("no prediction for evaluated mention {k}"))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(preds)
        } else {
            log::warn!(
                "{} not found; skipping PRED_DIFFICULT",
                predictions_path.display()
            );
            strategies.retain(|&s| s != Strategy::PredDifficult);
            None
        }
    } else {
        None
    };
    let candidates: Vec<usize> = if strategies.contains(&Strategy::Candidates) {
        let dict = load_dictionary(cfg)?;
        eval.keys.iter().map(|k| dict.lookup(&k.surface)).collect()
    } else {
        vec![0; eval.len()]
    };
    let budgets = if args.budgets.is_empty() {
        cfg.simulate.budgets()?
    } else {
        args.budgets
            .iter()
            .map(|b| b.parse().with_context(|| format!("--budgets entry {b:?}")))
            .collect::<Result<_>>()?
    };
    let sim_cfg = SimulationConfig {
        strategies,
        budgets,
        repetitions: args.repetitions.unwrap_or(cfg.simulate.repetitions),
        seed: cfg.seed(),
    };
    for rep in 0..sim_cfg.repetitions {
        log::info!(
            "stage simulate: repetition {rep} seed {}",
            repetition_seed(sim_cfg.seed, rep)
        );
    }
    let inputs = SelectionInputs {
        labels: &labels,
        predicted: predicted.as_deref(),
        candidates: &candidates,
    };
    let result = run_simulation(&eval, &inputs, &sim_cfg)?;
    log::info!("{} evaluated mentions", result.evaluated);
    let out = cfg.out_dir();
    let path = out.join("simulation.tsv");
    files::write_with(&path, |w| {
        result.write_tsv(w).with_context(|| IoFailure::write(&path))
    })?;
    let panels = out.join("simulation_panels.txt");
    files::write_with(&panels, |w| {
        result
            .write_panels(w)
            .with_context(|| IoFailure::write(&panels))
    })
}
