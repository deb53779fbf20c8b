use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate, train, ConfusionMatrix, Dataset, EvalReport, Hyperparams, LearnError, Result,
    Variant, N_CLASSES,
};
use crate::consensus::DifficultyLabel;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn by_class(
    indices: impl Iterator<Item = usize>,
    labels: &[DifficultyLabel],
) -> [Vec<usize>; N_CLASSES] {
    let mut out: [Vec<usize>; N_CLASSES] = Default::default();
    for i in indices {
        out[labels[i].index()].push(i);
    }
    out
}

/// Stratified `k`-fold split. Each class is shuffled and dealt round-robin
/// over the folds, continuing where the previous class stopped, so per-fold
/// class counts differ from exact proportionality by less than one and fold
/// sizes differ by at most one.
pub fn stratified_kfold(labels: &[DifficultyLabel], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(LearnError::InvalidParam(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    let classes = by_class(0..labels.len(), labels);
    for (c, members) in classes.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            let label = DifficultyLabel::from_index(c).expect("class index");
            return Err(LearnError::FoldTooSmall {
                label,
                count: members.len(),
                k,
            });
        }
    }
    let mut tests = vec![Vec::new(); k];
    let mut next = 0;
    for (c, mut members) in classes.into_iter().enumerate() {
        members.shuffle(&mut seed::rng(seed::derive(seed, c as u64)));
        for i in members {
            tests[next].push(i);
            next = (next + 1) % k;
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; labels.len()];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..labels.len()).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}

/// Reduce every class among `train` to the smallest class count, drawing
/// without replacement. Classes already at that size are kept whole.
/// Returns sorted indices; with fewer than two classes present the input
/// is returned sorted and unchanged.
pub fn undersample(train: &[usize], labels: &[DifficultyLabel], seed: u64) -> Vec<usize> {
    let classes = by_class(train.iter().copied(), labels);
    let present: Vec<usize> = classes.iter().map(Vec::len).filter(|&n| n > 0).collect();
    let mut out: Vec<usize> = if present.len() < 2 {
        train.to_vec()
    } else {
        let target = *present.iter().min().expect("nonempty");
        classes
            .into_iter()
            .enumerate()
            .flat_map(|(c, members)| {
                if members.len() <= target {
                    members
                } else {
                    let mut rng = seed::rng(seed::derive(seed, c as u64));
                    index::sample(&mut rng, members.len(), target)
                        .into_iter()
                        .map(|j| members[j])
                        .collect()
                }
            })
            .collect()
    };
    out.sort_unstable();
    out
}

/// Sample each class at `fraction` (count rounded half-up) without
/// replacement. Returns sorted row indices.
pub fn stratified_sample(
    labels: &[DifficultyLabel],
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(LearnError::InvalidFraction(fraction));
    }
    let mut out = Vec::new();
    for (c, members) in by_class(0..labels.len(), labels).into_iter().enumerate() {
        let take = ((fraction * members.len() as f64 + 0.5).floor() as usize).min(members.len());
        if take == members.len() {
            out.extend(members);
        } else {
            let mut rng = seed::rng(seed::derive(seed, c as u64));
            out.extend(
                index::sample(&mut rng, members.len(), take)
                    .into_iter()
                    .map(|j| members[j]),
            );
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    /// Undersample each training fold; test folds are never touched.
    pub balance: bool,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            balance: false,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub variant: Variant,
    pub folds: Vec<EvalReport>,
    /// Metrics of the confusion matrix summed over folds.
    pub pooled: EvalReport,
}

impl CvReport {
    pub fn fold_macro_f1(&self) -> Vec<f64> {
        self.folds.iter().map(|r| r.macro_avg.f1).collect()
    }
}

/// Stratified cross-validation of one classifier variant.
pub fn cross_validate(
    data: &Dataset,
    variant: Variant,
    params: &Hyperparams,
    cfg: &CvConfig,
) -> Result<CvReport> {
    let folds = stratified_kfold(
        data.labels(),
        cfg.folds,
        seed::derive_named(cfg.seed, "folds"),
    )?;
    let balance_seed = seed::derive_named(cfg.seed, "balance");
    let train_seed = seed::derive_named(cfg.seed, "train");
    let reports = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let train_idx = if cfg.balance {
                undersample(
                    &fold.train,
                    data.labels(),
                    seed::derive(balance_seed, i as u64),
                )
            } else {
                fold.train.clone()
            };
            let model = train(
                &data.subset(&train_idx),
                variant,
                params,
                seed::derive(train_seed, i as u64),
            )?;
            let test = data.subset(&fold.test);
            let predicted: Vec<DifficultyLabel> = model
                .predict_all(test.rows())?
                .into_iter()
                .map(|p| p.label)
                .collect();
            evaluate(&predicted, test.labels())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = ConfusionMatrix::default();
    for r in &reports {
        pooled.add(&r.confusion);
    }
    Ok(CvReport {
        variant,
        folds: reports,
        pooled: EvalReport::from_confusion(pooled),
    })
}
