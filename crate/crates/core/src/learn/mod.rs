//! Difficulty classifiers, cross-validation, evaluation and analysis.
//!
//! Four classifiers are available: Gaussian naive Bayes, multinomial
//! logistic regression, an entropy decision tree and a random forest. All
//! of them map a numeric row to a probability vector over
//! `(HARD, MEDIUM, EASY)`; the predicted label is the arg-max with ties
//! resolved in that order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::DifficultyLabel;
use crate::features::FeatureError;

mod cv;
mod dataset;
mod importance;
pub mod logistic;
mod metrics;
mod model;
mod naive_bayes;
mod stats;
pub mod tree;

pub use cv::{
    cross_validate, stratified_kfold, stratified_sample, undersample, CvConfig, CvReport, Fold,
};
pub use dataset::{Column, ColumnKind, Dataset, TableEncoder, MISSING_INDICATOR};
pub use importance::{mdi, Importance};
pub use logistic::{LogisticParams, LogisticRegression};
pub use metrics::{
    evaluate, Averages, ClassMetrics, ConfusionMatrix, DefinedAverages, EvalReport, UndefinedCounts,
};
pub use model::{
    load_model, read_model, save_model, train, write_model, Classifier, ClassifierModel, Prediction,
};
pub use naive_bayes::GaussianNb;
pub use stats::{
    critical_value, paired_t_test, pearson, pearson_matrix, table_correlations, CorrelationMatrix,
    TTest,
};
pub use tree::{DecisionTree, ForestParams, RandomForest, TreeParams};

/// Number of difficulty classes.
pub const N_CLASSES: usize = 3;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error("row {row}, column {column}: value is not finite")]
    NonFinite { row: usize, column: usize },
    #[error("row {row}, column {column}: {value} is not a category index below {levels}")]
    BadCategory {
        row: usize,
        column: usize,
        value: f64,
        levels: usize,
    },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("row has {got} values but the model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("row {0} has no label")]
    MissingLabel(usize),
    #[error("class {label} has {count} members, fewer than the {k} folds")]
    FoldTooSmall {
        label: DifficultyLabel,
        count: usize,
        k: usize,
    },
    #[error("sampling fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("no critical values stored for alpha = {0}; use 0.05 or 0.01")]
    UnsupportedAlpha(f64),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("{0} models have no impurity-based importance")]
    NotATreeModel(Variant),
    #[error("model was trained without a feature-table encoder")]
    NoEncoder,
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u64),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LearnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    GaussianNb,
    LogisticRegression,
    DecisionTree,
    RandomForest,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::GaussianNb,
        Variant::LogisticRegression,
        Variant::DecisionTree,
        Variant::RandomForest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::GaussianNb => "gaussian-nb",
            Variant::LogisticRegression => "logistic-regression",
            Variant::DecisionTree => "decision-tree",
            Variant::RandomForest => "random-forest",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian-nb" | "nb" | "naive-bayes" | "gaussiannb" => Ok(Variant::GaussianNb),
            "logistic-regression" | "logistic" | "lr" => Ok(Variant::LogisticRegression),
            "decision-tree" | "tree" | "dt" => Ok(Variant::DecisionTree),
            "random-forest" | "forest" | "rf" => Ok(Variant::RandomForest),
            other => Err(LearnError::InvalidParam(format!(
                "unknown classifier {other:?}"
            ))),
        }
    }
}

/// Per-variant training parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub logistic: LogisticParams,
    pub tree: TreeParams,
    pub forest: ForestParams,
}

/// Arg-max over `(HARD, MEDIUM, EASY)`; the earlier class wins exact ties.
pub fn argmax(p: &[f64; N_CLASSES]) -> DifficultyLabel {
    let mut best = 0;
    for c in 1..N_CLASSES {
        if p[c] > p[best] {
            best = c;
        }
    }
    DifficultyLabel::from_index(best).expect("class index in range")
}

fn normalize(mut p: [f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let s: f64 = p.iter().sum();
    if s > 0.0 && s.is_finite() {
        for v in &mut p {
            *v /= s;
        }
    } else {
        p = [1.0 / N_CLASSES as f64; N_CLASSES];
    }
    p
}
