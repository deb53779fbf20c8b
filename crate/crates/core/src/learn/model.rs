use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::dataset::check_row;
use super::tree::{DecisionTree, RandomForest};
use super::{
    argmax, Column, Dataset, GaussianNb, Hyperparams, LearnError, LogisticRegression, Result,
    TableEncoder, Variant, N_CLASSES,
};
use crate::consensus::DifficultyLabel;
use crate::features::FeatureTable;

const FORMAT_TAG: &str = "linkdiff-model";
const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "parameters", rename_all = "kebab-case")]
pub enum Classifier {
    GaussianNb(GaussianNb),
    LogisticRegression(LogisticRegression),
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
}

impl Classifier {
    pub fn variant(&self) -> Variant {
        match self {
            Classifier::GaussianNb(_) => Variant::GaussianNb,
            Classifier::LogisticRegression(_) => Variant::LogisticRegression,
            Classifier::DecisionTree(_) => Variant::DecisionTree,
            Classifier::RandomForest(_) => Variant::RandomForest,
        }
    }

    fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        match self {
            Classifier::GaussianNb(m) => m.predict_proba(row),
            Classifier::LogisticRegression(m) => m.predict_proba(row),
            Classifier::DecisionTree(m) => m.predict_proba(row),
            Classifier::RandomForest(m) => m.predict_proba(row),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: DifficultyLabel,
    /// Over `(HARD, MEDIUM, EASY)`.
    pub probabilities: [f64; N_CLASSES],
}

/// A trained classifier together with the column layout it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub columns: Vec<Column>,
    /// Present when the model was trained from a feature table.
    pub encoder: Option<TableEncoder>,
    pub classifier: Classifier,
}

/// Train one classifier. Needs at least two classes present.
pub fn train(
    data: &Dataset,
    variant: Variant,
    params: &Hyperparams,
    seed: u64,
) -> Result<ClassifierModel> {
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let present = data.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(LearnError::SingleClass(present));
    }
    let classifier = match variant {
        Variant::GaussianNb => Classifier::GaussianNb(GaussianNb::fit(data)),
        Variant::LogisticRegression => {
            Classifier::LogisticRegression(LogisticRegression::fit(data, &params.logistic))
        }
        Variant::DecisionTree => Classifier::DecisionTree(DecisionTree::fit(data, &params.tree)),
        Variant::RandomForest => {
            if params.forest.trees == 0 {
                return Err(LearnError::InvalidParam(
                    "a forest needs at least one tree".into(),
                ));
            }
            Classifier::RandomForest(RandomForest::fit(data, &params.forest, &params.tree, seed))
        }
    };
    Ok(ClassifierModel {
        columns: data.columns().to_vec(),
        encoder: None,
        classifier,
    })
}

impl ClassifierModel {
    pub fn variant(&self) -> Variant {
        self.classifier.variant()
    }

    pub fn with_encoder(mut self, encoder: TableEncoder) -> Self {
        self.encoder = Some(encoder);
        self
    }

    pub fn predict(&self, row: &[f64]) -> Result<Prediction> {
        check_row(&self.columns, row, 0)?;
        let probabilities = self.classifier.predict_proba(row);
        Ok(Prediction {
            label: argmax(&probabilities),
            probabilities,
        })
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                check_row(&self.columns, r, i)?;
                let probabilities = self.classifier.predict_proba(r);
                Ok(Prediction {
                    label: argmax(&probabilities),
                    probabilities,
                })
            })
            .collect()
    }

    /// Predict feature-table rows through the stored encoder.
    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<Prediction>> {
        let enc = self.encoder.as_ref().ok_or(LearnError::NoEncoder)?;
        self.predict_all(&enc.encode(table)?)
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'static str,
    version: u64,
    model: &'a ClassifierModel,
}

/// Write a model as versioned JSON.
pub fn write_model<W: Write>(model: &ClassifierModel, mut w: W) -> Result<()> {
    let env = Envelope {
        format: FORMAT_TAG,
        version: FORMAT_VERSION,
        model,
    };
    serde_json::to_writer(&mut w, &env).map_err(|e| LearnError::Io(e.into()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<ClassifierModel> {
    let corrupt = |m: String| LearnError::CorruptModel(m);
    let mut value: Value = serde_json::from_reader(r).map_err(|e| corrupt(e.to_string()))?;
    if value.get("format").and_then(Value::as_str) != Some(FORMAT_TAG) {
        return Err(corrupt("missing or wrong format tag".into()));
    }
    let version = value
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| corrupt("missing version".into()))?;
    if version != FORMAT_VERSION {
        return Err(LearnError::UnsupportedVersion(version));
    }
    let model = value
        .get_mut("model")
        .map(Value::take)
        .ok_or_else(|| corrupt("missing model".into()))?;
    serde_json::from_value(model).map_err(|e| corrupt(e.to_string()))
}

pub fn save_model(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    read_model(BufReader::new(File::open(path)?))
}
