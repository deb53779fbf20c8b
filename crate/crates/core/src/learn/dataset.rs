use serde::{Deserialize, Serialize};

use super::{LearnError, Result, N_CLASSES};
use crate::consensus::DifficultyLabel;
use crate::features::{
    Feature, FeatureError, FeatureSchema, FeatureTable, FeatureVector, ImputePolicy, UNKNOWN_TOPIC,
};

/// Name of the 0/1 column flagging rows whose stability values were imputed.
pub const MISSING_INDICATOR: &str = "t_j_missing";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    /// Values are indices into `levels`.
    Categorical {
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn continuous(name: &str) -> Self {
        Column {
            name: name.to_string(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn categorical(name: &str, levels: Vec<String>) -> Self {
        Column {
            name: name.to_string(),
            kind: ColumnKind::Categorical { levels },
        }
    }

    pub fn levels(&self) -> Option<usize> {
        match &self.kind {
            ColumnKind::Continuous => None,
            ColumnKind::Categorical { levels } => Some(levels.len()),
        }
    }
}

/// Check one row against the column descriptions.
pub(crate) fn check_row(columns: &[Column], row: &[f64], row_idx: usize) -> Result<()> {
    if row.len() != columns.len() {
        return Err(LearnError::SchemaMismatch {
            expected: columns.len(),
            got: row.len(),
        });
    }
    for (column, (&v, col)) in row.iter().zip(columns).enumerate() {
        if !v.is_finite() {
            return Err(LearnError::NonFinite {
                row: row_idx,
                column,
            });
        }
        if let Some(levels) = col.levels() {
            if v < 0.0 || v.fract() != 0.0 || v as usize >= levels {
                return Err(LearnError::BadCategory {
                    row: row_idx,
                    column,
                    value: v,
                    levels,
                });
            }
        }
    }
    Ok(())
}

/// Labelled numeric rows with a fixed column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    rows: Vec<Vec<f64>>,
    labels: Vec<DifficultyLabel>,
}

impl Dataset {
    pub fn new(
        columns: Vec<Column>,
        rows: Vec<Vec<f64>>,
        labels: Vec<DifficultyLabel>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(LearnError::LengthMismatch(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            check_row(&columns, row, i)?;
        }
        Ok(Dataset {
            columns,
            rows,
            labels,
        })
    }

    /// All-continuous dataset with the given column names.
    pub fn from_continuous(
        names: &[&str],
        rows: Vec<Vec<f64>>,
        labels: Vec<DifficultyLabel>,
    ) -> Result<Self> {
        Self::new(
            names.iter().map(|n| Column::continuous(n)).collect(),
            rows,
            labels,
        )
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[DifficultyLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, row: usize, column: usize) -> f64 {
        self.rows[row][column]
    }

    pub fn class_counts(&self) -> [usize; N_CLASSES] {
        let mut c = [0; N_CLASSES];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Stratified sample at `fraction` of each class.
    pub fn stratified_sample(&self, fraction: f64, seed: u64) -> Result<Dataset> {
        Ok(self.subset(&super::cv::stratified_sample(&self.labels, fraction, seed)?))
    }
}

/// Turns feature-table rows into numeric rows: imputes missing stability
/// values with fill values learnt on the training table, encodes the topic
/// as a level index and appends [`MISSING_INDICATOR`] when stability
/// columns are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEncoder {
    pub schema: FeatureSchema,
    /// Sorted; always contains [`UNKNOWN_TOPIC`].
    pub topic_levels: Vec<String>,
    pub fills: Vec<(Feature, f64)>,
    pub missing_indicator: bool,
}

impl TableEncoder {
    pub fn fit(table: &FeatureTable, schema: &FeatureSchema, policy: ImputePolicy) -> Result<Self> {
        if !schema.is_subset_of(&table.schema) {
            return Err(FeatureError::Table(
                "requested columns are not in the feature table".into(),
            )
            .into());
        }
        if table.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let mut fills = Vec::new();
        for &col in schema.columns() {
            if !col.may_be_missing() || col.is_categorical() {
                continue;
            }
            let present: Vec<f64> = table.rows.iter().filter_map(|r| r.numeric(col)).collect();
            let fill = match policy {
                ImputePolicy::Constant(v) => v,
                ImputePolicy::Mean if present.is_empty() => {
                    return Err(FeatureError::AllMissing(col).into())
                }
                ImputePolicy::Mean => present.iter().sum::<f64>() / present.len() as f64,
            };
            fills.push((col, fill));
        }
        let mut topic_levels: Vec<String> = if schema.contains(Feature::DTopic) {
            table
                .rows
                .iter()
                .filter_map(|r| r.d_topic.clone())
                .collect()
        } else {
            Vec::new()
        };
        topic_levels.push(UNKNOWN_TOPIC.to_string());
        topic_levels.sort();
        topic_levels.dedup();
        let missing_indicator = !fills.is_empty();
        Ok(TableEncoder {
            schema: schema.clone(),
            topic_levels,
            fills,
            missing_indicator,
        })
    }

    pub fn columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> = self
            .schema
            .columns()
            .iter()
            .map(|&f| {
                if f.is_categorical() {
                    Column::categorical(f.name(), self.topic_levels.clone())
                } else {
                    Column::continuous(f.name())
                }
            })
            .collect();
        if self.missing_indicator {
            cols.push(Column::continuous(MISSING_INDICATOR));
        }
        cols
    }

    pub fn encode_row(&self, row: &FeatureVector) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.schema.columns().len() + 1);
        let mut any_missing = false;
        for &f in self.schema.columns() {
            if f.is_categorical() {
                let topic = row.d_topic.as_deref().unwrap_or(UNKNOWN_TOPIC);
                let idx = self
                    .topic_levels
                    .binary_search_by(|l| l.as_str().cmp(topic))
                    .or_else(|_| {
                        self.topic_levels
                            .binary_search_by(|l| l.as_str().cmp(UNKNOWN_TOPIC))
                    })
                    .expect("levels contain the unknown topic");
                out.push(idx as f64);
                continue;
            }
            if row.is_missing(f) || row.numeric(f).is_none() {
                any_missing |= f.may_be_missing();
            }
            let v = row
                .numeric(f)
                .or_else(|| self.fills.iter().find(|(c, _)| *c == f).map(|(_, v)| *v));
            out.push(v.unwrap_or(0.0));
        }
        if self.missing_indicator {
            out.push(if any_missing { 1.0 } else { 0.0 });
        }
        out
    }

    pub fn encode(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        if !self.schema.is_subset_of(&table.schema) {
            return Err(FeatureError::Table(format!(
                "table lacks columns the model was trained on ({})",
                self.schema
                    .columns()
                    .iter()
                    .map(|c| c.name())
                    .collect::<Vec<_>>()
                    .join(",")
            ))
            .into());
        }
        Ok(table.rows.iter().map(|r| self.encode_row(r)).collect())
    }

    /// Encoded rows plus labels; every row must be labelled.
    pub fn dataset(&self, table: &FeatureTable) -> Result<Dataset> {
        let rows = self.encode(table)?;
        let labels = table
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.label.ok_or(LearnError::MissingLabel(i)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.columns(), rows, labels)
    }
}
