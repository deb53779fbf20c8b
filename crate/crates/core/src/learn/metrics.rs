use std::fmt;

use serde::{Deserialize, Serialize};

use super::{LearnError, Result, N_CLASSES};
use crate::consensus::DifficultyLabel;

/// Counts indexed `[gold][predicted]` in `(HARD, MEDIUM, EASY)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[usize; N_CLASSES]; N_CLASSES]);

impl ConfusionMatrix {
    pub fn from_pairs(predicted: &[DifficultyLabel], gold: &[DifficultyLabel]) -> Self {
        let mut m = [[0; N_CLASSES]; N_CLASSES];
        for (p, g) in predicted.iter().zip(gold) {
            m[g.index()][p.index()] += 1;
        }
        ConfusionMatrix(m)
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..N_CLASSES).map(|c| self.0[c][c]).sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for g in 0..N_CLASSES {
            for p in 0..N_CLASSES {
                self.0[g][p] += other.0[g][p];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// `None` when the class is never predicted.
    pub precision: Option<f64>,
    /// `None` when the class never occurs in the gold labels.
    pub recall: Option<f64>,
    /// `None` when precision or recall is undefined.
    pub f1: Option<f64>,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefinedAverages {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndefinedCounts {
    pub precision: usize,
    pub recall: usize,
    pub f1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    /// In `(HARD, MEDIUM, EASY)` order.
    pub per_class: [ClassMetrics; N_CLASSES],
    /// Macro averages with undefined entries counted as 0.
    pub macro_avg: Averages,
    /// Macro averages over defined entries only.
    pub macro_defined: DefinedAverages,
    pub undefined: UndefinedCounts,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean_zero(v: [Option<f64>; N_CLASSES]) -> f64 {
    v.iter().map(|x| x.unwrap_or(0.0)).sum::<f64>() / N_CLASSES as f64
}

fn mean_defined(v: [Option<f64>; N_CLASSES]) -> Option<f64> {
    let d: Vec<f64> = v.iter().flatten().copied().collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let m = &confusion.0;
        let per_class: [ClassMetrics; N_CLASSES] = std::array::from_fn(|c| {
            let tp = m[c][c];
            let predicted: usize = (0..N_CLASSES).map(|g| m[g][c]).sum();
            let support: usize = m[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = match (precision, recall) {
                (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
                (Some(_), Some(_)) => Some(0.0),
                _ => None,
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                predicted,
            }
        });
        let p = per_class.map(|c| c.precision);
        let r = per_class.map(|c| c.recall);
        let f = per_class.map(|c| c.f1);
        let undef = |v: [Option<f64>; N_CLASSES]| v.iter().filter(|x| x.is_none()).count();
        EvalReport {
            per_class,
            macro_avg: Averages {
                precision: mean_zero(p),
                recall: mean_zero(r),
                f1: mean_zero(f),
            },
            macro_defined: DefinedAverages {
                precision: mean_defined(p),
                recall: mean_defined(r),
                f1: mean_defined(f),
            },
            undefined: UndefinedCounts {
                precision: undef(p),
                recall: undef(r),
                f1: undef(f),
            },
            accuracy: confusion.trace() as f64 / confusion.total().max(1) as f64,
            confusion,
        }
    }

    pub fn class(&self, label: DifficultyLabel) -> &ClassMetrics {
        &self.per_class[label.index()]
    }
}

/// Score predictions against gold labels.
pub fn evaluate(predicted: &[DifficultyLabel], gold: &[DifficultyLabel]) -> Result<EvalReport> {
    if predicted.len() != gold.len() {
        return Err(LearnError::LengthMismatch(format!(
            "{} predictions for {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    Ok(EvalReport::from_confusion(ConfusionMatrix::from_pairs(
        predicted, gold,
    )))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:>6} {:>6} {:>6} {:>8}",
            "class", "P", "R", "F1", "support"
        )?;
        for l in DifficultyLabel::ALL {
            let m = self.class(l);
            writeln!(
                f,
                "{:<8} {:>6} {:>6} {:>6} {:>8}",
                l.as_str(),
                cell(m.precision),
                cell(m.recall),
                cell(m.f1),
                m.support
            )?;
        }
        let a = &self.macro_avg;
        writeln!(
            f,
            "{:<8} {:>6} {:>6} {:>6} {:>8}",
            "macro",
            cell(Some(a.precision)),
            cell(Some(a.recall)),
            cell(Some(a.f1)),
            self.confusion.total()
        )?;
        writeln!(
            f,
            "undefined P/R/F1: {}/{}/{}  accuracy: {:.3}",
            self.undefined.precision, self.undefined.recall, self.undefined.f1, self.accuracy
        )?;
        writeln!(f, "confusion (rows gold, columns predicted):")?;
        for (l, row) in DifficultyLabel::ALL.iter().zip(&self.confusion.0) {
            writeln!(
                f,
                "{:<8} {:>6} {:>6} {:>6}",
                l.as_str(),
                row[0],
                row[1],
                row[2]
            )?;
        }
        Ok(())
    }
}
