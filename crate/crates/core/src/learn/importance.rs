use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierModel, LearnError, Result};

/// Mean decrease in impurity per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub names: Vec<String>,
    /// Weighted entropy decrease, averaged over trees.
    pub raw: Vec<f64>,
    /// `raw` divided by its maximum (all zero when nothing was split).
    pub normalized: Vec<f64>,
}

impl Importance {
    /// Feature indices from most to least important; ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.raw.len()).collect();
        idx.sort_by(|&a, &b| self.raw[b].total_cmp(&self.raw[a]).then(a.cmp(&b)));
        idx
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{:<4} {:<14} {:>10} {:>10}",
            "rank", "feature", "mdi", "relative"
        )?;
        for (rank, i) in self.ranking().into_iter().enumerate() {
            writeln!(
                w,
                "{:<4} {:<14} {:>10.6} {:>10.4}",
                rank + 1,
                self.names[i],
                self.raw[i],
                self.normalized[i]
            )?;
        }
        Ok(())
    }
}

/// MDI of a decision tree or random forest.
pub fn mdi(model: &ClassifierModel) -> Result<Importance> {
    let f = model.columns.len();
    let trees = match &model.classifier {
        Classifier::DecisionTree(t) => std::slice::from_ref(t),
        Classifier::RandomForest(forest) => forest.trees.as_slice(),
        other => return Err(LearnError::NotATreeModel(other.variant())),
    };
    let mut raw = vec![0.0; f];
    for t in trees {
        for (acc, v) in raw.iter_mut().zip(t.impurity_decrease(f)) {
            *acc += v;
        }
    }
    if !trees.is_empty() {
        for v in &mut raw {
            *v /= trees.len() as f64;
        }
    }
    let max = raw.iter().copied().fold(0.0, f64::max);
    let normalized = raw
        .iter()
        .map(|v| if max > 0.0 { v / max } else { 0.0 })
        .collect();
    Ok(Importance {
        names: model.columns.iter().map(|c| c.name.clone()).collect(),
        raw,
        normalized,
    })
}
