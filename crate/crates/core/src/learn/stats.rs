use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{LearnError, Result};
use crate::features::{Feature, FeatureTable};

/// Two-tailed critical values of Student's t for df 1..=30.
const T_05: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];
const T_01: [f64; 30] = [
    63.657, 9.925, 5.841, 4.604, 4.032, 3.707, 3.499, 3.355, 3.250, 3.169, 3.106, 3.055, 3.012,
    2.977, 2.947, 2.921, 2.898, 2.878, 2.861, 2.845, 2.831, 2.819, 2.807, 2.797, 2.787, 2.779,
    2.771, 2.763, 2.756, 2.750,
];
/// `(df, alpha = 0.05, alpha = 0.01)` beyond 30; the last row is the normal limit.
const T_TAIL: [(usize, f64, f64); 4] = [
    (40, 2.021, 2.704),
    (60, 2.000, 2.660),
    (120, 1.980, 2.617),
    (usize::MAX, 1.960, 2.576),
];

/// Two-tailed critical t value. For df not in the table the next lower
/// tabulated df is used, which is conservative.
pub fn critical_value(df: usize, alpha: f64) -> Result<f64> {
    let col = if (alpha - 0.05).abs() < 1e-12 {
        0
    } else if (alpha - 0.01).abs() < 1e-12 {
        1
    } else {
        return Err(LearnError::UnsupportedAlpha(alpha));
    };
    if df == 0 {
        return Err(LearnError::InvalidParam(
            "degrees of freedom must be positive".into(),
        ));
    }
    if df <= 30 {
        return Ok(if col == 0 { T_05[df - 1] } else { T_01[df - 1] });
    }
    let mut value = if col == 0 { T_05[29] } else { T_01[29] };
    for &(d, a, b) in &T_TAIL {
        if df >= d {
            value = if col == 0 { a } else { b };
        }
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    /// `None` when the differences have zero spread.
    pub t: Option<f64>,
    pub df: usize,
    pub alpha: f64,
    pub critical: f64,
    pub mean_difference: f64,
    pub significant: bool,
    /// Differences all equal (including all zero); never significant.
    pub degenerate: bool,
}

/// Paired two-tailed t-test on per-fold scores.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(LearnError::LengthMismatch(format!(
            "{} vs {} scores",
            a.len(),
            b.len()
        )));
    }
    let k = a.len();
    if k < 2 {
        return Err(LearnError::TooFewRows { needed: 2, got: k });
    }
    let df = k - 1;
    let critical = critical_value(df, alpha)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / k as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / df as f64;
    let sd = var.sqrt();
    let degenerate = d.iter().all(|&v| v == d[0]) || sd == 0.0;
    let t = (!degenerate).then(|| mean / (sd / (k as f64).sqrt()));
    Ok(TTest {
        t,
        df,
        alpha,
        critical,
        mean_difference: mean,
        significant: t.is_some_and(|t| t.abs() > critical),
        degenerate,
    })
}

/// Pearson's r over the pairs where both values are present; `None` when
/// fewer than two pairs remain or either side is constant.
pub fn pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let constant = |f: fn(&(f64, f64)) -> f64| pairs.iter().all(|p| f(p) == f(&pairs[0]));
    if constant(|p| p.0) || constant(|p| p.1) {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Symmetric; `None` marks undefined entries.
    pub values: Vec<Vec<Option<f64>>>,
    /// Columns with no variance among their present values.
    pub zero_variance: Vec<String>,
}

/// Pairwise Pearson correlations of named columns.
pub fn pearson_matrix(names: &[String], columns: &[Vec<Option<f64>>]) -> Result<CorrelationMatrix> {
    if names.len() != columns.len() {
        return Err(LearnError::LengthMismatch(format!(
            "{} names for {} columns",
            names.len(),
            columns.len()
        )));
    }
    let rows = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != rows) {
        return Err(LearnError::LengthMismatch(
            "columns differ in length".into(),
        ));
    }
    if rows < 2 {
        return Err(LearnError::TooFewRows {
            needed: 2,
            got: rows,
        });
    }
    let k = columns.len();
    let mut values = vec![vec![None; k]; k];
    let mut zero_variance = Vec::new();
    for i in 0..k {
        let present: Vec<f64> = columns[i].iter().flatten().copied().collect();
        let varies = present.len() >= 2 && present.iter().any(|&v| v != present[0]);
        if varies {
            values[i][i] = Some(1.0);
        } else {
            zero_variance.push(names[i].clone());
        }
        for j in i + 1..k {
            let r = if varies {
                pearson(&columns[i], &columns[j])
            } else {
                None
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: names.to_vec(),
        values,
        zero_variance,
    })
}

/// Correlations among the continuous columns of a feature table; the
/// topic column is left out.
pub fn table_correlations(table: &FeatureTable) -> Result<CorrelationMatrix> {
    let cols: Vec<Feature> = table
        .schema
        .columns()
        .iter()
        .copied()
        .filter(|f| !f.is_categorical())
        .collect();
    let names: Vec<String> = cols.iter().map(|f| f.name().to_string()).collect();
    let columns: Vec<Vec<Option<f64>>> = cols
        .iter()
        .map(|&f| table.rows.iter().map(|r| r.numeric(f)).collect())
        .collect();
    pearson_matrix(&names, &columns)
}

impl CorrelationMatrix {
    /// CSV with a leading name column; undefined entries are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "feature,{}", self.names.join(","))?;
        for (name, row) in self.names.iter().zip(&self.values) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map(|x| format!("{x:.6}")).unwrap_or_default())
                .collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }
}
