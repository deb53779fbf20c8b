use serde::{Deserialize, Serialize};

use super::{normalize, Dataset, N_CLASSES};

/// Variance floor applied to every per-class Gaussian.
pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLikelihood {
    Gaussian {
        mean: [f64; N_CLASSES],
        variance: [f64; N_CLASSES],
    },
    /// Add-one smoothed category probabilities, `[class][level]`.
    Categorical {
        probabilities: [Vec<f64>; N_CLASSES],
    },
}

/// Gaussian naive Bayes with add-one smoothed categorical likelihoods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Class frequencies in the training data; absent classes have prior 0.
    pub priors: [f64; N_CLASSES],
    pub features: Vec<FeatureLikelihood>,
}

impl GaussianNb {
    pub fn fit(data: &Dataset) -> Self {
        let counts = data.class_counts();
        let n = data.len() as f64;
        let priors = counts.map(|c| c as f64 / n);
        let features = data
            .columns()
            .iter()
            .enumerate()
            .map(|(j, col)| match col.levels() {
                None => {
                    let mut mean = [0.0; N_CLASSES];
                    let mut variance = [1.0; N_CLASSES];
                    for c in 0..N_CLASSES {
                        if counts[c] == 0 {
                            continue;
                        }
                        let vals = || {
                            data.rows()
                                .iter()
                                .zip(data.labels())
                                .filter(|(_, l)| l.index() == c)
                                .map(|(r, _)| r[j])
                        };
                        let m = vals().sum::<f64>() / counts[c] as f64;
                        let v = vals().map(|x| (x - m) * (x - m)).sum::<f64>() / counts[c] as f64;
                        mean[c] = m;
                        variance[c] = v.max(VARIANCE_FLOOR);
                    }
                    FeatureLikelihood::Gaussian { mean, variance }
                }
                Some(levels) => {
                    let mut tally = [
                        vec![0usize; levels],
                        vec![0usize; levels],
                        vec![0usize; levels],
                    ];
                    for (row, l) in data.rows().iter().zip(data.labels()) {
                        tally[l.index()][row[j] as usize] += 1;
                    }
                    let probabilities = std::array::from_fn(|c| {
                        let denom = (counts[c] + levels) as f64;
                        tally[c].iter().map(|&t| (t + 1) as f64 / denom).collect()
                    });
                    FeatureLikelihood::Categorical { probabilities }
                }
            })
            .collect();
        GaussianNb { priors, features }
    }

    /// Per-class joint log-likelihood `ln P(c) + Σ ln P(x_j | c)`.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> [f64; N_CLASSES] {
        std::array::from_fn(|c| {
            if self.priors[c] <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let mut s = self.priors[c].ln();
            for (x, f) in row.iter().zip(&self.features) {
                s += match f {
                    FeatureLikelihood::Gaussian { mean, variance } => {
                        let v = variance[c];
                        -0.5 * (2.0 * std::f64::consts::PI * v).ln()
                            - (x - mean[c]).powi(2) / (2.0 * v)
                    }
                    FeatureLikelihood::Categorical { probabilities } => {
                        probabilities[c][*x as usize].ln()
                    }
                };
            }
            s
        })
    }

    pub fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let jll = self.joint_log_likelihood(row);
        let max = jll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        normalize(jll.map(|v| {
            if v == f64::NEG_INFINITY {
                0.0
            } else {
                (v - max).exp()
            }
        }))
    }
}
