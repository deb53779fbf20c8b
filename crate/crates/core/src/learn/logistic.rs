//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{Dataset, N_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// L2 penalty on the weights (not the biases).
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            lambda: 1e-8,
            learning_rate: 0.5,
            max_iterations: 1000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Input {
    /// Standardized as `(x - mean) / scale`.
    Continuous {
        mean: f64,
        scale: f64,
    },
    OneHot {
        levels: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    inputs: Vec<Input>,
    /// `[class][design column]`.
    pub weights: Vec<Vec<f64>>,
    pub bias: [f64; N_CLASSES],
    pub iterations: usize,
}

fn softmax(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

/// Mean cross-entropy plus `lambda / 2 * ||W||²`, and its gradient.
///
/// `theta` holds the weights row-major by class (`N_CLASSES * d` values)
/// followed by the `N_CLASSES` biases; `x` rows have `d` columns and `y`
/// holds class indices.
pub fn loss_and_gradient(
    x: &[Vec<f64>],
    y: &[usize],
    theta: &[f64],
    lambda: f64,
) -> (f64, Vec<f64>) {
    let n = x.len();
    let d = (theta.len() - N_CLASSES) / N_CLASSES;
    let (w, b) = theta.split_at(N_CLASSES * d);
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut z = [0.0; N_CLASSES];
    for (row, &label) in x.iter().zip(y) {
        for c in 0..N_CLASSES {
            z[c] = b[c]
                + row
                    .iter()
                    .zip(&w[c * d..(c + 1) * d])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[label];
        softmax(&mut z);
        for c in 0..N_CLASSES {
            let r = z[c] - if c == label { 1.0 } else { 0.0 };
            for (g, xv) in grad[c * d..(c + 1) * d].iter_mut().zip(row) {
                *g += r * xv;
            }
            grad[N_CLASSES * d + c] += r;
        }
    }
    let inv = 1.0 / n as f64;
    loss *= inv;
    for g in &mut grad {
        *g *= inv;
    }
    for (g, wv) in grad[..N_CLASSES * d].iter_mut().zip(w) {
        *g += lambda * wv;
    }
    loss += 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    (loss, grad)
}

impl LogisticRegression {
    fn design_width(inputs: &[Input]) -> usize {
        inputs
            .iter()
            .map(|i| match i {
                Input::Continuous { .. } => 1,
                Input::OneHot { levels } => *levels,
            })
            .sum()
    }

    fn design(&self, row: &[f64]) -> Vec<f64> {
        design_row(&self.inputs, row)
    }

    pub fn fit(data: &Dataset, params: &LogisticParams) -> Self {
        let n = data.len() as f64;
        let inputs: Vec<Input> = data
            .columns()
            .iter()
            .enumerate()
            .map(|(j, col)| match col.levels() {
                Some(levels) => Input::OneHot { levels },
                None => {
                    let mean = data.rows().iter().map(|r| r[j]).sum::<f64>() / n;
                    let var = data
                        .rows()
                        .iter()
                        .map(|r| (r[j] - mean).powi(2))
                        .sum::<f64>()
                        / n;
                    let sd = var.sqrt();
                    Input::Continuous {
                        mean,
                        scale: if sd > 1e-12 { sd } else { 1.0 },
                    }
                }
            })
            .collect();
        let d = Self::design_width(&inputs);
        let x: Vec<Vec<f64>> = data.rows().iter().map(|r| design_row(&inputs, r)).collect();
        let y: Vec<usize> = data.labels().iter().map(|l| l.index()).collect();
        let mut theta = vec![0.0; N_CLASSES * d + N_CLASSES];
        let (mut loss, mut grad) = loss_and_gradient(&x, &y, &theta, params.lambda);
        let mut step = params.learning_rate;
        let mut iterations = 0;
        while iterations < params.max_iterations {
            let norm2: f64 = grad.iter().map(|g| g * g).sum();
            if norm2.sqrt() < params.tolerance {
                break;
            }
            iterations += 1;
            // backtracking line search
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
                let (l, g) = loss_and_gradient(&x, &y, &trial, params.lambda);
                if l <= loss - 1e-4 * step * norm2 {
                    accepted = Some((trial, l, g));
                    break;
                }
                step *= 0.5;
            }
            let Some((t, l, g)) = accepted else { break };
            theta = t;
            loss = l;
            grad = g;
            step = (step * 2.0).min(params.learning_rate);
        }
        let weights = (0..N_CLASSES)
            .map(|c| theta[c * d..(c + 1) * d].to_vec())
            .collect();
        let bias = std::array::from_fn(|c| theta[N_CLASSES * d + c]);
        LogisticRegression {
            inputs,
            weights,
            bias,
            iterations,
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let x = self.design(row);
        let mut z: [f64; N_CLASSES] = std::array::from_fn(|c| {
            self.bias[c]
                + x.iter()
                    .zip(&self.weights[c])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        });
        softmax(&mut z);
        z
    }
}

fn design_row(inputs: &[Input], row: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(LogisticRegression::design_width(inputs));
    for (input, &v) in inputs.iter().zip(row) {
        match input {
            Input::Continuous { mean, scale } => out.push((v - mean) / scale),
            Input::OneHot { levels } => {
                let k = v as usize;
                out.extend((0..*levels).map(|l| if l == k { 1.0 } else { 0.0 }));
            }
        }
    }
    out
}
