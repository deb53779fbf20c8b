//! Skip-gram with negative sampling.
//!
//! The per-pair loss for a center vector `v`, a context output vector `u_o`
//! and sampled noise vectors `u_k` is
//! `-ln σ(u_o·v) - Σ_k ln σ(-u_k·v)`.
//! Its gradient is expressed through one coefficient per target,
//! `σ(u·v) - y` with `y = 1` for the context word and `0` for noise words;
//! the same coefficient drives training updates.

use std::collections::HashMap;

use num_traits::Float;
use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::Rng as _;

use super::{tokenize, EmbeddingError, EmbeddingModel, EmbeddingParams};
use crate::corpus::Document;
use crate::seed;

const MIN_LEARNING_RATE: f64 = 1e-4;
const NOISE_EXPONENT: f64 = 0.75;

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// `-ln σ(x)`, computed without overflow.
fn neg_log_sigmoid<F: Float>(x: F) -> F {
    if x > F::zero() {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `σ(u·v) - y`: derivative of the pair loss w.r.t. the score `u·v`.
fn target_coefficient<F: Float>(score: F, positive: bool) -> F {
    let y = if positive { F::one() } else { F::zero() };
    sigmoid(score) - y
}

/// Pair loss; `targets[0]` is the context word, the rest are noise words.
pub fn pair_loss<F: Float>(center: &[F], targets: &[&[F]]) -> F {
    targets.iter().enumerate().fold(F::zero(), |acc, (i, u)| {
        let s = dot(u, center);
        acc + if i == 0 {
            neg_log_sigmoid(s)
        } else {
            neg_log_sigmoid(-s)
        }
    })
}

/// Analytic gradient of [`pair_loss`]: `(d/d center, d/d target_i)`.
pub fn pair_gradient<F: Float>(center: &[F], targets: &[&[F]]) -> (Vec<F>, Vec<Vec<F>>) {
    let mut g_center = vec![F::zero(); center.len()];
    let mut g_targets = Vec::with_capacity(targets.len());
    for (i, u) in targets.iter().enumerate() {
        let g = target_coefficient(dot(u, center), i == 0);
        for (gc, &uj) in g_center.iter_mut().zip(u.iter()) {
            *gc = *gc + g * uj;
        }
        g_targets.push(center.iter().map(|&v| g * v).collect());
    }
    (g_center, g_targets)
}

/// One SGD step on the pair loss. `targets` are row indices into `output`
/// (context word first); `scratch` must have length `dim`.
pub(crate) fn apply_pair_update<F: Float>(
    center: &mut [F],
    output: &mut [F],
    targets: &[usize],
    learning_rate: F,
    scratch: &mut [F],
) {
    let dim = center.len();
    scratch.iter_mut().for_each(|x| *x = F::zero());
    for (i, &t) in targets.iter().enumerate() {
        let u = &mut output[t * dim..(t + 1) * dim];
        let g = target_coefficient(dot(u, center), i == 0);
        for ((s, uj), &vj) in scratch.iter_mut().zip(u.iter_mut()).zip(center.iter()) {
            *s = *s + g * *uj;
            *uj = *uj - learning_rate * g * vj;
        }
    }
    for (v, &s) in center.iter_mut().zip(scratch.iter()) {
        *v = *v - learning_rate * s;
    }
}

#[allow(clippy::needless_range_loop)]
pub(super) fn train(
    docs: &[&Document],
    params: &EmbeddingParams,
    slice_label: &str,
) -> Result<EmbeddingModel, EmbeddingError> {
    params.validate()?;
    if docs.is_empty() {
        return Err(EmbeddingError::NoDocuments);
    }
    let sentences: Vec<Vec<String>> = docs.iter().flat_map(|d| tokenize(&d.text)).collect();

    let mut counts: HashMap<&str, u64> = HashMap::new();
    for w in sentences.iter().flatten() {
        *counts.entry(w.as_str()).or_default() += 1;
    }
    let mut vocab: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= params.min_count)
        .collect();
    if vocab.is_empty() {
        return Err(EmbeddingError::EmptyVocabulary);
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, &(w, _))| (w, i))
        .collect();
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| {
            s.iter()
                .filter_map(|w| index.get(w.as_str()).copied())
                .collect::<Vec<_>>()
        })
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect();

    let dim = params.dim;
    let n = vocab.len();
    let mut rng = seed::rng(params.seed);
    let init = Uniform::new(-0.5 / dim as f32, 0.5 / dim as f32);
    let mut input: Vec<f32> = (0..n * dim).map(|_| init.sample(&mut rng)).collect();
    let mut output = vec![0f32; n * dim];
    let noise = WeightedIndex::new(vocab.iter().map(|&(_, c)| (c as f64).powf(NOISE_EXPONENT)))
        .expect("vocabulary counts are positive");

    let tokens_per_epoch: usize = encoded.iter().map(Vec::len).sum();
    let total = (tokens_per_epoch * params.epochs).max(1) as f64;
    let lr0 = params.initial_learning_rate;
    let mut processed = 0usize;
    let mut scratch = vec![0f32; dim];
    let mut targets = Vec::with_capacity(params.negatives + 1);

    for _ in 0..params.epochs {
        for sentence in &encoded {
            for (pos, &center) in sentence.iter().enumerate() {
                let progress = processed as f64 / total;
                let lr = (lr0 - (lr0 - MIN_LEARNING_RATE) * progress).max(MIN_LEARNING_RATE) as f32;
                processed += 1;
                let reach = rng.gen_range(1..=params.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = sentence[ctx_pos];
                    targets.clear();
                    targets.push(context);
                    while targets.len() <= params.negatives {
                        let k = noise.sample(&mut rng);
                        if k != context {
                            targets.push(k);
                        }
                        // a one-word vocabulary has no valid noise words
                        if n == 1 {
                            break;
                        }
                    }
                    let row = &mut input[center * dim..(center + 1) * dim];
                    apply_pair_update(row, &mut output, &targets, lr, &mut scratch);
                }
            }
        }
    }

    let words = vocab.iter().map(|&(w, _)| w.to_string()).collect();
    EmbeddingModel::from_parts(slice_label, words, dim, input)
}
