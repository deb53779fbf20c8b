//! Entropy decision trees and random forests.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normalize, Dataset, N_CLASSES};
use crate::seed::{self, Rng};

/// Gains closer than this are treated as equal.
pub const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// Nodes with less total weight than this are not split.
    pub min_split: f64,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_split: 2.0,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    /// Features drawn per split; `None` means `⌊log₂ F⌋ + 1`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

/// `⌊log₂ F⌋ + 1`.
pub fn default_features_per_split(n_features: usize) -> usize {
    (usize::BITS - n_features.max(1).leading_zeros()) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTest {
    /// `x <= threshold` goes left.
    Threshold(f64),
    /// `x == category` goes left.
    Category(usize),
}

impl SplitTest {
    pub fn goes_left(&self, x: f64) -> bool {
        match *self {
            SplitTest::Threshold(t) => x <= t,
            SplitTest::Category(c) => x == c as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub test: SplitTest,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Training weight per class reaching this node.
    pub counts: [f64; N_CLASSES],
    pub split: Option<Split>,
}

/// Arena of nodes; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

/// Shannon entropy in bits of a class-weight vector.
pub fn entropy(counts: &[f64; N_CLASSES]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

/// Information gain of splitting `parent` into `left` and `parent - left`.
pub fn information_gain(parent: &[f64; N_CLASSES], left: &[f64; N_CLASSES]) -> f64 {
    let right: [f64; N_CLASSES] = std::array::from_fn(|c| (parent[c] - left[c]).max(0.0));
    let w: f64 = parent.iter().sum();
    let wl: f64 = left.iter().sum();
    let wr: f64 = right.iter().sum();
    entropy(parent) - (wl / w) * entropy(left) - (wr / w) * entropy(&right)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateSplit {
    pub feature: usize,
    pub gain: f64,
    pub test: SplitTest,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

/// Best split of the rows `idx` on one feature, or `None` when every row
/// has the same value. Thresholds are scanned in ascending order and
/// categories in ascending level order; the first of equal gains wins.
pub fn best_split_on(
    data: &Dataset,
    weights: &[f64],
    idx: &[usize],
    parent: &[f64; N_CLASSES],
    feature: usize,
) -> Option<CandidateSplit> {
    let label = |i: usize| data.labels()[i].index();
    let x = |i: usize| data.value(i, feature);
    let mut best: Option<CandidateSplit> = None;
    let mut consider = |gain: f64, test: SplitTest| {
        if best.is_none_or(|b| gain > b.gain + GAIN_TOLERANCE) {
            best = Some(CandidateSplit {
                feature,
                gain,
                test,
            });
        }
    };
    if data.columns()[feature].levels().is_some() {
        let mut levels: Vec<usize> = idx.iter().map(|&i| x(i) as usize).collect();
        levels.sort_unstable();
        levels.dedup();
        if levels.len() < 2 {
            return None;
        }
        for level in levels {
            let mut left = [0.0; N_CLASSES];
            for &i in idx {
                if x(i) as usize == level {
                    left[label(i)] += weights[i];
                }
            }
            consider(information_gain(parent, &left), SplitTest::Category(level));
        }
    } else {
        let mut order = idx.to_vec();
        order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
        let mut left = [0.0; N_CLASSES];
        for w in order.windows(2) {
            left[label(w[0])] += weights[w[0]];
            let (a, b) = (x(w[0]), x(w[1]));
            if a < b {
                consider(
                    information_gain(parent, &left),
                    SplitTest::Threshold(midpoint(a, b)),
                );
            }
        }
    }
    best
}

/// Best split over `features`, in the order given.
pub fn best_split(
    data: &Dataset,
    weights: &[f64],
    idx: &[usize],
    parent: &[f64; N_CLASSES],
    features: impl IntoIterator<Item = usize>,
) -> Option<CandidateSplit> {
    let mut best: Option<CandidateSplit> = None;
    for f in features {
        if let Some(c) = best_split_on(data, weights, idx, parent, f) {
            if best.is_none_or(|b| c.gain > b.gain + GAIN_TOLERANCE) {
                best = Some(c);
            }
        }
    }
    best
}

pub(crate) enum FeatureBag<'r> {
    All,
    Random { rng: &'r mut Rng, size: usize },
}

fn class_weights(data: &Dataset, weights: &[f64], idx: &[usize]) -> [f64; N_CLASSES] {
    let mut c = [0.0; N_CLASSES];
    for &i in idx {
        c[data.labels()[i].index()] += weights[i];
    }
    c
}

impl DecisionTree {
    /// Fit on every row with unit weight, considering all features.
    pub fn fit(data: &Dataset, params: &TreeParams) -> Self {
        Self::grow(data, &vec![1.0; data.len()], params, FeatureBag::All)
    }

    /// Grow a tree on rows with positive weight. Impure nodes are split on
    /// the best available split even at zero gain; a node becomes a leaf
    /// when it is pure, lighter than `min_split`, at `max_depth`, or has no
    /// feature that separates its rows.
    pub(crate) fn grow(
        data: &Dataset,
        weights: &[f64],
        params: &TreeParams,
        mut bag: FeatureBag<'_>,
    ) -> Self {
        let all = data.n_features();
        let root: Vec<usize> = (0..data.len()).filter(|&i| weights[i] > 0.0).collect();
        let mut nodes = vec![Node {
            counts: class_weights(data, weights, &root),
            split: None,
        }];
        let mut stack = vec![(0usize, root, 0usize)];
        while let Some((id, idx, depth)) = stack.pop() {
            let counts = nodes[id].counts;
            let total: f64 = counts.iter().sum();
            let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
            if pure || total < params.min_split || params.max_depth.is_some_and(|d| depth >= d) {
                continue;
            }
            let chosen = match &mut bag {
                FeatureBag::All => best_split(data, weights, &idx, &counts, 0..all),
                FeatureBag::Random { rng, size } => {
                    let mut feats = index::sample(&mut **rng, all, (*size).min(all)).into_vec();
                    feats.sort_unstable();
                    match best_split(data, weights, &idx, &counts, feats) {
                        Some(c) if c.gain > GAIN_TOLERANCE => Some(c),
                        _ => best_split(data, weights, &idx, &counts, 0..all),
                    }
                }
            };
            let Some(split) = chosen else { continue };
            let (left, right): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| split.test.goes_left(data.value(i, split.feature)));
            let l = nodes.len();
            nodes.push(Node {
                counts: class_weights(data, weights, &left),
                split: None,
            });
            nodes.push(Node {
                counts: class_weights(data, weights, &right),
                split: None,
            });
            nodes[id].split = Some(Split {
                feature: split.feature,
                test: split.test,
                left: l,
                right: l + 1,
            });
            stack.push((l + 1, right, depth + 1));
            stack.push((l, left, depth + 1));
        }
        DecisionTree { nodes }
    }

    pub fn leaf(&self, row: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while let Some(s) = &node.split {
            node = &self.nodes[if s.test.goes_left(row[s.feature]) {
                s.left
            } else {
                s.right
            }];
        }
        node
    }

    pub fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        normalize(self.leaf(row).counts)
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }

    /// Impurity decrease per feature, each split weighted by the fraction
    /// of the root's training weight reaching it.
    pub fn impurity_decrease(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        let root: f64 = self.nodes[0].counts.iter().sum();
        if root <= 0.0 {
            return out;
        }
        for node in &self.nodes {
            if let Some(s) = &node.split {
                let w: f64 = node.counts.iter().sum();
                let gain = information_gain(&node.counts, &self.nodes[s.left].counts);
                out[s.feature] += (w / root) * gain.max(0.0);
            }
        }
        out
    }
}

/// Bagged random-subspace trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    /// Seed each tree's bootstrap and feature bags were drawn from.
    pub tree_seeds: Vec<u64>,
    pub features_per_split: usize,
}

impl RandomForest {
    pub fn fit(data: &Dataset, params: &ForestParams, tree: &TreeParams, seed: u64) -> Self {
        let n = data.len();
        let f = data.n_features();
        let mtry = params
            .features_per_split
            .unwrap_or_else(|| default_features_per_split(f))
            .clamp(1, f.max(1));
        let tree_seeds: Vec<u64> = (0..params.trees as u64)
            .map(|t| seed::derive(seed, t))
            .collect();
        let trees = tree_seeds
            .par_iter()
            .map(|&s| {
                let mut rng = seed::rng(s);
                let weights = if params.bootstrap {
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[rng.gen_range(0..n)] += 1.0;
                    }
                    w
                } else {
                    vec![1.0; n]
                };
                DecisionTree::grow(
                    data,
                    &weights,
                    tree,
                    FeatureBag::Random {
                        rng: &mut rng,
                        size: mtry,
                    },
                )
            })
            .collect();
        RandomForest {
            trees,
            tree_seeds,
            features_per_split: mtry,
        }
    }

    /// Mean of the per-tree leaf class distributions.
    pub fn predict_proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let mut p = [0.0; N_CLASSES];
        for t in &self.trees {
            let q = t.predict_proba(row);
            for c in 0..N_CLASSES {
                p[c] += q[c];
            }
        }
        normalize(p)
    }
}
