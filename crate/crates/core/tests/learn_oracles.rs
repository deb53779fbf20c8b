use linkdiff::consensus::DifficultyLabel::{self, *};
use linkdiff::learn::logistic::loss_and_gradient;
use linkdiff::learn::tree::SplitTest;
use linkdiff::learn::{
    critical_value, evaluate, mdi, stratified_kfold, train, undersample, Classifier, Dataset,
    ForestParams, Hyperparams, Variant,
};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn label(i: usize) -> DifficultyLabel {
    DifficultyLabel::from_index(i).unwrap()
}

#[test]
fn gaussian_nb_matches_hand_computation() {
    // HARD: {1, 3} -> mean 2, variance 1; EASY: {4, 8} -> mean 6, variance 4
    let d = Dataset::from_continuous(
        &["x"],
        vec![vec![1.0], vec![3.0], vec![4.0], vec![8.0]],
        vec![Hard, Hard, Easy, Easy],
    )
    .unwrap();
    let m = train(&d, Variant::GaussianNb, &Hyperparams::default(), 0).unwrap();
    let pdf = |x: f64, mean: f64, var: f64| {
        (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    for x in [0.0, 2.0, 3.5, 5.0, 9.0] {
        let a = 0.5 * pdf(x, 2.0, 1.0);
        let b = 0.5 * pdf(x, 6.0, 4.0);
        let p = m.predict(&[x]).unwrap().probabilities;
        assert!((p[0] - a / (a + b)).abs() < 1e-9, "x={x}");
        assert_eq!(p[1], 0.0);
        assert!((p[2] - b / (a + b)).abs() < 1e-9);
    }
}

#[test]
fn gaussian_nb_smooths_categories() {
    use linkdiff::learn::Column;
    let cols = vec![Column::categorical("t", vec!["a".into(), "b".into()])];
    let d = Dataset::new(
        cols,
        vec![vec![0.0], vec![0.0], vec![1.0]],
        vec![Hard, Hard, Easy],
    )
    .unwrap();
    let m = train(&d, Variant::GaussianNb, &Hyperparams::default(), 0).unwrap();
    // P(a|H) = 3/4, P(a|E) = 1/3, priors 2/3 and 1/3
    let (h, e) = (2.0 / 3.0 * 0.75, 1.0 / 3.0 * (1.0 / 3.0));
    let p = m.predict(&[0.0]).unwrap().probabilities;
    assert!((p[0] - h / (h + e)).abs() < 1e-12);
}

/// Root split chosen by enumerating every binary feature.
fn oracle_first_split(rows: &[Vec<f64>], labels: &[usize]) -> Option<usize> {
    let h = |c: &[f64; 3]| -> f64 {
        let n: f64 = c.iter().sum();
        c.iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| -(v / n) * (v / n).ln() / std::f64::consts::LN_2)
            .sum()
    };
    let mut all = [0.0; 3];
    for &l in labels {
        all[l] += 1.0;
    }
    if all.iter().filter(|&&c| c > 0.0).count() < 2 {
        return None;
    }
    let n = labels.len() as f64;
    let mut best: Option<(usize, f64)> = None;
    for f in 0..rows[0].len() {
        let (mut zero, mut one) = ([0.0; 3], [0.0; 3]);
        for (r, &l) in rows.iter().zip(labels) {
            if r[f] == 0.0 {
                zero[l] += 1.0
            } else {
                one[l] += 1.0
            }
        }
        let (nz, no) = (zero.iter().sum::<f64>(), one.iter().sum::<f64>());
        if nz == 0.0 || no == 0.0 {
            continue;
        }
        let gain = h(&all) - nz / n * h(&zero) - no / n * h(&one);
        if best.is_none_or(|(_, g)| gain > g + 1e-12) {
            best = Some((f, gain));
        }
    }
    best.map(|b| b.0)
}

fn binary_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..=4, 2usize..=64).prop_flat_map(|(f, n)| {
        (
            prop::collection::vec(
                prop::collection::vec(prop::bool::ANY.prop_map(|b| b as u8 as f64), f),
                n,
            ),
            prop::collection::vec(0usize..3, n),
        )
    })
}

fn dataset(rows: Vec<Vec<f64>>, labels: &[usize]) -> Dataset {
    let names: Vec<String> = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    Dataset::from_continuous(&names, rows, labels.iter().map(|&l| label(l)).collect()).unwrap()
}

fn gradient_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>, Vec<f64>, f64)> {
    (1usize..=4, 2usize..=8).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), n),
            prop::collection::vec(0usize..3, n),
            prop::collection::vec(-1.0f64..1.0, 3 * d + 3),
            0.0f64..0.5,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_first_split_matches_enumeration((rows, labels) in binary_instance()) {
        let expect = oracle_first_split(&rows, &labels);
        let d = dataset(rows, &labels);
        let m = train(&d, Variant::DecisionTree, &Hyperparams::default(), 0);
        let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
        if distinct < 2 {
            prop_assert!(m.is_err());
            return Ok(());
        }
        let Classifier::DecisionTree(tree) = m.unwrap().classifier else { unreachable!() };
        let got = tree.nodes[0].split.as_ref().map(|s| {
            assert_eq!(s.test, SplitTest::Threshold(0.5));
            s.feature
        });
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences((x, y, theta, lambda) in gradient_instance()) {
        let (_, g) = loss_and_gradient(&x, &y, &theta, lambda);
        let h = 1e-5;
        let numeric: Vec<f64> = (0..theta.len())
            .map(|i| {
                let mut p = theta.clone();
                p[i] += h;
                let up = loss_and_gradient(&x, &y, &p, lambda).0;
                p[i] -= 2.0 * h;
                let down = loss_and_gradient(&x, &y, &p, lambda).0;
                (up - down) / (2.0 * h)
            })
            .collect();
        let diff: f64 = g.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        prop_assert!(diff <= 1e-5 * scale.max(1e-8), "relative error {}", diff / scale);
    }

    #[test]
    fn probabilities_are_distributions(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 6..30),
        seed in 0u64..1000,
    ) {
        let n = rows.len();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let d = dataset(rows.clone(), &labels);
        let mut params = Hyperparams::default();
        params.forest.trees = 7;
        params.logistic.max_iterations = 50;
        for v in Variant::ALL {
            let m = train(&d, v, &params, seed).unwrap();
            for r in &rows {
                let p = m.predict(r).unwrap().probabilities;
                prop_assert!(p.iter().all(|&q| q >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_tree_forest_equals_tree(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..4.0, 3), 4..40),
        labels in prop::collection::vec(0usize..3, 40),
        seed in 0u64..100,
    ) {
        let labels = &labels[..rows.len()];
        prop_assume!(labels.iter().collect::<std::collections::BTreeSet<_>>().len() >= 2);
        let d = dataset(rows.clone(), labels);
        let params = Hyperparams {
            forest: ForestParams { trees: 1, features_per_split: Some(3), bootstrap: false },
            ..Default::default()
        };
        let tree = train(&d, Variant::DecisionTree, &params, seed).unwrap();
        let forest = train(&d, Variant::RandomForest, &params, seed).unwrap();
        let (Classifier::DecisionTree(t), Classifier::RandomForest(f)) = (&tree.classifier, &forest.classifier) else {
            unreachable!()
        };
        prop_assert_eq!(t, &f.trees[0]);
        for r in &rows {
            prop_assert_eq!(tree.predict(r).unwrap(), forest.predict(r).unwrap());
        }
    }

    #[test]
    fn kfold_partitions_and_stratifies(
        counts in (0usize..40, 0usize..40, 0usize..40),
        k in 2usize..8,
        seed in any::<u64>(),
    ) {
        let mut labels = vec![Hard; counts.0];
        labels.extend(vec![Medium; counts.1]);
        labels.extend(vec![Easy; counts.2]);
        let totals = [counts.0, counts.1, counts.2];
        let result = stratified_kfold(&labels, k, seed);
        if totals.iter().any(|&c| c > 0 && c < k) {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let folds = result.unwrap();
        let mut seen = vec![0usize; labels.len()];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            prop_assert_eq!(f.train.len() + f.test.len(), labels.len());
            for (c, &total) in totals.iter().enumerate() {
                let in_fold = f.test.iter().filter(|&&i| labels[i].index() == c).count() as f64;
                prop_assert!((in_fold - total as f64 / k as f64).abs() < 1.0);
            }
            let under = undersample(&f.train, &labels, seed);
            let per: Vec<usize> = (0..3).map(|c| under.iter().filter(|&&i| labels[i].index() == c).count()).collect();
            let present: Vec<usize> = per.iter().copied().filter(|&n| n > 0).collect();
            prop_assert!(present.windows(2).all(|w| w[0] == w[1]));
            prop_assert!(under.iter().all(|i| f.train.contains(i)));
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        prop_assert_eq!(folds, stratified_kfold(&labels, k, seed).unwrap());
    }

    #[test]
    fn accuracy_is_trace_over_total(
        pairs in prop::collection::vec((0usize..3, 0usize..3), 1..60),
    ) {
        let (p, g): (Vec<_>, Vec<_>) = pairs.iter().map(|&(a, b)| (label(a), label(b))).unzip();
        let r = evaluate(&p, &g).unwrap();
        prop_assert_eq!(r.confusion.total(), pairs.len());
        prop_assert_eq!(r.accuracy, r.confusion.trace() as f64 / pairs.len() as f64);
        for m in &r.per_class {
            for v in [m.precision, m.recall, m.f1].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn mdi_is_nonnegative_and_zero_when_unused(
        rows in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 10..60),
        seed in 0u64..50,
    ) {
        // label depends on column 0 only; column 2 is constant and can never split
        let data: Vec<Vec<f64>> = rows.iter().map(|&(a, b)| vec![a, b, 1.0]).collect();
        let labels: Vec<usize> = rows.iter().map(|&(a, _)| if a < 0.5 { 0 } else { 2 }).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&2));
        let d = dataset(data, &labels);
        let mut params = Hyperparams::default();
        params.forest.trees = 10;
        let imp = mdi(&train(&d, Variant::RandomForest, &params, seed).unwrap()).unwrap();
        prop_assert!(imp.raw.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(imp.raw[2], 0.0);
    }
}

#[test]
fn critical_values_agree_with_the_t_distribution() {
    for df in (1..=30).chain([40, 60, 120]) {
        let t = StudentsT::new(0.0, 1.0, df as f64).unwrap();
        for alpha in [0.05, 0.01] {
            let exact = t.inverse_cdf(1.0 - alpha / 2.0);
            assert!(
                (critical_value(df, alpha).unwrap() - exact).abs() < 1.5e-3,
                "df={df} alpha={alpha}"
            );
        }
    }
}

#[test]
fn mdi_of_a_stump_free_model_is_zero() {
    let d = dataset(vec![vec![1.0], vec![1.0], vec![1.0]], &[0, 2, 2]);
    let imp = mdi(&train(&d, Variant::DecisionTree, &Hyperparams::default(), 0).unwrap()).unwrap();
    assert_eq!(imp.raw, vec![0.0]);
    assert_eq!(imp.normalized, vec![0.0]);
    let nb = train(
        &d.subset(&[0, 1]),
        Variant::GaussianNb,
        &Hyperparams::default(),
        0,
    )
    .unwrap();
    assert!(mdi(&nb).is_err());
}
