//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use linkdiff::consensus::{
    align, label_all, label_entities, AlignPolicy, DifficultyLabel, MentionKey,
};
use linkdiff::embeddings::skipgram::{pair_gradient, pair_loss};
use linkdiff::embeddings::{train_skipgram, EmbeddingParams};
use linkdiff::learn::logistic::loss_and_gradient;
use linkdiff::learn::tree::SplitTest;
use linkdiff::learn::{
    cross_validate, mdi, pearson, pearson_matrix, stratified_kfold, train, undersample, Classifier,
    CvConfig, Dataset, Hyperparams, Variant,
};
use linkdiff::seed;
use linkdiff::simulate::{
    repetition_seed, run_simulation, select_mentions, Budget, EvaluationSet, SelectionInputs,
    SimulationConfig, Strategy,
};
use linkdiff::synthetic::{generate_synthetic_corpus, SyntheticConfig, TopicCluster};
use linkdiff::SystemAnnotation;
use rand::Rng as _;

use DifficultyLabel::{Easy, Hard, Medium};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn class(i: usize) -> DifficultyLabel {
    DifficultyLabel::from_index(i).unwrap()
}

fn named(rows: Vec<Vec<f64>>, labels: Vec<DifficultyLabel>) -> Dataset {
    let names: Vec<String> = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    Dataset::from_continuous(&names, rows, labels).unwrap()
}

/// Label from the pairwise agreement pattern alone.
fn pairwise_label(e: &[String]) -> DifficultyLabel {
    let mut equal = 0;
    let mut pairs = 0;
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            pairs += 1;
            equal += usize::from(e[i] == e[j]);
        }
    }
    if equal == pairs {
        Easy
    } else if equal == 0 {
        Hard
    } else {
        Medium
    }
}

fn labelling_partition() -> Outcome {
    let n = 10_000;
    let mut rng = seed::rng(101);
    let keys: Vec<(String, usize)> = (0..n)
        .map(|i| (format!("d{}", i / 100), (i % 100) * 8))
        .collect();
    let sets: Vec<Vec<SystemAnnotation>> = (0..3)
        .map(|s| {
            keys.iter()
                .map(|(doc, off)| SystemAnnotation {
                    system_id: format!("s{s}"),
                    doc_id: doc.clone(),
                    surface: "Mention".into(),
                    offset: *off,
                    entity_id: format!("E{}", rng.gen_range(0..4)),
                })
                .collect()
        })
        .collect();
    let start = Instant::now();
    let labelled = label_all(align(&sets, AlignPolicy::Exact).map_err(|e| e.to_string())?);
    let elapsed = start.elapsed();

    let mut by_class: [BTreeSet<MentionKey>; 3] = Default::default();
    for m in &labelled {
        by_class[m.label.index()].insert(m.mention.key());
        ensure(
            m.label == pairwise_label(&m.mention.entities),
            format!("mismatch at {}", m.mention.key()),
        )?;
    }
    for a in 0..3 {
        for b in a + 1..3 {
            ensure(by_class[a].is_disjoint(&by_class[b]), "classes overlap")?;
        }
    }
    let union: BTreeSet<&MentionKey> = by_class.iter().flatten().collect();
    ensure(
        labelled.len() == n && union.len() == n,
        format!("{} of {n} mentions labelled", union.len()),
    )?;
    ensure(
        elapsed < Duration::from_secs(1),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "H/M/E = {}/{}/{} in {elapsed:.2?}",
        by_class[0].len(),
        by_class[1].len(),
        by_class[2].len()
    ))
}

/// Three systems draw entities i.i.d. from `p`, so each pair agrees with
/// probability `q = Σp²`. With `c = Σp³`:
/// P(EASY) = c, P(HARD) = 1 - 3q + 2c (inclusion-exclusion over the three
/// pair events), P(MEDIUM) = 3q - 3c.
fn labelling_distribution() -> Outcome {
    let samples = 10_000;
    let dists: [&[f64]; 4] = [
        &[0.5, 0.5],
        &[1.0 / 3.0; 3],
        &[0.2; 5],
        &[0.6, 0.25, 0.1, 0.05],
    ];
    let mut rng = seed::rng(202);
    let mut worst: f64 = 0.0;
    for p in dists {
        let q: f64 = p.iter().map(|x| x * x).sum();
        let c: f64 = p.iter().map(|x| x * x * x).sum();
        let expected = [1.0 - 3.0 * q + 2.0 * c, 3.0 * q - 3.0 * c, c];
        let mut counts = [0usize; 3];
        for _ in 0..samples {
            let draw = |rng: &mut seed::Rng| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, w) in p.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return format!("E{i}");
                    }
                }
                format!("E{}", p.len() - 1)
            };
            let triple = [draw(&mut rng), draw(&mut rng), draw(&mut rng)];
            counts[label_entities(&triple).index()] += 1;
        }
        for k in 0..3 {
            let e = expected[k];
            let sigma = (e * (1.0 - e) / samples as f64).sqrt();
            let got = counts[k] as f64 / samples as f64;
            let within = if sigma > 0.0 {
                worst = worst.max((got - e).abs() / sigma);
                (got - e).abs() <= 3.0 * sigma
            } else {
                (got - e).abs() < 1e-12
            };
            ensure(
                within,
                format!("q={q:.3} class {} expected {e:.4} got {got:.4}", class(k)),
            )?;
        }
    }
    Ok(format!(
        "4 distributions, largest deviation {worst:.2} sigma"
    ))
}

fn oracle_first_split(rows: &[Vec<f64>], labels: &[usize]) -> Option<usize> {
    let h = |c: &[f64; 3]| -> f64 {
        let n: f64 = c.iter().sum();
        c.iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| -(v / n) * (v / n).log2())
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
                zero[l] += 1.0;
            } else {
                one[l] += 1.0;
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

fn classifier_oracles() -> Outcome {
    // HARD {1, 3}: mean 2, variance 1. EASY {4, 8}: mean 6, variance 4.
    let d = named(
        vec![vec![1.0], vec![3.0], vec![4.0], vec![8.0]],
        vec![Hard, Hard, Easy, Easy],
    );
    let nb =
        train(&d, Variant::GaussianNb, &Hyperparams::default(), 0).map_err(|e| e.to_string())?;
    let pdf = |x: f64, m: f64, v: f64| {
        (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
    };
    let mut max_err: f64 = 0.0;
    for x in [-1.0, 0.0, 2.0, 3.5, 5.0, 6.5, 9.0] {
        let (a, b) = (0.5 * pdf(x, 2.0, 1.0), 0.5 * pdf(x, 6.0, 4.0));
        let p = nb.predict(&[x]).map_err(|e| e.to_string())?.probabilities;
        max_err = max_err
            .max((p[0] - a / (a + b)).abs())
            .max(p[1].abs())
            .max((p[2] - b / (a + b)).abs());
    }
    ensure(max_err <= 1e-9, format!("NB posterior error {max_err:e}"))?;

    let mut rng = seed::rng(303);
    let mut agree = 0;
    let mut trials = 0;
    while trials < 50 {
        let f = rng.gen_range(1..=4);
        let n = rng.gen_range(2..=64);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| f64::from(rng.gen_range(0..2u8))).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        if labels.iter().collect::<BTreeSet<_>>().len() < 2 {
            continue;
        }
        trials += 1;
        let expect = oracle_first_split(&rows, &labels);
        let d = named(rows, labels.iter().map(|&l| class(l)).collect());
        let model = train(&d, Variant::DecisionTree, &Hyperparams::default(), 0)
            .map_err(|e| e.to_string())?;
        let Classifier::DecisionTree(tree) = model.classifier else {
            return Err("not a tree".into());
        };
        let got = tree.nodes[0]
            .split
            .as_ref()
            .filter(|s| s.test == SplitTest::Threshold(0.5))
            .map(|s| s.feature);
        agree += usize::from(got == expect);
    }
    ensure(agree == 50, format!("tree oracle agreed on {agree}/50"))?;
    Ok(format!(
        "NB max error {max_err:.1e}; tree first split 50/50"
    ))
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale < 1e-10 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            p[i] += h;
            let up = f(&p);
            p[i] -= 2.0 * h;
            (up - f(&p)) / (2.0 * h)
        })
        .collect()
}

fn gradient_checks() -> Outcome {
    let mut rng = seed::rng(404);
    let mut worst_lr: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.gen_range(1..=4);
        let n = rng.gen_range(2..=8);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let theta: Vec<f64> = (0..3 * d + 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lambda = rng.gen_range(0.0..0.5);
        let (_, g) = loss_and_gradient(&x, &y, &theta, lambda);
        let num = central_difference(|t| loss_and_gradient(&x, &y, t, lambda).0, &theta, 1e-5);
        worst_lr = worst_lr.max(relative_error(&g, &num));
    }
    let mut worst_sg: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=4);
        let mut vec = || {
            (0..d)
                .map(|_| rng.gen_range(-1.5..1.5))
                .collect::<Vec<f64>>()
        };
        let v = vec();
        let targets: Vec<Vec<f64>> = (0..k).map(|_| vec()).collect();
        let refs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
        let (gv, gt) = pair_gradient(&v, &refs);
        worst_sg = worst_sg.max(relative_error(
            &gv,
            &central_difference(|c| pair_loss(c, &refs), &v, 1e-6),
        ));
        for t in 0..k {
            let num = central_difference(
                |c| {
                    let mut r = refs.clone();
                    r[t] = c;
                    pair_loss(&v, &r)
                },
                &targets[t],
                1e-6,
            );
            worst_sg = worst_sg.max(relative_error(&gt[t], &num));
        }
    }
    ensure(
        worst_lr <= 1e-5,
        format!("logistic relative error {worst_lr:e}"),
    )?;
    ensure(
        worst_sg <= 1e-5,
        format!("skip-gram relative error {worst_sg:e}"),
    )?;
    Ok(format!(
        "worst relative error: logistic {worst_lr:.1e}, skip-gram {worst_sg:.1e}"
    ))
}

fn separable_performance() -> Outcome {
    let mut rng = seed::rng(505);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..3000 {
        let (a, b, noise): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        labels.push(if a < 0.3 {
            Hard
        } else if b < 0.5 {
            Medium
        } else {
            Easy
        });
        rows.push(vec![a, b, noise]);
    }
    let data = named(rows, labels);
    let start = Instant::now();
    let report = cross_validate(
        &data,
        Variant::RandomForest,
        &Hyperparams::default(),
        &CvConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let f1 = report.pooled.macro_avg.f1;
    ensure(f1 >= 0.95, format!("macro F1 {f1:.4}"))?;
    ensure(
        elapsed < Duration::from_secs(30),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!("10-fold macro F1 {f1:.4} in {elapsed:.2?}"))
}

fn skewed_labels(n: usize, shares: [f64; 3], rng: &mut seed::Rng) -> Vec<DifficultyLabel> {
    let mut labels: Vec<DifficultyLabel> = Vec::with_capacity(n);
    for (k, share) in shares.iter().enumerate() {
        labels.extend(std::iter::repeat_n(
            class(k),
            (share * n as f64).round() as usize,
        ));
    }
    labels.truncate(n);
    use rand::seq::SliceRandom;
    labels.shuffle(rng);
    labels
}

fn class_collapse() -> Outcome {
    let mut rng = seed::rng(606);
    // 3% HARD, 21% MEDIUM, 76% EASY; mention length ignores the class
    let labels = skewed_labels(1000, [0.03, 0.21, 0.76], &mut rng);
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|_| vec![f64::from(rng.gen_range(3..20u8))])
        .collect();
    let data = named(rows, labels);
    let report = cross_validate(
        &data,
        Variant::LogisticRegression,
        &Hyperparams::default(),
        &CvConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let p = &report.pooled;
    let predicted: Vec<usize> = p.per_class.iter().map(|m| m.predicted).collect();
    ensure(
        predicted[0] == 0 && predicted[1] == 0,
        format!("predicted counts H/M/E {predicted:?}"),
    )?;
    ensure(p.class(Easy).recall == Some(1.0), "EASY recall is not 1")?;
    ensure(
        p.class(Hard).precision.is_none() && p.class(Medium).precision.is_none(),
        "HARD/MEDIUM precision is defined",
    )?;
    Ok(format!(
        "logistic regression predicts EASY for all {} rows",
        predicted[2]
    ))
}

fn balancing() -> Outcome {
    let mut wins = 0;
    let mut log = Vec::new();
    for s in 0..10u64 {
        let mut rng = seed::rng(seed::derive(707, s));
        let labels = skewed_labels(1200, [0.05, 0.25, 0.70], &mut rng);
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|l| {
                let centre = [0.0, 1.0, 2.0][l.index()];
                vec![
                    centre + rng.gen_range(-1.5..1.5),
                    centre + rng.gen_range(-1.5..1.5),
                ]
            })
            .collect();
        let data = named(rows, labels);
        let run = |balance| {
            let cv = CvConfig {
                folds: 10,
                balance,
                seed: s,
            };
            cross_validate(&data, Variant::GaussianNb, &Hyperparams::default(), &cv)
                .map(|r| *r.pooled.class(Hard))
        };
        let (plain, balanced) = (
            run(false).map_err(|e| e.to_string())?,
            run(true).map_err(|e| e.to_string())?,
        );
        let recall_up = balanced.recall > plain.recall;
        let precision_down = match (plain.precision, balanced.precision) {
            (Some(a), Some(b)) => b < a,
            (None, Some(_)) => true,
            _ => false,
        };
        wins += usize::from(recall_up && precision_down);
        log.push(format!(
            "{:.2}->{:.2}",
            plain.recall.unwrap_or(0.0),
            balanced.recall.unwrap_or(0.0)
        ));
    }
    ensure(wins >= 6, format!("direction held in {wins}/10 seeds"))?;
    Ok(format!(
        "naive Bayes HARD recall up and precision down in {wins}/10 seeds (recall {})",
        log.join(" ")
    ))
}

fn mdi_sanity() -> Outcome {
    let mut hits = 0;
    for s in 0..20u64 {
        let mut rng = seed::rng(seed::derive(808, s));
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..400 {
            let signal: f64 = rng.gen();
            let label = class((signal * 3.0) as usize);
            let weak = signal + rng.gen_range(-0.6..0.6);
            rows.push(vec![rng.gen::<f64>(), signal, weak]);
            labels.push(label);
        }
        let data = named(rows, labels);
        let model = train(&data, Variant::RandomForest, &Hyperparams::default(), s)
            .map_err(|e| e.to_string())?;
        let ranking = mdi(&model).map_err(|e| e.to_string())?.ranking();
        hits += usize::from(ranking[0] == 1 && ranking[2] == 0);
    }
    ensure(hits >= 19, format!("{hits}/20 seeds"))?;
    Ok(format!("signal first and noise last in {hits}/20 seeds"))
}

fn pearson_fixtures() -> Outcome {
    let x: Vec<Option<f64>> = [1.5, -2.0, 3.25, 7.0, 0.0, 11.5].map(Some).to_vec();
    let up: Vec<Option<f64>> = x.iter().map(|v| v.map(|v| 3.0 * v - 4.0)).collect();
    let down: Vec<Option<f64>> = x.iter().map(|v| v.map(|v| -0.5 * v + 2.0)).collect();
    let names: Vec<String> = ["x", "up", "down"].map(String::from).to_vec();
    let m = pearson_matrix(&names, &[x.clone(), up, down]).map_err(|e| e.to_string())?;
    let cell = |i: usize, j: usize| m.values[i][j].ok_or(format!("cell {i},{j} undefined"));
    for (i, j, want) in [(0, 1, 1.0), (0, 2, -1.0), (1, 2, -1.0), (0, 0, 1.0)] {
        let got = cell(i, j)?;
        ensure((got - want).abs() <= 1e-12, format!("r({i},{j}) = {got}"))?;
    }
    // deviations (-1, 0, 1) and (-1, 1, 0): covariance 1, variances 2 and 2
    let r = pearson(
        &[Some(1.0), Some(2.0), Some(3.0)],
        &[Some(1.0), Some(3.0), Some(2.0)],
    )
    .ok_or("undefined r")?;
    ensure((r - 0.5).abs() <= 1e-12, format!("fixture r = {r}"))?;
    Ok("affine columns give ±1 exactly; fixture r = 0.5".into())
}

fn stratification() -> Outcome {
    let mut rng = seed::rng(909);
    for trial in 0..100 {
        let k = rng.gen_range(2..=10);
        let counts: Vec<usize> = (0..3).map(|_| rng.gen_range(k..=k + 60)).collect();
        let mut labels: Vec<DifficultyLabel> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| vec![class(c); n])
            .collect();
        use rand::seq::SliceRandom;
        labels.shuffle(&mut rng);
        let folds = stratified_kfold(&labels, k, rng.gen()).map_err(|e| e.to_string())?;
        let mut seen = vec![0usize; labels.len()];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            for (c, &total) in counts.iter().enumerate() {
                let here = f.test.iter().filter(|&&i| labels[i].index() == c).count() as f64;
                let global = total as f64 / k as f64;
                ensure(
                    (here - global).abs() <= 1.0,
                    format!("trial {trial}: class {c} has {here} vs {global:.2}"),
                )?;
            }
            let before = f.test.clone();
            let kept = undersample(&f.train, &labels, rng.gen());
            let per: Vec<usize> = (0..3)
                .map(|c| kept.iter().filter(|&&i| labels[i].index() == c).count())
                .collect();
            ensure(
                per.iter().all(|&p| p == per[0]),
                format!("trial {trial}: undersampled counts {per:?}"),
            )?;
            ensure(
                kept.iter()
                    .all(|i| f.train.contains(i) && !f.test.contains(i)),
                "undersampling left the train fold",
            )?;
            ensure(f.test == before, "test fold altered")?;
        }
        ensure(
            seen.iter().all(|&s| s == 1),
            format!("trial {trial}: folds do not partition"),
        )?;

        // balanced cross-validation still scores every row exactly once
        if trial % 10 == 0 {
            let rows: Vec<Vec<f64>> = labels
                .iter()
                .map(|l| vec![l.index() as f64 + rng.gen::<f64>()])
                .collect();
            let data = named(rows, labels.clone());
            let cv = CvConfig {
                folds: k,
                balance: true,
                seed: trial as u64,
            };
            let r = cross_validate(&data, Variant::GaussianNb, &Hyperparams::default(), &cv)
                .map_err(|e| e.to_string())?;
            let support: Vec<usize> = r.pooled.per_class.iter().map(|m| m.support).collect();
            ensure(
                support == counts,
                format!("trial {trial}: pooled support {support:?} vs {counts:?}"),
            )?;
        }
    }
    Ok("100 datasets: folds within 1 of global, undersampling equalizes, test folds intact".into())
}

/// Entities for one mention given its intended difficulty; HARD mentions are
/// wrong for every system, MEDIUM for exactly one, EASY for none.
fn simulated_choices(n: usize, rng: &mut seed::Rng) -> (EvaluationSet, Vec<DifficultyLabel>) {
    let keys: Vec<MentionKey> = (0..n)
        .map(|i| MentionKey::new("doc", i * 10, "Mention"))
        .collect();
    let gold: Vec<String> = (0..n).map(|i| format!("Gold_{i}")).collect();
    let mut choices: Vec<Vec<String>> = vec![Vec::new(); 3];
    for (i, g) in gold.iter().enumerate() {
        let u: f64 = rng.gen();
        let odd = rng.gen_range(0..3);
        for (s, row) in choices.iter_mut().enumerate() {
            row.push(if u < 0.2 || (u < 0.5 && s == odd) {
                format!("Wrong_{s}_{i}")
            } else {
                g.clone()
            });
        }
    }
    let labels = (0..n)
        .map(|i| label_entities(&[&choices[0][i], &choices[1][i], &choices[2][i]]))
        .collect();
    let eval = EvaluationSet {
        keys,
        gold,
        systems: vec!["a".into(), "b".into(), "c".into()],
        choices,
    };
    (eval, labels)
}

fn simulation() -> Outcome {
    let budgets = vec![
        Budget::Fraction(0.05),
        Budget::Fraction(0.10),
        Budget::Fraction(0.15),
    ];
    let mut checked = 0;
    for s in 0..10u64 {
        let mut rng = seed::rng(seed::derive(1010, s));
        let (eval, labels) = simulated_choices(400, &mut rng);
        let cands = vec![2; eval.len()];
        let inputs = SelectionInputs {
            labels: &labels,
            predicted: None,
            candidates: &cands,
        };
        let cfg = SimulationConfig {
            strategies: vec![Strategy::Random, Strategy::Difficult, Strategy::Candidates],
            budgets: budgets.clone(),
            repetitions: 10,
            seed: s,
        };
        let result = run_simulation(&eval, &inputs, &cfg).map_err(|e| e.to_string())?;
        for row in &result.rows {
            let sys = eval.systems.iter().position(|x| *x == row.system).unwrap();
            let wrong: Vec<bool> = eval.choices[sys]
                .iter()
                .zip(&eval.gold)
                .map(|(c, g)| c != g)
                .collect();
            for (rep, after) in row.after.iter().enumerate() {
                let sel =
                    select_mentions(row.strategy, row.budget, &inputs, repetition_seed(s, rep))
                        .map_err(|e| e.to_string())?;
                let fixed = sel.iter().filter(|&&i| wrong[i]).count();
                ensure(
                    after.total == eval.len()
                        && row.before.total == eval.len()
                        && after.correct - row.before.correct == fixed,
                    format!(
                        "seed {s} {} {}: gain does not match selected errors",
                        row.system, row.strategy
                    ),
                )?;
                checked += 1;
            }
            if row.strategy == Strategy::Difficult {
                let random = result
                    .rows
                    .iter()
                    .find(|r| {
                        r.system == row.system
                            && r.strategy == Strategy::Random
                            && r.budget == row.budget
                    })
                    .unwrap();
                ensure(
                    row.after_mean >= random.after_mean,
                    format!(
                        "seed {s} budget {}: DIFFICULT {} < RANDOM {}",
                        row.budget, row.after_mean, random.after_mean
                    ),
                )?;
            }
        }
    }
    Ok(format!(
        "{checked} repetitions exact; DIFFICULT >= RANDOM at every budget over 10 seeds"
    ))
}

fn linkdiff(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_linkdiff"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!(
            "linkdiff {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ),
    )
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        linkdiff(dir.path(), &["gen-synthetic", "--out", ".", "--seed", "7"])?;
        for cmd in [
            "label",
            "features",
            "train",
            "eval",
            "predict",
            "importance",
            "correlate",
            "simulate",
        ] {
            linkdiff(
                dir.path(),
                &["--config", "config.toml", "--threads", threads, cmd],
            )?;
        }
        runs.push(snapshot(dir.path()));
    }
    let (a, b) = (&runs[0], &runs[1]);
    ensure(a.keys().eq(b.keys()), "different file sets")?;
    let differing: Vec<&String> = a.keys().filter(|k| a[*k] != b[*k]).collect();
    ensure(
        differing.is_empty(),
        format!("differing files: {differing:?}"),
    )?;
    let bytes: usize = a.values().map(Vec::len).sum();
    Ok(format!(
        "{} files ({bytes} bytes) identical with 1 and 4 threads",
        a.len()
    ))
}

fn embedding_quality() -> Outcome {
    let words = |list: &str| {
        list.split_whitespace()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let topics = vec![
        TopicCluster {
            name: "A".into(),
            words: words("river boat fish water shore bridge harbor sail dock anchor"),
        },
        TopicCluster {
            name: "B".into(),
            words: words("engine wheel brake road fuel garage driver gear tire motor"),
        },
    ];
    let corpus_cfg = SyntheticConfig {
        documents: 150,
        topics: topics.clone(),
        ..Default::default()
    };
    let params = EmbeddingParams {
        dim: 25,
        min_count: 2,
        ..Default::default()
    };
    let mut hits = 0;
    let mut slowest = Duration::ZERO;
    for s in 0..20u64 {
        let corpus = generate_synthetic_corpus(&corpus_cfg, seed::derive(1313, s))
            .map_err(|e| e.to_string())?;
        let docs: Vec<_> = corpus.documents().iter().collect();
        let start = Instant::now();
        let model = train_skipgram(
            &docs,
            &EmbeddingParams {
                seed: s,
                ..params.clone()
            },
            "all",
        )
        .map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        let (mut within, mut across) = (Vec::new(), Vec::new());
        let all: Vec<(usize, &String)> = topics
            .iter()
            .enumerate()
            .flat_map(|(t, c)| c.words.iter().map(move |w| (t, w)))
            .collect();
        for (i, (ti, wi)) in all.iter().enumerate() {
            for (tj, wj) in &all[i + 1..] {
                if let Some(c) = model.cosine(wi, wj) {
                    if ti == tj {
                        within.push(c)
                    } else {
                        across.push(c)
                    }
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        hits += usize::from(!within.is_empty() && mean(&within) > mean(&across));
    }
    ensure(hits >= 19, format!("{hits}/20 seeds"))?;
    ensure(
        slowest < Duration::from_secs(60),
        format!("slowest training {slowest:?}"),
    )?;
    Ok(format!(
        "within > across in {hits}/20 seeds; slowest training {slowest:.2?}"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("labelling partition", labelling_partition),
        ("labelling distribution", labelling_distribution),
        ("classifier oracles", classifier_oracles),
        ("gradient checks", gradient_checks),
        ("separable data", separable_performance),
        ("class collapse", class_collapse),
        ("balancing", balancing),
        ("MDI sanity", mdi_sanity),
        ("Pearson matrix", pearson_fixtures),
        ("stratification", stratification),
        ("simulation", simulation),
        ("determinism", determinism),
        ("embedding quality", embedding_quality),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
