use linkdiff::embeddings::skipgram::{pair_gradient, pair_loss};
use proptest::prelude::*;

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = analytic
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
        .max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
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

proptest! {
    /// Two-word vocabulary: one context word and one noise word.
    #[test]
    fn gradient_matches_finite_differences(
        (v, u, n) in (1usize..6).prop_flat_map(|d| (
            prop::collection::vec(-1.5f64..1.5, d),
            prop::collection::vec(-1.5f64..1.5, d),
            prop::collection::vec(-1.5f64..1.5, d),
        ))
    ) {
        let (gv, gt) = pair_gradient(&v, &[&u, &n]);
        let nv = central_difference(|c| pair_loss(c, &[&u, &n]), &v);
        let nu = central_difference(|c| pair_loss(&v, &[c, &n]), &u);
        let nn = central_difference(|c| pair_loss(&v, &[&u, c]), &n);
        prop_assert!(relative_error(&gv, &nv) <= 1e-5);
        prop_assert!(relative_error(&gt[0], &nu) <= 1e-5);
        prop_assert!(relative_error(&gt[1], &nn) <= 1e-5);
    }
}

#[test]
fn loss_is_stable_for_large_scores() {
    let v = [50.0f64, 50.0];
    let u = [50.0f64, 50.0];
    let l = pair_loss(&v, &[&u, &u]);
    assert!(l.is_finite());
    assert!((l - 5000.0).abs() < 1e-6);
}
