use bananas::acquisition::{
    neg_expected_improvement, neg_probability_of_improvement, score, select_batch, AcqContext, AcqKind,
};
use bananas::predictor::Prediction;
use bananas::rng::{child_rng, seeded};
use proptest::prelude::*;

fn pred(mean: f64, std: f64, members: Vec<f64>) -> Prediction {
    Prediction { mean, std, members }
}

fn corr(xs: &[(f64, f64)]) -> f64 {
    let n = xs.len() as f64;
    let ma = xs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = xs.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = xs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum();
    let va: f64 = xs.iter().map(|p| (p.0 - ma).powi(2)).sum();
    let vb: f64 = xs.iter().map(|p| (p.1 - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn its_is_independent_but_ts_is_comonotone() {
    // two candidates whose ensemble members agree in ranking
    let a = pred(0.12, 0.03, vec![0.08, 0.10, 0.12, 0.14, 0.16]);
    let b = pred(0.20, 0.05, vec![0.13, 0.17, 0.20, 0.23, 0.27]);
    let its = AcqContext::new(AcqKind::Its);
    let its_pairs: Vec<(f64, f64)> = (0..50_000u64)
        .map(|round| {
            (
                score(&its, &a, &mut child_rng(3, &[round, 0])),
                score(&its, &b, &mut child_rng(3, &[round, 1])),
            )
        })
        .collect();
    assert!(corr(&its_pairs).abs() <= 0.02);

    let ts_pairs: Vec<(f64, f64)> = (0..2_000u64)
        .map(|round| {
            let mut ctx = AcqContext::new(AcqKind::Ts);
            ctx.begin_round(5, &mut child_rng(4, &[round]));
            let mut rng = seeded(0);
            (score(&ctx, &a, &mut rng), score(&ctx, &b, &mut rng))
        })
        .collect();
    assert!(corr(&ts_pairs) > 0.95);
}

#[test]
fn spec_examples() {
    let p = pred(0.1, 0.02, vec![0.1]);
    assert!((score(&AcqContext::new(AcqKind::Ucb), &p, &mut seeded(0)) - 0.09).abs() <= 1e-15);
    assert!((neg_expected_improvement(0.2, 1.0, 0.2) + 0.398942).abs() < 1e-6);
    assert_eq!(neg_probability_of_improvement(0.2, 0.3, 0.2), -0.5);
    assert_eq!(score(&AcqContext::new(AcqKind::Its), &pred(0.07, 0.0, vec![]), &mut seeded(1)), 0.07);
}

proptest! {
    #[test]
    fn ei_and_pi_monotone_in_improvement(
        f_hat in -1.0f64..1.0,
        sigma in 1e-3f64..10.0,
        gap in -5.0f64..5.0,
        extra in 0.0f64..2.0,
    ) {
        let y = f_hat + gap;
        let y_more = y + extra;
        prop_assert!(neg_expected_improvement(f_hat, sigma, y_more) <= neg_expected_improvement(f_hat, sigma, y) + 1e-15);
        prop_assert!(neg_probability_of_improvement(f_hat, sigma, y_more) <= neg_probability_of_improvement(f_hat, sigma, y) + 1e-15);
    }

    #[test]
    fn selection_is_shift_invariant(
        stats in prop::collection::vec((0.0f64..1.0, 0.001f64..0.2), 2..30),
        shift in -5.0f64..5.0,
        kind in prop::sample::select(vec![AcqKind::Ucb, AcqKind::Ei, AcqKind::Pi]),
    ) {
        // keep means on a coarse grid so a shift cannot reorder near-ties
        let stats: Vec<(f64, f64)> = stats.iter().map(|&(m, s)| ((m * 64.0).round() / 64.0, s)).collect();
        let y_min = 0.4;
        let k = stats.len() / 2;
        let select = |delta: f64| {
            let ctx = AcqContext::new(kind).with_incumbent(y_min + delta);
            let scores: Vec<f64> = stats
                .iter()
                .map(|&(m, s)| score(&ctx, &pred(m + delta, s, vec![m + delta]), &mut seeded(0)))
                .collect();
            select_batch(&scores, k).unwrap()
        };
        let shifted = select(shift);
        let base = select(0.0);
        // floating point rounding of the shift can only swap exactly tied candidates
        let base_set: std::collections::BTreeSet<_> = base.iter().collect();
        let shifted_set: std::collections::BTreeSet<_> = shifted.iter().collect();
        if base_set != shifted_set {
            let ctx = AcqContext::new(kind).with_incumbent(y_min);
            let scores: Vec<f64> = stats.iter().map(|&(m, s)| score(&ctx, &pred(m, s, vec![m]), &mut seeded(0))).collect();
            let cutoff = scores[*base.last().unwrap()];
            for i in base_set.symmetric_difference(&shifted_set) {
                prop_assert!((scores[**i] - cutoff).abs() < 1e-9);
            }
        }
    }
}
