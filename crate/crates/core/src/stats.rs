//! Summary statistics and the one-sided rank test used to compare search
//! algorithms across seeded runs.

use crate::acquisition::normal_cdf;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Midranks (1-based) of the values, ties sharing their average rank.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTest {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    pub z: f64,
    /// One-sided p-value for "first sample tends to be smaller".
    pub p_value: f64,
}

/// One-sided Mann-Whitney U test that `a` is stochastically smaller than
/// `b`, normal approximation with tie and continuity corrections.
pub fn mann_whitney_less(a: &[f64], b: &[f64]) -> RankTest {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut all = a.to_vec();
    all.extend_from_slice(b);
    let ranks = midranks(&all);
    let ra: f64 = ranks[..a.len()].iter().sum();
    let u = ra - na * (na + 1.0) / 2.0;

    let n = na + nb;
    let mut sorted = all.clone();
    sorted.sort_by(|x, y| x.total_cmp(y));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return RankTest {
            u,
            z: 0.0,
            p_value: 1.0,
        };
    }
    let z = (u - na * nb / 2.0 + 0.5) / var.sqrt();
    RankTest {
        u,
        z,
        p_value: normal_cdf(z),
    }
}
