//! Gaussian-process regression with an exponential kernel over Hamming
//! distances between binary feature vectors.

use crate::error::{Error, Result};

const INITIAL_JITTER: f64 = 1e-6;
const MAX_JITTER: f64 = 1e-2;

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Lower Cholesky factor of a row-major `n x n` matrix, or `None` when it is
/// not positive definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i * n + i];
    }
    x
}

fn backward_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (b[i] - s) / l[i * n + i];
    }
    x
}

/// A fitted GP with kernel `exp(-d / length_scale)` on standardized targets.
#[derive(Debug, Clone)]
pub struct HammingGp {
    features: Vec<Vec<u8>>,
    length_scale: f64,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    jitter: f64,
}

impl HammingGp {
    /// Fits with the length scale set to the mean pairwise distance of the
    /// training features (1 when all coincide). Jitter starts at 1e-6 and
    /// grows tenfold up to 1e-2 until the kernel matrix factors.
    pub fn fit(features: Vec<Vec<u8>>, ys: &[f64]) -> Result<Self> {
        let n = features.len();
        if n == 0 || n != ys.len() {
            return Err(Error::Dimension {
                expected: ys.len().max(1),
                got: n,
            });
        }
        let mut total = 0usize;
        let mut pairs = 0usize;
        let mut dist = vec![0usize; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = hamming(&features[i], &features[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
                total += d;
                pairs += 1;
            }
        }
        let length_scale = if total == 0 {
            1.0
        } else {
            total as f64 / pairs as f64
        };

        let y_mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let z: Vec<f64> = ys.iter().map(|y| (y - y_mean) / y_scale).collect();

        let base: Vec<f64> = dist
            .iter()
            .map(|&d| (-(d as f64) / length_scale).exp())
            .collect();
        let mut jitter = INITIAL_JITTER;
        loop {
            let mut k = base.clone();
            for i in 0..n {
                k[i * n + i] += jitter;
            }
            if let Some(chol) = cholesky(&k, n) {
                let alpha = backward_sub(&chol, n, &forward_sub(&chol, n, &z));
                return Ok(Self {
                    features,
                    length_scale,
                    chol,
                    alpha,
                    y_mean,
                    y_scale,
                    jitter,
                });
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER * 1.0000001 {
                return Err(Error::NotPositiveDefinite { jitter: MAX_JITTER });
            }
        }
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn kernel(&self, a: &[u8], b: &[u8]) -> f64 {
        (-(hamming(a, b) as f64) / self.length_scale).exp()
    }

    /// Posterior mean and standard deviation in target units.
    pub fn predict(&self, x: &[u8]) -> (f64, f64) {
        let n = self.features.len();
        let ks: Vec<f64> = self.features.iter().map(|f| self.kernel(f, x)).collect();
        let mean_z: f64 = ks.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let v = forward_sub(&self.chol, n, &ks);
        let var_z = (1.0 - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (
            self.y_mean + self.y_scale * mean_z,
            self.y_scale * var_z.sqrt(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_features_have_unit_kernel() {
        let gp = HammingGp::fit(vec![vec![1, 0, 1], vec![0, 0, 1]], &[0.1, 0.2]).unwrap();
        assert_eq!(gp.kernel(&[1, 0, 1], &[1, 0, 1]), 1.0);
        assert_eq!(hamming(&[1, 0, 1], &[0, 1, 1]), 2);
    }

    #[test]
    fn interpolates_single_observation() {
        let gp = HammingGp::fit(vec![vec![1, 0, 0, 1]], &[0.237]).unwrap();
        let (m, s) = gp.predict(&[1, 0, 0, 1]);
        assert!((m - 0.237).abs() < 1e-6);
        assert!(s < 1e-2);
    }

    #[test]
    fn interpolates_many_observations() {
        let feats: Vec<Vec<u8>> = (0..8u8).map(|i| (0..3).map(|b| (i >> b) & 1).collect()).collect();
        let ys: Vec<f64> = (0..8).map(|i| 0.1 + 0.02 * i as f64).collect();
        let gp = HammingGp::fit(feats.clone(), &ys).unwrap();
        for (f, y) in feats.iter().zip(&ys) {
            let (m, _) = gp.predict(f);
            assert!((m - y).abs() < 1e-4, "{m} vs {y}");
        }
    }

    #[test]
    fn duplicate_points_need_jitter_only() {
        let gp = HammingGp::fit(vec![vec![1, 1], vec![1, 1], vec![0, 1]], &[0.2, 0.2, 0.3]).unwrap();
        assert!(gp.jitter() <= MAX_JITTER);
    }

    #[test]
    fn far_points_revert_to_mean() {
        let gp = HammingGp::fit(vec![vec![0; 20], vec![1; 20]], &[0.1, 0.3]).unwrap();
        let (m, s) = gp.predict(&[0; 20]);
        assert!((m - 0.1).abs() < 1e-4);
        let mid: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let (m_mid, s_mid) = gp.predict(&mid);
        assert!((m_mid - 0.2).abs() < 0.05);
        assert!(s_mid > s);
    }
}
