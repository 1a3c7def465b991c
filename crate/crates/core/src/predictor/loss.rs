use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Mean absolute error.
    Mae,
    /// Mean absolute percentage error measured against a lower bound:
    /// `mean |(pred - lb) / (true - lb) - 1|`.
    Mape,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Mae => "mae",
            LossKind::Mape => "mape",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(LossKind::Mae),
            "mape" => Ok(LossKind::Mape),
            other => Err(Error::config(format!("unknown loss `{other}`"))),
        }
    }
}

#[inline]
fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss value and its subgradient with respect to each prediction.
pub fn loss(kind: LossKind, y_lb: f64, pred: &[f64], truth: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    match kind {
        LossKind::Mae => {
            for (&p, &t) in pred.iter().zip(truth) {
                let u = p - t;
                value += u.abs();
                grad.push(sign(u) / n);
            }
        }
        LossKind::Mape => {
            for (&p, &t) in pred.iter().zip(truth) {
                let scale = t - y_lb;
                if scale <= 0.0 || !scale.is_finite() {
                    return Err(Error::LossDomain {
                        target: t,
                        lower_bound: y_lb,
                    });
                }
                let u = (p - y_lb) / scale - 1.0;
                value += u.abs();
                grad.push(sign(u) / (scale * n));
            }
        }
    }
    Ok((value / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_truth() {
        let t = [0.1, 0.5, 2.0];
        assert_eq!(loss(LossKind::Mae, 0.0, &t, &t).unwrap().0, 0.0);
        assert_eq!(loss(LossKind::Mape, 0.0, &t, &t).unwrap().0, 0.0);
        assert_eq!(loss(LossKind::Mape, 0.0, &t, &t).unwrap().1, vec![0.0; 3]);
    }

    #[test]
    fn worked_values() {
        assert_eq!(loss(LossKind::Mape, 0.0, &[10.0], &[5.0]).unwrap().0, 1.0);
        assert_eq!(loss(LossKind::Mae, 0.0, &[3.0], &[5.0]).unwrap().0, 2.0);
        let (v, g) = loss(LossKind::Mape, 1.0, &[3.0, 0.0], &[2.0, 3.0]).unwrap();
        // |2/1 - 1| = 1, |-1/2 - 1| = 1.5
        assert!((v - 1.25).abs() < 1e-15);
        assert_eq!(g, vec![0.5, -0.25]);
    }

    #[test]
    fn mape_domain() {
        assert!(matches!(
            loss(LossKind::Mape, 0.5, &[1.0], &[0.5]),
            Err(Error::LossDomain { .. })
        ));
        assert!(loss(LossKind::Mape, 0.0, &[1.0], &[-1.0]).is_err());
        assert!(loss(LossKind::Mae, 0.0, &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn mape_weights_small_targets_more() {
        let delta = 0.01;
        let contrib = |t: f64| loss(LossKind::Mape, 0.0, &[t + delta], &[t]).unwrap().0;
        let targets = [0.05, 0.1, 0.2, 0.4, 0.8];
        for w in targets.windows(2) {
            assert!(contrib(w[0]) > contrib(w[1]));
        }
    }
}
