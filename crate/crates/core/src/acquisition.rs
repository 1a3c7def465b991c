//! Acquisition functions over ensemble predictions. Every score is oriented
//! so that lower is better.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::predictor::Prediction;

pub const DEFAULT_BETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AcqKind {
    /// Independent Thompson sampling: a fresh normal draw per candidate.
    Its,
    /// Classic Thompson sampling with one ensemble member as the function sample.
    Ts,
    /// Lower confidence bound `mean - beta * std`.
    Ucb,
    Ei,
    Pi,
}

impl fmt::Display for AcqKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AcqKind::Its => "its",
            AcqKind::Ts => "ts",
            AcqKind::Ucb => "ucb",
            AcqKind::Ei => "ei",
            AcqKind::Pi => "pi",
        })
    }
}

impl FromStr for AcqKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "its" => Ok(AcqKind::Its),
            "ts" => Ok(AcqKind::Ts),
            "ucb" | "lcb" => Ok(AcqKind::Ucb),
            "ei" => Ok(AcqKind::Ei),
            "pi" => Ok(AcqKind::Pi),
            other => Err(Error::config(format!("unknown acquisition `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcqContext {
    pub kind: AcqKind,
    pub beta: f64,
    /// Best observed value so far (EI and PI).
    pub y_min: f64,
    /// Ensemble member acting as the posterior sample for TS in this round.
    pub ts_member: Option<usize>,
}

impl AcqContext {
    pub fn new(kind: AcqKind) -> Self {
        Self {
            kind,
            beta: DEFAULT_BETA,
            y_min: f64::INFINITY,
            ts_member: None,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_incumbent(mut self, y_min: f64) -> Self {
        self.y_min = y_min;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::config("beta must be nonnegative"));
        }
        if matches!(self.kind, AcqKind::Ei | AcqKind::Pi) && !self.y_min.is_finite() {
            return Err(Error::config("EI and PI need a finite incumbent"));
        }
        Ok(())
    }

    /// Starts a new acquisition round: for TS, picks the member that serves
    /// as the function sample for every candidate in the round.
    pub fn begin_round<R: Rng + ?Sized>(&mut self, ensemble_size: usize, rng: &mut R) {
        self.ts_member = match self.kind {
            AcqKind::Ts => Some(rng.random_range(0..ensemble_size.max(1))),
            _ => None,
        };
    }
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Negated expected improvement below `y_min`.
pub fn neg_expected_improvement(mean: f64, std: f64, y_min: f64) -> f64 {
    if std <= 0.0 {
        return -(y_min - mean).max(0.0);
    }
    let z = (y_min - mean) / std;
    -((y_min - mean) * normal_cdf(z) + std * normal_pdf(z))
}

/// Negated probability of improvement below `y_min`.
pub fn neg_probability_of_improvement(mean: f64, std: f64, y_min: f64) -> f64 {
    if std <= 0.0 {
        return if mean < y_min { -1.0 } else { 0.0 };
    }
    -normal_cdf((y_min - mean) / std)
}

/// Scores one candidate. `rng` is consumed by ITS (and by TS when no round
/// member was drawn).
pub fn score<R: Rng + ?Sized>(ctx: &AcqContext, pred: &Prediction, rng: &mut R) -> f64 {
    let (mean, std) = (pred.mean, pred.std);
    match ctx.kind {
        AcqKind::Its => {
            if std <= 0.0 {
                mean
            } else {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
        }
        AcqKind::Ts => {
            if pred.members.is_empty() {
                return mean;
            }
            let m = ctx
                .ts_member
                .unwrap_or_else(|| rng.random_range(0..pred.members.len()));
            pred.members[m.min(pred.members.len() - 1)]
        }
        AcqKind::Ucb => mean - ctx.beta * std,
        AcqKind::Ei => neg_expected_improvement(mean, std, ctx.y_min),
        AcqKind::Pi => neg_probability_of_improvement(mean, std, ctx.y_min),
    }
}

/// Indices of the `k` smallest scores, ties going to the earlier index.
pub fn select_batch(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(Error::BatchSize {
            requested: k,
            available: scores.len(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}
