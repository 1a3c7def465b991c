use super::mlp::{train_member, Network};
use super::PredictorConfig;
use crate::error::{Error, Result};
use crate::par::Exec;

const ENSEMBLE_MAGIC: &str = "bananas-ensemble v1";

/// `M` independently trained networks.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    members: Vec<Network>,
    seeds: Vec<u64>,
    input_dim: usize,
    config: PredictorConfig,
}

/// Member outputs for one input plus their normal summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
    pub members: Vec<f64>,
}

/// Mean and sample standard deviation (zero for a single output).
pub fn ensemble_stats(outputs: &[f64]) -> (f64, f64) {
    let m = outputs.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = outputs.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = outputs.iter().map(|f| (f - mean) * (f - mean)).sum();
    (mean, (ss / (m - 1) as f64).sqrt())
}

/// Trains `cfg.ensemble_size` members with seeds `base_seed, base_seed + 1, ...`.
pub fn train_ensemble(
    xs: &[Vec<f64>],
    ys: &[f64],
    cfg: &PredictorConfig,
    base_seed: u64,
    exec: Exec,
) -> Result<EnsembleModel> {
    cfg.check()?;
    let seeds: Vec<u64> = (0..cfg.ensemble_size as u64)
        .map(|m| base_seed.wrapping_add(m))
        .collect();
    let members = exec.try_map(seeds.len(), |m| train_member(xs, ys, cfg, seeds[m]))?;
    Ok(EnsembleModel {
        input_dim: members[0].input_dim(),
        members,
        seeds,
        config: cfg.clone(),
    })
}

impl EnsembleModel {
    pub fn from_members(members: Vec<Network>, seeds: Vec<u64>, config: PredictorConfig) -> Result<Self> {
        let input_dim = members
            .first()
            .map(Network::input_dim)
            .ok_or_else(|| Error::config("an ensemble needs at least one member"))?;
        if let Some(bad) = members.iter().find(|m| m.dims() != members[0].dims()) {
            return Err(Error::Dimension {
                expected: input_dim,
                got: bad.input_dim(),
            });
        }
        if seeds.len() != members.len() {
            return Err(Error::config("one seed per member required"));
        }
        Ok(Self {
            members,
            seeds,
            input_dim,
            config,
        })
    }

    pub fn members(&self) -> &[Network] {
        &self.members
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let members: Vec<f64> = self.members.iter().map(|m| m.predict(x)).collect();
        let (mean, std) = ensemble_stats(&members);
        Ok(Prediction { mean, std, members })
    }

    /// `(mean, std)` of the member outputs at `x`.
    pub fn stats(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.predict(x).map(|p| (p.mean, p.std))
    }

    /// Concatenated member checkpoints under an ensemble header.
    pub fn to_checkpoint(&self) -> String {
        let mut out = format!("{ENSEMBLE_MAGIC}\nmembers {}\n", self.members.len());
        for (net, seed) in self.members.iter().zip(&self.seeds) {
            out.push_str(&format!("seed {seed}\n"));
            out.push_str(&net.to_checkpoint());
        }
        out
    }

    /// Restores an ensemble; the training configuration is not part of the
    /// checkpoint and must be supplied.
    pub fn from_checkpoint(text: &str, config: PredictorConfig) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some(ENSEMBLE_MAGIC) {
            return Err(bad("missing ensemble header"));
        }
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("members "))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("missing member count"))?;
        let rest: Vec<&str> = lines.collect();
        let mut members = Vec::with_capacity(count);
        let mut seeds = Vec::with_capacity(count);
        let mut i = 0;
        while i < rest.len() {
            let seed = rest[i]
                .strip_prefix("seed ")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("expected a seed line"))?;
            let end = rest[i + 1..]
                .iter()
                .position(|l| l.starts_with("seed "))
                .map_or(rest.len(), |p| i + 1 + p);
            members.push(Network::from_checkpoint(&rest[i + 1..end].join("\n"))?);
            seeds.push(seed);
            i = end;
        }
        if members.len() != count {
            return Err(bad("member count mismatch"));
        }
        Self::from_members(members, seeds, config)
    }
}
