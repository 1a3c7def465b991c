//! The meta predictor: an ensemble of small fully connected regressors whose
//! spread supplies the uncertainty estimate used by acquisition functions.

mod ensemble;
mod loss;
mod mlp;

pub use ensemble::{ensemble_stats, train_ensemble, EnsembleModel, Prediction};
pub use loss::{loss, LossKind};
pub use mlp::{train_member, Network};

use crate::error::{Error, Result};

/// Datasets up to this size train full-batch when no batch size is set.
pub const FULL_BATCH_LIMIT: usize = 256;
const DEFAULT_MINIBATCH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorConfig {
    /// Hidden layers.
    pub n_layers: usize,
    pub width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub loss: LossKind,
    /// Global lower bound on targets, used by the MAPE loss.
    pub y_lb: f64,
    pub ensemble_size: usize,
    /// `None` trains full-batch up to [`FULL_BATCH_LIMIT`] points and in
    /// minibatches of 32 beyond that.
    pub batch_size: Option<usize>,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            n_layers: 10,
            width: 20,
            learning_rate: 0.01,
            epochs: 200,
            loss: LossKind::Mape,
            y_lb: 0.0,
            ensemble_size: 5,
            batch_size: None,
        }
    }
}

impl PredictorConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_layers == 0 || self.width == 0 || self.ensemble_size == 0 {
            return Err(Error::config(
                "n_layers, width and ensemble_size must all be at least 1",
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }

    pub fn effective_batch_size(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.min(n.max(1)),
            None if n <= FULL_BATCH_LIMIT => n.max(1),
            None => DEFAULT_MINIBATCH,
        }
    }
}
