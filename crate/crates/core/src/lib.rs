//! Bayesian optimization for neural architecture search over DAG cells.
//!
//! The crate provides the cell search space ([`space`]), the path and
//! adjacency encodings ([`encoding`]), an ensemble of small MLPs as the
//! surrogate ([`predictor`]), acquisition functions ([`acquisition`]),
//! benchmark oracles ([`benchmark`]), the BANANAS loop and baselines
//! ([`search`]), path-count theory ([`theory`]) and an experiment runner
//! ([`experiment`]).
//!
//! ```
//! use bananas::{benchmark::BenchmarkOracle, search, space::SpaceParams};
//!
//! let space = SpaceParams::default();
//! let oracle = BenchmarkOracle::synthetic(&space, 7).unwrap();
//! let record = search::random_search(&oracle, 20, search::Objective::Validation, 1).unwrap();
//! assert_eq!(record.len(), 20);
//! ```

pub mod acquisition;
pub mod benchmark;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod par;
pub mod predictor;
pub mod rng;
pub mod search;
pub mod space;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use par::Exec;
pub use space::{Cell, SpaceParams};
