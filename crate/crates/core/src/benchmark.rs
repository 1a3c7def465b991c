//! Evaluation oracles standing in for "train this architecture": a tabular
//! lookup over line-delimited JSON records and a deterministic synthetic
//! surface defined on the path structure of a cell.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::PathTable;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, mix64, unit_from_hash};
use crate::space::{canonical_form, validate, CanonicalForm, Cell, SpaceParams};

/// Bumped whenever any synthetic constant below changes.
pub const SYNTHETIC_ORACLE_VERSION: &str = "synthetic-v1";

const BASE_ERROR: f64 = 0.30;
const PATH_WEIGHT_RANGE: (f64, f64) = (-0.03, 0.03);
/// Path weights are scaled by `LENGTH_GAIN / edges_in_path`.
const LENGTH_GAIN: f64 = 6.0;
const PAIR_HALF_WIDTH: f64 = 0.005;
const VAL_NOISE_HALF_WIDTH: f64 = 0.005;
const TEST_OFFSET_HALF_WIDTH: f64 = 0.01;
const ERROR_RANGE: (f64, f64) = (0.05, 0.95);
/// Parameter cost per op index (cycled for spaces with more ops).
const OP_PARAM_COSTS: [f64; 3] = [40_000.0, 110_000.0, 0.0];
const EDGE_PARAM_COST: f64 = 5_000.0;

const TAG_PATH: u64 = 0x5041_5448;
const TAG_PAIR: u64 = 0x5041_4952;
const TAG_VAL: u64 = 0x0056_414c;
const TAG_TEST: u64 = 0x5445_5354;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchMetrics {
    /// Validation error of each of the three training seeds.
    pub val_errors: [f64; 3],
    pub test_error: f64,
    pub n_params: Option<f64>,
}

impl ArchMetrics {
    pub fn mean_validation(&self) -> f64 {
        self.val_errors.iter().sum::<f64>() / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryMode {
    #[default]
    MeanValidation,
    /// One of the three seeds, uniformly at random, per query.
    RandomValidation,
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryMode::MeanValidation => "mean",
            QueryMode::RandomValidation => "random",
        })
    }
}

impl FromStr for QueryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(QueryMode::MeanValidation),
            "random" => Ok(QueryMode::RandomValidation),
            other => Err(Error::config(format!("unknown query mode `{other}`"))),
        }
    }
}

/// What one oracle query reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub validation_error: f64,
    /// Mean test error, whatever the query mode.
    pub test_error: f64,
    pub n_params: Option<f64>,
}

#[derive(Debug)]
enum Backend {
    Tabular(HashMap<CanonicalForm, ArchMetrics>),
    Synthetic(SyntheticSurface),
}

/// A query-counting evaluator over one search space.
///
/// Clones share the underlying data but start a fresh query count.
#[derive(Debug)]
pub struct BenchmarkOracle {
    space: SpaceParams,
    backend: Arc<Backend>,
    mode: QueryMode,
    cap: Option<usize>,
    query_count: AtomicUsize,
}

impl Clone for BenchmarkOracle {
    fn clone(&self) -> Self {
        Self {
            space: self.space.clone(),
            backend: Arc::clone(&self.backend),
            mode: self.mode,
            cap: self.cap,
            query_count: AtomicUsize::new(0),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TabularRecord {
    cell: String,
    val: [f64; 3],
    test: f64,
    params: Option<f64>,
}

impl BenchmarkOracle {
    fn from_backend(space: SpaceParams, backend: Backend) -> Self {
        Self {
            space,
            backend: Arc::new(backend),
            mode: QueryMode::MeanValidation,
            cap: None,
            query_count: AtomicUsize::new(0),
        }
    }

    /// The deterministic synthetic oracle for `space`.
    pub fn synthetic(space: &SpaceParams, seed: u64) -> Result<Self> {
        Ok(Self::from_backend(
            space.clone(),
            Backend::Synthetic(SyntheticSurface::new(space, seed)?),
        ))
    }

    /// Loads line-delimited records
    /// `{"cell": "<text form>", "val": [e1, e2, e3], "test": e, "params": p}`.
    /// `params` may be omitted; blank lines are skipped.
    pub fn load_tabular(path: &Path, space: &SpaceParams) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lookup = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TabularRecord =
                serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
            let cell = Cell::parse(&rec.cell, space).map_err(|e| parse_err(line_no, e.to_string()))?;
            if let Err(v) = validate(&cell, space) {
                let msgs: Vec<String> = v.iter().map(|v| v.to_string()).collect();
                return Err(parse_err(line_no, format!("invalid cell: {}", msgs.join("; "))));
            }
            let metrics = ArchMetrics {
                val_errors: rec.val,
                test_error: rec.test,
                n_params: rec.params,
            };
            if lookup.insert(canonical_form(&cell), metrics).is_some() {
                return Err(Error::DuplicateKey {
                    cell: rec.cell,
                    line: line_no,
                });
            }
        }
        Ok(Self::from_backend(space.clone(), Backend::Tabular(lookup)))
    }

    pub fn with_mode(mut self, mode: QueryMode) -> Self {
        self.mode = mode;
        self
    }

    /// Refuse queries beyond `cap`.
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn mode(&self) -> QueryMode {
        self.mode
    }

    pub fn space(&self) -> &SpaceParams {
        &self.space
    }

    pub fn query_count(&self) -> usize {
        self.query_count.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> Option<usize> {
        match &*self.backend {
            Backend::Tabular(m) => Some(m.len()),
            Backend::Synthetic(_) => None,
        }
    }

    pub fn params_available(&self) -> bool {
        match &*self.backend {
            Backend::Tabular(m) => m.values().all(|r| r.n_params.is_some()),
            Backend::Synthetic(_) => true,
        }
    }

    /// Identifies the data source for provenance records.
    pub fn version(&self) -> String {
        match &*self.backend {
            Backend::Tabular(m) => format!("tabular ({} records)", m.len()),
            Backend::Synthetic(s) => format!("{SYNTHETIC_ORACLE_VERSION} seed={}", s.seed),
        }
    }

    /// Stored metrics of a cell, without counting a query.
    pub fn metrics(&self, cell: &Cell) -> Result<ArchMetrics> {
        match &*self.backend {
            Backend::Tabular(m) => m
                .get(&canonical_form(cell))
                .cloned()
                .ok_or_else(|| Error::UnknownArchitecture(cell.to_text(&self.space))),
            Backend::Synthetic(s) => Ok(s.metrics(cell)),
        }
    }

    /// Noise-free synthetic value, when the backend has one.
    pub fn true_error(&self, cell: &Cell) -> Option<f64> {
        match &*self.backend {
            Backend::Synthetic(s) => Some(s.true_error(cell)),
            Backend::Tabular(_) => None,
        }
    }

    /// One counted query. `rng` picks the seed in `RandomValidation` mode.
    pub fn query<R: Rng + ?Sized>(&self, cell: &Cell, rng: &mut R) -> Result<Observation> {
        let metrics = self.metrics(cell)?;
        if let Some(cap) = self.cap {
            self.query_count
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |c| (c < cap).then_some(c + 1))
                .map_err(|c| Error::BudgetExceeded {
                    cap,
                    attempted: c + 1,
                })?;
        } else {
            self.query_count.fetch_add(1, Ordering::SeqCst);
        }
        let validation_error = match self.mode {
            QueryMode::MeanValidation => metrics.mean_validation(),
            QueryMode::RandomValidation => metrics.val_errors[rng.random_range(0..3)],
        };
        Ok(Observation {
            validation_error,
            test_error: metrics.test_error,
            n_params: metrics.n_params,
        })
    }
}

/// Path-additive synthetic error surface.
///
/// The noise-free error of a cell is
/// `clamp(0.30 - Σ_p w_p + Σ_{p<q} v_pq, 0.05, 0.95)` over the labeled paths
/// `p` it contains, where `w_p = U(-0.03, 0.03) * 6 / edges(p)` and
/// `v_pq = U(-0.005, 0.005)`, all drawn from seeded hashes of the path
/// indices. Since it depends only on the path set, isomorphic cells score
/// identically.
#[derive(Debug, Clone)]
pub struct SyntheticSurface {
    table: PathTable,
    seed: u64,
    path_weights: Vec<f64>,
}

impl SyntheticSurface {
    pub fn new(space: &SpaceParams, seed: u64) -> Result<Self> {
        let table = PathTable::new(space)?;
        let (lo, hi) = PATH_WEIGHT_RANGE;
        let mut path_weights = vec![0.0; table.len()];
        for n_ops in 0..=table.max_ops() {
            let gain = LENGTH_GAIN / (n_ops + 1) as f64;
            for idx in table.range_of_length(n_ops) {
                let u = unit_from_hash(derive_seed(seed, &[TAG_PATH, idx as u64]));
                path_weights[idx] = (lo + (hi - lo) * u) * gain;
            }
        }
        Ok(Self {
            table,
            seed,
            path_weights,
        })
    }

    fn pair_weight(&self, a: usize, b: usize) -> f64 {
        let u = unit_from_hash(derive_seed(self.seed, &[TAG_PAIR, a as u64, b as u64]));
        PAIR_HALF_WIDTH * (2.0 * u - 1.0)
    }

    pub fn true_error(&self, cell: &Cell) -> f64 {
        let paths = self.table.path_indices(cell);
        let mut e = BASE_ERROR;
        for (i, &p) in paths.iter().enumerate() {
            e -= self.path_weights[p];
            for &q in &paths[i + 1..] {
                e += self.pair_weight(p, q);
            }
        }
        e.clamp(ERROR_RANGE.0, ERROR_RANGE.1)
    }

    pub fn n_params(&self, cell: &Cell) -> f64 {
        let ops: f64 = cell
            .ops()
            .iter()
            .map(|&o| OP_PARAM_COSTS[o as usize % OP_PARAM_COSTS.len()])
            .sum();
        ops + EDGE_PARAM_COST * cell.num_edges() as f64
    }

    pub fn metrics(&self, cell: &Cell) -> ArchMetrics {
        let truth = self.true_error(cell);
        let key = canonical_form(cell).hash64();
        let noise = |tag: u64, i: u64, half: f64| {
            let u = unit_from_hash(mix64(derive_seed(self.seed, &[tag, key, i])));
            half * (2.0 * u - 1.0)
        };
        let clamp = |x: f64| x.clamp(ERROR_RANGE.0, ERROR_RANGE.1);
        let val_errors =
            [0, 1, 2].map(|i| clamp(truth + noise(TAG_VAL, i, VAL_NOISE_HALF_WIDTH)));
        ArchMetrics {
            val_errors,
            test_error: clamp(truth + noise(TAG_TEST, 0, TEST_OFFSET_HALF_WIDTH)),
            n_params: Some(self.n_params(cell)),
        }
    }
}
