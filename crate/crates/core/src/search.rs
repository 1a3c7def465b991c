//! Search algorithms: the BANANAS loop and its ablations, random search,
//! regularized evolution and GP-based BO. Every algorithm spends a
//! query-denominated budget against a [`BenchmarkOracle`] and returns a
//! [`TrialRecord`].

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;

use crate::acquisition::{score, select_batch, AcqContext, AcqKind};
use crate::benchmark::BenchmarkOracle;
use crate::encoding::{encode_adjacency, encode_path, EncodingSpec, Encoder, PathTable};
use crate::error::{Error, Result};
use crate::gp::HammingGp;
use crate::par::Exec;
use crate::predictor::{train_ensemble, PredictorConfig, Prediction};
use crate::rng::{child_rng, derive_seed, seeded, SeededRng};
use crate::space::{canonical_hash, mutate, random_spec, Cell, SpaceParams};

const TAG_QUERY: u64 = 0x5155_4552;
const TAG_TRAIN: u64 = 0x5452_4149;
const TAG_SCORE: u64 = 0x5343_4f52;

/// Attempts per wanted candidate before giving up on unique candidates.
const CANDIDATE_ATTEMPTS_PER_SLOT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualObjectiveConfig {
    pub loss_lb: f64,
    pub exponent: f64,
}

impl Default for DualObjectiveConfig {
    fn default() -> Self {
        Self {
            loss_lb: 4.8,
            exponent: 0.5,
        }
    }
}

/// `(val_loss - loss_lb) * n_params^exponent`.
pub fn dual_objective(val_loss: f64, n_params: f64, cfg: &DualObjectiveConfig) -> f64 {
    (val_loss - cfg.loss_lb) * n_params.powf(cfg.exponent)
}

/// What a search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Objective {
    #[default]
    Validation,
    /// Dual objective on the validation error in percent.
    Dual(DualObjectiveConfig),
}

impl Objective {
    fn value(&self, validation_error: f64, n_params: Option<f64>) -> Result<f64> {
        match self {
            Objective::Validation => Ok(validation_error),
            Objective::Dual(cfg) => {
                let p = n_params.ok_or_else(|| {
                    Error::config("the dual objective needs parameter counts from the benchmark")
                })?;
                Ok(dual_objective(100.0 * validation_error, p, cfg))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidateSource {
    /// Mutations of the best observed cells, round-robin.
    #[default]
    Mutation,
    /// Fresh random cells, `pool` per iteration.
    Random { pool: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpDistance {
    AdjacencyHamming,
    PathHamming,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Random cells evaluated before the first model fit.
    pub t0: usize,
    /// Total oracle queries.
    pub budget: usize,
    /// Candidates scored per iteration.
    pub candidates: usize,
    /// How many of the best observed cells are mutated.
    pub n_mutate: usize,
    /// Cells evaluated per iteration.
    pub batch: usize,
    pub acquisition: AcqContext,
    pub encoding: EncodingSpec,
    pub mutation_rate: f64,
    /// Never evaluate two isomorphic cells in one run.
    pub dedup: bool,
    pub predictor: PredictorConfig,
    pub candidate_source: CandidateSource,
    pub objective: Objective,
    /// Regularized evolution population size.
    pub population: usize,
    /// Regularized evolution tournament size.
    pub tournament: usize,
    pub exec: Exec,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            t0: 10,
            budget: 150,
            candidates: 100,
            n_mutate: 10,
            batch: 10,
            acquisition: AcqContext::new(AcqKind::Its),
            encoding: EncodingSpec::path(),
            mutation_rate: 1.0,
            dedup: true,
            predictor: PredictorConfig::default(),
            candidate_source: CandidateSource::Mutation,
            objective: Objective::Validation,
            population: 30,
            tournament: 10,
            exec: Exec::default(),
        }
    }
}

impl SearchConfig {
    pub fn check(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("budget must be at least 1"));
        }
        if self.t0 == 0 || self.t0 > self.budget {
            return Err(Error::config(format!(
                "t0 must lie in 1..=budget ({}), got {}",
                self.budget, self.t0
            )));
        }
        if self.batch == 0 {
            return Err(Error::config("batch must be at least 1"));
        }
        if self.candidates < self.batch {
            return Err(Error::config(format!(
                "candidates ({}) must be at least batch ({})",
                self.candidates, self.batch
            )));
        }
        if self.n_mutate == 0 {
            return Err(Error::config("n_mutate must be at least 1"));
        }
        if let CandidateSource::Random { pool } = self.candidate_source {
            if pool < self.batch {
                return Err(Error::config("random candidate pool smaller than batch"));
            }
        }
        if !(self.mutation_rate >= 0.0) {
            return Err(Error::config("mutation_rate must be nonnegative"));
        }
        if self.population < 2 || self.tournament == 0 || self.tournament > self.population {
            return Err(Error::config(
                "evolution needs population >= 2 and 1 <= tournament <= population",
            ));
        }
        if let Objective::Dual(d) = self.objective {
            if !(d.exponent >= 0.0) {
                return Err(Error::config("dual objective exponent must be nonnegative"));
            }
        }
        self.predictor.check()
    }
}

/// One oracle query as recorded by a search.
#[derive(Debug, Clone)]
pub struct QueryRecord {
    /// 1-based query index.
    pub index: usize,
    pub cell: String,
    /// Objective value the search saw.
    pub observed: f64,
    pub validation_error: f64,
    pub test_error: f64,
    pub n_params: Option<f64>,
    /// Seconds spent inside the oracle call. Not part of equality.
    pub wall_clock: f64,
}

impl PartialEq for QueryRecord {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
            && self.cell == other.cell
            && self.observed.to_bits() == other.observed.to_bits()
            && self.validation_error.to_bits() == other.validation_error.to_bits()
            && self.test_error.to_bits() == other.test_error.to_bits()
            && self.n_params.map(f64::to_bits) == other.n_params.map(f64::to_bits)
    }
}

/// The per-query history of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub algorithm: String,
    pub seed: u64,
    pub queries: Vec<QueryRecord>,
}

impl TrialRecord {
    fn new(algorithm: &str, seed: u64) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            seed,
            queries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Running minimum of the observed objective.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.queries
            .iter()
            .map(|q| {
                best = best.min(q.observed);
                best
            })
            .collect()
    }

    /// Test error of the incumbent after each query (earliest query wins ties).
    pub fn test_error_of_best(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        let mut test = f64::NAN;
        self.queries
            .iter()
            .map(|q| {
                if q.observed < best {
                    best = q.observed;
                    test = q.test_error;
                }
                test
            })
            .collect()
    }

    pub fn final_best(&self) -> f64 {
        self.best_so_far().last().copied().unwrap_or(f64::INFINITY)
    }

    /// Best observed value at query `q` (1-based).
    pub fn best_at(&self, q: usize) -> Option<f64> {
        self.best_so_far().get(q.checked_sub(1)?).copied()
    }

    /// Canonical text of everything except timing; equal records give equal
    /// strings.
    pub fn fingerprint(&self) -> String {
        let mut s = format!("{} seed={}\n", self.algorithm, self.seed);
        for q in &self.queries {
            s.push_str(&format!(
                "{} {} {:e} {:e} {:e} {:?}\n",
                q.index, q.cell, q.observed, q.validation_error, q.test_error, q.n_params
            ));
        }
        s
    }
}

/// Shared per-run state: observed cells, their values and the record.
struct Run<'a> {
    oracle: &'a BenchmarkOracle,
    space: SpaceParams,
    objective: Objective,
    seed: u64,
    exec: Exec,
    cells: Vec<Cell>,
    values: Vec<f64>,
    seen: HashSet<u64>,
    record: TrialRecord,
}

impl<'a> Run<'a> {
    fn new(oracle: &'a BenchmarkOracle, algorithm: &str, objective: Objective, seed: u64, exec: Exec) -> Self {
        Self {
            oracle,
            space: oracle.space().clone(),
            objective,
            seed,
            exec,
            cells: Vec::new(),
            values: Vec::new(),
            seen: HashSet::new(),
            record: TrialRecord::new(algorithm, seed),
        }
    }

    fn evaluated(&self) -> usize {
        self.cells.len()
    }

    /// Queries a batch; oracle calls may run concurrently, results are
    /// appended in batch order.
    fn evaluate(&mut self, batch: Vec<Cell>) -> Result<()> {
        let start = self.cells.len();
        let oracle = self.oracle;
        let seed = self.seed;
        let objective = self.objective;
        let results = self.exec.try_map(batch.len(), |i| {
            let mut rng = child_rng(seed, &[TAG_QUERY, (start + i) as u64]);
            let t = Instant::now();
            let obs = oracle.query(&batch[i], &mut rng)?;
            let elapsed = t.elapsed().as_secs_f64();
            let value = objective.value(obs.validation_error, obs.n_params)?;
            Ok::<_, Error>((obs, value, elapsed))
        })?;
        for (cell, (obs, value, elapsed)) in batch.into_iter().zip(results) {
            self.record.queries.push(QueryRecord {
                index: self.cells.len() + 1,
                cell: cell.to_text(&self.space),
                observed: value,
                validation_error: obs.validation_error,
                test_error: obs.test_error,
                n_params: obs.n_params,
                wall_clock: elapsed,
            });
            self.seen.insert(canonical_hash(&cell));
            self.cells.push(cell);
            self.values.push(value);
        }
        Ok(())
    }

    /// Indices of observed cells sorted by value, earliest first on ties.
    fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        idx
    }

    fn incumbent(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Draws `n` random cells, distinct from each other and from `seen` when
/// `dedup` is set.
fn draw_initial(
    space: &SpaceParams,
    n: usize,
    dedup: bool,
    seen: &HashSet<u64>,
    rng: &mut SeededRng,
) -> Result<Vec<Cell>> {
    let mut out = Vec::with_capacity(n);
    let mut taken = HashSet::new();
    let mut attempts = 0usize;
    while out.len() < n {
        if attempts >= CANDIDATE_ATTEMPTS_PER_SLOT * n.max(100) {
            return Err(Error::SpaceExhausted);
        }
        attempts += 1;
        let cell = random_spec(space, rng)?;
        if dedup {
            let h = canonical_hash(&cell);
            if seen.contains(&h) || !taken.insert(h) {
                continue;
            }
        }
        out.push(cell);
    }
    Ok(out)
}

/// Builds the candidate pool for one iteration. Mutation candidates come
/// from the top `n_mutate` cells in round-robin order; duplicates (of
/// observed cells or of each other) are dropped when `dedup` is set, and a
/// short pool is topped up with random cells.
fn generate_candidates(run: &Run, cfg: &SearchConfig, want: usize, rng: &mut SeededRng) -> Result<Vec<Cell>> {
    let space = &run.space;
    let mut out = Vec::with_capacity(cfg.candidates);
    let mut taken: HashSet<u64> = HashSet::new();
    let mut accept = |cell: Cell, out: &mut Vec<Cell>| {
        if cfg.dedup {
            let h = canonical_hash(&cell);
            if run.seen.contains(&h) || !taken.insert(h) {
                return;
            }
        }
        out.push(cell);
    };
    match cfg.candidate_source {
        CandidateSource::Mutation => {
            let ranking = run.ranking();
            let elites = &ranking[..cfg.n_mutate.min(ranking.len())];
            let max_attempts = CANDIDATE_ATTEMPTS_PER_SLOT * cfg.candidates;
            let mut attempt = 0;
            while out.len() < cfg.candidates && attempt < max_attempts {
                let parent = &run.cells[elites[attempt % elites.len()]];
                attempt += 1;
                accept(mutate(parent, space, cfg.mutation_rate, rng), &mut out);
            }
        }
        CandidateSource::Random { pool } => {
            let max_attempts = CANDIDATE_ATTEMPTS_PER_SLOT * pool;
            let mut attempt = 0;
            while out.len() < pool && attempt < max_attempts {
                attempt += 1;
                accept(random_spec(space, rng)?, &mut out);
            }
        }
    }
    let target = match cfg.candidate_source {
        CandidateSource::Mutation => cfg.candidates,
        CandidateSource::Random { pool } => pool,
    };
    let mut attempt = 0;
    while out.len() < target && attempt < CANDIDATE_ATTEMPTS_PER_SLOT * target {
        attempt += 1;
        accept(random_spec(space, rng)?, &mut out);
    }
    if out.len() < want {
        return Err(Error::SpaceExhausted);
    }
    Ok(out)
}

/// Surrogate used to score candidates in a BO loop.
enum Surrogate<'a> {
    Ensemble { encoder: &'a Encoder },
    Gp { distance: GpDistance, table: Option<&'a PathTable> },
}

fn bo_loop(
    oracle: &BenchmarkOracle,
    cfg: &SearchConfig,
    seed: u64,
    algorithm: &str,
    surrogate: Surrogate,
) -> Result<TrialRecord> {
    cfg.check()?;
    let mut rng = seeded(seed);
    let mut run = Run::new(oracle, algorithm, cfg.objective, seed, cfg.exec);
    let initial = draw_initial(&run.space, cfg.t0, cfg.dedup, &run.seen, &mut rng)?;
    run.evaluate(initial)?;

    let mut round = 0u64;
    while run.evaluated() < cfg.budget {
        let k = cfg.batch.min(cfg.budget - run.evaluated());
        let candidates = generate_candidates(&run, cfg, k, &mut rng)?;
        let scores = match &surrogate {
            Surrogate::Ensemble { encoder } => {
                let xs: Vec<Vec<f64>> = run.cells.iter().map(|c| encoder.encode(c)).collect();
                let model = train_ensemble(
                    &xs,
                    &run.values,
                    &cfg.predictor,
                    derive_seed(seed, &[TAG_TRAIN, round]),
                    cfg.exec,
                )?;
                let mut ctx = cfg.acquisition.with_incumbent(run.incumbent());
                ctx.begin_round(model.len(), &mut rng);
                ctx.check()?;
                cfg.exec.try_map(candidates.len(), |i| {
                    let pred = model.predict(&encoder.encode(&candidates[i]))?;
                    let mut r = child_rng(seed, &[TAG_SCORE, round, i as u64]);
                    Ok::<_, Error>(score(&ctx, &pred, &mut r))
                })?
            }
            Surrogate::Gp { distance, table } => {
                let feats = |c: &Cell| match distance {
                    GpDistance::AdjacencyHamming => encode_adjacency(c, &run.space),
                    GpDistance::PathHamming => encode_path(c, table.unwrap(), None),
                };
                let gp = HammingGp::fit(run.cells.iter().map(&feats).collect(), &run.values)?;
                let ctx = AcqContext::new(AcqKind::Ucb);
                let mut r = child_rng(seed, &[TAG_SCORE, round]);
                cfg.exec.map(candidates.len(), |i| {
                    let (mean, std) = gp.predict(&feats(&candidates[i]));
                    (mean, std)
                })
                .into_iter()
                .map(|(mean, std)| {
                    let pred = Prediction {
                        mean,
                        std,
                        members: Vec::new(),
                    };
                    score(&ctx, &pred, &mut r)
                })
                .collect()
            }
        };
        let chosen = select_batch(&scores, k)?;
        let batch: Vec<Cell> = chosen.into_iter().map(|i| candidates[i].clone()).collect();
        run.evaluate(batch)?;
        round += 1;
    }
    Ok(run.record)
}

/// The BANANAS loop: fit an ensemble on the encoded history, score
/// candidates with the acquisition function and evaluate the best `batch`.
pub fn bananas_search(oracle: &BenchmarkOracle, cfg: &SearchConfig, seed: u64) -> Result<TrialRecord> {
    bananas_named(oracle, cfg, seed, "bananas")
}

fn bananas_named(oracle: &BenchmarkOracle, cfg: &SearchConfig, seed: u64, name: &str) -> Result<TrialRecord> {
    let encoder = Encoder::new(cfg.encoding, oracle.space())?;
    bo_loop(oracle, cfg, seed, name, Surrogate::Ensemble { encoder: &encoder })
}

/// BO with a Hamming-kernel GP surrogate and UCB (beta 0.5).
pub fn gp_bo_search(
    oracle: &BenchmarkOracle,
    cfg: &SearchConfig,
    distance: GpDistance,
    seed: u64,
) -> Result<TrialRecord> {
    let table = match distance {
        GpDistance::PathHamming => Some(PathTable::new(oracle.space())?),
        GpDistance::AdjacencyHamming => None,
    };
    let name = match distance {
        GpDistance::AdjacencyHamming => "gp-adjacency",
        GpDistance::PathHamming => "gp-path",
    };
    bo_loop(
        oracle,
        cfg,
        seed,
        name,
        Surrogate::Gp {
            distance,
            table: table.as_ref(),
        },
    )
}

/// `budget` independent random cells.
pub fn random_search(
    oracle: &BenchmarkOracle,
    budget: usize,
    objective: Objective,
    seed: u64,
) -> Result<TrialRecord> {
    if budget == 0 {
        return Err(Error::config("budget must be at least 1"));
    }
    let mut rng = seeded(seed);
    let mut run = Run::new(oracle, "random", objective, seed, Exec::Sequential);
    let cells = (0..budget)
        .map(|_| random_spec(&run.space, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    run.evaluate(cells)?;
    Ok(run.record)
}

/// Regularized (aging) evolution: tournament selection of size
/// `tournament` from a sliding population, mutation of the winner and
/// eviction of the oldest member.
pub fn regularized_evolution(
    oracle: &BenchmarkOracle,
    budget: usize,
    population: usize,
    tournament: usize,
    mutation_rate: f64,
    objective: Objective,
    seed: u64,
) -> Result<TrialRecord> {
    if budget == 0 || population < 2 || tournament == 0 || tournament > population {
        return Err(Error::config(
            "evolution needs budget >= 1, population >= 2 and 1 <= tournament <= population",
        ));
    }
    let mut rng = seeded(seed);
    let mut run = Run::new(oracle, "evolution", objective, seed, Exec::Sequential);
    let init = (0..population.min(budget))
        .map(|_| random_spec(&run.space, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    run.evaluate(init)?;
    let mut pop: VecDeque<usize> = (0..run.evaluated()).collect();
    while run.evaluated() < budget {
        let picks = sample_indices(&mut rng, pop.len(), tournament);
        let parent = picks
            .iter()
            .map(|i| pop[i])
            .min_by(|&a, &b| run.values[a].total_cmp(&run.values[b]).then(a.cmp(&b)))
            .expect("tournament is nonempty");
        let child = mutate(&run.cells[parent], &run.space, mutation_rate, &mut rng);
        run.evaluate(vec![child])?;
        pop.push_back(run.evaluated() - 1);
        pop.pop_front();
    }
    Ok(run.record)
}

/// Every runnable algorithm, including the ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Bananas,
    Random,
    Evolution,
    GpAdjacency,
    GpPath,
    /// BANANAS scoring random candidates instead of mutations.
    BananasRandomCandidates,
    BananasAdjacency,
    BananasContinuous,
}

pub const RANDOM_CANDIDATE_POOL: usize = 1000;

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Bananas,
        Algorithm::Random,
        Algorithm::Evolution,
        Algorithm::GpAdjacency,
        Algorithm::GpPath,
        Algorithm::BananasRandomCandidates,
        Algorithm::BananasAdjacency,
        Algorithm::BananasContinuous,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Bananas => "bananas",
            Algorithm::Random => "random",
            Algorithm::Evolution => "evolution",
            Algorithm::GpAdjacency => "gp-adjacency",
            Algorithm::GpPath => "gp-path",
            Algorithm::BananasRandomCandidates => "bananas-random-candidates",
            Algorithm::BananasAdjacency => "bananas-adjacency",
            Algorithm::BananasContinuous => "bananas-continuous",
        }
    }

    pub fn run(&self, oracle: &BenchmarkOracle, cfg: &SearchConfig, seed: u64) -> Result<TrialRecord> {
        match self {
            Algorithm::Bananas => bananas_search(oracle, cfg, seed),
            Algorithm::Random => random_search(oracle, cfg.budget, cfg.objective, seed),
            Algorithm::Evolution => regularized_evolution(
                oracle,
                cfg.budget,
                cfg.population,
                cfg.tournament,
                cfg.mutation_rate,
                cfg.objective,
                seed,
            ),
            Algorithm::GpAdjacency => gp_bo_search(oracle, cfg, GpDistance::AdjacencyHamming, seed),
            Algorithm::GpPath => gp_bo_search(oracle, cfg, GpDistance::PathHamming, seed),
            Algorithm::BananasRandomCandidates => {
                let cfg = SearchConfig {
                    candidate_source: CandidateSource::Random {
                        pool: RANDOM_CANDIDATE_POOL,
                    },
                    ..cfg.clone()
                };
                bananas_named(oracle, &cfg, seed, self.name())
            }
            Algorithm::BananasAdjacency => {
                let cfg = SearchConfig {
                    encoding: EncodingSpec::adjacency(),
                    ..cfg.clone()
                };
                bananas_named(oracle, &cfg, seed, self.name())
            }
            Algorithm::BananasContinuous => {
                let cfg = SearchConfig {
                    encoding: EncodingSpec::continuous_adjacency(),
                    ..cfg.clone()
                };
                bananas_named(oracle, &cfg, seed, self.name())
            }
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::config(format!("unknown algorithm `{s}` (expected one of {})", names.join(", ")))
            })
    }
}
