//! Experiment runner: a flat `section.key = value` config, multi-trial
//! orchestration and CSV output.
//!
//! Output directory layout:
//!
//! - `config.resolved` every setting, defaults included
//! - `provenance.txt` library and oracle versions
//! - `trials/<algorithm>-<trial>.csv` written as each trial finishes
//! - `<algorithm>.csv` trial,query,observed,best_so_far,test_error_of_best
//! - `<algorithm>-queries.csv` the evaluated cells
//! - `summary.csv` algorithm,query,mean_best_so_far,std_best_so_far,trials
//! - `timing.csv` wall-clock seconds per query
//! - `summary.dat`, `plot.gp` gnuplot data and script

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::acquisition::AcqKind;
use crate::benchmark::{BenchmarkOracle, QueryMode};
use crate::encoding::{EncodingKind, EncodingSpec, Encoder};
use crate::error::{Error, Result};
use crate::par::{with_workers, Exec};
use crate::predictor::LossKind;
use crate::search::{Algorithm, DualObjectiveConfig, Objective, SearchConfig, TrialRecord};
use crate::space::SpaceParams;
use crate::stats::{mean, sample_std};

pub const RESULT_CSV_HEADER: &str = "trial,query,observed,best_so_far,test_error_of_best";
pub const SUMMARY_CSV_HEADER: &str = "algorithm,query,mean_best_so_far,std_best_so_far,trials";

#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkSpec {
    Synthetic { seed: u64 },
    Tabular { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub search: SearchConfig,
    pub space: SpaceParams,
    pub benchmark: BenchmarkSpec,
    pub query_mode: QueryMode,
    pub trials: usize,
    pub base_seed: u64,
    pub output: PathBuf,
    /// Threads for concurrent trials; 0 uses every core, 1 runs sequentially.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(algorithms: Vec<Algorithm>, benchmark: BenchmarkSpec, output: PathBuf) -> Self {
        Self {
            algorithms,
            search: SearchConfig::default(),
            space: SpaceParams::default(),
            benchmark,
            query_mode: QueryMode::MeanValidation,
            trials: 1,
            base_seed: 0,
            output,
            workers: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::config("at least one algorithm is required"));
        }
        let mut seen = HashSet::new();
        for a in &self.algorithms {
            if !seen.insert(a) {
                return Err(Error::config(format!("algorithm `{a}` listed twice")));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        self.space.check()?;
        self.search.check()?;
        Encoder::new(self.search.encoding, &self.space)?;
        if let BenchmarkSpec::Tabular { path } = &self.benchmark {
            if !path.is_file() {
                return Err(Error::config(format!(
                    "benchmark file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn oracle(&self) -> Result<BenchmarkOracle> {
        let oracle = match &self.benchmark {
            BenchmarkSpec::Synthetic { seed } => BenchmarkOracle::synthetic(&self.space, *seed)?,
            BenchmarkSpec::Tabular { path } => BenchmarkOracle::load_tabular(path, &self.space)?,
        };
        Ok(oracle.with_mode(self.query_mode))
    }

    /// Every setting in config syntax; parsing it back gives this config.
    pub fn to_text(&self) -> String {
        let s = &self.search;
        let p = &s.predictor;
        let mut out = String::new();
        let names: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("algorithms", names.join(", "));
        kv("trials", self.trials.to_string());
        kv("base_seed", self.base_seed.to_string());
        kv("workers", self.workers.to_string());
        kv("output", self.output.display().to_string());
        match &self.benchmark {
            BenchmarkSpec::Synthetic { seed } => {
                kv("benchmark.kind", "synthetic".into());
                kv("benchmark.seed", seed.to_string());
            }
            BenchmarkSpec::Tabular { path } => {
                kv("benchmark.kind", "tabular".into());
                kv("benchmark.path", path.display().to_string());
            }
        }
        kv("benchmark.mode", self.query_mode.to_string());
        kv("space.n_nodes", self.space.n_nodes.to_string());
        kv("space.n_ops", self.space.n_ops.to_string());
        kv("space.max_edges", self.space.max_edges.to_string());
        kv("space.op_names", self.space.op_names.join(", "));
        kv("search.t0", s.t0.to_string());
        kv("search.budget", s.budget.to_string());
        kv("search.candidates", s.candidates.to_string());
        kv("search.n_mutate", s.n_mutate.to_string());
        kv("search.batch", s.batch.to_string());
        kv("search.mutation_rate", s.mutation_rate.to_string());
        kv("search.dedup", s.dedup.to_string());
        kv("search.population", s.population.to_string());
        kv("search.tournament", s.tournament.to_string());
        kv("search.parallel", (s.exec == Exec::Parallel).to_string());
        kv("acquisition.kind", s.acquisition.kind.to_string());
        kv("acquisition.beta", s.acquisition.beta.to_string());
        kv("encoding.kind", s.encoding.kind.to_string());
        kv(
            "encoding.truncate",
            s.encoding.truncate_len.map_or("none".into(), |t| t.to_string()),
        );
        kv("predictor.layers", p.n_layers.to_string());
        kv("predictor.width", p.width.to_string());
        kv("predictor.learning_rate", p.learning_rate.to_string());
        kv("predictor.epochs", p.epochs.to_string());
        kv("predictor.loss", p.loss.to_string());
        kv("predictor.y_lb", p.y_lb.to_string());
        kv("predictor.ensemble_size", p.ensemble_size.to_string());
        kv(
            "predictor.batch_size",
            p.batch_size.map_or("auto".into(), |b| b.to_string()),
        );
        match s.objective {
            Objective::Validation => kv("objective.kind", "validation".into()),
            Objective::Dual(d) => {
                kv("objective.kind", "dual".into());
                kv("objective.loss_lb", d.loss_lb.to_string());
                kv("objective.exponent", d.exponent.to_string());
            }
        }
        out
    }
}

const KEYS: &[&str] = &[
    "algorithms",
    "trials",
    "base_seed",
    "workers",
    "output",
    "benchmark.kind",
    "benchmark.seed",
    "benchmark.path",
    "benchmark.mode",
    "space.n_nodes",
    "space.n_ops",
    "space.max_edges",
    "space.op_names",
    "search.t0",
    "search.budget",
    "search.candidates",
    "search.n_mutate",
    "search.batch",
    "search.mutation_rate",
    "search.dedup",
    "search.population",
    "search.tournament",
    "search.parallel",
    "acquisition.kind",
    "acquisition.beta",
    "encoding.kind",
    "encoding.truncate",
    "predictor.layers",
    "predictor.width",
    "predictor.learning_rate",
    "predictor.epochs",
    "predictor.loss",
    "predictor.y_lb",
    "predictor.ensemble_size",
    "predictor.batch_size",
    "objective.kind",
    "objective.loss_lb",
    "objective.exponent",
];

/// Raw entries with their line numbers.
struct Entries {
    origin: PathBuf,
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn err(&self, line: usize, message: String) -> Error {
        Error::Parse {
            path: self.origin.clone(),
            line,
            message,
        }
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.map.get(key)
    }

    fn get<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(*line, format!("`{key}` expects {what}, got `{v}`"))),
        }
    }

    fn set<T: FromStr>(&self, key: &str, what: &str, target: &mut T) -> Result<()> {
        if let Some(v) = self.get(key, what)? {
            *target = v;
        }
        Ok(())
    }

    /// Parses with a library `FromStr` whose error carries its own message.
    fn parse_with<T: FromStr<Err = Error>>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e: Error| self.err(*line, format!("`{key}`: {e}"))),
        }
    }
}

fn lex(text: &str, origin: &Path) -> Result<Entries> {
    let mut entries = Entries {
        origin: origin.to_path_buf(),
        map: BTreeMap::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| entries.err(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(entries.err(line, format!("unknown key `{key}`")));
        }
        if let Some((prev, _)) = entries.map.get(key) {
            return Err(entries.err(line, format!("key `{key}` already set on line {prev}")));
        }
        entries
            .map
            .insert(key.to_string(), (line, value.trim().to_string()));
    }
    Ok(entries)
}

/// Reads and validates a config file. Relative paths inside it resolve
/// against the file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, path, base)
}

pub fn parse_config_str(text: &str, origin: &Path, base_dir: &Path) -> Result<ExperimentConfig> {
    let e = lex(text, origin)?;
    let resolve = |p: &str| {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };

    let (alg_line, alg_text) = e
        .raw("algorithms")
        .ok_or_else(|| Error::config("missing required key `algorithms`"))?;
    let algorithms = alg_text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Algorithm>().map_err(|err| e.err(*alg_line, err.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let (kind_line, kind) = e
        .raw("benchmark.kind")
        .ok_or_else(|| Error::config("missing required key `benchmark.kind`"))?;
    let benchmark = match kind.as_str() {
        "synthetic" => BenchmarkSpec::Synthetic {
            seed: e.get("benchmark.seed", "an integer")?.unwrap_or(0),
        },
        "tabular" => {
            let (_, p) = e.raw("benchmark.path").ok_or_else(|| {
                Error::config("`benchmark.kind = tabular` needs key `benchmark.path`")
            })?;
            BenchmarkSpec::Tabular { path: resolve(p) }
        }
        other => {
            return Err(e.err(
                *kind_line,
                format!("`benchmark.kind` expects synthetic or tabular, got `{other}`"),
            ))
        }
    };

    let output = e
        .raw("output")
        .map(|(_, p)| resolve(p))
        .unwrap_or_else(|| base_dir.join("results"));
    let mut cfg = ExperimentConfig::new(algorithms, benchmark, output);
    if let Some(m) = e.parse_with::<QueryMode>("benchmark.mode")? {
        cfg.query_mode = m;
    }
    e.set("trials", "an integer", &mut cfg.trials)?;
    e.set("base_seed", "an integer", &mut cfg.base_seed)?;
    e.set("workers", "an integer", &mut cfg.workers)?;

    let sp = &mut cfg.space;
    e.set("space.n_nodes", "an integer", &mut sp.n_nodes)?;
    e.set("space.n_ops", "an integer", &mut sp.n_ops)?;
    e.set("space.max_edges", "an integer", &mut sp.max_edges)?;
    if let Some((line, names)) = e.raw("space.op_names") {
        let names: Vec<String> = names.split(',').map(|s| s.trim().to_string()).collect();
        *sp = sp
            .clone()
            .with_op_names(names)
            .map_err(|err| e.err(*line, err.to_string()))?;
    } else if sp.n_ops != SpaceParams::default().n_ops {
        sp.op_names = (0..sp.n_ops).map(|i| format!("op{i}")).collect();
    }

    let s = &mut cfg.search;
    e.set("search.t0", "an integer", &mut s.t0)?;
    e.set("search.budget", "an integer", &mut s.budget)?;
    e.set("search.candidates", "an integer", &mut s.candidates)?;
    e.set("search.n_mutate", "an integer", &mut s.n_mutate)?;
    e.set("search.batch", "an integer", &mut s.batch)?;
    e.set("search.mutation_rate", "a number", &mut s.mutation_rate)?;
    e.set("search.dedup", "true or false", &mut s.dedup)?;
    e.set("search.population", "an integer", &mut s.population)?;
    e.set("search.tournament", "an integer", &mut s.tournament)?;
    if let Some(par) = e.get::<bool>("search.parallel", "true or false")? {
        s.exec = if par { Exec::Parallel } else { Exec::Sequential };
    }
    if let Some(k) = e.parse_with::<AcqKind>("acquisition.kind")? {
        s.acquisition.kind = k;
    }
    e.set("acquisition.beta", "a number", &mut s.acquisition.beta)?;
    if let Some(kind) = e.parse_with::<EncodingKind>("encoding.kind")? {
        s.encoding.kind = kind;
    }
    if let Some((line, t)) = e.raw("encoding.truncate") {
        s.encoding = EncodingSpec {
            truncate_len: match t.as_str() {
                "none" => None,
                v => Some(v.parse().map_err(|_| {
                    e.err(*line, format!("`encoding.truncate` expects an integer or none, got `{v}`"))
                })?),
            },
            ..s.encoding
        };
    }
    let p = &mut s.predictor;
    e.set("predictor.layers", "an integer", &mut p.n_layers)?;
    e.set("predictor.width", "an integer", &mut p.width)?;
    e.set("predictor.learning_rate", "a number", &mut p.learning_rate)?;
    e.set("predictor.epochs", "an integer", &mut p.epochs)?;
    if let Some(l) = e.parse_with::<LossKind>("predictor.loss")? {
        p.loss = l;
    }
    e.set("predictor.y_lb", "a number", &mut p.y_lb)?;
    e.set("predictor.ensemble_size", "an integer", &mut p.ensemble_size)?;
    if let Some((line, b)) = e.raw("predictor.batch_size") {
        p.batch_size = match b.as_str() {
            "auto" => None,
            v => Some(v.parse().map_err(|_| {
                e.err(*line, format!("`predictor.batch_size` expects an integer or auto, got `{v}`"))
            })?),
        };
    }

    let mut dual = DualObjectiveConfig::default();
    e.set("objective.loss_lb", "a number", &mut dual.loss_lb)?;
    e.set("objective.exponent", "a number", &mut dual.exponent)?;
    s.objective = match e.raw("objective.kind").map(|(l, v)| (*l, v.as_str())) {
        None | Some((_, "validation")) => {
            if let Some((line, _)) = e.raw("objective.loss_lb").or(e.raw("objective.exponent")) {
                return Err(e.err(*line, "dual objective settings need `objective.kind = dual`".into()));
            }
            Objective::Validation
        }
        Some((_, "dual")) => Objective::Dual(dual),
        Some((line, other)) => {
            return Err(e.err(
                line,
                format!("`objective.kind` expects validation or dual, got `{other}`"),
            ))
        }
    };

    cfg.check()?;
    Ok(cfg)
}

/// Mean and sample std of best-so-far across trials at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: String,
    pub query: usize,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

/// Query checkpoints `10, 20, ...` up to `budget`, plus `budget` itself.
pub fn checkpoints(budget: usize) -> Vec<usize> {
    let mut q: Vec<usize> = (1..=budget / 10).map(|i| 10 * i).collect();
    if q.last() != Some(&budget) {
        q.push(budget);
    }
    q
}

pub fn summarize(algorithm: &str, records: &[TrialRecord], budget: usize) -> Vec<SummaryRow> {
    checkpoints(budget)
        .into_iter()
        .map(|q| {
            let vals: Vec<f64> = records.iter().filter_map(|r| r.best_at(q)).collect();
            SummaryRow {
                algorithm: algorithm.to_string(),
                query: q,
                mean: mean(&vals),
                std: if vals.len() > 1 { sample_std(&vals) } else { 0.0 },
                trials: vals.len(),
            }
        })
        .collect()
}

/// Result rows of one trial in the per-algorithm CSV schema, no header.
pub fn trial_csv_rows(trial: usize, record: &TrialRecord) -> String {
    let best = record.best_so_far();
    let test = record.test_error_of_best();
    let mut s = String::new();
    for (i, q) in record.queries.iter().enumerate() {
        let _ = writeln!(s, "{trial},{},{},{},{}", q.index, q.observed, best[i], test[i]);
    }
    s
}

fn query_csv_rows(trial: usize, record: &TrialRecord) -> String {
    let mut s = String::new();
    for q in &record.queries {
        let params = q.n_params.map_or(String::new(), |p| p.to_string());
        let _ = writeln!(
            s,
            "{trial},{},\"{}\",{},{},{}",
            q.index, q.cell, q.validation_error, q.test_error, params
        );
    }
    s
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub result_files: Vec<PathBuf>,
    pub summary: PathBuf,
    pub summary_rows: Vec<SummaryRow>,
}

/// Runs every (algorithm, trial) pair with seed `base_seed + trial` and
/// writes the result files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.check()?;
    let dir = &cfg.output;
    let trial_dir = dir.join("trials");
    fs::create_dir_all(&trial_dir)?;
    fs::write(dir.join("config.resolved"), cfg.to_text())?;
    let oracle = cfg.oracle()?;
    fs::write(
        dir.join("provenance.txt"),
        format!(
            "library = bananas-core {}\noracle = {}\nquery_mode = {}\nbase_seed = {}\ntrials = {}\n",
            env!("CARGO_PKG_VERSION"),
            oracle.version(),
            cfg.query_mode,
            cfg.base_seed,
            cfg.trials
        ),
    )?;

    let exec = if cfg.workers == 1 {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let jobs: Vec<(Algorithm, usize)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| (0..cfg.trials).map(move |t| (a, t)))
        .collect();
    let records = with_workers(cfg.workers, || {
        exec.try_map(jobs.len(), |j| {
            let (alg, trial) = jobs[j];
            let trial_oracle = oracle.clone().with_cap(cfg.search.budget);
            let seed = cfg.base_seed.wrapping_add(trial as u64);
            let record = alg.run(&trial_oracle, &cfg.search, seed)?;
            let path = trial_dir.join(format!("{}-{trial}.csv", alg.name()));
            fs::write(&path, format!("{RESULT_CSV_HEADER}\n{}", trial_csv_rows(trial, &record)))?;
            Ok::<_, Error>(record)
        })
    })?;

    let mut result_files = Vec::new();
    let mut summary_rows = Vec::new();
    let mut timing = String::from("algorithm,trial,query,seconds\n");
    for (a, alg) in cfg.algorithms.iter().enumerate() {
        let recs = &records[a * cfg.trials..(a + 1) * cfg.trials];
        let mut results = format!("{RESULT_CSV_HEADER}\n");
        let mut queries = String::from("trial,query,cell,validation_error,test_error,n_params\n");
        for (trial, rec) in recs.iter().enumerate() {
            results.push_str(&trial_csv_rows(trial, rec));
            queries.push_str(&query_csv_rows(trial, rec));
            for q in &rec.queries {
                let _ = writeln!(timing, "{},{trial},{},{}", alg.name(), q.index, q.wall_clock);
            }
        }
        let path = dir.join(format!("{}.csv", alg.name()));
        fs::write(&path, results)?;
        fs::write(dir.join(format!("{}-queries.csv", alg.name())), queries)?;
        result_files.push(path);
        summary_rows.extend(summarize(alg.name(), recs, cfg.search.budget));
    }
    fs::write(dir.join("timing.csv"), timing)?;

    let mut summary = format!("{SUMMARY_CSV_HEADER}\n");
    for r in &summary_rows {
        let _ = writeln!(summary, "{},{},{},{},{}", r.algorithm, r.query, r.mean, r.std, r.trials);
    }
    let summary_path = dir.join("summary.csv");
    fs::write(&summary_path, summary)?;
    write_gnuplot(dir, &cfg.algorithms, &summary_rows, cfg.search.budget)?;

    Ok(ExperimentOutput {
        dir: dir.clone(),
        result_files,
        summary: summary_path,
        summary_rows,
    })
}

fn write_gnuplot(dir: &Path, algorithms: &[Algorithm], rows: &[SummaryRow], budget: usize) -> Result<()> {
    let mut dat = String::from("# query");
    for a in algorithms {
        let _ = write!(dat, " {0}_mean {0}_std", a.name());
    }
    dat.push('\n');
    for q in checkpoints(budget) {
        let _ = write!(dat, "{q}");
        for a in algorithms {
            let r = rows
                .iter()
                .find(|r| r.algorithm == a.name() && r.query == q)
                .expect("summary row for every checkpoint");
            let _ = write!(dat, " {} {}", r.mean, r.std);
        }
        dat.push('\n');
    }
    fs::write(dir.join("summary.dat"), dat)?;

    let mut gp = String::from(
        "set datafile commentschars '#'\nset xlabel 'queries'\nset ylabel 'best so far'\nset key top right\nplot ",
    );
    let plots: Vec<String> = algorithms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            format!(
                "'summary.dat' using 1:{}:{} with yerrorlines title '{}'",
                2 + 2 * i,
                3 + 2 * i,
                a.name()
            )
        })
        .collect();
    gp.push_str(&plots.join(", \\\n     "));
    gp.push('\n');
    fs::write(dir.join("plot.gp"), gp)?;
    Ok(())
}
