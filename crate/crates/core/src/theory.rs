//! Path-count theory for random DAG cells: closed forms for the number of
//! labeled paths and the expected number of input→output paths of each
//! length, the tail sum behind path-encoding truncation, and Monte Carlo
//! estimates of the same quantities.

use std::fmt;
use std::str::FromStr;

use crate::encoding::PathTable;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng::child_rng;
use crate::space::{
    draw_gnkr_unconditioned, random_spec, sample_gnkr, Cell, GraphModel, RandomGraphParams, SpaceParams,
};

/// `Σ_{i=0}^{n_intermediate} r^i`, the number of labeled op sequences of
/// length at most `n_intermediate`.
pub fn num_paths(n_intermediate: usize, r: usize) -> Result<u128> {
    if r == 0 {
        return Err(Error::config("r must be at least 1"));
    }
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for i in 0..=n_intermediate {
        total = total.checked_add(term).ok_or(Error::Overflow("num_paths"))?;
        if i < n_intermediate {
            term = term.checked_mul(r as u128).ok_or(Error::Overflow("num_paths"))?;
        }
    }
    Ok(total)
}

/// Edge probability `2k / (n(n-1))` of the pre-rejection model.
pub fn gnkr_edge_probability(n: usize, k: usize) -> f64 {
    2.0 * k as f64 / (n as f64 * (n as f64 - 1.0))
}

/// Expected number of length-`l` (edges) input→output paths in the
/// pre-rejection model: `C(n-2, l-1) * p^l` with `p = 2k / (n(n-1))`.
/// Zero outside `1..=n-1`.
pub fn expected_paths(n: usize, k: usize, l: usize) -> f64 {
    if n < 2 || l == 0 || l > n - 1 {
        return 0.0;
    }
    let p = gnkr_edge_probability(n, k);
    if p <= 0.0 {
        return 0.0;
    }
    (ln_binomial(n - 2, l - 1) + l as f64 * p.ln()).exp()
}

/// Smallest `l` with `r^l >= n`, i.e. `ceil(log_r n)`.
pub fn ceil_log(n: usize, r: usize) -> usize {
    assert!(r >= 2, "ceil_log needs r >= 2");
    let mut l = 0;
    let mut pow: u128 = 1;
    while pow < n as u128 {
        pow *= r as u128;
        l += 1;
    }
    l
}

/// `Σ_{l=ceil(log_r n)}^{n-1} expected_paths(n, k, l)`, summed exactly.
pub fn tail_mass(n: usize, k: usize, r: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let start = ceil_log(n, r).max(1);
    if start > n - 1 {
        return 0.0;
    }
    let p = gnkr_edge_probability(n, k);
    // consecutive terms differ by the factor p * (n - 1 - l) / l
    let mut term = expected_paths(n, k, start);
    let mut sum = 0.0;
    for l in start..n {
        sum += term;
        term *= p * (n - 1 - l) as f64 / l as f64;
        if term == 0.0 {
            break;
        }
    }
    sum
}

/// Whether `tail_mass(n, n + c, r) < 1 / n^3`.
pub fn tail_bound_holds(n: usize, c: usize, r: usize) -> bool {
    tail_mass(n, n + c, r) < (n as f64).powi(-3)
}

/// Smallest `N` in `n_min..=n_max` such that the tail bound holds for every
/// `n` in `N..=n_max`, or `None` if it fails at `n_max`.
pub fn tail_bound_threshold(c: usize, r: usize, n_min: usize, n_max: usize) -> Option<usize> {
    let mut threshold = None;
    for n in (n_min..=n_max).rev() {
        if tail_bound_holds(n, c, r) {
            threshold = Some(n);
        } else {
            break;
        }
    }
    threshold
}

/// Smallest `n >= n_min` at which the tail bound holds, searching up to
/// `n_max`.
pub fn first_tail_bound(c: usize, r: usize, n_min: usize, n_max: usize) -> Option<usize> {
    (n_min..=n_max).find(|&n| tail_bound_holds(n, c, r))
}

/// Binomial coefficient as a real, by the multiplicative formula.
pub fn binomial_coefficient(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// The classical bounds `(n/k)^k <= C(n, k) <= (e n / k)^k`.
pub fn binomial_bounds(n: usize, k: usize) -> (f64, f64) {
    let ratio = n as f64 / k as f64;
    (ratio.powi(k as i32), (std::f64::consts::E * ratio).powi(k as i32))
}

/// Random cell model for path statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathModel {
    /// Edge probability 1/2, pruned, within an edge budget.
    RandomSpec { n: usize, r: usize, max_edges: usize },
    /// `G(n, k, r)` with connectivity rejection.
    Gnkr { n: usize, k: usize, r: usize },
    /// `G(n, k, r)` before rejection.
    GnkrUnconditioned { n: usize, k: usize, r: usize },
}

impl PathModel {
    pub const NASBENCH: PathModel = PathModel::RandomSpec {
        n: 7,
        r: 3,
        max_edges: 9,
    };

    pub fn n(&self) -> usize {
        match *self {
            PathModel::RandomSpec { n, .. } | PathModel::Gnkr { n, .. } | PathModel::GnkrUnconditioned { n, .. } => n,
        }
    }

    pub fn r(&self) -> usize {
        match *self {
            PathModel::RandomSpec { r, .. } | PathModel::Gnkr { r, .. } | PathModel::GnkrUnconditioned { r, .. } => r,
        }
    }

    fn space(&self) -> Result<SpaceParams> {
        match *self {
            PathModel::RandomSpec { n, r, max_edges } => SpaceParams::new(n, r, max_edges),
            PathModel::Gnkr { n, k, r } | PathModel::GnkrUnconditioned { n, k, r } => {
                RandomGraphParams::gnkr(n, k, r).space()
            }
        }
    }

    fn check(&self) -> Result<()> {
        self.space()?;
        if let PathModel::Gnkr { k, .. } | PathModel::GnkrUnconditioned { k, .. } = *self {
            if k == 0 {
                return Err(Error::config("k must be at least 1"));
            }
        }
        Ok(())
    }

    fn draw<R: rand::Rng + ?Sized>(&self, space: &SpaceParams, rng: &mut R) -> Result<Cell> {
        match *self {
            PathModel::RandomSpec { .. } => random_spec(space, rng),
            PathModel::Gnkr { n, k, r } => sample_gnkr(&RandomGraphParams::gnkr(n, k, r), rng),
            PathModel::GnkrUnconditioned { n, k, r } => {
                Ok(draw_gnkr_unconditioned(&RandomGraphParams::gnkr(n, k, r), rng))
            }
        }
    }
}

impl From<RandomGraphParams> for PathModel {
    fn from(p: RandomGraphParams) -> Self {
        match p.model {
            GraphModel::RandomSpec => PathModel::RandomSpec {
                n: p.n,
                r: p.r,
                max_edges: p.k,
            },
            GraphModel::Gnkr => PathModel::Gnkr { n: p.n, k: p.k, r: p.r },
        }
    }
}

impl fmt::Display for PathModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PathModel::RandomSpec { n, r, max_edges } => write!(f, "random_spec:n={n},r={r},k={max_edges}"),
            PathModel::Gnkr { n, k, r } => write!(f, "gnkr:n={n},k={k},r={r}"),
            PathModel::GnkrUnconditioned { n, k, r } => write!(f, "gnkr-free:n={n},k={k},r={r}"),
        }
    }
}

/// Parses `nasbench`, or `<kind>:n=..,k=..,r=..` with kind one of
/// `random_spec`, `gnkr`, `gnkr-free`. Missing keys default to n=7, k=9, r=3.
impl FromStr for PathModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "nasbench" {
            return Ok(PathModel::NASBENCH);
        }
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let (mut n, mut k, mut r) = (7usize, 9usize, 3usize);
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("expected key=value in model spec, got `{part}`")))?;
            let v: usize = val
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("model parameter `{key}` must be an integer")))?;
            match key.trim() {
                "n" => n = v,
                "k" => k = v,
                "r" => r = v,
                other => return Err(Error::config(format!("unknown model parameter `{other}`"))),
            }
        }
        let model = match kind {
            "random_spec" => PathModel::RandomSpec { n, r, max_edges: k },
            "gnkr" => PathModel::Gnkr { n, k, r },
            "gnkr-free" => PathModel::GnkrUnconditioned { n, k, r },
            other => return Err(Error::config(format!("unknown graph model `{other}`"))),
        };
        model.check()?;
        Ok(model)
    }
}

/// Statistics for paths of one length (in edges).
#[derive(Debug, Clone, PartialEq)]
pub struct PathLengthRow {
    pub length: usize,
    /// `r^(length - 1)` labeled sequences of this length.
    pub labeled_paths: u128,
    /// Share of all present labeled paths that have this length, per
    /// labeled sequence: `expected_share / labeled_paths`.
    pub probability: f64,
    /// Share of all present labeled paths that have this length.
    pub expected_share: f64,
    /// Fraction of cells containing the designated path (nodes
    /// `0, 1, ..., length-1, n-1`, all ops index 0).
    pub designated_probability: f64,
    /// Mean number of distinct labeled sequences of this length per cell.
    pub mean_labeled: f64,
    pub mean_labeled_se: f64,
    /// Mean number of node paths of this length per cell.
    pub mean_node_paths: f64,
    pub mean_node_paths_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathLengthStats {
    pub model: PathModel,
    pub trials: usize,
    pub rows: Vec<PathLengthRow>,
}

pub const STATS_CSV_HEADER: &str = "length,labeled_paths,probability,expected_paths,designated_probability,mean_labeled_paths,mean_labeled_paths_se,mean_node_paths,mean_node_paths_se";

impl PathLengthStats {
    pub fn row(&self, length: usize) -> Option<&PathLengthRow> {
        self.rows.iter().find(|r| r.length == length)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(STATS_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.length,
                r.labeled_paths,
                r.probability,
                r.expected_share,
                r.designated_probability,
                r.mean_labeled,
                r.mean_labeled_se,
                r.mean_node_paths,
                r.mean_node_paths_se
            ));
        }
        s
    }
}

/// Per-length running sums, mergeable across chunks.
#[derive(Debug, Clone)]
struct Tally {
    designated: Vec<u64>,
    labeled: Vec<f64>,
    labeled_sq: Vec<f64>,
    node: Vec<f64>,
    node_sq: Vec<f64>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            designated: vec![0; n],
            labeled: vec![0.0; n],
            labeled_sq: vec![0.0; n],
            node: vec![0.0; n],
            node_sq: vec![0.0; n],
        }
    }

    fn merge(mut self, other: Tally) -> Self {
        for l in 0..self.labeled.len() {
            self.designated[l] += other.designated[l];
            self.labeled[l] += other.labeled[l];
            self.labeled_sq[l] += other.labeled_sq[l];
            self.node[l] += other.node[l];
            self.node_sq[l] += other.node_sq[l];
        }
        self
    }
}

/// Number of input→output node paths of each length (index = edges).
pub fn node_path_counts(cell: &Cell) -> Vec<u64> {
    let n = cell.n_nodes();
    let succ = cell.successors();
    let mut counts = vec![vec![0u64; n]; n];
    counts[0][0] = 1;
    for i in 0..n - 1 {
        for j in i + 1..n {
            if succ[i] & (1 << j) != 0 {
                for l in 0..n - 1 {
                    counts[j][l + 1] += counts[i][l];
                }
            }
        }
    }
    counts[n - 1].clone()
}

fn has_designated_path(cell: &Cell, length: usize) -> bool {
    let n = cell.n_nodes();
    let mut nodes: Vec<usize> = (0..length).collect();
    nodes.push(n - 1);
    nodes.windows(2).all(|w| cell.has_edge(w[0], w[1]))
        && (1..length).all(|v| cell.op_of(v) == Some(0))
}

const CHUNK: usize = 1000;

/// Monte Carlo path statistics over `trials` cells of `model`. Trials are
/// split into chunks with independent streams derived from `seed`, so the
/// result does not depend on `exec`.
pub fn mc_path_probs(model: PathModel, trials: usize, seed: u64, exec: Exec) -> Result<PathLengthStats> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    model.check()?;
    let space = model.space()?;
    let table = PathTable::new(&space)?;
    let n = model.n();
    let r = model.r();
    // table index -> path length in edges
    let mut length_of = vec![0usize; table.len()];
    for ops in 0..=table.max_ops() {
        for idx in table.range_of_length(ops) {
            length_of[idx] = ops + 1;
        }
    }
    let n_chunks = trials.div_ceil(CHUNK);
    let tallies = exec.try_map(n_chunks, |c| {
        let mut rng = child_rng(seed, &[c as u64]);
        let size = CHUNK.min(trials - c * CHUNK);
        let mut t = Tally::new(n);
        let mut labeled = vec![0u64; n];
        for _ in 0..size {
            let cell = model.draw(&space, &mut rng)?;
            labeled.iter_mut().for_each(|x| *x = 0);
            for idx in table.path_indices(&cell) {
                labeled[length_of[idx]] += 1;
            }
            let nodes = node_path_counts(&cell);
            for l in 1..n {
                let (a, b) = (labeled[l] as f64, nodes[l] as f64);
                t.labeled[l] += a;
                t.labeled_sq[l] += a * a;
                t.node[l] += b;
                t.node_sq[l] += b * b;
                if has_designated_path(&cell, l) {
                    t.designated[l] += 1;
                }
            }
        }
        Ok::<_, Error>(t)
    })?;
    let total = tallies
        .into_iter()
        .reduce(Tally::merge)
        .expect("at least one chunk");

    let nt = trials as f64;
    let mean_se = |sum: f64, sq: f64| {
        let mean = sum / nt;
        let var = if trials > 1 {
            ((sq - nt * mean * mean) / (nt - 1.0)).max(0.0)
        } else {
            0.0
        };
        (mean, (var / nt).sqrt())
    };
    let all_labeled: f64 = total.labeled.iter().sum();
    let mut rows = Vec::with_capacity(n - 1);
    for l in 1..n {
        let labeled_paths = (r as u128).pow((l - 1) as u32);
        let (mean_labeled, mean_labeled_se) = mean_se(total.labeled[l], total.labeled_sq[l]);
        let (mean_node_paths, mean_node_paths_se) = mean_se(total.node[l], total.node_sq[l]);
        let expected_share = if all_labeled > 0.0 {
            total.labeled[l] / all_labeled
        } else {
            0.0
        };
        rows.push(PathLengthRow {
            length: l,
            labeled_paths,
            probability: expected_share / labeled_paths as f64,
            expected_share,
            designated_probability: total.designated[l] as f64 / nt,
            mean_labeled,
            mean_labeled_se,
            mean_node_paths,
            mean_node_paths_se,
        });
    }
    Ok(PathLengthStats { model, trials, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_count_identities() {
        assert_eq!(num_paths(5, 3).unwrap(), 364);
        assert_eq!(num_paths(3, 3).unwrap(), 40);
        assert_eq!(num_paths(0, 3).unwrap(), 1);
        assert_eq!(num_paths(4, 1).unwrap(), 5);
        assert!(num_paths(200, 3).is_err());
    }

    #[test]
    fn expected_paths_values() {
        assert!((expected_paths(7, 9, 1) - 3.0 / 7.0).abs() < 1e-12);
        assert!((expected_paths(7, 9, 2) - 5.0 * (3.0f64 / 7.0).powi(2)).abs() < 1e-12);
        assert_eq!(expected_paths(7, 9, 7), 0.0);
        assert_eq!(expected_paths(7, 9, 0), 0.0);
    }

    #[test]
    fn tail_mass_matches_direct_sum() {
        for &(n, k, r) in &[(7, 9, 3), (20, 21, 2), (50, 51, 3)] {
            let start = ceil_log(n, r);
            let direct: f64 = (start..n).map(|l| expected_paths(n, k, l)).sum();
            assert!((tail_mass(n, k, r) - direct).abs() <= 1e-12 * direct.max(1.0));
        }
        assert_eq!(tail_mass(1, 1, 2), 0.0);
        assert_eq!(tail_mass(2, 1, 2), 1.0);
    }

    #[test]
    fn ceil_log_values() {
        assert_eq!(ceil_log(7, 3), 2);
        assert_eq!(ceil_log(9, 3), 2);
        assert_eq!(ceil_log(10, 3), 3);
        assert_eq!(ceil_log(1, 2), 0);
        assert_eq!(ceil_log(1024, 2), 10);
    }

    #[test]
    fn node_paths_of_chain() {
        let c = Cell::new(vec![0, 0], [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(node_path_counts(&c), vec![0, 1, 0, 1]);
        assert!(has_designated_path(&c, 1));
        assert!(has_designated_path(&c, 3));
        assert!(!has_designated_path(&c, 2));
    }

    #[test]
    fn model_spec_parsing() {
        assert_eq!("nasbench".parse::<PathModel>().unwrap(), PathModel::NASBENCH);
        assert_eq!(
            "gnkr-free:n=7,k=9,r=2".parse::<PathModel>().unwrap(),
            PathModel::GnkrUnconditioned { n: 7, k: 9, r: 2 }
        );
        assert!("gnkr:q=3".parse::<PathModel>().is_err());
        let m = PathModel::Gnkr { n: 6, k: 4, r: 2 };
        assert_eq!(m.to_string().parse::<PathModel>().unwrap(), m);
    }

    #[test]
    fn exec_independent() {
        let m = PathModel::NASBENCH;
        let a = mc_path_probs(m, 2500, 3, Exec::Sequential).unwrap();
        let b = mc_path_probs(m, 2500, 3, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let share: f64 = a.rows.iter().map(|r| r.expected_share).sum();
        assert!((share - 1.0).abs() < 1e-12);
    }
}
