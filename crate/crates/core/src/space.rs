//! DAG-cell search spaces: parameters, the [`Cell`] type, random sampling,
//! mutation, validity and canonicalization under node relabeling.
//!
//! Nodes are indexed `0..n_nodes` with node 0 the input and node
//! `n_nodes - 1` the output. Edges always point from a lower to a higher
//! index, so every cell is acyclic by construction. Edge sets are stored as a
//! bitmask over the upper-triangular slots in row-major order, which caps the
//! node count at [`MAX_NODES`].

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Largest supported node count (55 edge slots fit in a `u64`).
pub const MAX_NODES: usize = 11;

/// Attempts before a rejection sampler reports a configuration error.
pub const REJECTION_CAP: u64 = 1_000_000;

/// Attempts before [`mutate`] gives up and returns its input unchanged.
const MUTATION_ATTEMPTS: usize = 10_000;

/// Operation labels of the NASBench-101 cell space.
pub const NASBENCH_OPS: [&str; 3] = ["conv1x1", "conv3x3", "maxpool3x3"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceParams {
    pub n_nodes: usize,
    pub n_ops: usize,
    pub max_edges: usize,
    pub op_names: Vec<String>,
}

impl Default for SpaceParams {
    /// The NASBench-101 space: 7 nodes, 3 operations, at most 9 edges.
    fn default() -> Self {
        Self {
            n_nodes: 7,
            n_ops: 3,
            max_edges: 9,
            op_names: NASBENCH_OPS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SpaceParams {
    /// A space with generic op labels `op0, op1, ...` (or the NASBench labels
    /// when `n_ops == 3`).
    pub fn new(n_nodes: usize, n_ops: usize, max_edges: usize) -> Result<Self> {
        let op_names = if n_ops == NASBENCH_OPS.len() {
            NASBENCH_OPS.iter().map(|s| s.to_string()).collect()
        } else {
            (0..n_ops).map(|i| format!("op{i}")).collect()
        };
        let params = Self {
            n_nodes,
            n_ops,
            max_edges,
            op_names,
        };
        params.check()?;
        Ok(params)
    }

    pub fn with_op_names(mut self, names: Vec<String>) -> Result<Self> {
        self.op_names = names;
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_nodes < 2 || self.n_nodes > MAX_NODES {
            return Err(Error::config(format!(
                "n_nodes must be in 2..={MAX_NODES}, got {}",
                self.n_nodes
            )));
        }
        if self.n_ops == 0 || self.n_ops > u8::MAX as usize {
            return Err(Error::config(format!(
                "n_ops must be in 1..=255, got {}",
                self.n_ops
            )));
        }
        if self.max_edges == 0 || self.max_edges > self.n_edge_slots() {
            return Err(Error::config(format!(
                "max_edges must be in 1..={}, got {}",
                self.n_edge_slots(),
                self.max_edges
            )));
        }
        if self.op_names.len() != self.n_ops {
            return Err(Error::config(format!(
                "{} op names given for {} ops",
                self.op_names.len(),
                self.n_ops
            )));
        }
        Ok(())
    }

    pub fn n_intermediate(&self) -> usize {
        self.n_nodes - 2
    }

    pub fn n_edge_slots(&self) -> usize {
        self.n_nodes * (self.n_nodes - 1) / 2
    }

    pub fn op_index(&self, name: &str) -> Option<usize> {
        self.op_names.iter().position(|n| n == name)
    }
}

/// Parameters of the two random-graph models used by the path-length theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGraphParams {
    pub n: usize,
    /// Edge budget (`RandomSpec`) or target expected edge count (`Gnkr`).
    pub k: usize,
    pub r: usize,
    pub model: GraphModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphModel {
    /// Edge probability 1/2, rejected unless connected and within budget `k`.
    RandomSpec,
    /// Edge probability `2k / (n(n-1))`, rejected only when disconnected.
    Gnkr,
}

impl RandomGraphParams {
    pub fn random_spec(n: usize, k: usize, r: usize) -> Self {
        Self {
            n,
            k,
            r,
            model: GraphModel::RandomSpec,
        }
    }

    pub fn gnkr(n: usize, k: usize, r: usize) -> Self {
        Self {
            n,
            k,
            r,
            model: GraphModel::Gnkr,
        }
    }

    /// Per-edge inclusion probability, clipped to 1.
    pub fn edge_probability(&self) -> f64 {
        match self.model {
            GraphModel::RandomSpec => 0.5,
            GraphModel::Gnkr => {
                let slots = (self.n * (self.n - 1)) as f64;
                (2.0 * self.k as f64 / slots).min(1.0)
            }
        }
    }

    pub fn space(&self) -> Result<SpaceParams> {
        let max_edges = match self.model {
            GraphModel::RandomSpec => self.k,
            GraphModel::Gnkr => self.n * (self.n.saturating_sub(1)) / 2,
        };
        SpaceParams::new(self.n, self.r, max_edges)
    }

    /// Draws one cell from the model, including rejection.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Cell> {
        match self.model {
            GraphModel::RandomSpec => random_spec(&self.space()?, rng),
            GraphModel::Gnkr => sample_gnkr(self, rng),
        }
    }
}

#[inline]
fn slot_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// A labeled DAG cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    n_nodes: u8,
    ops: Vec<u8>,
    edges: u64,
}

impl Cell {
    /// Builds a cell from per-intermediate-node op indices and `(i, j)` edges.
    /// Only structural checks happen here; use [`validate`] for the space
    /// invariants.
    pub fn new<I>(ops: Vec<usize>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = ops.len() + 2;
        if n > MAX_NODES {
            return Err(Error::config(format!("cells support at most {MAX_NODES} nodes")));
        }
        let ops = ops
            .into_iter()
            .map(|o| u8::try_from(o).map_err(|_| Error::config(format!("op index {o} too large"))))
            .collect::<Result<Vec<_>>>()?;
        let mut mask = 0u64;
        for (i, j) in edges {
            if i >= j || j >= n {
                return Err(Error::config(format!(
                    "edge ({i},{j}) must satisfy i < j < {n}"
                )));
            }
            mask |= 1 << slot_index(n, i, j);
        }
        Ok(Self {
            n_nodes: n as u8,
            ops,
            edges: mask,
        })
    }

    fn from_parts(n_nodes: usize, ops: Vec<u8>, edges: u64) -> Self {
        Self {
            n_nodes: n_nodes as u8,
            ops,
            edges,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes as usize
    }

    pub fn ops(&self) -> &[u8] {
        &self.ops
    }

    /// Op of a node by global index (`None` for input and output).
    pub fn op_of(&self, node: usize) -> Option<usize> {
        if node == 0 || node + 1 >= self.n_nodes() {
            None
        } else {
            Some(self.ops[node - 1] as usize)
        }
    }

    pub fn edge_mask(&self) -> u64 {
        self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < j && j < self.n_nodes() && self.edges & (1 << slot_index(self.n_nodes(), i, j)) != 0
    }

    pub fn num_edges(&self) -> usize {
        self.edges.count_ones() as usize
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_nodes();
        let mut out = Vec::with_capacity(self.num_edges());
        let mut s = 0;
        for i in 0..n {
            for j in i + 1..n {
                if self.edges & (1 << s) != 0 {
                    out.push((i, j));
                }
                s += 1;
            }
        }
        out
    }

    /// Successor bitmask of every node.
    pub fn successors(&self) -> Vec<u16> {
        let n = self.n_nodes();
        let mut succ = vec![0u16; n];
        let mut s = 0;
        for (i, row) in succ.iter_mut().enumerate() {
            for j in i + 1..n {
                if self.edges & (1 << s) != 0 {
                    *row |= 1 << j;
                }
                s += 1;
            }
        }
        succ
    }

    /// Nodes reachable from the input (bit i set for node i).
    fn forward_reach(&self, succ: &[u16]) -> u16 {
        let mut reach = 1u16;
        for (i, &row) in succ.iter().enumerate() {
            if reach & (1 << i) != 0 {
                reach |= row;
            }
        }
        reach
    }

    /// Nodes from which the output is reachable.
    fn backward_reach(&self, succ: &[u16]) -> u16 {
        let n = self.n_nodes();
        let mut reach = 1u16 << (n - 1);
        for i in (0..n - 1).rev() {
            if succ[i] & reach != 0 {
                reach |= 1 << i;
            }
        }
        reach
    }

    /// Whether a directed input→output path exists.
    pub fn is_connected(&self) -> bool {
        let succ = self.successors();
        self.forward_reach(&succ) & (1 << (self.n_nodes() - 1)) != 0
    }

    /// Nodes lying on at least one input→output path.
    pub fn live_nodes(&self) -> u16 {
        let succ = self.successors();
        self.forward_reach(&succ) & self.backward_reach(&succ)
    }

    /// Drops every edge that does not lie on an input→output path. Node ops
    /// are kept, so the node count never changes.
    pub fn pruned(&self) -> Cell {
        let n = self.n_nodes();
        let live = self.live_nodes();
        let mut mask = self.edges;
        let mut s = 0;
        for i in 0..n {
            for j in i + 1..n {
                if live & (1 << i) == 0 || live & (1 << j) == 0 {
                    mask &= !(1 << s);
                }
                s += 1;
            }
        }
        Cell::from_parts(n, self.ops.clone(), mask)
    }

    /// Canonical text form `ops=[a,b,...];edges=[(i,j),...]`.
    pub fn to_text(&self, space: &SpaceParams) -> String {
        let ops: Vec<String> = self
            .ops
            .iter()
            .map(|&o| {
                space
                    .op_names
                    .get(o as usize)
                    .cloned()
                    .unwrap_or_else(|| o.to_string())
            })
            .collect();
        let edges: Vec<String> = self
            .edges()
            .into_iter()
            .map(|(i, j)| format!("({i},{j})"))
            .collect();
        format!("ops=[{}];edges=[{}]", ops.join(","), edges.join(","))
    }

    /// Parses the canonical text form. Ops may be given by name or index.
    pub fn parse(text: &str, space: &SpaceParams) -> Result<Cell> {
        let err = |message: &str| Error::CellSyntax {
            text: text.to_string(),
            message: message.to_string(),
        };
        let trimmed: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let (ops_part, edges_part) = trimmed
            .split_once(';')
            .ok_or_else(|| err("expected `ops=[...];edges=[...]`"))?;
        let ops_body = ops_part
            .strip_prefix("ops=[")
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| err("malformed ops list"))?;
        let edges_body = edges_part
            .strip_prefix("edges=[")
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| err("malformed edge list"))?;

        let mut ops = Vec::new();
        if !ops_body.is_empty() {
            for tok in ops_body.split(',') {
                let idx = match space.op_index(tok) {
                    Some(i) => i,
                    None => tok
                        .parse::<usize>()
                        .map_err(|_| err(&format!("unknown op `{tok}`")))?,
                };
                ops.push(idx);
            }
        }
        if ops.len() != space.n_intermediate() {
            return Err(err(&format!(
                "expected {} ops, found {}",
                space.n_intermediate(),
                ops.len()
            )));
        }

        let mut edges = Vec::new();
        let mut rest = edges_body;
        while !rest.is_empty() {
            let body = rest
                .strip_prefix('(')
                .ok_or_else(|| err("edge must start with `(`"))?;
            let close = body.find(')').ok_or_else(|| err("unterminated edge"))?;
            let (pair, tail) = body.split_at(close);
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| err("edge must be `(i,j)`"))?;
            let i = a.parse::<usize>().map_err(|_| err("bad edge endpoint"))?;
            let j = b.parse::<usize>().map_err(|_| err("bad edge endpoint"))?;
            edges.push((i, j));
            rest = &tail[1..];
            rest = rest.strip_prefix(',').unwrap_or(rest);
        }
        Cell::new(ops, edges).map_err(|e| err(&e.to_string()))
    }
}

/// A broken Cell invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NodeCount { expected: usize, got: usize },
    NoInputOutputPath,
    EdgeBudgetExceeded { edges: usize, max_edges: usize },
    OpOutOfRange { node: usize, op: usize, n_ops: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NodeCount { expected, got } => {
                write!(f, "node count mismatch: expected {expected}, got {got}")
            }
            Violation::NoInputOutputPath => write!(f, "no input→output path"),
            Violation::EdgeBudgetExceeded { edges, max_edges } => {
                write!(f, "edge budget exceeded: {edges} > {max_edges}")
            }
            Violation::OpOutOfRange { node, op, n_ops } => {
                write!(f, "op out of range at node {node}: {op} >= {n_ops}")
            }
        }
    }
}

/// Checks every Cell invariant, returning all violations found.
pub fn validate(cell: &Cell, space: &SpaceParams) -> std::result::Result<(), Vec<Violation>> {
    if cell.n_nodes() != space.n_nodes {
        return Err(vec![Violation::NodeCount {
            expected: space.n_nodes,
            got: cell.n_nodes(),
        }]);
    }
    let mut violations = Vec::new();
    if !cell.is_connected() {
        violations.push(Violation::NoInputOutputPath);
    }
    if cell.num_edges() > space.max_edges {
        violations.push(Violation::EdgeBudgetExceeded {
            edges: cell.num_edges(),
            max_edges: space.max_edges,
        });
    }
    for (k, &op) in cell.ops.iter().enumerate() {
        if op as usize >= space.n_ops {
            violations.push(Violation::OpOutOfRange {
                node: k + 1,
                op: op as usize,
                n_ops: space.n_ops,
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

pub fn is_valid(cell: &Cell, space: &SpaceParams) -> bool {
    validate(cell, space).is_ok()
}

fn random_ops<R: Rng + ?Sized>(space: &SpaceParams, rng: &mut R) -> Vec<u8> {
    (0..space.n_intermediate())
        .map(|_| rng.random_range(0..space.n_ops) as u8)
        .collect()
}

fn slot_mask(slots: usize) -> u64 {
    if slots == 64 {
        u64::MAX
    } else {
        (1u64 << slots) - 1
    }
}

/// One unconstrained draw: every edge slot present with probability 1/2,
/// ops uniform. No pruning or rejection.
pub fn draw_unconstrained<R: Rng + ?Sized>(space: &SpaceParams, rng: &mut R) -> Cell {
    let edges = rng.random::<u64>() & slot_mask(space.n_edge_slots());
    Cell::from_parts(space.n_nodes, random_ops(space, rng), edges)
}

/// NASBench-style rejection sampler.
///
/// Each draw includes every edge with probability 1/2. Edges off every
/// input→output path are pruned, and the draw is accepted when a path exists
/// and the pruned edge count fits the budget. The returned cell is the pruned
/// one.
pub fn random_spec<R: Rng + ?Sized>(space: &SpaceParams, rng: &mut R) -> Result<Cell> {
    for _ in 0..REJECTION_CAP {
        let raw = draw_unconstrained(space, rng);
        if !raw.is_connected() {
            continue;
        }
        let cell = raw.pruned();
        if cell.num_edges() <= space.max_edges {
            return Ok(cell);
        }
    }
    Err(Error::SamplerExhausted {
        attempts: REJECTION_CAP,
    })
}

/// One pre-rejection draw of `G_{n,k,r}` (steps 1-3 of the model).
pub fn draw_gnkr_unconditioned<R: Rng + ?Sized>(p: &RandomGraphParams, rng: &mut R) -> Cell {
    let prob = p.edge_probability();
    let slots = p.n * (p.n - 1) / 2;
    let mut edges = 0u64;
    for s in 0..slots {
        if rng.random::<f64>() < prob {
            edges |= 1 << s;
        }
    }
    let ops = (0..p.n - 2).map(|_| rng.random_range(0..p.r) as u8).collect();
    Cell::from_parts(p.n, ops, edges)
}

/// Samples `G_{n,k,r}`: independent edges with probability `2k/(n(n-1))`
/// (clipped to 1), redrawn until an input→output path exists.
pub fn sample_gnkr<R: Rng + ?Sized>(p: &RandomGraphParams, rng: &mut R) -> Result<Cell> {
    if p.model != GraphModel::Gnkr {
        return Err(Error::config("sample_gnkr requires the Gnkr model"));
    }
    if p.n < 2 || p.n > MAX_NODES || p.r == 0 || p.k == 0 {
        return Err(Error::config(format!("invalid G(n,k,r) parameters {p:?}")));
    }
    for _ in 0..REJECTION_CAP {
        let cell = draw_gnkr_unconditioned(p, rng);
        if cell.is_connected() {
            return Ok(cell);
        }
    }
    Err(Error::SamplerExhausted {
        attempts: REJECTION_CAP,
    })
}

/// Mutates a cell by flipping each edge slot and changing each op
/// independently with probability `rate / (slots + ops)`, pruning, and
/// redrawing until the result is valid. `rate == 0` returns the input.
///
/// If no valid mutant turns up within a bounded number of attempts (only
/// possible in degenerate spaces such as the single-edge two-node space), the
/// input is returned unchanged.
pub fn mutate<R: Rng + ?Sized>(cell: &Cell, space: &SpaceParams, rate: f64, rng: &mut R) -> Cell {
    if rate <= 0.0 {
        return cell.clone();
    }
    let slots = space.n_edge_slots();
    let entities = slots + space.n_intermediate();
    let p = (rate / entities as f64).min(1.0);
    for _ in 0..MUTATION_ATTEMPTS {
        let mut edges = cell.edges;
        for s in 0..slots {
            if rng.random::<f64>() < p {
                edges ^= 1 << s;
            }
        }
        let mut ops = cell.ops.clone();
        for op in ops.iter_mut() {
            if rng.random::<f64>() < p && space.n_ops > 1 {
                // uniform over the other ops
                let shift = rng.random_range(1..space.n_ops);
                *op = ((*op as usize + shift) % space.n_ops) as u8;
            }
        }
        let candidate = Cell::from_parts(space.n_nodes, ops, edges);
        if !candidate.is_connected() {
            continue;
        }
        let candidate = candidate.pruned();
        if candidate.num_edges() <= space.max_edges {
            return candidate;
        }
    }
    cell.clone()
}

/// Isomorphism-invariant form of a cell: the lexicographically smallest
/// (adjacency, ops) pair over all relabelings of the intermediate nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalForm {
    n_nodes: u8,
    adjacency: u128,
    ops: [u8; MAX_NODES - 2],
}

impl CanonicalForm {
    /// Stable 64-bit FNV-1a digest of the form.
    pub fn hash64(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        };
        feed(self.n_nodes);
        for b in self.adjacency.to_le_bytes() {
            feed(b);
        }
        for &b in &self.ops {
            feed(b);
        }
        h
    }
}

/// Computes the canonical form by brute force over all `(n-2)!`
/// permutations of the intermediate nodes.
pub fn canonical_form(cell: &Cell) -> CanonicalForm {
    let n = cell.n_nodes();
    let m = n - 2;
    let edges = cell.edges();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best: Option<CanonicalForm> = None;

    let mut consider = |perm: &[usize]| {
        // intermediate node v (1-based) maps to 1 + perm[v - 1]
        let relabel = |v: usize| {
            if v == 0 || v == n - 1 {
                v
            } else {
                1 + perm[v - 1]
            }
        };
        let mut adjacency = 0u128;
        for &(i, j) in &edges {
            adjacency |= 1u128 << (relabel(i) * n + relabel(j));
        }
        let mut ops = [0u8; MAX_NODES - 2];
        for (v, &op) in cell.ops.iter().enumerate() {
            ops[perm[v]] = op;
        }
        let form = CanonicalForm {
            n_nodes: n as u8,
            adjacency,
            ops,
        };
        if best.is_none_or(|b| form < b) {
            best = Some(form);
        }
    };

    // Heap's algorithm
    let mut c = vec![0usize; m];
    consider(&perm);
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            consider(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best.expect("at least the identity permutation")
}

pub fn canonical_hash(cell: &Cell) -> u64 {
    canonical_form(cell).hash64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn single_edge(space: &SpaceParams) -> Cell {
        Cell::new(vec![0; space.n_intermediate()], [(0, space.n_nodes - 1)]).unwrap()
    }

    #[test]
    fn params_invariants() {
        assert!(SpaceParams::new(1, 3, 1).is_err());
        assert!(SpaceParams::new(7, 0, 9).is_err());
        assert!(SpaceParams::new(7, 3, 0).is_err());
        assert!(SpaceParams::new(7, 3, 22).is_err());
        assert!(SpaceParams::new(7, 3, 21).is_ok());
        assert!(SpaceParams::new(12, 3, 9).is_err());
        assert_eq!(SpaceParams::default(), SpaceParams::new(7, 3, 9).unwrap());
    }

    #[test]
    fn slot_order_is_lexicographic() {
        let n = 5;
        let mut s = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(slot_index(n, i, j), s);
                s += 1;
            }
        }
    }

    #[test]
    fn two_node_space_has_one_cell() {
        let space = SpaceParams::new(2, 3, 1).unwrap();
        let mut rng = seeded(3);
        for _ in 0..20 {
            let c = random_spec(&space, &mut rng).unwrap();
            assert_eq!(c.edges(), vec![(0, 1)]);
            assert!(c.ops().is_empty());
            assert_eq!(mutate(&c, &space, 1.0, &mut rng), c);
        }
    }

    #[test]
    fn random_spec_postconditions() {
        let space = SpaceParams::default();
        let mut rng = seeded(11);
        for _ in 0..2000 {
            let c = random_spec(&space, &mut rng).unwrap();
            assert!(is_valid(&c, &space));
            assert_eq!(c.pruned(), c);
        }
    }

    #[test]
    fn gnkr_forced_edge() {
        let p = RandomGraphParams::gnkr(2, 1, 3);
        assert_eq!(p.edge_probability(), 1.0);
        let c = sample_gnkr(&p, &mut seeded(0)).unwrap();
        assert_eq!(c.edges(), vec![(0, 1)]);
        assert!(sample_gnkr(&RandomGraphParams::random_spec(7, 9, 3), &mut seeded(0)).is_err());
    }

    #[test]
    fn mutate_rate_zero_is_identity() {
        let space = SpaceParams::default();
        let mut rng = seeded(5);
        for _ in 0..100 {
            let c = random_spec(&space, &mut rng).unwrap();
            assert_eq!(mutate(&c, &space, 0.0, &mut rng), c);
        }
    }

    #[test]
    fn validate_reports_violations() {
        let space = SpaceParams::default();
        assert_eq!(validate(&single_edge(&space), &space), Ok(()));

        let empty = Cell::new(vec![0; 5], []).unwrap();
        let v = validate(&empty, &space).unwrap_err();
        assert_eq!(v, vec![Violation::NoInputOutputPath]);
        assert_eq!(v[0].to_string(), "no input→output path");

        // ten edges, all on input→output paths
        let dense = Cell::new(
            vec![0; 5],
            [(0, 1), (1, 6), (0, 2), (2, 6), (0, 3), (3, 6), (0, 4), (4, 6), (0, 5), (5, 6)],
        )
        .unwrap();
        let v = validate(&dense, &space).unwrap_err();
        assert_eq!(
            v,
            vec![Violation::EdgeBudgetExceeded {
                edges: 10,
                max_edges: 9
            }]
        );
        assert!(v[0].to_string().starts_with("edge budget exceeded"));

        let bad_op = Cell::new(vec![0, 0, 7, 0, 0], [(0, 6)]).unwrap();
        assert!(matches!(
            validate(&bad_op, &space).unwrap_err()[0],
            Violation::OpOutOfRange { node: 3, op: 7, .. }
        ));
    }

    #[test]
    fn text_roundtrip_and_errors() {
        let space = SpaceParams::default();
        let c = Cell::new(vec![1, 2, 0, 0, 1], [(0, 1), (1, 6), (0, 6), (2, 5)]).unwrap();
        let text = c.to_text(&space);
        assert_eq!(
            text,
            "ops=[conv3x3,maxpool3x3,conv1x1,conv1x1,conv3x3];edges=[(0,1),(0,6),(1,6),(2,5)]"
        );
        assert_eq!(Cell::parse(&text, &space).unwrap(), c);
        assert_eq!(
            Cell::parse("ops=[1,2,0,0,1]; edges=[(0,1),(0,6),(1,6),(2,5)]", &space).unwrap(),
            c
        );
        assert!(Cell::parse("ops=[1,2];edges=[]", &space).is_err());
        assert!(Cell::parse("ops=[a,b,c,d,e];edges=[]", &space).is_err());
        assert!(Cell::parse("ops=[0,0,0,0,0];edges=[(3,1)]", &space).is_err());
        assert!(Cell::parse("garbage", &space).is_err());
        let two = SpaceParams::new(2, 3, 1).unwrap();
        let c2 = Cell::new(vec![], [(0, 1)]).unwrap();
        assert_eq!(c2.to_text(&two), "ops=[];edges=[(0,1)]");
        assert_eq!(Cell::parse("ops=[];edges=[(0,1)]", &two).unwrap(), c2);
    }

    #[test]
    fn pruning_drops_dangling_edges() {
        // 0->1->3 is the only path; (0,2) dangles.
        let c = Cell::new(vec![0, 1], [(0, 1), (1, 3), (0, 2)]).unwrap();
        assert_eq!(c.pruned().edges(), vec![(0, 1), (1, 3)]);
        assert_eq!(c.live_nodes(), 0b1011);
    }

    #[test]
    fn explicit_isomorphism() {
        let a = Cell::new(vec![0, 1], [(0, 1), (1, 3), (0, 2), (2, 3)]).unwrap();
        let b = Cell::new(vec![1, 0], [(0, 2), (2, 3), (0, 1), (1, 3)]).unwrap();
        assert_ne!(a, b);
        assert_eq!(canonical_hash(&a), canonical_hash(&b));
        assert_eq!(canonical_hash(&a), canonical_hash(&a.clone()));
        let c = Cell::new(vec![0, 0], [(0, 1), (1, 3), (0, 2), (2, 3)]).unwrap();
        assert_ne!(canonical_hash(&a), canonical_hash(&c));
    }
}
