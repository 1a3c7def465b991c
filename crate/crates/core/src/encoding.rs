//! Feature encodings of cells: the path encoding (full or truncated), the
//! binary adjacency encoding and the continuous adjacency encoding.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::space::{Cell, SpaceParams};

/// Default cap on the size of the path universe.
pub const DEFAULT_PATH_CAP: u128 = 10_000_000;

/// The universe of labeled input→output paths of a space, ordered by number
/// of intermediate ops and then lexicographically by op index.
///
/// Sequences are not materialized; an op sequence `s` of length `L` lives at
/// `offset(L) + Σ s[i]·r^(L-1-i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathTable {
    space: SpaceParams,
    /// `offsets[L]` is the index of the first sequence of length `L`;
    /// the final entry is the table size.
    offsets: Vec<usize>,
}

impl PathTable {
    pub fn new(space: &SpaceParams) -> Result<Self> {
        Self::with_cap(space, DEFAULT_PATH_CAP)
    }

    pub fn with_cap(space: &SpaceParams, cap: u128) -> Result<Self> {
        space.check()?;
        let r = space.n_ops as u128;
        let mut offsets = Vec::with_capacity(space.n_intermediate() + 2);
        let mut total: u128 = 0;
        let mut block: u128 = 1;
        for _ in 0..=space.n_intermediate() {
            offsets.push(total as usize);
            total = total.checked_add(block).ok_or(Error::Overflow("path table size"))?;
            if total > cap {
                return Err(Error::PathTableTooLarge { size: total, cap });
            }
            block = block.saturating_mul(r);
        }
        offsets.push(total as usize);
        Ok(Self {
            space: space.clone(),
            offsets,
        })
    }

    pub fn space(&self) -> &SpaceParams {
        &self.space
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Longest op sequence in the table.
    pub fn max_ops(&self) -> usize {
        self.offsets.len() - 2
    }

    /// Index range of sequences with exactly `n_ops` intermediate ops.
    pub fn range_of_length(&self, n_ops: usize) -> std::ops::Range<usize> {
        self.offsets[n_ops]..self.offsets[n_ops + 1]
    }

    pub fn index_of(&self, seq: &[u8]) -> Option<usize> {
        if seq.len() > self.max_ops() {
            return None;
        }
        let r = self.space.n_ops;
        let mut code = 0usize;
        for &op in seq {
            if op as usize >= r {
                return None;
            }
            code = code * r + op as usize;
        }
        Some(self.offsets[seq.len()] + code)
    }

    pub fn sequence(&self, index: usize) -> Option<Vec<u8>> {
        if index >= self.len() {
            return None;
        }
        let len = self.offsets.partition_point(|&o| o <= index) - 1;
        let mut code = index - self.offsets[len];
        let r = self.space.n_ops;
        let mut seq = vec![0u8; len];
        for slot in seq.iter_mut().rev() {
            *slot = (code % r) as u8;
            code /= r;
        }
        Some(seq)
    }

    /// All sequences in table order.
    pub fn iter(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        (0..self.len()).map(|i| self.sequence(i).unwrap())
    }

    /// Table indices of the op sequences realized by input→output paths of
    /// `cell`, sorted and deduplicated.
    pub fn path_indices(&self, cell: &Cell) -> Vec<usize> {
        let r = self.space.n_ops as u64;
        let n = cell.n_nodes();
        let succ = cell.successors();
        // (number of ops, big-endian code) of sequences reaching each node
        let mut reach: Vec<Vec<(u8, u64)>> = vec![Vec::new(); n];
        reach[0].push((0, 0));
        for i in 0..n - 1 {
            if reach[i].is_empty() || succ[i] == 0 {
                continue;
            }
            let mut seqs = std::mem::take(&mut reach[i]);
            seqs.sort_unstable();
            seqs.dedup();
            let outgoing: Vec<(u8, u64)> = match cell.op_of(i) {
                None => seqs.clone(),
                Some(op) => seqs
                    .iter()
                    .map(|&(len, code)| (len + 1, code * r + op as u64))
                    .collect(),
            };
            for j in i + 1..n {
                if succ[i] & (1 << j) != 0 {
                    reach[j].extend_from_slice(&outgoing);
                }
            }
            reach[i] = seqs;
        }
        let mut out: Vec<usize> = reach[n - 1]
            .iter()
            .map(|&(len, code)| self.offsets[len as usize] + code as usize)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Binary path encoding, optionally truncated to the first `truncate_len`
/// table entries.
pub fn encode_path(cell: &Cell, table: &PathTable, truncate_len: Option<usize>) -> Vec<u8> {
    let len = truncate_len.map_or(table.len(), |t| t.min(table.len()));
    let mut bits = vec![0u8; len];
    for idx in table.path_indices(cell) {
        if idx < len {
            bits[idx] = 1;
        }
    }
    bits
}

pub fn adjacency_len(space: &SpaceParams) -> usize {
    space.n_edge_slots() + space.n_intermediate() * space.n_ops
}

pub fn continuous_adjacency_len(space: &SpaceParams) -> usize {
    space.n_edge_slots() + space.n_intermediate()
}

/// Upper-triangular edge bits (row-major) followed by one-hot ops.
pub fn encode_adjacency(cell: &Cell, space: &SpaceParams) -> Vec<u8> {
    let slots = space.n_edge_slots();
    let mut v = vec![0u8; adjacency_len(space)];
    let mask = cell.edge_mask();
    for (s, bit) in v.iter_mut().take(slots).enumerate() {
        *bit = ((mask >> s) & 1) as u8;
    }
    for (k, &op) in cell.ops().iter().enumerate() {
        v[slots + k * space.n_ops + op as usize] = 1;
    }
    v
}

/// Edge bits as reals followed by one scalar `(op + 1) / r` per
/// intermediate node.
pub fn encode_continuous_adjacency(cell: &Cell, space: &SpaceParams) -> Vec<f64> {
    let slots = space.n_edge_slots();
    let mask = cell.edge_mask();
    let mut v = Vec::with_capacity(continuous_adjacency_len(space));
    v.extend((0..slots).map(|s| ((mask >> s) & 1) as f64));
    v.extend(
        cell.ops()
            .iter()
            .map(|&op| (op as f64 + 1.0) / space.n_ops as f64),
    );
    v
}

/// Inverse of [`encode_continuous_adjacency`]: thresholds edges at 0.5 and
/// rounds op scalars back to indices.
pub fn decode_continuous_adjacency(v: &[f64], space: &SpaceParams) -> Result<Cell> {
    let expected = continuous_adjacency_len(space);
    if v.len() != expected {
        return Err(Error::Dimension {
            expected,
            got: v.len(),
        });
    }
    let n = space.n_nodes;
    let mut edges = Vec::new();
    let mut s = 0;
    for i in 0..n {
        for j in i + 1..n {
            if v[s] >= 0.5 {
                edges.push((i, j));
            }
            s += 1;
        }
    }
    let r = space.n_ops as f64;
    let ops = v[s..]
        .iter()
        .map(|&x| ((x * r).round() as i64 - 1).clamp(0, space.n_ops as i64 - 1) as usize)
        .collect();
    Cell::new(ops, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingKind {
    Path,
    Adjacency,
    ContinuousAdjacency,
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingKind::Path => "path",
            EncodingKind::Adjacency => "adjacency",
            EncodingKind::ContinuousAdjacency => "continuous-adjacency",
        })
    }
}

impl FromStr for EncodingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(EncodingKind::Path),
            "adjacency" | "adj" => Ok(EncodingKind::Adjacency),
            "continuous-adjacency" | "continuous_adjacency" | "cont-adj" => {
                Ok(EncodingKind::ContinuousAdjacency)
            }
            other => Err(Error::config(format!("unknown encoding `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodingSpec {
    pub kind: EncodingKind,
    /// Path encoding only.
    pub truncate_len: Option<usize>,
}

impl Default for EncodingSpec {
    fn default() -> Self {
        Self::path()
    }
}

impl EncodingSpec {
    pub fn path() -> Self {
        Self {
            kind: EncodingKind::Path,
            truncate_len: None,
        }
    }

    pub fn truncated_path(len: usize) -> Self {
        Self {
            kind: EncodingKind::Path,
            truncate_len: Some(len),
        }
    }

    pub fn adjacency() -> Self {
        Self {
            kind: EncodingKind::Adjacency,
            truncate_len: None,
        }
    }

    pub fn continuous_adjacency() -> Self {
        Self {
            kind: EncodingKind::ContinuousAdjacency,
            truncate_len: None,
        }
    }
}

/// A ready-to-use encoder for one space.
#[derive(Debug, Clone)]
pub struct Encoder {
    spec: EncodingSpec,
    space: SpaceParams,
    table: Option<PathTable>,
}

impl Encoder {
    pub fn new(spec: EncodingSpec, space: &SpaceParams) -> Result<Self> {
        let table = match spec.kind {
            EncodingKind::Path => {
                let table = PathTable::new(space)?;
                if let Some(t) = spec.truncate_len {
                    if t == 0 || t > table.len() {
                        return Err(Error::config(format!(
                            "truncate_len {t} outside 1..={}",
                            table.len()
                        )));
                    }
                }
                Some(table)
            }
            _ => {
                if spec.truncate_len.is_some() {
                    return Err(Error::config("truncate_len applies to the path encoding only"));
                }
                None
            }
        };
        Ok(Self {
            spec,
            space: space.clone(),
            table,
        })
    }

    pub fn spec(&self) -> EncodingSpec {
        self.spec
    }

    pub fn space(&self) -> &SpaceParams {
        &self.space
    }

    pub fn table(&self) -> Option<&PathTable> {
        self.table.as_ref()
    }

    pub fn dim(&self) -> usize {
        match self.spec.kind {
            EncodingKind::Path => {
                let full = self.table.as_ref().unwrap().len();
                self.spec.truncate_len.unwrap_or(full)
            }
            EncodingKind::Adjacency => adjacency_len(&self.space),
            EncodingKind::ContinuousAdjacency => continuous_adjacency_len(&self.space),
        }
    }

    pub fn encode(&self, cell: &Cell) -> Vec<f64> {
        match self.spec.kind {
            EncodingKind::Path => {
                encode_path(cell, self.table.as_ref().unwrap(), self.spec.truncate_len)
                    .into_iter()
                    .map(f64::from)
                    .collect()
            }
            EncodingKind::Adjacency => encode_adjacency(cell, &self.space)
                .into_iter()
                .map(f64::from)
                .collect(),
            EncodingKind::ContinuousAdjacency => encode_continuous_adjacency(cell, &self.space),
        }
    }
}

/// Comma-separated row of feature values.
pub fn to_csv_row(features: &[f64]) -> String {
    features
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sizes() {
        let t = PathTable::new(&SpaceParams::default()).unwrap();
        assert_eq!(t.len(), 364);
        let counts: Vec<usize> = (0..=5).map(|l| t.range_of_length(l).len()).collect();
        assert_eq!(counts, vec![1, 3, 9, 27, 81, 243]);
        assert_eq!(t.range_of_length(3).end, 40);
        let two = PathTable::new(&SpaceParams::new(2, 3, 1).unwrap()).unwrap();
        assert_eq!(two.len(), 1);
        assert_eq!(two.sequence(0), Some(vec![]));
    }

    #[test]
    fn table_order_and_indexing() {
        let t = PathTable::new(&SpaceParams::default()).unwrap();
        let all: Vec<Vec<u8>> = t.iter().collect();
        for w in all.windows(2) {
            assert!((w[0].len(), &w[0]) < (w[1].len(), &w[1]));
        }
        for (i, s) in all.iter().enumerate() {
            assert_eq!(t.index_of(s), Some(i));
        }
        assert_eq!(t.sequence(364), None);
        assert_eq!(t.index_of(&[3]), None);
    }

    #[test]
    fn table_cap() {
        let space = SpaceParams::new(11, 50, 9).unwrap();
        assert!(matches!(
            PathTable::new(&space),
            Err(Error::PathTableTooLarge { .. })
        ));
        assert!(PathTable::with_cap(&SpaceParams::default(), 100).is_err());
    }

    #[test]
    fn single_edge_path_vector() {
        let space = SpaceParams::default();
        let t = PathTable::new(&space).unwrap();
        let c = Cell::new(vec![2; 5], [(0, 6)]).unwrap();
        let v = encode_path(&c, &t, None);
        assert_eq!(v.len(), 364);
        assert_eq!(v[0], 1);
        assert_eq!(v.iter().map(|&b| b as usize).sum::<usize>(), 1);
    }

    #[test]
    fn single_op_path() {
        let space = SpaceParams::default();
        let t = PathTable::new(&space).unwrap();
        let conv3 = space.op_index("conv3x3").unwrap();
        let c = Cell::new(vec![conv3, 0, 0, 0, 0], [(0, 1), (1, 6)]).unwrap();
        let v = encode_path(&c, &t, None);
        assert_eq!(v[0], 0);
        assert_eq!(v[t.index_of(&[conv3 as u8]).unwrap()], 1);
        assert_eq!(v.iter().filter(|&&b| b == 1).count(), 1);
    }

    #[test]
    fn diamond_paths() {
        // 0->1->2->3 and 0->2->3 with ops [a, b] give sequences (a,b) and (b)
        let space = SpaceParams::new(4, 2, 6).unwrap();
        let t = PathTable::new(&space).unwrap();
        let c = Cell::new(vec![0, 1], [(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap();
        let idx = t.path_indices(&c);
        assert_eq!(idx, vec![t.index_of(&[1]).unwrap(), t.index_of(&[0, 1]).unwrap()]);
    }

    #[test]
    fn adjacency_layout() {
        let space = SpaceParams::default();
        assert_eq!(adjacency_len(&space), 36);
        assert_eq!(continuous_adjacency_len(&space), 26);
        let c = Cell::new(vec![0, 1, 2, 0, 1], [(0, 6)]).unwrap();
        let v = encode_adjacency(&c, &space);
        assert_eq!(v[..21].iter().filter(|&&b| b == 1).count(), 1);
        assert_eq!(v[5], 1); // slot of (0,6)
        assert_eq!(&v[21..], &[1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn continuous_values() {
        let space = SpaceParams::default();
        let c = Cell::new(vec![0; 5], [(0, 6)]).unwrap();
        let v = encode_continuous_adjacency(&c, &space);
        assert_eq!(v.len(), 26);
        assert_eq!(v[5], 1.0);
        for &x in &v[21..] {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let c = Cell::new(vec![2, 0, 0, 0, 0], [(0, 6)]).unwrap();
        assert_eq!(encode_continuous_adjacency(&c, &space)[21], 1.0);
        assert_eq!(decode_continuous_adjacency(&v, &space).unwrap().ops(), &[0; 5]);
        assert!(decode_continuous_adjacency(&v[..3], &space).is_err());
    }

    #[test]
    fn isomorphic_cells_differ_under_adjacency() {
        let space = SpaceParams::new(4, 2, 6).unwrap();
        let a = Cell::new(vec![0, 1], [(0, 1), (1, 3)]).unwrap();
        let b = Cell::new(vec![1, 0], [(0, 2), (2, 3)]).unwrap();
        assert_ne!(encode_adjacency(&a, &space), encode_adjacency(&b, &space));
        let t = PathTable::new(&space).unwrap();
        assert_eq!(encode_path(&a, &t, None), encode_path(&b, &t, None));
    }

    #[test]
    fn encoder_truncation_validation() {
        let space = SpaceParams::default();
        assert!(Encoder::new(EncodingSpec::truncated_path(365), &space).is_err());
        assert!(Encoder::new(EncodingSpec::truncated_path(0), &space).is_err());
        let e = Encoder::new(EncodingSpec::truncated_path(40), &space).unwrap();
        assert_eq!(e.dim(), 40);
        let bad = EncodingSpec {
            kind: EncodingKind::Adjacency,
            truncate_len: Some(3),
        };
        assert!(Encoder::new(bad, &space).is_err());
        assert_eq!("cont-adj".parse::<EncodingKind>().unwrap(), EncodingKind::ContinuousAdjacency);
    }
}
