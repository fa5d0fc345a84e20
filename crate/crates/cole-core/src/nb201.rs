//! NAS-Bench-201 cell genotypes.
//!
//! A cell is a complete DAG over nodes 0..=3 with one operation on each of
//! the 6 edges. The canonical string form lists stages separated by `+`,
//! where stage k (1-indexed) carries the edges into node k as
//! `|<op>~<src>|` runs, sources ascending from 0.

use crate::{Error, Result};
use rand::Rng;

/// Operations available on a cell edge, in canonical order.
///
/// The declared order is the digit order used by [`enumerate_space`] and by
/// the path-encoding label blocks.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum OpKind {
    /// Severs the edge entirely.
    Zeroize,
    /// Identity connection.
    SkipConnect,
    /// ReLU-Conv(1x1)-BatchNorm block.
    NorConv1x1,
    /// ReLU-Conv(3x3)-BatchNorm block.
    NorConv3x3,
    /// 3x3 average pooling, stride 1.
    AvgPool3x3,
}

impl OpKind {
    /// All variants in declared order.
    pub const ALL: [OpKind; 5] = [
        OpKind::Zeroize,
        OpKind::SkipConnect,
        OpKind::NorConv1x1,
        OpKind::NorConv3x3,
        OpKind::AvgPool3x3,
    ];

    /// The token used in architecture strings.
    pub fn token(self) -> &'static str {
        match self {
            OpKind::Zeroize => "none",
            OpKind::SkipConnect => "skip_connect",
            OpKind::NorConv1x1 => "nor_conv_1x1",
            OpKind::NorConv3x3 => "nor_conv_3x3",
            OpKind::AvgPool3x3 => "avg_pool_3x3",
        }
    }

    /// Inverse of [`OpKind::token`].
    pub fn from_token(token: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|op| op.token() == token)
    }

    /// Position in the declared order, 0..5.
    pub fn index(self) -> usize {
        self as usize
    }
}

/// The cell edges in canonical (target, then source) order.
pub const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)];

/// Number of distinct genotypes: 5^6.
pub const SPACE_SIZE: usize = 15_625;

/// A cell genotype: one operation per DAG edge.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct CellGenotype {
    ops: [OpKind; 6],
}

impl CellGenotype {
    /// Builds a genotype from operations listed in [`EDGES`] order.
    pub fn new(ops: [OpKind; 6]) -> Self {
        CellGenotype { ops }
    }

    /// The operation on edge (src, dst). Panics if (src, dst) is not a cell
    /// edge; that is a caller bug, not an input condition.
    pub fn op(&self, src: usize, dst: usize) -> OpKind {
        let slot = EDGES
            .iter()
            .position(|&e| e == (src, dst))
            .unwrap_or_else(|| panic!("({src}, {dst}) is not a cell edge"));
        self.ops[slot]
    }

    /// Edges with their operations, in [`EDGES`] order.
    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), OpKind)> + '_ {
        EDGES.iter().copied().zip(self.ops.iter().copied())
    }

    /// Position of this genotype in the canonical enumeration.
    pub fn space_index(&self) -> usize {
        self.ops.iter().fold(0, |acc, op| acc * 5 + op.index())
    }

    /// Inverse of [`CellGenotype::space_index`]. Panics when `index` is not
    /// below [`SPACE_SIZE`].
    pub fn from_space_index(index: usize) -> Self {
        assert!(index < SPACE_SIZE, "space index {index} out of range");
        let mut ops = [OpKind::Zeroize; 6];
        let mut rem = index;
        for slot in (0..6).rev() {
            ops[slot] = OpKind::ALL[rem % 5];
            rem /= 5;
        }
        CellGenotype { ops }
    }
}

impl std::fmt::Display for CellGenotype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&format_arch_string(self))
    }
}

impl std::str::FromStr for CellGenotype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_arch_string(s)
    }
}

/// Parses the canonical pipe-delimited architecture string.
///
/// Whitespace anywhere in `s` is ignored so wrapped strings parse too.
pub fn parse_arch_string(s: &str) -> Result<CellGenotype> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(Error::Parse("empty architecture string".into()));
    }
    let stages: Vec<&str> = compact.split('+').collect();
    if stages.len() != 3 {
        return Err(Error::Parse(format!(
            "expected 3 '+'-separated stages, found {} in '{compact}'",
            stages.len()
        )));
    }
    let mut ops = [OpKind::Zeroize; 6];
    let mut slot = 0;
    for (stage_idx, stage) in stages.iter().enumerate() {
        let target = stage_idx + 1;
        let inner = stage
            .strip_prefix('|')
            .and_then(|t| t.strip_suffix('|'))
            .ok_or_else(|| Error::Parse(format!("stage '{stage}' is not wrapped in '|'")))?;
        let segments: Vec<&str> = inner.split('|').collect();
        if segments.len() != target {
            return Err(Error::Parse(format!(
                "stage '{stage}' lists {} edges, expected {target}",
                segments.len()
            )));
        }
        for (expected_src, segment) in segments.iter().enumerate() {
            let (token, src_text) = segment
                .split_once('~')
                .ok_or_else(|| Error::Parse(format!("edge '{segment}' is missing '~'")))?;
            let op = OpKind::from_token(token)
                .ok_or_else(|| Error::Parse(format!("unknown op '{token}' in edge '{segment}'")))?;
            let src: usize = src_text
                .parse()
                .map_err(|_| Error::Parse(format!("bad source index in edge '{segment}'")))?;
            if src >= target {
                return Err(Error::Parse(format!(
                    "edge '{segment}': source {src} is not below target {target}"
                )));
            }
            if src != expected_src {
                return Err(Error::Parse(format!(
                    "edge '{segment}': expected source {expected_src} at this position"
                )));
            }
            ops[slot] = op;
            slot += 1;
        }
    }
    Ok(CellGenotype { ops })
}

/// Serializes a genotype to the canonical pipe-delimited string.
pub fn format_arch_string(g: &CellGenotype) -> String {
    let mut out = String::new();
    let mut slot = 0;
    for target in 1..=3usize {
        if target > 1 {
            out.push('+');
        }
        out.push('|');
        for src in 0..target {
            out.push_str(g.ops[slot].token());
            out.push('~');
            out.push_str(&src.to_string());
            out.push('|');
            slot += 1;
        }
    }
    out
}

/// Yields all 5^6 genotypes exactly once.
///
/// Order is lexicographic over the [`EDGES`] sequence with ops in declared
/// order, so the first element is the all-Zeroize genotype and edge (0, 1)
/// varies slowest.
pub fn enumerate_space() -> impl Iterator<Item = CellGenotype> {
    (0..SPACE_SIZE).map(CellGenotype::from_space_index)
}

/// Resamples exactly one edge to a uniformly drawn different operation.
pub fn mutate<R: Rng + ?Sized>(g: &CellGenotype, rng: &mut R) -> CellGenotype {
    let edge = rng.gen_range(0..6);
    let current = g.ops[edge];
    let mut pick = rng.gen_range(0..4);
    if pick >= current.index() {
        pick += 1;
    }
    let mut ops = g.ops;
    ops[edge] = OpKind::ALL[pick];
    CellGenotype { ops }
}

/// Total bits in a path encoding: 5 + 5^2 + 5^2 + 5^3 over the four node
/// paths [0,3], [0,1,3], [0,2,3], [0,1,2,3].
pub const PATH_BITS: usize = 180;

/// The four input-to-output node paths of the cell DAG, in block order.
pub const NODE_PATHS: [&[usize]; 4] = [&[0, 3], &[0, 1, 3], &[0, 2, 3], &[0, 1, 2, 3]];

/// BANANAS-style structural encoding: one bit per op-labeled node path.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PathEncoding {
    bits: [u8; PATH_BITS],
}

impl PathEncoding {
    /// The raw bit vector.
    pub fn bits(&self) -> &[u8; PATH_BITS] {
        &self.bits
    }

    /// Number of set bits: the count of live op-labeled paths.
    pub fn popcount(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

/// Encodes a genotype as path-label indicator bits.
///
/// Each node path owns a block of 5^(edge count) bits, one per op-label
/// sequence with the first edge as the most significant base-5 digit. A bit
/// is 1 iff every edge on the path is non-Zeroize and the ops match the
/// bit's label, so labels containing Zeroize are always 0.
pub fn path_encode(g: &CellGenotype) -> PathEncoding {
    let mut bits = [0u8; PATH_BITS];
    let mut offset = 0;
    for path in NODE_PATHS {
        let mut label = 0usize;
        let mut severed = false;
        for pair in path.windows(2) {
            let op = g.op(pair[0], pair[1]);
            severed |= op == OpKind::Zeroize;
            label = label * 5 + op.index();
        }
        if !severed {
            bits[offset + label] = 1;
        }
        offset += 5usize.pow((path.len() - 1) as u32);
    }
    PathEncoding { bits }
}
