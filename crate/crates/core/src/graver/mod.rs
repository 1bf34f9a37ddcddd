//! Integer kernel vectors, the conformal order, partial Graver bases from
//! differences of feasible points, and an exact completion oracle for
//! small matrices.

mod completion;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Deref;

use crate::error::{Error, Result};

pub use completion::{integer_kernel_basis, pottier_graver, COMPLETION_COLUMN_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntVector(Vec<i64>);

impl IntVector {
    pub fn new(entries: Vec<i64>) -> Self {
        Self(entries)
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }

    /// The sign representative whose first nonzero entry is positive.
    pub fn canonical(&self) -> Self {
        match self.0.iter().find(|&&v| v != 0) {
            Some(&v) if v < 0 => self.negated(),
            _ => self.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Indices of nonzero entries.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i)
    }
}

impl Deref for IntVector {
    type Target = [i64];

    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for IntVector {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

/// `x ⊑ y`: same orthant and `|x_i| <= |y_i|` everywhere.
pub fn is_conformal(x: &[i64], y: &[i64]) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(conformal(x, y))
}

pub(crate) fn conformal(x: &[i64], y: &[i64]) -> bool {
    x.iter().zip(y).all(|(&a, &b)| a * b >= 0 && a.abs() <= b.abs())
}

/// Scan order for augmentation: ascending 1-norm, then lexicographically
/// descending.
pub fn scan_order(a: &IntVector, b: &IntVector) -> Ordering {
    a.l1_norm().cmp(&b.l1_norm()).then_with(|| b.0.cmp(&a.0))
}

/// Sparse integer matrix stored by rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    cols: usize,
    rows: Vec<Vec<(usize, i64)>>,
}

impl IntMatrix {
    pub fn new(cols: usize, rows: Vec<Vec<(usize, i64)>>) -> Self {
        Self { cols, rows }
    }

    pub fn from_dense(rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let rows = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, &v)| (j, v)).collect())
            .collect();
        Self { cols, rows }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            rows: vec![Vec::new(); rows],
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn dense(&self) -> Vec<Vec<i64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0; self.cols];
                for &(j, v) in r {
                    d[j] += v;
                }
                d
            })
            .collect()
    }

    pub fn mul(&self, x: &[i64]) -> Vec<i64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }

    pub fn annihilates(&self, x: &[i64]) -> bool {
        x.len() == self.cols && self.mul(x).iter().all(|&v| v == 0)
    }
}

/// Pairwise differences of feasible points, with zero vectors dropped,
/// signs canonicalised and duplicates removed. Returned in scan order.
pub fn lattice_from_differences(solutions: &[IntVector]) -> Vec<IntVector> {
    let mut out = BTreeSet::new();
    for (i, a) in solutions.iter().enumerate() {
        for b in &solutions[i + 1..] {
            let d = a.sub(b);
            if !d.is_zero() {
                out.insert(d.canonical());
            }
        }
    }
    let mut v: Vec<IntVector> = out.into_iter().collect();
    v.sort_by(scan_order);
    v
}

/// ⊑-minimal members of `candidates`, comparing up to sign. The result is
/// canonical, duplicate-free and in scan order.
pub fn minimal_elements(candidates: &[IntVector]) -> Vec<IntVector> {
    let mut pool: Vec<IntVector> = candidates
        .iter()
        .filter(|c| !c.is_zero())
        .map(IntVector::canonical)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    pool.sort_by_key(IntVector::l1_norm);
    let mut kept: Vec<IntVector> = Vec::new();
    for (i, v) in pool.iter().enumerate() {
        let norm = v.l1_norm();
        // only strictly shorter vectors can sit strictly below v
        let dominated = pool[..i].iter().take_while(|u| u.l1_norm() < norm).any(|u| {
            conformal(u, v) || conformal(&u.negated(), v)
        });
        if !dominated {
            kept.push(v.clone());
        }
    }
    kept.sort_by(scan_order);
    kept
}

/// Canonical, pairwise ⊑-incomparable kernel vectors of `matrix`, stored
/// in scan order. Each vector stands for both of its signs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraverSet {
    matrix: IntMatrix,
    vectors: Vec<IntVector>,
}

/// Filters `candidates` (all in the kernel of `matrix`) down to their
/// ⊑-minimal elements.
pub fn conformal_filter(matrix: IntMatrix, candidates: &[IntVector]) -> Result<GraverSet> {
    for c in candidates {
        if c.len() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                left: c.len(),
                right: matrix.cols(),
            });
        }
        if !matrix.annihilates(c) {
            return Err(Error::InvalidParameter(format!("{:?} is not in the kernel", c.0)));
        }
    }
    Ok(GraverSet {
        vectors: minimal_elements(candidates),
        matrix,
    })
}

impl GraverSet {
    pub fn empty(matrix: IntMatrix) -> Self {
        Self {
            matrix,
            vectors: Vec::new(),
        }
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.matrix
    }

    pub fn vectors(&self) -> &[IntVector] {
        &self.vectors
    }

    /// Number of stored representatives (half the signed count).
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Every member with both signs.
    pub fn signed(&self) -> Vec<IntVector> {
        self.vectors
            .iter()
            .flat_map(|v| [v.clone(), v.negated()])
            .collect()
    }

    pub fn contains_up_to_sign(&self, v: &IntVector) -> bool {
        self.vectors.contains(&v.canonical())
    }

    /// One vector per line, entries separated by spaces, after a
    /// `count dim` header line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.vectors.len(), self.matrix.cols());
        for v in &self.vectors {
            let line: Vec<String> = v.iter().map(i64::to_string).collect();
            writeln!(s, "{}", line.join(" ")).expect("writing to a String");
        }
        s
    }

    /// Reads the format written by [`GraverSet::to_text`], checking every
    /// vector against `matrix`.
    pub fn from_text(matrix: IntMatrix, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty Graver file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::InvalidParameter(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [count, dim] = dims[..] else {
            return Err(Error::InvalidParameter(format!("bad header {header:?}")));
        };
        if dim != matrix.cols() {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: matrix.cols(),
            });
        }
        let vectors: Vec<IntVector> = lines
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse().map_err(|_| Error::InvalidParameter(format!("bad entry {t:?}"))))
                    .collect::<Result<Vec<i64>>>()
                    .map(IntVector)
            })
            .collect::<Result<_>>()?;
        if vectors.len() != count {
            return Err(Error::InvalidParameter(format!(
                "header announces {count} vectors, found {}",
                vectors.len()
            )));
        }
        conformal_filter(matrix, &vectors)
    }
}

/// One augmentation step `current + step * direction`, returned when it is
/// feasible and strictly improves on `current_value`.
pub fn augment(
    current: &[i64],
    current_value: f64,
    direction: &[i64],
    step: i64,
    feasible: impl Fn(&[i64]) -> bool,
    mut objective: impl FnMut(&[i64]) -> Option<f64>,
) -> Option<(Vec<i64>, f64)> {
    let next: Vec<i64> = current.iter().zip(direction).map(|(&x, &g)| x + step * g).collect();
    if !feasible(&next) {
        return None;
    }
    let value = objective(&next)?;
    (value < current_value).then_some((next, value))
}
