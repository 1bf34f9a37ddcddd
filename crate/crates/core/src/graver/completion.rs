use std::collections::{HashSet, VecDeque};

use super::{conformal, conformal_filter, GraverSet, IntMatrix, IntVector};
use crate::error::{Error, Result};

/// Largest column count accepted by [`pottier_graver`].
pub const COMPLETION_COLUMN_LIMIT: usize = 12;

/// Lattice basis of `{x ∈ Z^n : A x = 0}` via unimodular column operations.
pub fn integer_kernel_basis(matrix: &IntMatrix) -> Vec<IntVector> {
    let n = matrix.cols();
    let a = matrix.dense();
    // column j: (entries of A e_j after operations, accumulated unimodular column)
    let mut cols: Vec<(Vec<i64>, Vec<i64>)> = (0..n)
        .map(|j| {
            let mut u = vec![0; n];
            u[j] = 1;
            (a.iter().map(|r| r[j]).collect(), u)
        })
        .collect();
    let mut pivot = 0;
    for r in 0..a.len() {
        while let Some(p) = (pivot..n)
            .filter(|&j| cols[j].0[r] != 0)
            .min_by_key(|&j| cols[j].0[r].abs())
        {
            cols.swap(pivot, p);
            let pv = cols[pivot].0[r];
            let mut done = true;
            for j in pivot + 1..n {
                let v = cols[j].0[r];
                if v == 0 {
                    continue;
                }
                let q = v.div_euclid(pv);
                let (head, tail) = cols.split_at_mut(j);
                let (src, dst) = (&head[pivot], &mut tail[0]);
                for (d, s) in dst.0.iter_mut().zip(&src.0) {
                    *d -= q * s;
                }
                for (d, s) in dst.1.iter_mut().zip(&src.1) {
                    *d -= q * s;
                }
                if dst.0[r] != 0 {
                    done = false;
                }
            }
            if done {
                pivot += 1;
                break;
            }
        }
    }
    cols.into_iter().skip(pivot).map(|(_, u)| IntVector::new(u)).collect()
}

fn normal_form(mut s: IntVector, basis: &[IntVector]) -> IntVector {
    'outer: loop {
        if s.is_zero() {
            return s;
        }
        for g in basis {
            if conformal(g, &s) {
                s = s.sub(g);
                continue 'outer;
            }
        }
        return s;
    }
}

/// Full Graver basis of `matrix` by completion of a symmetric lattice
/// generating set. Exponential; refuses matrices wider than
/// [`COMPLETION_COLUMN_LIMIT`].
pub fn pottier_graver(matrix: &IntMatrix) -> Result<GraverSet> {
    if matrix.cols() > COMPLETION_COLUMN_LIMIT {
        return Err(Error::SizeGuard {
            cols: matrix.cols(),
            limit: COMPLETION_COLUMN_LIMIT,
        });
    }
    let mut basis: Vec<IntVector> = Vec::new();
    let mut seen: HashSet<IntVector> = HashSet::new();
    for b in integer_kernel_basis(matrix) {
        for v in [b.clone(), b.negated()] {
            if seen.insert(v.clone()) {
                basis.push(v);
            }
        }
    }
    let mut queue: VecDeque<IntVector> = VecDeque::new();
    for (i, f) in basis.iter().enumerate() {
        for g in &basis[i..] {
            queue.push_back(f.add(g));
        }
    }
    while let Some(s) = queue.pop_front() {
        let f = normal_form(s, &basis);
        if f.is_zero() || seen.contains(&f) {
            continue;
        }
        for g in &basis {
            queue.push_back(f.add(g));
        }
        seen.insert(f.clone());
        basis.push(f);
    }
    conformal_filter(matrix.clone(), &basis)
}
