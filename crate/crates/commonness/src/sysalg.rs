//! Linear systems: validation, reduction, girth, critical sets and isomorphism.
//!
//! Everything here is exact; no floating point.

use crate::linalg::{self, Q};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SysError {
    #[error("empty system")]
    Empty,
    #[error("row {row} has {got} entries, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("rows are linearly dependent over Q")]
    RankDeficient,
    #[error("system is degenerate: {0}")]
    Degenerate(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("dimension mismatch: {0} vs {1} columns")]
    DimensionMismatch(usize, usize),
    #[error("parse error at row {row}, entry {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("coefficient overflow")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearSystem {
    rows: Vec<Vec<i64>>,
    #[serde(skip)]
    irredundant: bool,
}

impl LinearSystem {
    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }
    pub fn m(&self) -> usize {
        self.rows.len()
    }
    pub fn k(&self) -> usize {
        self.rows[0].len()
    }
    pub fn is_irredundant(&self) -> bool {
        self.irredundant
    }
    pub fn column(&self, j: usize) -> Vec<i64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
    pub fn columns(&self) -> Vec<Vec<i64>> {
        (0..self.k()).map(|j| self.column(j)).collect()
    }
    fn q_rows(&self) -> Vec<Vec<Q>> {
        linalg::to_q(&self.rows)
    }
    /// Canonical row-span form (RREF, primitive integer rows).
    pub fn canonical_span(&self) -> Vec<Vec<BigInt>> {
        linalg::canonical_span(&self.q_rows())
    }
    pub fn permute_columns(&self, perm: &[usize]) -> LinearSystem {
        let rows = self.rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        validate(rows).expect("column permutation preserves validity")
    }
    /// Whether `v` lies in the rational row span.
    pub fn span_contains(&self, v: &[i64]) -> bool {
        let mut rows = self.rows.clone();
        rows.push(v.to_vec());
        linalg::rank_i64(&rows) == self.m()
    }
    /// Whether the span contains a vector supported on a single coordinate.
    pub fn has_support_one_vector(&self) -> bool {
        (0..self.k()).any(|i| {
            let mut e = vec![0; self.k()];
            e[i] = 1;
            self.span_contains(&e)
        })
    }
}

impl fmt::Display for LinearSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Parses "1 1 -1 -1 0; 2 -2 3 0 -3".
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<i64>>, SysError> {
    let mut rows = Vec::new();
    for (i, part) in text.split(';').enumerate() {
        let part = part.trim();
        if part.is_empty() {
            if text.trim().is_empty() {
                return Err(SysError::Empty);
            }
            return Err(SysError::Parse { row: i + 1, col: 0, msg: "empty row".into() });
        }
        let mut row = Vec::new();
        for (j, tok) in part.split_whitespace().enumerate() {
            let v = tok.trim_matches(',').parse::<i64>().map_err(|e| SysError::Parse {
                row: i + 1,
                col: j + 1,
                msg: format!("{tok:?}: {e}"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if let Some(first) = rows.first() {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != first.len() {
                return Err(SysError::Parse {
                    row: i + 1,
                    col: r.len().min(first.len()) + 1,
                    msg: format!("row has {} entries, expected {}", r.len(), first.len()),
                });
            }
        }
    }
    Ok(rows)
}

pub fn validate(rows: Vec<Vec<i64>>) -> Result<LinearSystem, SysError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(SysError::Empty);
    }
    let k = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != k {
            return Err(SysError::Ragged { row: i, got: r.len(), expected: k });
        }
    }
    if linalg::rank_i64(&rows) < rows.len() {
        return Err(SysError::RankDeficient);
    }
    let mut sys = LinearSystem { rows, irredundant: false };
    sys.irredundant = compute_irredundant(&sys);
    Ok(sys)
}

fn compute_irredundant(l: &LinearSystem) -> bool {
    let k = l.k();
    if (0..k).any(|j| l.rows.iter().all(|r| r[j] == 0)) {
        return false;
    }
    find_difference_vector(l).is_none()
}

fn find_difference_vector(l: &LinearSystem) -> Option<(usize, usize)> {
    let k = l.k();
    for i in 0..k {
        for j in i + 1..k {
            let mut e = vec![0; k];
            e[i] = 1;
            e[j] = -1;
            if l.span_contains(&e) {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnFate {
    Kept(usize),
    MergedInto(usize),
    Deleted,
}

/// Removes zero columns and identifies variables forced equal.
pub fn irredundant_reduce(l: &LinearSystem) -> Result<(LinearSystem, Vec<ColumnFate>), SysError> {
    // current columns, each tagged with the original index it represents
    let mut rows = l.rows.clone();
    let mut origin: Vec<usize> = (0..l.k()).collect();
    let mut fate: Vec<ColumnFate> = vec![ColumnFate::Kept(0); l.k()];
    loop {
        // delete zero columns
        let mut j = 0;
        while j < origin.len() {
            if rows.iter().all(|r| r[j] == 0) {
                fate[origin[j]] = ColumnFate::Deleted;
                for r in rows.iter_mut() {
                    r.remove(j);
                }
                origin.remove(j);
            } else {
                j += 1;
            }
        }
        rows.retain(|r| r.iter().any(|&x| x != 0));
        if rows.is_empty() || origin.is_empty() {
            return Err(SysError::Degenerate("reduction leaves no equations".into()));
        }
        // re-basis the rows
        let basis = linalg::canonical_span(&linalg::to_q(&rows));
        rows = basis
            .iter()
            .map(|r| linalg::big_to_i64(r).ok_or(SysError::Overflow))
            .collect::<Result<_, _>>()?;
        let cur = LinearSystem { rows: rows.clone(), irredundant: false };
        if cur.has_support_one_vector() {
            return Err(SysError::Degenerate("a variable is forced to zero".into()));
        }
        match find_difference_vector(&cur) {
            None => break,
            Some((i, j)) => {
                // x_j := x_i
                for r in rows.iter_mut() {
                    r[i] += r[j];
                    r.remove(j);
                }
                let oj = origin.remove(j);
                fate[oj] = ColumnFate::MergedInto(origin[i]);
                rows.retain(|r| r.iter().any(|&x| x != 0));
                let basis = linalg::canonical_span(&linalg::to_q(&rows));
                rows = basis
                    .iter()
                    .map(|r| linalg::big_to_i64(r).ok_or(SysError::Overflow))
                    .collect::<Result<_, _>>()?;
                if rows.is_empty() {
                    return Err(SysError::Degenerate("all equations collapse to 0 = 0".into()));
                }
            }
        }
    }
    for (pos, &o) in origin.iter().enumerate() {
        fate[o] = ColumnFate::Kept(pos);
    }
    // merges recorded against an original column that was later merged again resolve transitively
    let snapshot = fate.clone();
    for f in fate.iter_mut() {
        let mut cur = f.clone();
        while let ColumnFate::MergedInto(t) = cur {
            match &snapshot[t] {
                ColumnFate::MergedInto(t2) => cur = ColumnFate::MergedInto(*t2),
                ColumnFate::Kept(p) => {
                    cur = ColumnFate::MergedInto(*p);
                    break;
                }
                ColumnFate::Deleted => {
                    cur = ColumnFate::Deleted;
                    break;
                }
            }
        }
        if let ColumnFate::MergedInto(_) = cur {
            *f = cur;
        } else if let ColumnFate::Deleted = cur {
            if matches!(f, ColumnFate::MergedInto(_)) {
                *f = ColumnFate::Deleted;
            }
        }
    }
    let sys = validate(rows)?;
    Ok((sys, fate))
}

fn restrict_columns(l: &LinearSystem, cols: &[usize]) -> Vec<Vec<Q>> {
    l.rows.iter().map(|r| cols.iter().map(|&j| linalg::q(r[j])).collect()).collect()
}

/// Dimension of span ∩ {vectors supported on `set`}.
pub fn supported_dimension(l: &LinearSystem, set: &[usize]) -> usize {
    let comp: Vec<usize> = (0..l.k()).filter(|j| !set.contains(j)).collect();
    if comp.is_empty() {
        return l.m();
    }
    l.m() - linalg::rank(&restrict_columns(l, &comp))
}

/// Rational basis of span ∩ {supported on `set`}, as full-length vectors.
pub fn supported_subspace(l: &LinearSystem, set: &[usize]) -> Vec<Vec<Q>> {
    let comp: Vec<usize> = (0..l.k()).filter(|j| !set.contains(j)).collect();
    // y with y^T L vanishing on comp
    let a: Vec<Vec<Q>> = comp
        .iter()
        .map(|&j| l.rows.iter().map(|r| linalg::q(r[j])).collect())
        .collect();
    let ys = if a.is_empty() {
        (0..l.m())
            .map(|i| (0..l.m()).map(|t| if t == i { linalg::q(1) } else { linalg::q(0) }).collect())
            .collect()
    } else {
        linalg::kernel(&a, l.m())
    };
    ys.iter()
        .map(|y| {
            (0..l.k())
                .map(|j| {
                    let mut s = Q::zero();
                    for (i, r) in l.rows.iter().enumerate() {
                        s += &y[i] * linalg::q(r[j]);
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn subsets(k: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, k: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            if k - i < size - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, k, size, cur, out);
            cur.pop();
        }
    }
    rec(0, k, size, &mut cur, &mut out);
    out
}

/// Minimum support size of a nonzero vector in the row span.
pub fn girth(l: &LinearSystem) -> usize {
    for s in 1..=l.k() {
        if subsets(l.k(), s).iter().any(|set| supported_dimension(l, set) > 0) {
            return s;
        }
    }
    l.k()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub b: Vec<usize>,
    pub m_b: usize,
    pub l_b: LinearSystem,
}

pub fn critical_size(girth: usize) -> usize {
    if girth % 2 == 0 {
        girth
    } else {
        girth + 1
    }
}

/// All critical sets: |B| = c(L) and the maximal subsystem on B involves every variable of B.
pub fn critical_sets(l: &LinearSystem) -> Vec<CriticalSet> {
    let c = critical_size(girth(l));
    if c > l.k() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for b in subsets(l.k(), c) {
        let sub = supported_subspace(l, &b);
        if sub.is_empty() {
            continue;
        }
        let covers = b.iter().all(|&j| sub.iter().any(|v| !v[j].is_zero()));
        if !covers {
            continue;
        }
        let restricted: Vec<Vec<Q>> = sub.iter().map(|v| b.iter().map(|&j| v[j].clone()).collect()).collect();
        let basis = linalg::saturate(&restricted, c);
        let rows: Vec<Vec<i64>> = basis
            .iter()
            .map(|r| r.iter().map(|x| x.to_i64().expect("critical subsystem entries fit in i64")).collect())
            .collect();
        let m_b = rows.len();
        let l_b = validate(rows).expect("saturated basis is independent");
        out.push(CriticalSet { b, m_b, l_b });
    }
    out
}

pub fn same_span(a: &LinearSystem, b: &LinearSystem) -> bool {
    a.k() == b.k() && a.m() == b.m() && a.canonical_span() == b.canonical_span()
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, p, out);
            if k % 2 == 0 {
                p.swap(i, k - 1);
            } else {
                p.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut p, &mut out);
    out
}

/// True iff some column permutation of `l2` has the same rational row span as `l`.
pub fn isomorphic(l: &LinearSystem, l2: &LinearSystem) -> Result<bool, SysError> {
    if l.k() != l2.k() {
        return Err(SysError::DimensionMismatch(l.k(), l2.k()));
    }
    if l.m() != l2.m() {
        return Ok(false);
    }
    let target = l.canonical_span();
    Ok(permutations(l.k())
        .iter()
        .any(|p| linalg::canonical_span(&restrict_columns(l2, p)) == target))
}

/// The five multisets A_1..A_5 of a 2×5 girth-4 system: A_i is the primitive span vector
/// vanishing at coordinate i, with that zero dropped.
pub fn critical_equation_multisets(l: &LinearSystem) -> Result<Vec<(Vec<usize>, Vec<i64>)>, SysError> {
    if l.m() != 2 || l.k() != 5 {
        return Err(SysError::NotApplicable("expected a 2x5 system".into()));
    }
    if !l.is_irredundant() {
        return Err(SysError::NotApplicable("system is not irredundant".into()));
    }
    if girth(l) != 4 {
        return Err(SysError::NotApplicable("girth is not 4".into()));
    }
    Ok(critical_equations(l))
}

/// Per coordinate i (0-based), the span vector vanishing at i as an ordered 4-vector.
/// Assumes 2×5 with girth 4.
pub fn critical_equations(l: &LinearSystem) -> Vec<(Vec<usize>, Vec<i64>)> {
    (0..5)
        .map(|i| {
            let b: Vec<usize> = (0..5).filter(|&j| j != i).collect();
            let sub = supported_subspace(l, &b);
            let v = linalg::primitive(&sub[0]);
            let coeffs: Vec<i64> = b.iter().map(|&j| v[j].to_i64().expect("coefficient fits in i64")).collect();
            (b, coeffs)
        })
        .collect()
}
