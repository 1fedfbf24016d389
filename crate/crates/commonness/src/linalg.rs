//! Exact linear algebra over Q and Z.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn to_q(rows: &[Vec<i64>]) -> Vec<Vec<Q>> {
    rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect()
}

pub fn big_to_q(rows: &[Vec<BigInt>]) -> Vec<Vec<Q>> {
    rows.iter()
        .map(|r| r.iter().map(|x| Q::from_integer(x.clone())).collect())
        .collect()
}

/// Reduced row echelon form. Returns the nonzero rows and their pivot columns.
pub fn rref(rows: &[Vec<Q>]) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut a: Vec<Vec<Q>> = rows.to_vec();
    let nrows = a.len();
    let ncols = a.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for x in a[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..nrows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..ncols {
                    let t = &f * &a[r][j];
                    a[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    a.truncate(r);
    (a, pivots)
}

pub fn rank(rows: &[Vec<Q>]) -> usize {
    rref(rows).1.len()
}

pub fn rank_i64(rows: &[Vec<i64>]) -> usize {
    rank(&to_q(rows))
}

/// Basis of the right kernel {x : A x = 0}.
pub fn kernel(rows: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    let (r, piv) = rref(rows);
    let free: Vec<usize> = (0..ncols).filter(|c| !piv.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); ncols];
            v[f] = Q::one();
            for (i, &p) in piv.iter().enumerate() {
                v[p] = -r[i][f].clone();
            }
            v
        })
        .collect()
}

/// Scales a rational vector to a primitive integer vector whose first nonzero entry is positive.
pub fn primitive(v: &[Q]) -> Vec<BigInt> {
    let mut den = BigInt::one();
    for x in v {
        den = den.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Q::from_integer(den.clone())).to_integer()).collect();
    primitive_int(&ints)
}

pub fn primitive_int(v: &[BigInt]) -> Vec<BigInt> {
    let mut g = BigInt::zero();
    for x in v {
        g = g.gcd(x);
    }
    if g.is_zero() {
        return v.to_vec();
    }
    let lead_neg = v.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative());
    if lead_neg {
        g = -g;
    }
    v.iter().map(|x| x / &g).collect()
}

/// Canonical description of a row span: RREF rows scaled to primitive integers.
pub fn canonical_span(rows: &[Vec<Q>]) -> Vec<Vec<BigInt>> {
    rref(rows).0.iter().map(|r| primitive(r)).collect()
}

/// Z-basis of the integer kernel {x in Z^n : A x = 0}, via unimodular column operations.
pub fn integer_kernel(a: &[Vec<BigInt>], n: usize) -> Vec<Vec<BigInt>> {
    let m = a.len();
    // columns of A stored as vectors, paired with columns of U
    let mut cols: Vec<Vec<BigInt>> = (0..n).map(|j| (0..m).map(|i| a[i][j].clone()).collect()).collect();
    let mut u: Vec<Vec<BigInt>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let mut pos = 0;
    for i in 0..m {
        if pos == n {
            break;
        }
        loop {
            // smallest nonzero |entry| in row i among columns pos..n
            let best = (pos..n)
                .filter(|&j| !cols[j][i].is_zero())
                .min_by(|&x, &y| cols[x][i].abs().cmp(&cols[y][i].abs()));
            let Some(b) = best else { break };
            cols.swap(pos, b);
            u.swap(pos, b);
            let mut done = true;
            for j in pos + 1..n {
                if cols[j][i].is_zero() {
                    continue;
                }
                let f = cols[j][i].div_floor(&cols[pos][i]);
                for t in 0..m {
                    let d = &f * &cols[pos][t];
                    cols[j][t] -= d;
                }
                for t in 0..n {
                    let d = &f * &u[pos][t];
                    u[j][t] -= d;
                }
                if !cols[j][i].is_zero() {
                    done = false;
                }
            }
            if done {
                pos += 1;
                break;
            }
        }
    }
    let mut basis: Vec<Vec<BigInt>> = u[pos..].to_vec();
    size_reduce(&mut basis);
    basis
}

/// Pairwise size reduction of a lattice basis (cheap substitute for LLL on tiny bases).
pub fn size_reduce(basis: &mut [Vec<BigInt>]) {
    let dot = |x: &[BigInt], y: &[BigInt]| -> BigInt { x.iter().zip(y).map(|(a, b)| a * b).sum() };
    for _ in 0..200 {
        let mut changed = false;
        basis.sort_by_key(|v| dot(v, v));
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                if i == j {
                    continue;
                }
                let nj = dot(&basis[j], &basis[j]);
                if nj.is_zero() {
                    continue;
                }
                let num = dot(&basis[i], &basis[j]);
                // round(num / nj)
                let two = BigInt::from(2);
                let f = (&num * &two + &nj).div_floor(&(&nj * &two));
                if !f.is_zero() {
                    let cand: Vec<BigInt> = basis[i].iter().zip(&basis[j]).map(|(a, b)| a - &f * b).collect();
                    if dot(&cand, &cand) < dot(&basis[i], &basis[i]) {
                        basis[i] = cand;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    for v in basis.iter_mut() {
        if v.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
            for x in v.iter_mut() {
                *x = -x.clone();
            }
        }
    }
}

/// Integer basis of (Q-span of rows) ∩ Z^k, size reduced.
pub fn saturate(rows: &[Vec<Q>], k: usize) -> Vec<Vec<BigInt>> {
    let (r, _) = rref(rows);
    if r.is_empty() {
        return Vec::new();
    }
    if r.len() == 1 {
        return vec![primitive(&r[0])];
    }
    let comp: Vec<Vec<BigInt>> = kernel(&r, k).iter().map(|v| primitive(v)).collect();
    if comp.is_empty() {
        // full space
        return (0..k)
            .map(|j| (0..k).map(|i| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
            .collect();
    }
    integer_kernel(&comp, k)
}

/// Integer basis (primitive rows) of the orthogonal complement of the span of `rows`.
pub fn orthogonal_complement(rows: &[Vec<Q>], k: usize) -> Vec<Vec<BigInt>> {
    let comp: Vec<Vec<Q>> = kernel(rows, k);
    if comp.is_empty() {
        return Vec::new();
    }
    saturate(&comp, k)
}

pub fn big_to_i64(v: &[BigInt]) -> Option<Vec<i64>> {
    v.iter().map(|x| x.to_i64()).collect()
}

pub fn det2(a: i128, b: i128, c: i128, d: i128) -> i128 {
    a * d - b * c
}

/// Determinant by fraction elimination.
pub fn det(a: &[Vec<Q>]) -> Q {
    let n = a.len();
    let mut m: Vec<Vec<Q>> = a.to_vec();
    let mut d = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else { return Q::zero() };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= &m[c][c];
        for r in c + 1..n {
            if m[r][c].is_zero() {
                continue;
            }
            let f = &m[r][c] / &m[c][c];
            for j in c..n {
                let t = &f * &m[c][j];
                m[r][j] -= t;
            }
        }
    }
    d
}

/// Inverse of a square matrix, or None when singular.
pub fn inverse(a: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = a.len();
    let aug: Vec<Vec<Q>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    let (red, piv) = rref(&aug);
    if piv.len() < n || piv[n - 1] >= n {
        return None;
    }
    Some(red.iter().map(|r| r[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bi(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn rref_basic() {
        let (r, p) = rref(&to_q(&[vec![2, 4], vec![1, 3]]));
        assert_eq!(p, vec![0, 1]);
        assert_eq!(r[0], vec![q(1), q(0)]);
    }

    #[test]
    fn kernel_of_single_row() {
        let k = kernel(&to_q(&[vec![1, 2, 3]]), 3);
        assert_eq!(k.len(), 2);
        for v in k {
            let s = &v[0] + q(2) * &v[1] + q(3) * &v[2];
            assert!(s.is_zero());
        }
    }

    #[test]
    fn integer_kernel_is_saturated() {
        // x + 2y + 3z + 4w = 0 has a kernel lattice of determinant 1 in the free coordinates
        let a = vec![bi(&[1, 2, 3, 4])];
        let ker = integer_kernel(&a, 4);
        assert_eq!(ker.len(), 3);
        for v in &ker {
            let s: BigInt = v.iter().zip(&a[0]).map(|(x, y)| x * y).sum();
            assert!(s.is_zero());
        }
    }

    #[test]
    fn saturation_recovers_primitive_lattice() {
        // span of (2,0,2),(0,2,2) contains (1,1,2)
        let s = saturate(&to_q(&[vec![2, 0, 2], vec![0, 2, 2]]), 3);
        assert_eq!(s.len(), 2);
        // (1,1,2) must be an integer combination
        let target = bi(&[1, 1, 2]);
        let mut found = false;
        for a in -4i64..=4 {
            for b in -4i64..=4 {
                let v: Vec<BigInt> = (0..3).map(|i| &s[0][i] * a + &s[1][i] * b).collect();
                if v == target {
                    found = true;
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn primitive_normalizes_sign() {
        assert_eq!(primitive(&[q(-2), q(4)]), bi(&[1, -2]));
    }
}
