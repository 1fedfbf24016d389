//! Exact reproductions of the finite relation searches behind Cases A and D.
//!
//! A relation `x ~ y` between two forms means one of `λx = y`, `λx = -y`,
//! `λy = x`, `λy = -x` (option indices 0..4, with a second parameter μ
//! doubling the list to 8 in the two-parameter search).

use crate::linalg::{kernel, rank, Q};
use crate::sysalg::subsets;
use crate::templates::rational_to_string;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("coefficient {0} too large for divisor enumeration")]
    TooLarge(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

// ---------------------------------------------------------------------------
// Univariate integer polynomials

/// Integer polynomial, coefficients from low to high degree, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Poly(Vec<i128>);

const OVERFLOW: &str = "polynomial coefficient overflow";

impl Poly {
    pub fn new(mut c: Vec<i128>) -> Self {
        while c.last() == Some(&0) {
            c.pop();
        }
        Poly(c)
    }

    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: i128) -> Self {
        Poly::new(vec![c])
    }

    /// The indeterminate.
    pub fn x() -> Self {
        Poly(vec![0, 1])
    }

    pub fn coeffs(&self) -> &[i128] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn lc(&self) -> i128 {
        self.0.last().copied().unwrap_or(0)
    }

    fn try_add(&self, o: &Poly, sign: i128) -> Option<Poly> {
        let n = self.0.len().max(o.0.len());
        let mut c = vec![0i128; n];
        for (i, v) in c.iter_mut().enumerate() {
            let a = self.0.get(i).copied().unwrap_or(0);
            let b = o.0.get(i).copied().unwrap_or(0);
            *v = a.checked_add(b.checked_mul(sign)?)?;
        }
        Some(Poly::new(c))
    }

    fn try_mul(&self, o: &Poly) -> Option<Poly> {
        if self.is_zero() || o.is_zero() {
            return Some(Poly::zero());
        }
        let mut c = vec![0i128; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if *a == 0 {
                continue;
            }
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] = c[i + j].checked_add(a.checked_mul(*b)?)?;
            }
        }
        Some(Poly::new(c))
    }

    pub fn add(&self, o: &Poly) -> Poly {
        self.try_add(o, 1).expect(OVERFLOW)
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.try_add(o, -1).expect(OVERFLOW)
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        self.try_mul(o).expect(OVERFLOW)
    }

    pub fn scale(&self, k: i128) -> Poly {
        Poly::new(self.0.iter().map(|c| c.checked_mul(k).expect(OVERFLOW)).collect())
    }

    pub fn pow(&self, e: usize) -> Poly {
        (0..e).fold(Poly::constant(1), |acc, _| acc.mul(self))
    }

    /// Multiplies by x^k.
    pub fn shift(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![0; k];
        c.extend_from_slice(&self.0);
        Poly(c)
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.0.iter().rev().fold(Q::zero(), |acc, c| acc * x + Q::from_integer(BigInt::from(*c)))
    }

    pub fn content(&self) -> i128 {
        self.0.iter().fold(0i128, |g, c| g.gcd(c))
    }

    /// Divides out the content and makes the leading coefficient positive.
    pub fn primitive(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let g = self.content() * self.lc().signum();
        Poly(self.0.iter().map(|c| c / g).collect())
    }

    /// Quotient `self / d`, if it exists with integer coefficients.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        let dd = d.degree()?;
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let mut r = self.0.clone();
        let n = r.len() - 1;
        if n < dd {
            return None;
        }
        let mut q = vec![0i128; n - dd + 1];
        for i in (0..=n - dd).rev() {
            let top = r[i + dd];
            if top % d.lc() != 0 {
                return None;
            }
            let t = top / d.lc();
            q[i] = t;
            for (j, dc) in d.0.iter().enumerate() {
                r[i + j] = r[i + j].checked_sub(t.checked_mul(*dc)?)?;
            }
        }
        if r.iter().all(|c| *c == 0) {
            Some(Poly::new(q))
        } else {
            None
        }
    }

    fn try_prem(&self, d: &Poly) -> Option<Poly> {
        let dd = d.degree()?;
        let mut r = self.clone();
        while let Some(rd) = r.degree() {
            if rd < dd {
                break;
            }
            let lhs = r.try_mul(&Poly::constant(d.lc()))?;
            let rhs = d.shift(rd - dd).try_mul(&Poly::constant(r.lc()))?;
            r = lhs.try_add(&rhs, -1)?;
        }
        Some(r)
    }

    /// Primitive gcd with positive leading coefficient; None on i128 overflow.
    pub fn gcd(&self, o: &Poly) -> Option<Poly> {
        let (mut a, mut b) = (self.primitive(), o.primitive());
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.try_prem(&b)?;
            a = b;
            b = r.primitive();
        }
        Some(a.primitive())
    }

    pub fn display(&self, var: &str) -> String {
        let terms: Vec<(i128, String)> = self
            .0
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| **c != 0)
            .map(|(i, c)| {
                let m = match i {
                    0 => String::new(),
                    1 => var.to_string(),
                    _ => format!("{var}^{i}"),
                };
                (*c, m)
            })
            .collect();
        render_terms(&terms)
    }
}

fn render_terms(terms: &[(i128, String)]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (k, (c, m)) in terms.iter().enumerate() {
        let neg = *c < 0;
        if k == 0 {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        let a = c.abs();
        if m.is_empty() {
            let _ = write!(s, "{a}");
        } else if a == 1 {
            s.push_str(m);
        } else {
            let _ = write!(s, "{a}*{m}");
        }
    }
    s
}

fn divisors(n: i128) -> Result<Vec<i128>, SearchError> {
    let n = n.abs();
    if n > 1_000_000_000_000_000 {
        return Err(SearchError::TooLarge(n.to_string()));
    }
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1i128;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    Ok(small)
}

/// Whether p/q is a root of the polynomial with coefficients c (low to high).
fn is_root(c: &[i128], p: i128, q: i128) -> bool {
    let fast = || -> Option<bool> {
        let n = c.len() - 1;
        let mut v = c[n];
        let mut qp = 1i128;
        for i in (0..n).rev() {
            qp = qp.checked_mul(q)?;
            v = v.checked_mul(p)?.checked_add(c[i].checked_mul(qp)?)?;
        }
        Some(v == 0)
    };
    fast().unwrap_or_else(|| {
        let (p, q) = (BigInt::from(p), BigInt::from(q));
        let n = c.len() - 1;
        let mut v = BigInt::from(c[n]);
        let mut qp = BigInt::one();
        for i in (0..n).rev() {
            qp *= &q;
            v = v * &p + BigInt::from(c[i]) * &qp;
        }
        v.is_zero()
    })
}

/// All rational roots of an integer polynomial (coefficients low to high), sorted.
pub fn rational_roots(coeffs: &[i128]) -> Result<Vec<Q>, SearchError> {
    let p = Poly::new(coeffs.to_vec());
    if p.is_zero() {
        return Err(SearchError::ZeroPolynomial);
    }
    let low = p.0.iter().take_while(|c| **c == 0).count();
    let c = &p.0[low..];
    let mut roots = Vec::new();
    if low > 0 {
        roots.push(Q::zero());
    }
    if c.len() > 1 {
        let lead = divisors(*c.last().unwrap())?;
        for num in divisors(c[0])? {
            for den in &lead {
                if num.gcd(den) != 1 {
                    continue;
                }
                for s in [1i128, -1] {
                    if is_root(c, s * num, *den) {
                        roots.push(Q::new(BigInt::from(s * num), BigInt::from(*den)));
                    }
                }
            }
        }
    }
    roots.sort();
    roots.dedup();
    Ok(roots)
}

/// Rational roots of a polynomial with rational coefficients (low to high).
pub fn rational_roots_q(coeffs: &[Q]) -> Result<Vec<Q>, SearchError> {
    let den = coeffs.iter().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
    let ints = coeffs
        .iter()
        .map(|c| {
            let v = (c * Q::from_integer(den.clone())).to_integer();
            v.to_i128().ok_or_else(|| SearchError::TooLarge(v.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    rational_roots(&ints)
}

fn excluded(x: &Q) -> bool {
    x.is_zero() || x.abs().is_one()
}

// ---------------------------------------------------------------------------
// Linear relation systems over Z[λ]

/// Linear form in the unknowns with coefficients in Z[λ].
pub type Form = Vec<Poly>;

/// `rows · v = 0` with every `nonvanishing` form nonzero at v and λ ∉ {-1, 0, 1}.
#[derive(Clone, Debug)]
pub struct RelationSystem {
    pub rows: Vec<Form>,
    pub nonvanishing: Vec<Form>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinearSolution {
    pub lambda: Q,
    /// Primitive integer vector with all constrained forms nonzero.
    pub vector: Vec<BigInt>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SystemOutcome {
    pub solutions: Vec<LinearSolution>,
    /// Solutions exist for all but finitely many λ.
    pub generic: bool,
    /// Admissible-looking roots rejected only because λ ∈ {-1, 0, 1}.
    pub excluded: usize,
}

fn det(m: &[Vec<Poly>]) -> Poly {
    match m.len() {
        0 => Poly::constant(1),
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        n => {
            let mut acc = Poly::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Poly>> = m[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, p)| p.clone()).collect())
                    .collect();
                let t = m[0][j].mul(&det(&minor));
                acc = if j % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
            }
            acc
        }
    }
}

fn minors(rows: &[Form], size: usize) -> impl Iterator<Item = Poly> + '_ {
    let k = rows.first().map_or(0, |r| r.len());
    let rs = subsets(rows.len(), size);
    let cs = subsets(k, size);
    rs.into_iter().flat_map(move |ri| {
        cs.clone().into_iter().map(move |ci| {
            let m: Vec<Vec<Poly>> = ri.iter().map(|&i| ci.iter().map(|&j| rows[i][j].clone()).collect()).collect();
            det(&m)
        })
    })
}

/// Rank over the rational function field Q(λ).
pub fn generic_rank(rows: &[Form]) -> usize {
    let k = rows.first().map_or(0, |r| r.len());
    (1..=rows.len().min(k))
        .rev()
        .find(|&s| minors(rows, s).any(|m| !m.is_zero()))
        .unwrap_or(0)
}

/// Rational λ at which the rank falls below `r`: roots of the gcd of the r×r minors.
fn rank_drop_candidates(rows: &[Form], r: usize) -> Vec<Q> {
    if r == 0 {
        return Vec::new();
    }
    let mut g: Option<Poly> = None;
    for m in minors(rows, r) {
        if m.is_zero() {
            continue;
        }
        g = Some(match g {
            None => m.primitive(),
            // overflow keeps the previous (larger) gcd; candidates are re-verified below
            Some(prev) => prev.gcd(&m).unwrap_or(prev),
        });
        if g.as_ref().and_then(|p| p.degree()) == Some(0) {
            return Vec::new();
        }
    }
    g.map(|p| rational_roots(p.coeffs()).expect("nonzero minor"))
        .unwrap_or_default()
}

fn eval_form(f: &Form, l: &Q) -> Vec<Q> {
    f.iter().map(|p| p.eval(l)).collect()
}

fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A kernel vector at which every constraint is nonzero, if one exists.
fn avoiding_vector(basis: &[Vec<Q>], cons: &[Vec<Q>]) -> Option<Vec<Q>> {
    if basis.is_empty() || cons.iter().any(|f| basis.iter().all(|b| dot(f, b).is_zero())) {
        return None;
    }
    // each constraint is a nonzero polynomial in t along the moment curve
    (1i64..)
        .map(|t| {
            let mut v = vec![Q::zero(); basis[0].len()];
            let mut w = Q::one();
            for b in basis {
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi += &w * bi;
                }
                w *= Q::from_integer(BigInt::from(t));
            }
            v
        })
        .find(|v| cons.iter().all(|f| !dot(f, v).is_zero()))
}

pub fn solve_system(sys: &RelationSystem) -> SystemOutcome {
    let k = sys.rows.first().or(sys.nonvanishing.first()).map_or(0, |r| r.len());
    let r = generic_rank(&sys.rows);
    let mut out = SystemOutcome::default();
    if r < k {
        out.generic = sys.nonvanishing.iter().all(|f| {
            let mut aug = sys.rows.clone();
            aug.push(f.clone());
            generic_rank(&aug) > r
        });
        if out.generic {
            return out;
        }
    }
    for l in rank_drop_candidates(&sys.rows, r) {
        let m: Vec<Vec<Q>> = sys.rows.iter().map(|f| eval_form(f, &l)).collect();
        if rank(&m) >= r {
            continue;
        }
        let basis = kernel(&m, k);
        let cons: Vec<Vec<Q>> = sys.nonvanishing.iter().map(|f| eval_form(f, &l)).collect();
        if let Some(v) = avoiding_vector(&basis, &cons) {
            if excluded(&l) {
                out.excluded += 1;
            } else {
                out.solutions.push(LinearSolution { lambda: l, vector: crate::linalg::primitive(&v) });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// The one-parameter searches

fn var(i: usize) -> Form {
    let mut f = vec![Poly::zero(); 4];
    f[i] = Poly::constant(1);
    f
}

fn form_add(a: &Form, b: &Form) -> Form {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

fn form_scale(a: &Form, p: &Poly) -> Form {
    a.iter().map(|x| x.mul(p)).collect()
}

fn lam() -> Poly {
    Poly::x()
}

/// Row for option `opt` of `x ~ y`: λx−y, λx+y, λy−x, λy+x.
pub fn relation_row(x: &Form, y: &Form, opt: usize) -> Form {
    let (p, q) = if opt < 2 { (x, y) } else { (y, x) };
    let sign = if opt % 2 == 0 { -1 } else { 1 };
    form_add(&form_scale(p, &lam()), &form_scale(q, &Poly::constant(sign)))
}

struct Forms {
    a: Form,
    b: Form,
    c: Form,
    d: Form,
}

impl Forms {
    fn new() -> Self {
        Forms { a: var(0), b: var(1), c: var(2), d: var(3) }
    }
    fn l(&self, f: &Form) -> Form {
        form_scale(f, &lam())
    }
    fn neg(&self, f: &Form) -> Form {
        form_scale(f, &Poly::constant(-1))
    }
    fn lam_a_minus_c(&self) -> Form {
        form_add(&self.l(&self.a), &self.neg(&self.c))
    }
    fn lam_b_plus_c(&self) -> Form {
        form_add(&self.l(&self.b), &self.c)
    }
    fn c_minus_lam_a(&self) -> Form {
        self.neg(&self.lam_a_minus_c())
    }
    fn a_plus_b(&self) -> Form {
        form_add(&self.a, &self.b)
    }
}

/// The six pairings required when every L_i has a coincidental pair among x1,x2 or x3,x4.
pub fn a1_relations() -> Vec<(Form, Form)> {
    let f = Forms::new();
    vec![
        (f.a.clone(), f.b.clone()),
        (f.c.clone(), f.d.clone()),
        (f.lam_a_minus_c(), f.lam_b_plus_c()),
        (f.lam_b_plus_c(), f.l(&f.b)),
        (f.c_minus_lam_a(), f.l(&f.a)),
        (f.a_plus_b(), f.d.clone()),
    ]
}

/// The eight pairings of structural alternative `s` (bits pick the branch in each of three lines).
pub fn a2_relations(s: usize) -> Vec<(Form, Form)> {
    let f = Forms::new();
    let mut r = vec![(f.a.clone(), f.c.clone()), (f.b.clone(), f.d.clone())];
    if s & 1 == 0 {
        r.push((f.lam_a_minus_c(), f.lam_b_plus_c()));
        r.push((f.l(&f.c), f.l(&f.d)));
    } else {
        r.push((f.lam_a_minus_c(), f.l(&f.d)));
        r.push((f.lam_b_plus_c(), f.l(&f.c)));
    }
    if s & 2 == 0 {
        r.push((f.neg(&f.l(&f.b)), f.lam_b_plus_c()));
        r.push((f.a_plus_b(), f.d.clone()));
    } else {
        r.push((f.lam_b_plus_c(), f.d.clone()));
        r.push((f.a_plus_b(), f.neg(&f.l(&f.b))));
    }
    if s & 4 == 0 {
        r.push((f.c_minus_lam_a(), f.l(&f.a)));
        r.push((f.a_plus_b(), f.d.clone()));
    } else {
        r.push((f.c_minus_lam_a(), f.a_plus_b()));
        r.push((f.l(&f.a), f.d.clone()));
    }
    r
}

fn option_digits(mut idx: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let d = idx % 4;
            idx /= 4;
            d
        })
        .collect()
}

/// Form up to sign and powers of λ, with the stripped exponent.
fn node_of(f: &Form) -> (Form, i64) {
    let mut f = f.clone();
    let mut e = 0;
    while f.iter().any(|p| !p.is_zero()) && f.iter().all(|p| p.is_zero() || p.coeffs()[0] == 0) {
        f = f.iter().map(|p| Poly::new(p.coeffs().get(1..).unwrap_or(&[]).to_vec())).collect();
        e += 1;
    }
    if f.iter().find(|p| !p.is_zero()).is_some_and(|p| p.lc() < 0) {
        f = f.iter().map(|p| p.neg()).collect();
    }
    (f, e)
}

/// Relations as edges between normalized forms, weighted by the λ-valuation they force.
pub fn valuation_edges(rels: &[(Form, Form)], opts: &[usize]) -> (usize, Vec<(usize, usize, i64)>) {
    let mut ids: HashMap<Form, usize> = HashMap::new();
    let mut edges = Vec::new();
    for ((x, y), &o) in rels.iter().zip(opts) {
        let (nx, ex) = node_of(x);
        let (ny, ey) = node_of(y);
        let n = ids.len();
        let ix = *ids.entry(nx).or_insert(n);
        let n = ids.len();
        let iy = *ids.entry(ny).or_insert(n);
        let w = if o < 2 { 1 } else { -1 };
        // |y| = |λ|^w |x|  with |x| = |λ|^ex |node x|
        edges.push((ix, iy, w + ex - ey));
    }
    (ids.len(), edges)
}

/// False when the relations force |λ|^e = 1 for some e ≠ 0 (so |λ| = 1), assuming every form is nonzero.
pub fn valuations_consistent(rels: &[(Form, Form)], opts: &[usize]) -> bool {
    let (n, edges) = valuation_edges(rels, opts);
    let mut parent: Vec<usize> = (0..n).collect();
    let mut off = vec![0i64; n]; // potential(node) - potential(parent)
    fn find(i: usize, parent: &mut [usize], off: &mut [i64]) -> (usize, i64) {
        if parent[i] == i {
            return (i, 0);
        }
        let (r, o) = find(parent[i], parent, off);
        off[i] += o;
        parent[i] = r;
        (r, off[i])
    }
    for (x, y, w) in edges {
        let (rx, ox) = find(x, &mut parent, &mut off);
        let (ry, oy) = find(y, &mut parent, &mut off);
        if rx == ry {
            if oy - ox != w {
                return false;
            }
        } else {
            parent[ry] = rx;
            off[ry] = ox + w - oy;
        }
    }
    true
}

fn relation_system(rels: &[(Form, Form)], opts: &[usize], composite_nonzero: bool) -> RelationSystem {
    let rows = rels.iter().zip(opts).map(|((x, y), &o)| relation_row(x, y, o)).collect();
    let mut nonvanishing: Vec<Form> = (0..4).map(var).collect();
    if composite_nonzero {
        for (x, y) in rels {
            for f in [x, y] {
                if !nonvanishing.contains(f) {
                    nonvanishing.push(f.clone());
                }
            }
        }
    }
    RelationSystem { rows, nonvanishing }
}

/// One emitted solution, values as exact rational strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
pub struct SolutionDoc {
    pub origin: String,
    pub values: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SearchReport {
    pub case: String,
    pub enumerated: usize,
    pub skipped: usize,
    pub solutions: Vec<SolutionDoc>,
    pub components: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_secs: Option<f64>,
}

fn linear_doc(origin: String, s: &LinearSolution) -> SolutionDoc {
    let mut values = BTreeMap::new();
    values.insert("lambda".into(), rational_to_string(&s.lambda));
    for (n, v) in ["a", "b", "c", "d"].iter().zip(&s.vector) {
        values.insert(n.to_string(), format!("{v}/1"));
    }
    SolutionDoc { origin, values }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ChunkResult {
    pub enumerated: usize,
    pub skipped: usize,
    pub solutions: Vec<SolutionDoc>,
    pub components: Vec<String>,
}

impl ChunkResult {
    fn merge(mut self, o: ChunkResult) -> ChunkResult {
        self.enumerated += o.enumerated;
        self.skipped += o.skipped;
        self.solutions.extend(o.solutions);
        self.components.extend(o.components);
        self
    }

    fn finish(mut self, case: &str) -> SearchReport {
        self.solutions.sort();
        self.solutions.dedup();
        self.components.sort();
        self.components.dedup();
        SearchReport {
            case: case.into(),
            enumerated: self.enumerated,
            skipped: self.skipped,
            solutions: self.solutions,
            components: self.components,
            runtime_secs: None,
        }
    }
}

fn run_option(rels: &[(Form, Form)], opts: &[usize], label: String, prefilter: bool) -> ChunkResult {
    let mut out = ChunkResult { enumerated: 1, ..Default::default() };
    if prefilter && !valuations_consistent(rels, opts) {
        out.skipped = 1;
        return out;
    }
    let res = solve_system(&relation_system(rels, opts, prefilter));
    if res.generic {
        out.components.push(format!("{label}: all lambda"));
    }
    out.solutions = res.solutions.iter().map(|s| linear_doc(label.clone(), s)).collect();
    out
}

pub const A1_SIZE: usize = 4096;
pub const A2_PER_BRANCH: usize = 65536;
pub const A2_SIZE: usize = 8 * A2_PER_BRANCH;

pub fn search_case_a1() -> SearchReport {
    let rels = a1_relations();
    (0..A1_SIZE)
        .into_par_iter()
        .map(|i| run_option(&rels, &option_digits(i, 6), format!("a1[{i}]"), false))
        .reduce(ChunkResult::default, ChunkResult::merge)
        .finish("a1")
}

/// Option vectors `range` of the second search; index = branch · 4^8 + options.
/// With `prefilter`, every form is also required nonzero and valuation-inconsistent vectors are skipped.
pub fn search_case_a2_range(range: std::ops::Range<usize>, prefilter: bool) -> ChunkResult {
    let branches: Vec<Vec<(Form, Form)>> = (0..8).map(a2_relations).collect();
    range
        .into_par_iter()
        .map(|i| {
            let (s, o) = (i / A2_PER_BRANCH, i % A2_PER_BRANCH);
            run_option(&branches[s], &option_digits(o, 8), format!("a2[{s}:{o}]"), prefilter)
        })
        .reduce(ChunkResult::default, ChunkResult::merge)
}

pub fn search_case_a2() -> SearchReport {
    search_case_a2_range(0..A2_SIZE, true).finish("a2")
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub chunk: usize,
    pub done: BTreeSet<usize>,
    pub partial: ChunkResult,
}

/// Runs the second search in chunks, persisting progress to `path` after each chunk.
pub fn search_case_a2_checkpointed(path: &Path, chunk: usize) -> Result<SearchReport, SearchError> {
    let err = |e: String| SearchError::Checkpoint(e);
    let mut cp = if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if cp.chunk != chunk {
            return Err(err(format!("chunk size {} in file, {} requested", cp.chunk, chunk)));
        }
        cp
    } else {
        Checkpoint { chunk, ..Default::default() }
    };
    let n = A2_SIZE.div_ceil(chunk);
    for c in 0..n {
        if cp.done.contains(&c) {
            continue;
        }
        let part = search_case_a2_range(c * chunk..((c + 1) * chunk).min(A2_SIZE), true);
        cp.partial = std::mem::take(&mut cp.partial).merge(part);
        cp.done.insert(c);
        let text = serde_json::to_string(&cp).map_err(|e| err(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| err(e.to_string()))?;
    }
    Ok(cp.partial.finish("a2"))
}

// ---------------------------------------------------------------------------
// Bivariate polynomials in (λ, μ)

/// Polynomial in μ whose coefficients are integer polynomials in λ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct BiPoly(Vec<Poly>);

impl BiPoly {
    pub fn new(mut c: Vec<Poly>) -> Self {
        while c.last().is_some_and(|p| p.is_zero()) {
            c.pop();
        }
        BiPoly(c)
    }

    pub fn lambda() -> Self {
        BiPoly::new(vec![Poly::x()])
    }

    pub fn mu() -> Self {
        BiPoly::new(vec![Poly::zero(), Poly::constant(1)])
    }

    pub fn constant(c: i128) -> Self {
        BiPoly::new(vec![Poly::constant(c)])
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn deg_mu(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Poly] {
        &self.0
    }

    fn lc(&self) -> Poly {
        self.0.last().cloned().unwrap_or_default()
    }

    pub fn add(&self, o: &BiPoly) -> BiPoly {
        let n = self.0.len().max(o.0.len());
        let z = Poly::zero();
        BiPoly::new((0..n).map(|i| self.0.get(i).unwrap_or(&z).add(o.0.get(i).unwrap_or(&z))).collect())
    }

    pub fn neg(&self) -> BiPoly {
        BiPoly(self.0.iter().map(|p| p.neg()).collect())
    }

    pub fn sub(&self, o: &BiPoly) -> BiPoly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &BiPoly) -> BiPoly {
        if self.is_zero() || o.is_zero() {
            return BiPoly::default();
        }
        let mut c = vec![Poly::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] = c[i + j].add(&a.mul(b));
            }
        }
        BiPoly::new(c)
    }

    fn scale_poly(&self, p: &Poly) -> BiPoly {
        BiPoly::new(self.0.iter().map(|c| c.mul(p)).collect())
    }

    fn shift_mu(&self, k: usize) -> BiPoly {
        if self.is_zero() {
            return BiPoly::default();
        }
        let mut c = vec![Poly::zero(); k];
        c.extend(self.0.iter().cloned());
        BiPoly(c)
    }

    /// Swaps the roles of λ and μ.
    pub fn transpose(&self) -> BiPoly {
        let n = self.0.iter().map(|p| p.coeffs().len()).max().unwrap_or(0);
        BiPoly::new(
            (0..n)
                .map(|i| Poly::new(self.0.iter().map(|p| p.coeffs().get(i).copied().unwrap_or(0)).collect()))
                .collect(),
        )
    }

    /// Gcd of the coefficient polynomials (a polynomial in λ).
    pub fn content(&self) -> Poly {
        self.0
            .iter()
            .filter(|p| !p.is_zero())
            .fold(Poly::zero(), |g, p| if g.is_zero() { p.primitive() } else { g.gcd(p).expect(OVERFLOW) })
    }

    fn div_poly(&self, p: &Poly) -> BiPoly {
        BiPoly::new(self.0.iter().map(|c| c.div_exact(p).expect("content divides")).collect())
    }

    fn primitive_part(&self) -> BiPoly {
        if self.is_zero() {
            return BiPoly::default();
        }
        let pp = self.div_poly(&self.content());
        if pp.lc().lc() < 0 {
            pp.neg()
        } else {
            pp
        }
    }

    fn prem(&self, d: &BiPoly) -> BiPoly {
        let dd = d.deg_mu().expect("nonzero divisor");
        let mut r = self.clone();
        while let Some(rd) = r.deg_mu() {
            if rd < dd {
                break;
            }
            r = r.scale_poly(&d.lc()).sub(&d.shift_mu(rd - dd).scale_poly(&r.lc()));
        }
        r
    }

    /// Gcd over Q[λ, μ], normalized to be primitive with positive leading coefficient.
    pub fn gcd(&self, o: &BiPoly) -> BiPoly {
        if self.is_zero() {
            return o.normalized();
        }
        if o.is_zero() {
            return self.normalized();
        }
        let c = self.content().gcd(&o.content()).expect(OVERFLOW);
        let (mut a, mut b) = (self.primitive_part(), o.primitive_part());
        if a.deg_mu() < b.deg_mu() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.prem(&b);
            a = b;
            b = r.primitive_part();
        }
        a.primitive_part().scale_poly(&c).normalized()
    }

    /// Exact quotient, if `d` divides `self`.
    pub fn div_exact(&self, d: &BiPoly) -> Option<BiPoly> {
        let dd = d.deg_mu()?;
        let mut r = self.clone();
        let mut q = BiPoly::default();
        while let Some(rd) = r.deg_mu() {
            if rd < dd {
                return None;
            }
            let t = BiPoly::new(vec![r.lc().div_exact(&d.lc())?]).shift_mu(rd - dd);
            q = q.add(&t);
            r = r.sub(&t.mul(d));
        }
        Some(q)
    }

    /// Divides out the integer content and fixes the sign of the leading term.
    pub fn normalized(&self) -> BiPoly {
        let g = self.0.iter().fold(0i128, |g, p| g.gcd(&p.content()));
        if g == 0 {
            return BiPoly::default();
        }
        let s = if self.lc().lc() < 0 { -g } else { g };
        BiPoly(self.0.iter().map(|p| Poly(p.coeffs().iter().map(|c| c / s).collect())).collect())
    }

    /// Coefficients in μ after substituting λ.
    pub fn at_lambda(&self, l: &Q) -> Vec<Q> {
        self.0.iter().map(|p| p.eval(l)).collect()
    }

    pub fn eval(&self, l: &Q, m: &Q) -> Q {
        self.at_lambda(l).iter().rev().fold(Q::zero(), |acc, c| acc * m + c)
    }

    pub fn display(&self) -> String {
        let mut terms: Vec<((usize, usize), i128)> = Vec::new();
        for (j, p) in self.0.iter().enumerate() {
            for (i, c) in p.coeffs().iter().enumerate() {
                if *c != 0 {
                    terms.push(((i + j, j), *c));
                }
            }
        }
        terms.sort_by_key(|((tot, j), _)| (std::cmp::Reverse(*tot), *j));
        let mono = |i: usize, j: usize| {
            let f = |v: &str, e: usize| match e {
                0 => None,
                1 => Some(v.to_string()),
                _ => Some(format!("{v}^{e}")),
            };
            [f("lambda", i), f("mu", j)].into_iter().flatten().collect::<Vec<_>>().join("*")
        };
        let t: Vec<(i128, String)> = terms.iter().map(|((tot, j), c)| (*c, mono(tot - j, *j))).collect();
        render_terms(&t)
    }
}

/// Resultant in μ of two polynomials.
pub fn resultant_mu(a: &BiPoly, b: &BiPoly) -> Poly {
    let (m, n) = match (a.deg_mu(), b.deg_mu()) {
        (Some(m), Some(n)) => (m, n),
        _ => return Poly::zero(),
    };
    if m == 0 && n == 0 {
        return Poly::constant(1);
    }
    let size = m + n;
    let mut s = vec![vec![Poly::zero(); size]; size];
    // rows hold coefficients from high to low μ-degree
    for i in 0..n {
        for (k, c) in a.0.iter().rev().enumerate() {
            s[i][i + k] = c.clone();
        }
    }
    for i in 0..m {
        for (k, c) in b.0.iter().rev().enumerate() {
            s[n + i][i + k] = c.clone();
        }
    }
    det(&s)
}

// ---------------------------------------------------------------------------
// Two-parameter search

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairOrigin {
    pub pairing: usize,
    pub first: usize,
    pub second: usize,
}

#[derive(Clone, Debug, Default)]
pub struct A3Result {
    /// Isolated rational points with λ, μ ∉ {-1, 0, 1}, keyed with one originating relation pair.
    pub points: BTreeMap<(Q, Q), PairOrigin>,
    /// Curves of solutions (normalized polynomials), excluded lines removed.
    pub components: BTreeMap<BiPoly, PairOrigin>,
}

fn a3_pairings() -> [[(BiPoly, BiPoly); 2]; 3] {
    let (l, m, one) = (BiPoly::lambda(), BiPoly::mu(), BiPoly::constant(1));
    let mu1 = m.add(&one);
    let nl1 = l.add(&one).neg();
    [
        [(mu1.clone(), nl1.clone()), (l.clone(), m.neg())],
        [(mu1.clone(), l.clone()), (nl1.clone(), m.neg())],
        [(mu1, m.neg()), (l, nl1)],
    ]
}

/// Equation for option `opt` of `x ~ y` with two parameters: options 0..4 use λ, 4..8 use μ.
pub fn a3_equation(x: &BiPoly, y: &BiPoly, opt: usize) -> BiPoly {
    let p = if opt < 4 { BiPoly::lambda() } else { BiPoly::mu() };
    let o = opt % 4;
    let (u, v) = if o < 2 { (x, y) } else { (y, x) };
    let pu = p.mul(u);
    if o % 2 == 0 {
        pu.sub(v)
    } else {
        pu.add(v)
    }
}

/// The relation pair for index `i` in 0..192.
pub fn a3_pair(i: usize) -> (BiPoly, BiPoly, PairOrigin) {
    let o = PairOrigin { pairing: i / 64, first: (i / 8) % 8, second: i % 8 };
    let p = &a3_pairings()[o.pairing];
    (a3_equation(&p[0].0, &p[0].1, o.first), a3_equation(&p[1].0, &p[1].1, o.second), o)
}

fn admissible_line_roots(p: &Poly) -> Vec<Q> {
    if p.degree().unwrap_or(0) == 0 {
        return Vec::new();
    }
    rational_roots(p.coeffs()).expect("nonzero").into_iter().filter(|r| !excluded(r)).collect()
}

/// Curve components of the common zero set of a pair, excluded lines dropped.
fn components_of(g: &BiPoly) -> Vec<BiPoly> {
    let mut out = Vec::new();
    if g.deg_mu().is_none() {
        return out;
    }
    let cl = g.content();
    let rest = g.primitive_part();
    let cm = rest.transpose().content();
    let core = rest.transpose().primitive_part().transpose().normalized();
    for r in admissible_line_roots(&cl) {
        // λ - r, scaled to integers
        let (n, d) = (r.numer().to_i128().unwrap(), r.denom().to_i128().unwrap());
        out.push(BiPoly::new(vec![Poly::new(vec![-n, d])]).normalized());
    }
    for r in admissible_line_roots(&cm) {
        let (n, d) = (r.numer().to_i128().unwrap(), r.denom().to_i128().unwrap());
        out.push(BiPoly::new(vec![Poly::constant(-n), Poly::constant(d)]).normalized());
    }
    if core.deg_mu().unwrap_or(0) > 0 || core.0.first().is_some_and(|p| p.degree().unwrap_or(0) > 0) {
        out.push(core);
    }
    out
}

/// Common rational zeros with λ, μ ∉ {-1, 0, 1} of two coprime polynomials, via the resultant in μ.
pub fn isolated_points(e1: &BiPoly, e2: &BiPoly) -> BTreeSet<(Q, Q)> {
    let mut pts = BTreeSet::new();
    let res = resultant_mu(e1, e2);
    if res.is_zero() || res.degree() == Some(0) {
        return pts;
    }
    for l in rational_roots(res.coeffs()).expect("nonzero resultant") {
        if excluded(&l) {
            continue;
        }
        let (u1, u2) = (e1.at_lambda(&l), e2.at_lambda(&l));
        let nz = |u: &[Q]| u.iter().any(|c| !c.is_zero());
        let u = if nz(&u1) { &u1 } else { &u2 };
        if !nz(u) {
            continue;
        }
        let roots = if u.len() == 1 { Vec::new() } else { rational_roots_q(u).expect("small coefficients") };
        for m in roots {
            if !excluded(&m) && e1.eval(&l, &m).is_zero() && e2.eval(&l, &m).is_zero() {
                pts.insert((l.clone(), m));
            }
        }
    }
    pts
}

/// Points from solving a μ-linear equation and substituting; None when neither equation is linear in μ
/// or the pair shares a factor.
pub fn substitution_points(e1: &BiPoly, e2: &BiPoly) -> Option<BTreeSet<(Q, Q)>> {
    let (lin, other) = if e1.deg_mu() == Some(1) {
        (e1, e2)
    } else if e2.deg_mu() == Some(1) {
        (e2, e1)
    } else {
        return None;
    };
    let g = e1.gcd(e2);
    if g.deg_mu() != Some(0) || g.coeffs()[0].degree() != Some(0) {
        return None;
    }
    let (b, a) = (&lin.0[0], &lin.0[1]);
    let n = other.deg_mu()?;
    // other(λ, -b/a) · a^n
    let nb = b.neg();
    let num = other
        .0
        .iter()
        .enumerate()
        .fold(Poly::zero(), |acc, (i, c)| acc.add(&c.mul(&nb.pow(i)).mul(&a.pow(n - i))));
    let mut pts = BTreeSet::new();
    if num.is_zero() {
        return None;
    }
    for l in rational_roots(num.coeffs()).ok()? {
        let al = a.eval(&l);
        if excluded(&l) || al.is_zero() {
            continue;
        }
        let m = -b.eval(&l) / al;
        if !excluded(&m) && e1.eval(&l, &m).is_zero() && e2.eval(&l, &m).is_zero() {
            pts.insert((l, m));
        }
    }
    Some(pts)
}

pub const A3_SIZE: usize = 192;

pub fn search_case_a3() -> A3Result {
    let mut out = A3Result::default();
    for i in 0..A3_SIZE {
        let (e1, e2, origin) = a3_pair(i);
        let g = e1.gcd(&e2);
        for c in components_of(&g) {
            out.components.entry(c).or_insert_with(|| origin.clone());
        }
        let (r1, r2) = if g.deg_mu().unwrap_or(0) == 0 && g.coeffs().first().is_some_and(|p| p.degree() == Some(0)) {
            (e1.clone(), e2.clone())
        } else {
            (e1.div_exact(&g).expect("gcd divides"), e2.div_exact(&g).expect("gcd divides"))
        };
        for p in isolated_points(&r1, &r2) {
            out.points.entry(p).or_insert_with(|| origin.clone());
        }
    }
    out
}

impl A3Result {
    pub fn report(&self) -> SearchReport {
        let solutions = self
            .points
            .iter()
            .map(|((l, m), o)| SolutionDoc {
                origin: format!("pairing {} options ({}, {})", o.pairing, o.first, o.second),
                values: BTreeMap::from([
                    ("lambda".to_string(), rational_to_string(l)),
                    ("mu".to_string(), rational_to_string(m)),
                ]),
            })
            .collect();
        SearchReport {
            case: "a3".into(),
            enumerated: A3_SIZE,
            skipped: 0,
            solutions,
            components: self.components.keys().map(|c| format!("{} = 0", c.display())).collect(),
            runtime_secs: None,
        }
    }

    /// Points that lie on a reported component.
    pub fn on_components(&self) -> Vec<(Q, Q)> {
        self.points
            .keys()
            .filter(|(l, m)| self.components.keys().any(|c| c.eval(l, m).is_zero()))
            .cloned()
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Case D

pub const D_VALUES: [&str; 4] = ["alpha+1", "alpha^2-1", "-alpha", "-alpha^2"];
pub const D_RATIOS: [&str; 4] = ["alpha", "-alpha", "alpha/(1+alpha)", "-alpha/(1+alpha)"];
const D_PAIRINGS: [[[usize; 2]; 2]; 3] = [[[0, 1], [2, 3]], [[0, 2], [1, 3]], [[0, 3], [1, 2]]];

fn d_values() -> [Poly; 4] {
    [Poly::new(vec![1, 1]), Poly::new(vec![-1, 0, 1]), Poly::new(vec![0, -1]), Poly::new(vec![0, 0, -1])]
}

fn d_ratio(i: usize) -> (Poly, Poly) {
    let a = Poly::x();
    let one_plus = Poly::new(vec![1, 1]);
    match i {
        0 => (a, Poly::constant(1)),
        1 => (a.neg(), Poly::constant(1)),
        2 => (a, one_plus),
        _ => (a.neg(), one_plus),
    }
}

/// One way of pairing the four values with prescribed ratios numerator/denominator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DWitness {
    /// (numerator index, denominator index, ratio index) per pair.
    pub pairs: [(usize, usize, usize); 2],
}

impl DWitness {
    pub fn describe(&self) -> String {
        self.pairs
            .iter()
            .map(|(n, d, r)| format!("({})/({}) = {}", D_VALUES[*n], D_VALUES[*d], D_RATIOS[*r]))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Exact check at a given α.
    pub fn holds_at(&self, alpha: &Q) -> bool {
        let v = d_values();
        self.pairs.iter().all(|(n, d, r)| {
            let (rn, rd) = d_ratio(*r);
            let (x, y, den) = (v[*n].eval(alpha), v[*d].eval(alpha), rd.eval(alpha));
            !y.is_zero() && !den.is_zero() && x / y == rn.eval(alpha) / den
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct DResult {
    pub values: BTreeMap<Q, Vec<DWitness>>,
    /// Witnesses satisfied identically in α.
    pub identities: Vec<DWitness>,
    pub enumerated: usize,
}

pub fn d_witnesses() -> Vec<DWitness> {
    let mut out = Vec::new();
    for p in D_PAIRINGS {
        let orient = |pair: [usize; 2], flip: bool| if flip { (pair[1], pair[0]) } else { (pair[0], pair[1]) };
        for f1 in [false, true] {
            for f2 in [false, true] {
                for r1 in 0..4 {
                    for r2 in 0..4 {
                        let (n1, d1) = orient(p[0], f1);
                        let (n2, d2) = orient(p[1], f2);
                        out.push(DWitness { pairs: [(n1, d1, r1), (n2, d2, r2)] });
                    }
                }
            }
        }
    }
    out
}

pub fn search_case_d() -> DResult {
    let v = d_values();
    let mut out = DResult::default();
    for w in d_witnesses() {
        out.enumerated += 1;
        let eqs: Vec<Poly> = w
            .pairs
            .iter()
            .map(|(n, d, r)| {
                let (rn, rd) = d_ratio(*r);
                rd.mul(&v[*n]).sub(&rn.mul(&v[*d]))
            })
            .collect();
        let nonzero: Vec<&Poly> = eqs.iter().filter(|p| !p.is_zero()).collect();
        let Some(first) = nonzero.first() else {
            out.identities.push(w);
            continue;
        };
        for a in rational_roots(first.coeffs()).expect("nonzero") {
            if !excluded(&a) && w.holds_at(&a) {
                out.values.entry(a).or_default().push(w.clone());
            }
        }
    }
    out
}

impl DResult {
    pub fn report(&self) -> SearchReport {
        let solutions = self
            .values
            .iter()
            .flat_map(|(a, ws)| {
                ws.iter().map(move |w| SolutionDoc {
                    origin: w.describe(),
                    values: BTreeMap::from([("alpha".to_string(), rational_to_string(a))]),
                })
            })
            .collect();
        SearchReport {
            case: "d".into(),
            enumerated: self.enumerated,
            skipped: 0,
            solutions,
            components: self.identities.iter().map(|w| format!("identity: {}", w.describe())).collect(),
            runtime_secs: None,
        }
    }
}

/// Runs one search by name ("a1", "a2", "a3", "d").
pub fn run_search(case: &str) -> Option<SearchReport> {
    let start = std::time::Instant::now();
    let mut r = match case {
        "a1" => search_case_a1(),
        "a2" => search_case_a2(),
        "a3" => search_case_a3().report(),
        "d" => search_case_d().report(),
        _ => return None,
    };
    r.runtime_secs = Some(start.elapsed().as_secs_f64());
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qq(n: i64, d: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn roots() {
        assert_eq!(rational_roots(&[-1, -1, 2]).unwrap(), vec![qq(-1, 2), qq(1, 1)]);
        assert!(rational_roots(&[1, 0, 1]).unwrap().is_empty());
        assert_eq!(rational_roots(&[0, -1, 0, 1]).unwrap(), vec![qq(-1, 1), qq(0, 1), qq(1, 1)]);
        assert_eq!(rational_roots(&[0, 0]), Err(SearchError::ZeroPolynomial));
        assert_eq!(rational_roots(&[7]).unwrap(), vec![]);
        // (3x - 2)(5x + 7)
        assert_eq!(rational_roots(&[-14, 11, 15]).unwrap(), vec![qq(-7, 5), qq(2, 3)]);
    }

    #[test]
    fn poly_arithmetic() {
        let p = Poly::new(vec![-1, 0, 1]);
        let q = Poly::new(vec![1, 1]);
        assert_eq!(p.div_exact(&q), Some(Poly::new(vec![-1, 1])));
        assert_eq!(q.div_exact(&Poly::new(vec![0, 2])), None);
        assert_eq!(p.gcd(&Poly::new(vec![2, 3, 1])).unwrap(), q);
        assert_eq!(Poly::new(vec![-1, -1, 2]).display("x"), "2*x^2 - x - 1");
        let g = BiPoly::lambda().mul(&BiPoly::mu()).add(&BiPoly::lambda()).add(&BiPoly::mu());
        assert_eq!(g.display(), "lambda*mu + lambda + mu");
        let h = g.mul(&BiPoly::mu().sub(&BiPoly::constant(2)));
        assert_eq!(h.gcd(&g.mul(&BiPoly::lambda())), g);
        assert_eq!(h.div_exact(&g), Some(BiPoly::mu().sub(&BiPoly::constant(2))));
        // Res_μ(μ - λ, μ + λ - 2) = 2 - 2λ up to sign
        let r = resultant_mu(&BiPoly::mu().sub(&BiPoly::lambda()), &BiPoly::mu().add(&BiPoly::lambda()).sub(&BiPoly::constant(2)));
        assert_eq!(r.primitive(), Poly::new(vec![-1, 1]));
    }

    #[test]
    fn a1_is_empty() {
        let r = search_case_a1();
        assert_eq!(r.enumerated, 4096);
        assert!(r.solutions.is_empty(), "{:?}", r.solutions);
        assert!(r.components.is_empty());
    }

    #[test]
    fn forced_lambda_one_is_excluded() {
        // λa = b together with λb = a forces λ² = 1
        let f = Forms::new();
        let rels = vec![(f.a.clone(), f.b.clone()), (f.a.clone(), f.b.clone())];
        let sys = relation_system(&rels, &[0, 2], false);
        let out = solve_system(&sys);
        assert!(out.solutions.is_empty() && !out.generic);
        assert_eq!(out.excluded, 2);
        assert!(!valuations_consistent(&rels, &[0, 2]));
        assert!(valuations_consistent(&rels, &[0, 1]));
    }

    #[test]
    fn planted_solutions_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (num, den) = loop {
                let n: i128 = rng.gen_range(-9..=9);
                let d: i128 = rng.gen_range(1..=5);
                if n.gcd(&d) == 1 && n.abs() != d && n != 0 {
                    break (n, d);
                }
            };
            let point: Vec<i128> = (0..4)
                .map(|_| loop {
                    let v = rng.gen_range(-6i128..=6);
                    if v != 0 {
                        break v;
                    }
                })
                .collect();
            // rows s(λ)·w + (dλ - n)·z with w ⊥ point, so every row vanishes at (n/d, point)
            let vanish = Poly::new(vec![-num, den]);
            let rows: Vec<Form> = (0..6)
                .map(|i| {
                    let (x, y) = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)][i];
                    let mut w = vec![0i128; 4];
                    w[x] = point[y];
                    w[y] = -point[x];
                    let s = Poly::constant(rng.gen_range(1..=3));
                    (0..4)
                        .map(|j| s.scale(w[j]).add(&vanish.mul(&Poly::constant(rng.gen_range(-4..=4)))))
                        .collect()
                })
                .collect();
            let sys = RelationSystem { rows, nonvanishing: (0..4).map(var).collect() };
            let out = solve_system(&sys);
            let planted = qq(num as i64, den as i64);
            let expect: Vec<BigInt> = {
                let g = point.iter().fold(0i128, |g, v| g.gcd(v));
                let s = if point[0] < 0 { -g } else { g };
                point.iter().map(|v| BigInt::from(v / s)).collect()
            };
            if generic_rank(&sys.rows) < 4 {
                continue;
            }
            assert!(
                out.solutions.iter().any(|s| s.lambda == planted && s.vector == expect),
                "planted {planted} {point:?} not in {:?}",
                out.solutions
            );
        }
    }

    #[test]
    fn valuation_filter_matches_linear_algebra() {
        // consistency of the potentials, decided by rank instead of union-find
        let rels = a2_relations(5);
        let mut skipped = 0;
        for o in (0..A2_PER_BRANCH).step_by(37) {
            let opts = option_digits(o, 8);
            let (n, edges) = valuation_edges(&rels, &opts);
            let a: Vec<Vec<Q>> = edges
                .iter()
                .map(|(x, y, _)| {
                    let mut r = vec![Q::zero(); n];
                    r[*y] += Q::one();
                    r[*x] -= Q::one();
                    r
                })
                .collect();
            let ab: Vec<Vec<Q>> = a.iter().zip(&edges).map(|(r, e)| {
                let mut r = r.clone();
                r.push(qq(e.2, 1));
                r
            }).collect();
            let consistent = rank(&a) == rank(&ab);
            assert_eq!(consistent, valuations_consistent(&rels, &opts), "option {o}");
            skipped += usize::from(!consistent);
        }
        assert!(skipped > 0);
    }

    #[test]
    fn a3_matches_listed_pairs() {
        let r = search_case_a3();
        let listed = [
            (1, 2, -1, 4), (-1, 4, 1, 2), (-2, 1, -1, 3), (-1, 3, -2, 1),
            (-2, 1, -2, 3), (-2, 3, -2, 1), (1, 2, -3, 4), (-3, 4, 1, 2),
            (-2, 1, 3, 1), (3, 1, -2, 1), (-2, 1, -5, 1), (-5, 1, -2, 1), (-2, 1, -2, 1),
        ];
        let want: BTreeSet<(Q, Q)> = listed.iter().map(|&(a, b, c, d)| (qq(a, b), qq(c, d))).collect();
        let got: BTreeSet<(Q, Q)> = r.points.keys().cloned().collect();
        assert_eq!(got, want);
        let comps: Vec<String> = r.components.keys().map(|c| c.display()).collect();
        assert_eq!(comps, vec!["lambda*mu + lambda + mu"]);
        assert_eq!(r.on_components(), vec![(qq(-2, 1), qq(-2, 1))]);
        for ((l, m), o) in &r.points {
            let (e1, e2, _) = a3_pair(o.pairing * 64 + o.first * 8 + o.second);
            assert!(e1.eval(l, m).is_zero() && e2.eval(l, m).is_zero());
        }
    }

    #[test]
    fn a3_solvers_agree() {
        let mut compared = 0;
        for i in 0..A3_SIZE {
            let (e1, e2, _) = a3_pair(i);
            if let Some(sub) = substitution_points(&e1, &e2) {
                let lin = if e1.deg_mu() == Some(1) { &e1 } else { &e2 };
                let res: BTreeSet<(Q, Q)> = isolated_points(&e1, &e2)
                    .into_iter()
                    .filter(|(l, _)| !lin.coeffs()[1].eval(l).is_zero())
                    .collect();
                assert_eq!(sub, res, "pair {i}");
                compared += 1;
            }
        }
        assert!(compared > 50, "{compared}");
    }

    #[test]
    fn case_d_is_one_half() {
        let d = search_case_d();
        assert_eq!(d.enumerated, 192);
        assert_eq!(d.values.keys().cloned().collect::<Vec<_>>(), vec![qq(1, 2)]);
        let ws = &d.values[&qq(1, 2)];
        assert!(ws.iter().all(|w| w.holds_at(&qq(1, 2))));
        assert!(ws.iter().any(|w| w.describe() == "(-alpha)/(alpha+1) = -alpha/(1+alpha), (-alpha^2)/(alpha^2-1) = alpha/(1+alpha)"), "{:?}", ws.iter().map(|w| w.describe()).collect::<Vec<_>>());
    }

    #[test]
    fn a2_is_empty() {
        let r = search_case_a2();
        assert_eq!(r.enumerated, A2_SIZE);
        // frozen from an independent breadth-first potential check over all 8·4^8 vectors
        assert_eq!(r.skipped, 456_192);
        assert!(r.solutions.is_empty() && r.components.is_empty());
    }

    #[test]
    fn a2_unfiltered_sample_is_empty() {
        // without the valuation filter or the composite constraints
        for start in (0..A2_SIZE).step_by(A2_SIZE / 16) {
            let c = search_case_a2_range(start..start + 2048, false);
            assert_eq!(c.skipped, 0);
            assert!(c.solutions.is_empty() && c.components.is_empty(), "{:?}", c.solutions);
        }
    }

    #[test]
    fn a2_checkpoint_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a2.json");
        let branch_skips = [55296, 55296, 57856, 57856, 57856, 57856, 57856];
        let cp = Checkpoint {
            chunk: A2_PER_BRANCH,
            done: (0..7).collect(),
            partial: ChunkResult { enumerated: 7 * A2_PER_BRANCH, skipped: branch_skips.iter().sum(), ..Default::default() },
        };
        std::fs::write(&path, serde_json::to_string(&cp).unwrap()).unwrap();
        let r = search_case_a2_checkpointed(&path, A2_PER_BRANCH).unwrap();
        assert_eq!((r.enumerated, r.skipped), (A2_SIZE, 456_192));
        let saved: Checkpoint = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(saved.done.len(), 8);
        assert!(matches!(search_case_a2_checkpointed(&path, 1000), Err(SearchError::Checkpoint(_))));
    }

}
