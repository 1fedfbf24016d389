//! Fourier templates and the σ functional.

use crate::classify::{coincidental, is_lambda_common};
use crate::linalg::{self, Q};
use crate::sysalg::{self, LinearSystem, SysError};
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use thiserror::Error;

/// Exact Gaussian rational.
pub type GaussQ = Complex<BigRational>;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("template is not hermitian at {0:?}")]
    NonHermitian(Vec<i128>),
    #[error("template assigns a value at the origin")]
    OriginAssignment,
    #[error("no negative template found in {0} trials")]
    NotFound(usize),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("integer overflow while evaluating images")]
    Overflow,
    #[error("template dimension {0} does not match {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    System(#[from] SysError),
}

pub fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * x)
}

pub fn gauss(re: i64, im: i64) -> GaussQ {
    Complex::new(linalg::q(re), linalg::q(im))
}

pub fn gauss_ratio(re: (i64, i64), im: (i64, i64)) -> GaussQ {
    Complex::new(
        BigRational::new(re.0.into(), re.1.into()),
        BigRational::new(im.0.into(), im.1.into()),
    )
}

pub fn gauss_to_c64(z: &GaussQ) -> Complex64 {
    Complex64::new(z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN))
}

fn is_canonical_half(r: &[i128]) -> bool {
    r.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

fn neg(r: &[i128]) -> Vec<i128> {
    r.iter().map(|x| -x).collect()
}

/// A finitely supported hermitian function g: Z^d → C with g(0) = 0.
#[derive(Clone, Debug)]
pub struct FourierTemplate {
    d: usize,
    keys: Vec<Vec<i128>>,
    vals: Vec<Complex64>,
    exact: Option<Vec<GaussQ>>,
    index: HashMap<Vec<i128>, usize>,
}

impl PartialEq for FourierTemplate {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.keys == other.keys && self.vals == other.vals && self.exact == other.exact
    }
}

impl FourierTemplate {
    pub fn zero(d: usize) -> Self {
        Self::build(d, Vec::new(), Vec::new(), Some(Vec::new()))
    }

    fn build(d: usize, keys: Vec<Vec<i128>>, vals: Vec<Complex64>, exact: Option<Vec<GaussQ>>) -> Self {
        let index = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        FourierTemplate { d, keys, vals, exact, index }
    }

    /// Builds from explicit values; both r and −r must be present and conjugate.
    pub fn from_map(d: usize, map: BTreeMap<Vec<i128>, Complex64>) -> Result<Self, TemplateError> {
        for (r, v) in &map {
            if r.len() != d {
                return Err(TemplateError::DimensionMismatch(r.len(), d));
            }
            if r.iter().all(|&x| x == 0) {
                if v.norm() == 0.0 {
                    continue;
                }
                return Err(TemplateError::OriginAssignment);
            }
            let w = map.get(&neg(r)).copied().unwrap_or_default();
            if (w - v.conj()).norm() > HERMITIAN_TOL * (1.0 + v.norm()) {
                return Err(TemplateError::NonHermitian(r.clone()));
            }
        }
        let (keys, vals): (Vec<_>, Vec<_>) =
            map.into_iter().filter(|(r, v)| v.norm() != 0.0 && r.iter().any(|&x| x != 0)).unzip();
        Ok(Self::build(d, keys, vals, None))
    }

    /// Builds from exact values given on any set of points; the hermitian closure is added.
    pub fn from_exact_half(d: usize, points: &[(Vec<i128>, GaussQ)]) -> Result<Self, TemplateError> {
        let mut map: BTreeMap<Vec<i128>, GaussQ> = BTreeMap::new();
        for (r, v) in points {
            if r.len() != d {
                return Err(TemplateError::DimensionMismatch(r.len(), d));
            }
            if r.iter().all(|&x| x == 0) {
                return Err(TemplateError::OriginAssignment);
            }
            for (key, val) in [(r.clone(), v.clone()), (neg(r), v.conj())] {
                if let Some(old) = map.get(&key) {
                    if *old != val {
                        return Err(TemplateError::NonHermitian(key));
                    }
                }
                map.insert(key, val);
            }
        }
        map.retain(|_, v| !v.is_zero());
        let keys: Vec<Vec<i128>> = map.keys().cloned().collect();
        let ex: Vec<GaussQ> = map.into_values().collect();
        let vals = ex.iter().map(gauss_to_c64).collect();
        Ok(Self::build(d, keys, vals, Some(ex)))
    }

    /// Builds from floating values given on any set of points; the hermitian closure is added.
    pub fn from_half(d: usize, points: &[(Vec<i128>, Complex64)]) -> Result<Self, TemplateError> {
        let mut map: BTreeMap<Vec<i128>, Complex64> = BTreeMap::new();
        for (r, v) in points {
            if r.len() != d {
                return Err(TemplateError::DimensionMismatch(r.len(), d));
            }
            if r.iter().all(|&x| x == 0) {
                return Err(TemplateError::OriginAssignment);
            }
            for (key, val) in [(r.clone(), *v), (neg(r), v.conj())] {
                if let Some(old) = map.get(&key) {
                    if (*old - val).norm() > HERMITIAN_TOL * (1.0 + val.norm()) {
                        return Err(TemplateError::NonHermitian(key));
                    }
                }
                map.insert(key, val);
            }
        }
        Self::from_map(d, map)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn len(&self) -> usize {
        self.keys.len()
    }
    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }
    pub fn support(&self) -> &[Vec<i128>] {
        &self.keys
    }
    pub fn get(&self, r: &[i128]) -> Complex64 {
        self.index.get(r).map(|&i| self.vals[i]).unwrap_or_default()
    }
    pub fn get_exact(&self, r: &[i128]) -> Option<GaussQ> {
        let ex = self.exact.as_ref()?;
        Some(self.index.get(r).map(|&i| ex[i].clone()).unwrap_or_else(GaussQ::zero))
    }
    pub fn max_abs_coord(&self) -> i128 {
        self.keys.iter().flat_map(|k| k.iter().map(|x| x.abs())).max().unwrap_or(0)
    }
    pub fn max_abs_value(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
    /// Entries (r, g(r)) in sorted key order.
    pub fn entries(&self) -> impl Iterator<Item = (&Vec<i128>, Complex64)> {
        self.keys.iter().zip(self.vals.iter().copied())
    }
    pub fn canonical_entries(&self) -> Vec<(Vec<i128>, Complex64)> {
        self.entries().filter(|(r, _)| is_canonical_half(r)).map(|(r, v)| (r.clone(), v)).collect()
    }

    pub fn to_doc(&self) -> TemplateDoc {
        let entries = self
            .keys
            .iter()
            .enumerate()
            .filter(|(_, r)| is_canonical_half(r))
            .map(|(i, r)| TemplateEntry {
                r: r.iter().map(|x| x.to_string()).collect(),
                re: self.vals[i].re,
                im: self.vals[i].im,
                exact: self.exact.as_ref().map(|ex| (ex[i].re.to_string(), ex[i].im.to_string())),
            })
            .collect();
        TemplateDoc { d: self.d, entries }
    }

    pub fn from_doc(doc: &TemplateDoc) -> Result<Self, TemplateError> {
        let parse = |s: &str| s.parse::<i128>().map_err(|_| TemplateError::Overflow);
        let mut pts = Vec::new();
        let mut exact = Vec::new();
        for en in &doc.entries {
            let r: Vec<i128> = en.r.iter().map(|s| parse(s)).collect::<Result<_, _>>()?;
            if let Some((re, im)) = &en.exact {
                let re: BigRational = re.parse().map_err(|_| TemplateError::Overflow)?;
                let im: BigRational = im.parse().map_err(|_| TemplateError::Overflow)?;
                exact.push((r.clone(), Complex::new(re, im)));
            }
            pts.push((r, Complex64::new(en.re, en.im)));
        }
        if exact.len() == pts.len() {
            Self::from_exact_half(doc.d, &exact)
        } else {
            Self::from_half(doc.d, &pts)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TemplateEntry {
    /// Coordinates as decimal strings (grid points can exceed 64 bits).
    pub r: Vec<String>,
    pub re: f64,
    pub im: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TemplateDoc {
    pub d: usize,
    pub entries: Vec<TemplateEntry>,
}

/// The value of σ together with its exact form when the template is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaValue {
    pub re: f64,
    pub im: f64,
    pub exact: Option<GaussQ>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SigmaEntry {
    pub b: Vec<usize>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SigmaReport {
    pub per_b: Vec<SigmaEntry>,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub total_exact: Option<String>,
    pub imag_residual: f64,
}

impl SigmaReport {
    pub fn realness_ok(&self) -> bool {
        self.imag_residual <= 1e-9 * (1.0 + self.total.abs())
    }
}

/// m columns with nonzero determinant, preferring the smallest |det|.
fn pick_columns(rows: &[Vec<i64>]) -> Option<(Vec<usize>, i128, Vec<Vec<i128>>)> {
    let m = rows.len();
    let k = rows[0].len();
    let mut best: Option<(Vec<usize>, i128, Vec<Vec<i128>>)> = None;
    for cols in sysalg::subsets(k, m) {
        let a: Vec<Vec<Q>> = (0..m).map(|i| cols.iter().map(|&j| linalg::q(rows[i][j])).collect()).collect();
        if linalg::rank(&a) < m {
            continue;
        }
        let (det, adj) = adjugate(&a);
        if best.as_ref().is_none_or(|b| det.abs() < b.1.abs()) {
            best = Some((cols, det, adj));
        }
    }
    best
}

/// Integer determinant and adjugate of a square matrix with integer entries.
fn adjugate(a: &[Vec<Q>]) -> (i128, Vec<Vec<i128>>) {
    let det = linalg::det(a);
    let inv = linalg::inverse(a).expect("nonsingular");
    let adj = inv
        .iter()
        .map(|row| row.iter().map(|x| (x * &det).to_integer().to_i128().expect("adjugate fits")).collect())
        .collect();
    (det.to_integer().to_i128().expect("determinant fits"), adj)
}

/// Solves R·A = S for every coordinate and returns the images R·a_j of all columns,
/// or None when R is not integral.
struct Solver {
    rows: Vec<Vec<i128>>,
    det: i128,
    adj: Vec<Vec<i128>>,
}

impl Solver {
    fn new(rows: &[Vec<i64>]) -> Result<Self, TemplateError> {
        let (_, det, adj) =
            pick_columns(rows).ok_or(TemplateError::System(SysError::RankDeficient))?;
        Ok(Solver { rows: rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect(), det, adj })
    }
    fn m(&self) -> usize {
        self.rows.len()
    }
    fn k(&self) -> usize {
        self.rows[0].len()
    }
    /// `pts[j]` is the support point assigned to chosen column j.
    fn images(&self, pts: &[&Vec<i128>], d: usize) -> Result<Option<Vec<Vec<i128>>>, TemplateError> {
        let m = self.m();
        let mut r = vec![vec![0i128; m]; d];
        for t in 0..d {
            for c in 0..m {
                let mut s: i128 = 0;
                for j in 0..m {
                    s = pts[j][t]
                        .checked_mul(self.adj[j][c])
                        .and_then(|x| s.checked_add(x))
                        .ok_or(TemplateError::Overflow)?;
                }
                if s % self.det != 0 {
                    return Ok(None);
                }
                r[t][c] = s / self.det;
            }
        }
        let mut out = Vec::with_capacity(self.k());
        for j in 0..self.k() {
            let mut img = vec![0i128; d];
            for t in 0..d {
                let mut s: i128 = 0;
                for c in 0..m {
                    s = r[t][c]
                        .checked_mul(self.rows[c][j])
                        .and_then(|x| s.checked_add(x))
                        .ok_or(TemplateError::Overflow)?;
                }
                img[t] = s;
            }
            out.push(img);
        }
        Ok(Some(out))
    }
}

fn for_each_tuple(n: usize, m: usize, mut f: impl FnMut(&[usize]) -> Result<(), TemplateError>) -> Result<(), TemplateError> {
    if n == 0 {
        return Ok(());
    }
    let mut idx = vec![0usize; m];
    loop {
        f(&idx)?;
        let mut p = m;
        loop {
            if p == 0 {
                return Ok(());
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < n {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// σ for an explicit coefficient matrix (rows need only be independent).
pub fn sigma_rows(rows: &[Vec<i64>], g: &FourierTemplate) -> Result<SigmaValue, TemplateError> {
    if g.is_empty() {
        return Ok(SigmaValue { re: 0.0, im: 0.0, exact: g.exact.as_ref().map(|_| GaussQ::zero()) });
    }
    let solver = Solver::new(rows)?;
    let m = solver.m();
    let n = g.len();
    let d = g.d;
    // partition the first index into fixed chunks so the float sum order is deterministic
    let firsts: Vec<usize> = (0..n).collect();
    let chunk = 64usize;
    let partials: Vec<Result<(Complex64, Option<GaussQ>), TemplateError>> = firsts
        .par_chunks(chunk)
        .map(|firsts| {
            let mut acc = Complex64::zero();
            let mut acc_ex = g.exact.as_ref().map(|_| GaussQ::zero());
            let mut pts: Vec<&Vec<i128>> = Vec::with_capacity(m);
            for &i0 in firsts {
                for_each_tuple(n, m - 1, |rest| {
                    pts.clear();
                    pts.push(&g.keys[i0]);
                    pts.extend(rest.iter().map(|&i| &g.keys[i]));
                    let Some(imgs) = solver.images(&pts, d)? else { return Ok(()) };
                    let mut ids = Vec::with_capacity(imgs.len());
                    for img in &imgs {
                        match g.index.get(img) {
                            Some(&i) => ids.push(i),
                            None => return Ok(()),
                        }
                    }
                    let mut p = Complex64::one();
                    for &i in &ids {
                        p *= g.vals[i];
                    }
                    acc += p;
                    if let (Some(ax), Some(ex)) = (acc_ex.as_mut(), g.exact.as_ref()) {
                        let mut pe = GaussQ::one();
                        for &i in &ids {
                            pe = pe * &ex[i];
                        }
                        *ax = &*ax + pe;
                    }
                    Ok(())
                })?;
            }
            Ok((acc, acc_ex))
        })
        .collect();
    let mut total = Complex64::zero();
    let mut total_ex = g.exact.as_ref().map(|_| GaussQ::zero());
    for p in partials {
        let (a, ax) = p?;
        total += a;
        if let (Some(t), Some(x)) = (total_ex.as_mut(), ax) {
            *t = &*t + x;
        }
    }
    Ok(match total_ex {
        Some(x) => {
            let c = gauss_to_c64(&x);
            SigmaValue { re: c.re, im: c.im, exact: Some(x) }
        }
        None => SigmaValue { re: total.re, im: total.im, exact: None },
    })
}

pub fn sigma(l: &LinearSystem, g: &FourierTemplate) -> Result<f64, TemplateError> {
    Ok(sigma_rows(l.rows(), g)?.re)
}

pub fn sigma_critical_sum(l: &LinearSystem, g: &FourierTemplate) -> Result<SigmaReport, TemplateError> {
    let sets = sysalg::critical_sets(l);
    let mut per_b = Vec::new();
    let mut total = 0.0;
    let mut total_ex: Option<BigRational> = g.exact.as_ref().map(|_| BigRational::zero());
    let mut im = 0.0f64;
    for cs in &sets {
        let v = sigma_rows(cs.l_b.rows(), g)?;
        total += v.re;
        im += v.im.abs();
        if let (Some(t), Some(x)) = (total_ex.as_mut(), v.exact.as_ref()) {
            *t += &x.re;
        }
        per_b.push(SigmaEntry { b: cs.b.clone(), value: v.re, exact: v.exact.map(|x| x.re.to_string()) });
    }
    if let Some(t) = &total_ex {
        total = t.to_f64().unwrap_or(total);
    }
    Ok(SigmaReport { per_b, total, total_exact: total_ex.map(|t| t.to_string()), imag_residual: im })
}

/// σ summed over a list of single equations (critical-equation multisets).
pub fn sigma_families(families: &[Vec<i64>], g: &FourierTemplate) -> Result<(f64, Vec<f64>), TemplateError> {
    let mut vals = Vec::with_capacity(families.len());
    for a in families {
        vals.push(sigma_rows(std::slice::from_ref(a), g)?.re);
    }
    Ok((vals.iter().sum(), vals))
}

/// h(r₁, r₂) = g(r₁)·g2(r₂).
pub fn join(g: &FourierTemplate, g2: &FourierTemplate) -> FourierTemplate {
    let d = g.d + g2.d;
    let mut keys = Vec::with_capacity(g.len() * g2.len());
    let mut vals = Vec::with_capacity(g.len() * g2.len());
    let both_exact = g.exact.is_some() && g2.exact.is_some();
    let mut ex = Vec::new();
    for (i, a) in g.keys.iter().enumerate() {
        for (j, b) in g2.keys.iter().enumerate() {
            let mut k = a.clone();
            k.extend_from_slice(b);
            keys.push(k);
            vals.push(g.vals[i] * g2.vals[j]);
            if both_exact {
                ex.push(&g.exact.as_ref().unwrap()[i] * &g2.exact.as_ref().unwrap()[j]);
            }
        }
    }
    // keys are generated in lexicographic order already
    FourierTemplate::build(d, keys, vals, both_exact.then_some(ex))
}

/// Per-trial generator: stream `trial` of the ChaCha8 generator seeded by `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn random_template_stream(m: u64, seed: u64, trial: u64) -> FourierTemplate {
    let mut rng = trial_rng(seed, trial);
    let mut pts = Vec::with_capacity(m as usize);
    for r in 1..=m as i128 {
        let u: f64 = rng.gen();
        pts.push((vec![r], e(u)));
    }
    FourierTemplate::from_half(1, &pts).expect("random template is hermitian")
}

/// Unit-modulus random phases on [−M, M] \ {0}.
pub fn random_template(m: u64, seed: u64) -> FourierTemplate {
    random_template_stream(m, seed, 0)
}

#[derive(Clone, Debug)]
pub struct McFind {
    pub template: FourierTemplate,
    pub total: f64,
    pub trial: u64,
}

pub fn monte_carlo_find(l: &LinearSystem, m: u64, trials: u64, seed: u64) -> Result<McFind, TemplateError> {
    let hits: Vec<Option<(u64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let g = random_template_stream(m, seed, t);
            sigma_critical_sum(l, &g).ok().filter(|r| r.total < -1e-6).map(|r| (t, r.total))
        })
        .collect();
    match hits.into_iter().flatten().next() {
        Some((t, total)) => Ok(McFind { template: random_template_stream(m, seed, t), total, trial: t }),
        None => Err(TemplateError::NotFound(trials as usize)),
    }
}

pub fn spike_template(points: &[(i128, Complex64)]) -> Result<FourierTemplate, TemplateError> {
    let pts: Vec<(Vec<i128>, Complex64)> = points.iter().map(|(r, v)| (vec![*r], *v)).collect();
    FourierTemplate::from_half(1, &pts)
}

pub fn spike_exact(points: &[(i128, GaussQ)]) -> Result<FourierTemplate, TemplateError> {
    let pts: Vec<(Vec<i128>, GaussQ)> = points.iter().map(|(r, v)| (vec![*r], v.clone())).collect();
    FourierTemplate::from_exact_half(1, &pts)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CaseAReport {
    pub subcase: String,
    pub witness_index: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c: Option<i64>,
    pub per_family: Vec<f64>,
    pub total: f64,
}

/// Spike shapes used by the Case A constructions.
#[derive(Clone, Debug, PartialEq)]
pub enum CaseAPlan {
    Phase8 { witness: usize, a: i64 },
    PhaseI { witness: usize, a: i64 },
    /// g(±big) = C·big_sign, listed small values fixed.
    Spike { witness: usize, subcase: &'static str, big: i64, big_sign: i64, small: Vec<(i64, i64)> },
    JoinAABB { witness: usize, a: i64, b: i64 },
    JoinAABmB { witness: usize, a: i64, b: i64 },
}

fn abs_groups(a: &[i64]) -> BTreeMap<i64, Vec<i64>> {
    let mut m: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for &x in a {
        m.entry(x.abs()).or_default().push(x);
    }
    m
}

/// Lambdas λ ≥ 1 of the λ-common families.
pub fn family_lambdas(families: &[Vec<i64>]) -> Vec<BigRational> {
    let mut v: Vec<BigRational> = families.iter().filter_map(|a| is_lambda_common(a)).collect();
    v.sort();
    v.dedup();
    v
}

fn coinc(a: i64, b: i64, lambdas: &[BigRational]) -> bool {
    coincidental(&linalg::q(a), &linalg::q(b), lambdas)
}

/// Index positions of elements of `a` not coincidental with any other element.
pub fn isolated_positions(a: &[i64], lambdas: &[BigRational]) -> Vec<usize> {
    (0..a.len())
        .filter(|&i| (0..a.len()).all(|j| j == i || !coinc(a[i], a[j], lambdas)))
        .collect()
}

/// Chooses the Case A construction, trying subcases in a fixed order.
pub fn case_a_plan(families: &[Vec<i64>]) -> Option<CaseAPlan> {
    let lambdas = family_lambdas(families);
    let e_set: Vec<usize> =
        (0..families.len()).filter(|&i| !isolated_positions(&families[i], &lambdas).is_empty()).collect();
    if !e_set.is_empty() {
        // {{c,c,c,c}}
        for &i in &e_set {
            let a = &families[i];
            if a.iter().all(|&x| x == a[0]) {
                return Some(CaseAPlan::Phase8 { witness: i, a: a[0].abs() });
            }
        }
        // {{c,c,c,−c}}
        for &i in &e_set {
            let g = abs_groups(&families[i]);
            if g.len() == 1 {
                let (&c, vals) = g.iter().next().unwrap();
                let pos = vals.iter().filter(|&&x| x > 0).count();
                if pos == 1 || pos == 3 {
                    return Some(CaseAPlan::PhaseI { witness: i, a: c });
                }
            }
        }
        // {{a,a,a,b}} or {{a,a,−a,b}}
        for &i in &e_set {
            let g = abs_groups(&families[i]);
            if g.len() == 2 {
                let mut it = g.iter();
                let (x, xv) = it.next().unwrap();
                let (y, yv) = it.next().unwrap();
                let (a, b) = if xv.len() == 3 && yv.len() == 1 {
                    (*x, *y)
                } else if yv.len() == 3 && xv.len() == 1 {
                    (*y, *x)
                } else {
                    continue;
                };
                return Some(CaseAPlan::Spike { witness: i, subcase: "aaab", big: a, big_sign: 1, small: vec![(b, -1)] });
            }
        }
        // {{a,a,b,b}}
        for &i in &e_set {
            let g = abs_groups(&families[i]);
            if g.len() == 2 && g.values().all(|v| v.len() == 2 && v[0] == v[1]) {
                let v: Vec<&Vec<i64>> = g.values().collect();
                return Some(CaseAPlan::JoinAABB { witness: i, a: v[0][0], b: v[1][0] });
            }
        }
        // {{a,a,b,−b}}
        for &i in &e_set {
            let g = abs_groups(&families[i]);
            if g.len() == 2 && g.values().all(|v| v.len() == 2) {
                let v: Vec<&Vec<i64>> = g.values().collect();
                let (same, opp) = if v[0][0] == v[0][1] && v[1][0] != v[1][1] {
                    (v[0], v[1])
                } else if v[1][0] == v[1][1] && v[0][0] != v[0][1] {
                    (v[1], v[0])
                } else {
                    continue;
                };
                return Some(CaseAPlan::JoinAABmB { witness: i, a: same[0], b: opp[0].abs() });
            }
        }
        // {{a,±a,b,c}} with a isolated from b and c
        for &i in &e_set {
            let g = abs_groups(&families[i]);
            if g.len() == 3 {
                let a = g.iter().find(|(_, v)| v.len() == 2).map(|(k, _)| *k);
                if let Some(a) = a {
                    let rest: Vec<i64> = g.keys().copied().filter(|&k| k != a).collect();
                    if rest.iter().all(|&b| !coinc(a, b, &lambdas)) {
                        return Some(CaseAPlan::Spike {
                            witness: i,
                            subcase: "aabc",
                            big: a,
                            big_sign: 1,
                            small: vec![(rest[0], 1), (rest[1], -1)],
                        });
                    }
                }
            }
        }
        let i = e_set[0];
        let a = &families[i];
        let p = isolated_positions(a, &lambdas)[0];
        let small: Vec<(i64, i64)> = (0..4).filter(|&j| j != p).map(|j| (a[j].abs(), 1)).collect();
        return Some(CaseAPlan::Spike { witness: i, subcase: "isolated", big: a[p].abs(), big_sign: -1, small });
    }
    // star pattern: a₀ coincidental with the other three, which are pairwise not
    for (i, a) in families.iter().enumerate() {
        for p in 0..4 {
            let others: Vec<usize> = (0..4).filter(|&j| j != p).collect();
            let star = others.iter().all(|&j| coinc(a[p], a[j], &lambdas))
                && others.iter().enumerate().all(|(x, &j)| others[x + 1..].iter().all(|&l| !coinc(a[j], a[l], &lambdas)));
            if star {
                let small: Vec<(i64, i64)> = others.iter().map(|&j| (a[j].abs(), 1)).collect();
                return Some(CaseAPlan::Spike { witness: i, subcase: "star", big: a[p].abs(), big_sign: 1, small });
            }
        }
    }
    None
}

/// Materializes a plan at a given C. Star plans put −C on the three coincidental elements.
pub fn case_a_instance(plan: &CaseAPlan, c: i64) -> Result<FourierTemplate, TemplateError> {
    match plan {
        CaseAPlan::Phase8 { a, .. } => spike_template(&[(*a as i128, e(1.0 / 8.0))]),
        CaseAPlan::PhaseI { a, .. } => spike_exact(&[(*a as i128, gauss(0, 1))]),
        CaseAPlan::Spike { subcase, big, big_sign, small, .. } => {
            let mut pts: Vec<(i128, GaussQ)> = Vec::new();
            if *subcase == "star" {
                pts.push((*big as i128, gauss(1, 0)));
                for &(s, _) in small {
                    pts.push((s as i128, gauss(-c, 0)));
                }
            } else {
                pts.push((*big as i128, gauss(big_sign * c, 0)));
                for &(s, v) in small {
                    pts.push((s as i128, gauss(v, 0)));
                }
            }
            spike_exact(&pts)
        }
        CaseAPlan::JoinAABB { a, b, .. } => {
            let (a, b) = (*a as i128, *b as i128);
            let g = FourierTemplate::from_half(1, &[(vec![a], e(0.125)), (vec![b], e(0.125))])?;
            let gt = FourierTemplate::from_half(1, &[(vec![a], e(0.125)), (vec![-b], e(0.125))])?;
            Ok(join(&g, &gt))
        }
        CaseAPlan::JoinAABmB { a, b, .. } => {
            let (a, b) = (*a as i128, *b as i128);
            let g = spike_exact(&[(a, gauss(1, 0)), (-a, gauss(1, 0)), (b, gauss(0, 1))])?;
            let gt = spike_exact(&[(b, gauss(1, 0)), (-b, gauss(1, 0)), (a, gauss(0, 1))])?;
            Ok(join(&g, &gt))
        }
    }
}

fn plan_parts(plan: &CaseAPlan) -> (usize, String, bool) {
    match plan {
        CaseAPlan::Phase8 { witness, .. } => (*witness, "cccc-phase".into(), false),
        CaseAPlan::PhaseI { witness, .. } => (*witness, "ccc-c-phase".into(), false),
        CaseAPlan::Spike { witness, subcase, .. } => (*witness, (*subcase).into(), true),
        CaseAPlan::JoinAABB { witness, .. } => (*witness, "aabb-join".into(), false),
        CaseAPlan::JoinAABmB { witness, .. } => (*witness, "aab-b-join".into(), false),
    }
}

/// Case A template with C escalated through powers of two until the total is ≤ −1.
pub fn case_a_template(families: &[Vec<i64>]) -> Result<(FourierTemplate, CaseAReport), TemplateError> {
    let plan = case_a_plan(families)
        .ok_or_else(|| TemplateError::Inconclusive("no Case A subcase applies".into()))?;
    let (witness, subcase, uses_c) = plan_parts(&plan);
    let cs: Vec<i64> = if uses_c { (1..=20).map(|e| 1i64 << e).collect() } else { vec![1] };
    for c in cs {
        let g = case_a_instance(&plan, c)?;
        let (total, per) = sigma_families(families, &g)?;
        if total <= -1.0 {
            let report =
                CaseAReport { subcase: subcase.clone(), witness_index: witness, c: uses_c.then_some(c), per_family: per, total };
            return Ok((g, report));
        }
    }
    Err(TemplateError::Inconclusive(format!("subcase {subcase} not negative up to C = 2^20")))
}

/// The same construction at a caller-chosen C.
pub fn case_a_template_at(families: &[Vec<i64>], c: i64) -> Result<(FourierTemplate, CaseAReport), TemplateError> {
    let plan = case_a_plan(families)
        .ok_or_else(|| TemplateError::Inconclusive("no Case A subcase applies".into()))?;
    let (witness, subcase, uses_c) = plan_parts(&plan);
    let g = case_a_instance(&plan, c)?;
    let (total, per) = sigma_families(families, &g)?;
    Ok((g, CaseAReport { subcase, witness_index: witness, c: uses_c.then_some(c), per_family: per, total }))
}

pub fn rational_to_string(x: &BigRational) -> String {
    if x.denom().is_one() {
        format!("{}/1", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
