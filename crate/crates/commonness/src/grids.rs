//! Periodic functions on multiplicative grids ±G_L and their truncations.
//!
//! Grid points are handled as (sign, valuation vector) pairs over an ordered
//! prime list; integers are only materialized by [`truncate`].

use crate::linalg::{q, Q};
use crate::templates::{self, gauss, gauss_ratio, gauss_to_c64, FourierTemplate, GaussQ, TemplateError};
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

const SAMPLE_SEED: u64 = 0x5eed_9a1d;
const SAMPLES: usize = 128;
const VALUE_TOL: f64 = 1e-9;
const MAX_BOX: u128 = 4_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("valuation of zero")]
    ZeroInput,
    #[error("no parameter found for exponents {0:?}")]
    SearchExhausted(Vec<String>),
    #[error("every target family has zero exponent")]
    AllCancelling,
    #[error("family {family} is not periodic along {prime} with period {period}")]
    PeriodMismatch { family: usize, prime: u64, period: u64 },
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("unknown: {0}")]
    Unknown(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("grid element exceeds the i128 range")]
    Overflow,
    #[error("period box has {0} points")]
    BoxTooLarge(u128),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

// ---------------------------------------------------------------------------
// valuations

pub fn prime_factors(mut n: u128) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u128;
    while p * p <= n {
        if n % p == 0 {
            out.push(p as u64);
            while n % p == 0 {
                n /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n as u64);
    }
    out
}

/// Sorted primes dividing some element of some family.
pub fn prime_set(families: &[Vec<i64>]) -> Vec<u64> {
    let mut ps: Vec<u64> = families
        .iter()
        .flatten()
        .filter(|&&a| a != 0)
        .flat_map(|&a| prime_factors(a.unsigned_abs() as u128))
        .collect();
    ps.sort_unstable();
    ps.dedup();
    ps
}

pub fn vp(p: u64, n: i128) -> i64 {
    debug_assert!(n != 0);
    let p = p as i128;
    let mut n = n.abs();
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// p-adic valuation of a nonzero rational.
pub fn valuation(p: u64, r: &Q) -> Result<i64, GridError> {
    if r.is_zero() {
        return Err(GridError::ZeroInput);
    }
    let pb = num_bigint::BigInt::from(p);
    let count = |mut n: num_bigint::BigInt| {
        n = n.abs();
        let mut v = 0i64;
        while (&n % &pb).is_zero() {
            n /= &pb;
            v += 1;
        }
        v
    };
    Ok(count(r.numer().clone()) - count(r.denom().clone()))
}

/// Two positive, two negative, equal absolute products.
pub fn is_cancelling(a: &[i64]) -> bool {
    if a.len() != 4 || a.contains(&0) {
        return false;
    }
    let pos: Vec<i128> = a.iter().filter(|&&x| x > 0).map(|&x| x as i128).collect();
    let negs: Vec<i128> = a.iter().filter(|&&x| x < 0).map(|&x| -(x as i128)).collect();
    pos.len() == 2 && negs.len() == 2 && pos[0] * pos[1] == negs[0] * negs[1]
}

/// Σ_a sign(a)·v_p(a) for each prime.
pub fn signed_valuation_sums(a: &[i64], primes: &[u64]) -> Vec<i64> {
    primes
        .iter()
        .map(|&p| a.iter().map(|&x| x.signum() * vp(p, x as i128)).sum())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationProfile {
    pub primes: Vec<u64>,
    /// One valuation vector per element, in input order.
    pub entries: Vec<Vec<i64>>,
}

impl ValuationProfile {
    pub fn new(a: &[i64], primes: &[u64]) -> Self {
        let entries = a.iter().map(|&x| primes.iter().map(|&p| vp(p, x as i128)).collect()).collect();
        ValuationProfile { primes: primes.to_vec(), entries }
    }

    /// Sorted multiset V_p(A) for the prime at `idx`.
    pub fn single(&self, idx: usize) -> Vec<i64> {
        let mut v: Vec<i64> = self.entries.iter().map(|e| e[idx]).collect();
        v.sort_unstable();
        v
    }

    /// Sorted multiset V_{p,p̃}(A).
    pub fn pair(&self, i: usize, j: usize) -> Vec<(i64, i64)> {
        let mut v: Vec<(i64, i64)> = self.entries.iter().map(|e| (e[i], e[j])).collect();
        v.sort_unstable();
        v
    }
}

/// Sign class of a 4-multiset once oriented with at least as many positive entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignClass {
    P4,
    P3,
    P2,
    Cancelling,
}

pub fn orient(a: &[i64]) -> Vec<i64> {
    let pos = a.iter().filter(|&&x| x > 0).count();
    if 2 * pos < a.len() {
        a.iter().map(|x| -x).collect()
    } else {
        a.to_vec()
    }
}

pub fn sign_class(a: &[i64]) -> SignClass {
    let a = orient(a);
    match a.iter().filter(|&&x| x > 0).count() {
        4 => SignClass::P4,
        3 => SignClass::P3,
        _ if is_cancelling(&a) => SignClass::Cancelling,
        _ => SignClass::P2,
    }
}

// ---------------------------------------------------------------------------
// grid functions

#[derive(Clone, Debug, PartialEq)]
pub struct GridValue {
    pub z: Complex64,
    pub exact: Option<GaussQ>,
}

impl GridValue {
    pub fn exact(x: GaussQ) -> Self {
        GridValue { z: gauss_to_c64(&x), exact: Some(x) }
    }
    pub fn float(z: Complex64) -> Self {
        GridValue { z, exact: None }
    }
    fn one() -> Self {
        GridValue::exact(gauss(1, 0))
    }
    fn conj(&self) -> Self {
        GridValue { z: self.z.conj(), exact: self.exact.as_ref().map(|x| x.conj()) }
    }
    fn mul(&self, o: &GridValue) -> Self {
        let exact = match (&self.exact, &o.exact) {
            (Some(a), Some(b)) => Some(a * b),
            _ => None,
        };
        match exact {
            Some(x) => GridValue::exact(x),
            None => GridValue::float(self.z * o.z),
        }
    }
}

pub type Rule = Arc<dyn Fn(&[i64]) -> GridValue + Send + Sync>;

/// h: ±G_L → C given by its values on G_L; h(−r) is the conjugate of h(r).
#[derive(Clone)]
pub struct PeriodicGridFunction {
    primes: Vec<u64>,
    period: Vec<u64>,
    exact: bool,
    provenance: String,
    rule: Rule,
}

impl fmt::Debug for PeriodicGridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGridFunction")
            .field("primes", &self.primes)
            .field("period", &self.period)
            .field("exact", &self.exact)
            .field("provenance", &self.provenance)
            .finish()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridEntry {
    pub sign: i8,
    pub residues: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridDoc {
    pub primes: Vec<u64>,
    pub period: Vec<u64>,
    pub construction: String,
    pub table: Vec<GridEntry>,
}

impl PeriodicGridFunction {
    pub fn new(primes: &[u64], period: Vec<u64>, exact: bool, provenance: impl Into<String>, rule: Rule) -> Self {
        assert_eq!(primes.len(), period.len());
        PeriodicGridFunction { primes: primes.to_vec(), period, exact, provenance: provenance.into(), rule }
    }

    pub fn constant(primes: &[u64], value: GridValue, provenance: impl Into<String>) -> Self {
        let exact = value.exact.is_some();
        PeriodicGridFunction::new(primes, vec![1; primes.len()], exact, provenance, Arc::new(move |_| value.clone()))
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }
    pub fn period(&self) -> &[u64] {
        &self.period
    }
    pub fn provenance(&self) -> &str {
        &self.provenance
    }
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn with_period(mut self, period: Vec<u64>) -> Self {
        assert_eq!(period.len(), self.primes.len());
        self.period = period;
        self
    }

    pub fn eval(&self, sign: i8, v: &[i64]) -> GridValue {
        let x = (self.rule)(v);
        if sign < 0 {
            x.conj()
        } else {
            x
        }
    }

    /// Pointwise product; periods combine by lcm.
    pub fn product(&self, other: &PeriodicGridFunction) -> PeriodicGridFunction {
        assert_eq!(self.primes, other.primes, "product of grid functions on different grids");
        let (a, b) = (self.rule.clone(), other.rule.clone());
        let period = self.period.iter().zip(&other.period).map(|(x, y)| x.lcm(y)).collect();
        PeriodicGridFunction {
            primes: self.primes.clone(),
            period,
            exact: self.exact && other.exact,
            provenance: format!("{} * {}", self.provenance, other.provenance),
            rule: Arc::new(move |v| a(v).mul(&b(v))),
        }
    }

    /// Tabulates both signs over the declared period box.
    pub fn to_doc(&self) -> Result<GridDoc, GridError> {
        let vol = box_volume(&self.period)?;
        let mut table = Vec::with_capacity(2 * vol as usize);
        for_each_in_box(&self.period, |d| {
            for sign in [1i8, -1] {
                let z = self.eval(sign, d).z;
                table.push(GridEntry { sign, residues: d.to_vec(), re: z.re, im: z.im });
            }
        });
        Ok(GridDoc {
            primes: self.primes.clone(),
            period: self.period.clone(),
            construction: self.provenance.clone(),
            table,
        })
    }
}

impl PeriodicGridFunction {
    /// Rebuilds a floating-point grid function from its tabulated period box.
    pub fn from_doc(doc: &GridDoc) -> Result<Self, GridError> {
        if doc.primes.len() != doc.period.len() {
            return Err(GridError::NotApplicable("period and prime lists differ in length".into()));
        }
        let table: std::collections::HashMap<Vec<i64>, Complex64> = doc
            .table
            .iter()
            .filter(|e| e.sign > 0)
            .map(|e| (e.residues.clone(), Complex64::new(e.re, e.im)))
            .collect();
        let vol = box_volume(&doc.period)?;
        if table.len() as u128 != vol {
            return Err(GridError::NotApplicable(format!("table has {} of {vol} residues", table.len())));
        }
        let period = doc.period.clone();
        let rule: Rule = Arc::new(move |v: &[i64]| {
            let key: Vec<i64> = v.iter().zip(&period).map(|(x, u)| x.rem_euclid(*u as i64)).collect();
            GridValue::float(table[&key])
        });
        Ok(PeriodicGridFunction::new(&doc.primes, doc.period.clone(), false, doc.construction.clone(), rule))
    }
}

fn box_volume(u: &[u64]) -> Result<u128, GridError> {
    let vol = u.iter().try_fold(1u128, |acc, &x| acc.checked_mul(x as u128)).ok_or(GridError::BoxTooLarge(u128::MAX))?;
    if vol > MAX_BOX {
        return Err(GridError::BoxTooLarge(vol));
    }
    Ok(vol)
}

fn for_each_in_box(u: &[u64], mut f: impl FnMut(&[i64])) {
    if u.iter().any(|&x| x == 0) {
        return;
    }
    let mut d = vec![0i64; u.len()];
    loop {
        f(&d);
        let mut j = 0;
        loop {
            if j == d.len() {
                return;
            }
            d[j] += 1;
            if d[j] < u[j] as i64 {
                break;
            }
            d[j] = 0;
            j += 1;
        }
    }
}

/// A family prepared for evaluation on a grid.
#[derive(Clone, Debug)]
pub struct GridFamily {
    pub coeffs: Vec<i64>,
    signs: Vec<i8>,
    vals: Vec<Vec<i64>>,
}

impl GridFamily {
    pub fn new(a: &[i64], primes: &[u64]) -> Result<Self, GridError> {
        for &x in a {
            if x == 0 {
                return Err(GridError::ZeroInput);
            }
            let rest = primes.iter().fold(x.unsigned_abs() as u128, |mut n, &p| {
                while n % p as u128 == 0 {
                    n /= p as u128;
                }
                n
            });
            if rest != 1 {
                return Err(GridError::NotApplicable(format!("{x} has a prime factor outside {primes:?}")));
            }
        }
        Ok(GridFamily {
            coeffs: a.to_vec(),
            signs: a.iter().map(|&x| x.signum() as i8).collect(),
            vals: a.iter().map(|&x| primes.iter().map(|&p| vp(p, x as i128)).collect()).collect(),
        })
    }

    /// h_A at the positive grid point with valuation vector `d`.
    pub fn eval(&self, h: &PeriodicGridFunction, d: &[i64]) -> GridValue {
        let mut acc = GridValue::one();
        let mut w = vec![0i64; d.len()];
        for (s, v) in self.signs.iter().zip(&self.vals) {
            for j in 0..d.len() {
                w[j] = d[j] + v[j];
            }
            acc = acc.mul(&h.eval(*s, &w));
        }
        acc
    }
}

pub fn grid_families(families: &[Vec<i64>], primes: &[u64]) -> Result<Vec<GridFamily>, GridError> {
    families.iter().map(|a| GridFamily::new(a, primes)).collect()
}

fn close(a: &GridValue, b: &GridValue) -> bool {
    match (&a.exact, &b.exact) {
        (Some(x), Some(y)) => x == y,
        _ => (a.z - b.z).norm() <= VALUE_TOL * (1.0 + a.z.norm()),
    }
}

/// Checks h_A(p_j^{u_j} r) = h_A(r) coordinatewise on sampled grid points.
pub fn check_periodic(h: &PeriodicGridFunction, families: &[GridFamily], u: &[u64]) -> Result<(), GridError> {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    for (fi, fam) in families.iter().enumerate() {
        for _ in 0..SAMPLES {
            let d: Vec<i64> = u.iter().map(|&x| rng.gen_range(0..(3 * x as i64 + 4))).collect();
            let base = fam.eval(h, &d);
            for j in 0..u.len() {
                let mut e = d.clone();
                e[j] += u[j] as i64;
                if !close(&base, &fam.eval(h, &e)) {
                    return Err(GridError::PeriodMismatch { family: fi, prime: h.primes[j], period: u[j] });
                }
            }
        }
    }
    Ok(())
}

/// Checks h(−r) = conj h(r) on sampled points, by evaluating both signs.
pub fn check_hermitian(h: &PeriodicGridFunction, samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).all(|_| {
        let d: Vec<i64> = h.period.iter().map(|&x| rng.gen_range(0..(4 * x as i64 + 4))).collect();
        let a = h.eval(1, &d);
        let b = h.eval(-1, &d);
        close(&a.conj(), &b)
    })
}

#[derive(Clone, Debug)]
pub struct PeriodicSum {
    pub value: Complex64,
    pub exact: Option<GaussQ>,
    pub per_family: Vec<Complex64>,
    pub volume: u128,
}

/// Σ over the period box of Σ_i h_{A_i}(p^d).
pub fn periodic_sum(h: &PeriodicGridFunction, families: &[Vec<i64>], u: &[u64]) -> Result<PeriodicSum, GridError> {
    let fams = grid_families(families, &h.primes)?;
    if u.len() != h.primes.len() {
        return Err(GridError::NotApplicable(format!("period has {} entries for {} primes", u.len(), h.primes.len())));
    }
    let volume = box_volume(u)?;
    check_periodic(h, &fams, u)?;
    let mut per_family = vec![Complex64::zero(); fams.len()];
    let mut exact = if h.exact { Some(GaussQ::zero()) } else { None };
    for_each_in_box(u, |d| {
        for (i, f) in fams.iter().enumerate() {
            let x = f.eval(h, d);
            per_family[i] += x.z;
            if let (Some(acc), Some(e)) = (exact.as_mut(), x.exact) {
                *acc = &*acc + e;
            }
        }
    });
    let value = match &exact {
        Some(x) => gauss_to_c64(x),
        None => per_family.iter().sum(),
    };
    Ok(PeriodicSum { value, exact, per_family, volume })
}

/// Finite truncation g_D = h on ±G_D, zero values dropped.
pub fn truncate(h: &PeriodicGridFunction, depth: u32) -> Result<FourierTemplate, GridError> {
    let ext = vec![depth as u64 + 1; h.primes.len()];
    box_volume(&ext)?;
    let mut exact_pts = Vec::new();
    let mut float_pts = Vec::new();
    let mut overflow = false;
    for_each_in_box(&ext, |d| {
        let mut r: i128 = 1;
        for (j, &p) in h.primes.iter().enumerate() {
            for _ in 0..d[j] {
                match r.checked_mul(p as i128) {
                    Some(x) => r = x,
                    None => {
                        overflow = true;
                        return;
                    }
                }
            }
        }
        let x = h.eval(1, d);
        if x.z.norm() == 0.0 && x.exact.as_ref().is_none_or(|e| e.is_zero()) {
            return;
        }
        match x.exact {
            Some(e) if h.exact => exact_pts.push((vec![r], e)),
            _ => float_pts.push((vec![r], x.z)),
        }
    });
    if overflow {
        return Err(GridError::Overflow);
    }
    Ok(if h.exact {
        FourierTemplate::from_exact_half(1, &exact_pts)?
    } else {
        FourierTemplate::from_half(1, &float_pts)?
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncationReport {
    pub depth: u32,
    /// |±G_D|.
    pub support: u128,
    pub total: f64,
    pub total_exact: Option<String>,
    pub per_family: Vec<f64>,
    /// Number of r > 0 with every a·r in G_D, per family.
    pub counts: Vec<u128>,
    /// Σ_A σ_A · vol(u) / (2 · counts_A): tends to Re of the periodic sum.
    pub normalized: f64,
}

fn max_valuations(f: &GridFamily, l: usize) -> Vec<i64> {
    (0..l).map(|j| f.vals.iter().map(|v| v[j]).max().unwrap_or(0)).collect()
}

/// Σ_A σ_A(g_D) computed in valuation coordinates.
///
/// σ_A(g_D) sums h_A(r) over integers r with a·r ∈ ±G_D for all a ∈ A, i.e.
/// over ±p^d with d_j ∈ [0, D − max_a v_j(a)]. Periodicity of h_A reduces
/// each family to residue classes weighted by their multiplicities in that box.
pub fn truncated_sigma(
    h: &PeriodicGridFunction,
    families: &[Vec<i64>],
    u: &[u64],
    depth: u32,
) -> Result<TruncationReport, GridError> {
    let fams = grid_families(families, &h.primes)?;
    check_periodic(h, &fams, u)?;
    sigma_in_valuations(h, &fams, u, depth)
}

fn sigma_in_valuations(
    h: &PeriodicGridFunction,
    fams: &[GridFamily],
    u: &[u64],
    depth: u32,
) -> Result<TruncationReport, GridError> {
    let l = h.primes.len();
    let vol = box_volume(u)?;
    let mut per_family = Vec::with_capacity(fams.len());
    let mut counts = Vec::with_capacity(fams.len());
    let mut exact = h.exact.then(BigRational::zero);
    let mut normalized = 0.0;
    for f in fams {
        let n: Vec<i64> = max_valuations(f, l).iter().map(|s| depth as i64 + 1 - s).collect();
        if n.iter().any(|&x| x <= 0) {
            per_family.push(0.0);
            counts.push(0);
            continue;
        }
        let count: u128 = n.iter().map(|&x| x as u128).product();
        let mut acc = Complex64::zero();
        let mut acc_ex = GaussQ::zero();
        for_each_in_box(u, |d| {
            let mult: u128 = (0..l)
                .map(|j| {
                    let (q_, r_) = (n[j] / u[j] as i64, n[j] % u[j] as i64);
                    (q_ + i64::from(d[j] < r_)) as u128
                })
                .product();
            if mult == 0 {
                return;
            }
            let x = f.eval(h, d);
            acc += x.z * mult as f64;
            if let (Some(_), Some(e)) = (exact.as_ref(), x.exact) {
                acc_ex = acc_ex.clone() + e * BigRational::from_integer(mult.into());
            }
        });
        let sigma = 2.0 * acc.re;
        if let Some(t) = exact.as_mut() {
            *t += &acc_ex.re * BigRational::from_integer(2.into());
        }
        normalized += sigma * vol as f64 / (2.0 * count as f64);
        per_family.push(sigma);
        counts.push(count);
    }
    let total = match &exact {
        Some(t) => t.to_f64().unwrap_or(f64::NAN),
        None => per_family.iter().sum(),
    };
    Ok(TruncationReport {
        depth,
        support: 2 * (depth as u128 + 1).pow(l as u32),
        total,
        total_exact: exact.map(|t| t.to_string()),
        per_family,
        counts,
        normalized,
    })
}

/// Materializes g_D and evaluates Σσ on it directly.
pub fn truncation_report(
    h: &PeriodicGridFunction,
    families: &[Vec<i64>],
    u: &[u64],
    depth: u32,
) -> Result<(FourierTemplate, TruncationReport), GridError> {
    let g = truncate(h, depth)?;
    let (total, per_family) = templates::sigma_families(families, &g)?;
    let mut rep = truncated_sigma(h, families, u, depth)?;
    let vol: u128 = u.iter().map(|&x| x as u128).product();
    rep.normalized = per_family
        .iter()
        .zip(&rep.counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s * vol as f64 / (2.0 * c as f64))
        .sum();
    rep.total = total;
    rep.per_family = per_family;
    Ok((g, rep))
}

const MAX_DEPTH: u32 = 4096;
const MATERIALIZE_BOX: u128 = 40_000;

/// Smallest depth with Σσ(g_D) ≤ −10⁻⁶; the template is materialized when small enough.
pub fn truncate_verified(
    h: &PeriodicGridFunction,
    families: &[Vec<i64>],
    u: &[u64],
) -> Result<(Option<FourierTemplate>, TruncationReport), GridError> {
    let fams = grid_families(families, &h.primes)?;
    let l = h.primes.len();
    let spread = fams.iter().flat_map(|f| max_valuations(f, l)).max().unwrap_or(0);
    let umax = u.iter().copied().max().unwrap_or(1) as i64;
    let mut depth = (umax + spread).max(2) as u32;
    let mut last = f64::NAN;
    check_periodic(h, &fams, u)?;
    while depth <= MAX_DEPTH {
        let rep = sigma_in_valuations(h, &fams, u, depth)?;
        if rep.total <= -1e-6 {
            let small = (depth as u128 + 1).checked_pow(l as u32).is_some_and(|v| v <= MATERIALIZE_BOX);
            if small {
                match truncation_report(h, families, u, depth) {
                    Ok((g, direct)) => {
                        if (direct.total - rep.total).abs() > 1e-6 * (1.0 + rep.total.abs()) {
                            return Err(GridError::Inconclusive(format!(
                                "direct σ {} disagrees with valuation σ {}",
                                direct.total, rep.total
                            )));
                        }
                        return Ok((Some(g), rep));
                    }
                    Err(GridError::Overflow) => {}
                    Err(e) => return Err(e),
                }
            }
            return Ok((None, rep));
        }
        last = rep.total;
        // coarse steps once the depth is large
        depth += if depth < 64 { 1 } else { (depth / 16).max(1) };
    }
    Err(GridError::Inconclusive(format!("truncated total still {last} at depth {MAX_DEPTH}")))
}

// ---------------------------------------------------------------------------
// phase searches

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseHit {
    /// t/π.
    pub s: Q,
    pub t: f64,
    pub value: f64,
}

fn qf(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn cos_value(gammas: &[Q], s: &Q) -> f64 {
    1.0 + gammas.iter().map(|g| (PI * qf(&(g * s))).cos()).sum::<f64>()
}

fn hit(s: Q, value: f64) -> PhaseHit {
    PhaseHit { t: PI * qf(&s), s, value }
}

const PHASE_THRESHOLD: f64 = -1e-3;

/// t with 1 + Σ cos(γ_i t) ≤ −10⁻³, returned as a rational multiple of π.
pub fn cosine_search(gammas: &[Q]) -> Result<PhaseHit, GridError> {
    if gammas.is_empty() || gammas.len() > 4 || gammas.iter().any(|g| g.is_zero()) {
        return Err(GridError::SearchExhausted(gammas.iter().map(|g| g.to_string()).collect()));
    }
    let abs: Vec<Q> = gammas.iter().map(|g| g.abs()).collect();
    let mut cands: Vec<Q> = Vec::new();
    let lo = abs.iter().min().unwrap().clone();
    let hi = abs.iter().max().unwrap().clone();
    if abs.iter().all(|g| g == &hi) {
        cands.push(hi.recip());
    }
    if abs.len() == 2 {
        if lo.clone() * q(2) == hi {
            cands.push(Q::new(7.into(), 5.into()) / &lo);
        } else if lo.clone() * q(2) > hi {
            cands.push(hi.recip());
        } else if lo.clone() * q(3) >= hi {
            cands.push(Q::new(8.into(), 3.into()) / &hi);
        }
    }
    for s in cands {
        let v = cos_value(gammas, &s);
        if v <= PHASE_THRESHOLD {
            return Ok(hit(s, v));
        }
    }
    let terms: Vec<(Complex64, Q)> = gammas.iter().map(|g| (Complex64::new(1.0, 0.0), g.clone())).collect();
    phase_search(1.0, &terms, 400).ok_or_else(|| GridError::SearchExhausted(gammas.iter().map(|g| g.to_string()).collect()))
}

/// Smallest-denominator s with Re(c₀ + Σ c_i e^{iπγ_i s}) ≤ −10⁻³.
pub fn phase_search(c0: f64, terms: &[(Complex64, Q)], max_den: i64) -> Option<PhaseHit> {
    let lcm = terms.iter().fold(num_bigint::BigInt::one(), |acc, (_, g)| acc.lcm(g.denom()));
    let lcm = lcm.to_i64()?;
    let value = |s: &Q| {
        c0 + terms
            .iter()
            .map(|(c, g)| (c * Complex64::from_polar(1.0, PI * qf(&(g * s)))).re)
            .sum::<f64>()
    };
    for n in 1..=max_den {
        for k in 1..=2 * n * lcm {
            if k.gcd(&n) != 1 {
                continue;
            }
            let s = Q::new(k.into(), n.into());
            let v = value(&s);
            if v <= PHASE_THRESHOLD {
                return Some(hit(s, v));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// basic constructions

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignedKind {
    H1,
    H2,
}

/// h1 = e(1/8) or h2 = i on G_L, conjugated on −G_L.
pub fn build_signed_constant(kind: SignedKind, primes: &[u64]) -> PeriodicGridFunction {
    match kind {
        SignedKind::H1 => PeriodicGridFunction::constant(primes, GridValue::float(templates::e(1.0 / 8.0)), "h1"),
        SignedKind::H2 => PeriodicGridFunction::constant(primes, GridValue::exact(gauss(0, 1)), "h2"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct H3Params {
    pub theta: Vec<i64>,
    pub s: Q,
    /// (family index, γ_A(θ)) for the tuned families.
    pub gammas: Vec<(usize, i64)>,
}

pub fn gamma(a: &[i64], primes: &[u64], theta: &[i64]) -> i64 {
    signed_valuation_sums(&orient(a), primes).iter().zip(theta).map(|(x, t)| x * t).sum()
}

/// h3(p^d) = exp(iπ s Σθ_j d_j).
pub fn h3(primes: &[u64], theta: &[i64], s: &Q) -> PeriodicGridFunction {
    let num = s.numer().to_i128().expect("phase numerator fits");
    let den = s.denom().to_i128().expect("phase denominator fits");
    let period = theta
        .iter()
        .map(|&t| {
            let x = s * q(t);
            x.denom().to_u64().unwrap_or(1)
        })
        .collect();
    let th = theta.to_vec();
    let rule: Rule = Arc::new(move |d: &[i64]| {
        let lin: i128 = th.iter().zip(d).map(|(&t, &x)| t as i128 * x as i128).sum();
        let k = (num * lin).rem_euclid(2 * den);
        match (2 * k).checked_div(den) {
            // quarter turns stay exact
            Some(qt) if (2 * k) % den == 0 => GridValue::exact(match qt % 4 {
                0 => gauss(1, 0),
                1 => gauss(0, 1),
                2 => gauss(-1, 0),
                _ => gauss(0, -1),
            }),
            _ => GridValue::float(Complex64::from_polar(1.0, PI * k as f64 / den as f64)),
        }
    });
    let exact = (num * 2) % den == 0 || theta.iter().all(|&t| (num * 2 * t as i128) % den == 0);
    PeriodicGridFunction::new(primes, period, exact, format!("h3 theta={theta:?} t/pi={s}"), rule)
}

/// θ = (1, M, M², …) with the smallest M ≥ 2 making every target γ nonzero.
pub fn choose_theta(families: &[Vec<i64>], targets: &[usize], primes: &[u64]) -> Result<Vec<i64>, GridError> {
    for m in 2i64..=64 {
        let mut theta = Vec::with_capacity(primes.len());
        let mut x = 1i64;
        for _ in primes {
            theta.push(x);
            x = x.saturating_mul(m);
        }
        if targets.iter().all(|&i| gamma(&families[i], primes, &theta) != 0) {
            return Ok(theta);
        }
    }
    Err(GridError::AllCancelling)
}

/// h3 tuned so that the two-positive-two-negative families give 1 + Σcos(γt) < 0.
pub fn build_h3(families: &[Vec<i64>]) -> Result<(PeriodicGridFunction, H3Params), GridError> {
    let primes = prime_set(families);
    let targets: Vec<usize> =
        (0..families.len()).filter(|&i| sign_class(&families[i]) == SignClass::P2).collect();
    if targets.is_empty() {
        return Err(GridError::AllCancelling);
    }
    let theta = choose_theta(families, &targets, &primes)?;
    let gammas: Vec<(usize, i64)> = targets.iter().map(|&i| (i, gamma(&families[i], &primes, &theta))).collect();
    let constant = families.iter().filter(|a| sign_class(a) == SignClass::Cancelling).count() as f64;
    let gq: Vec<Q> = gammas.iter().map(|&(_, g)| q(g)).collect();
    let s = if constant == 1.0 && gq.len() <= 4 {
        cosine_search(&gq)?.s
    } else {
        let terms: Vec<(Complex64, Q)> = gq.iter().map(|g| (Complex64::new(1.0, 0.0), g.clone())).collect();
        phase_search(constant, &terms, 400)
            .ok_or_else(|| GridError::SearchExhausted(gq.iter().map(|g| g.to_string()).collect()))?
            .s
    };
    Ok((h3(&primes, &theta, &s), H3Params { theta, s, gammas }))
}

// ---------------------------------------------------------------------------
// cancelling constructions

fn floor_div(a: i64, b: i64) -> i64 {
    Integer::div_floor(&a, &b)
}

fn pm1(neg: bool) -> GridValue {
    GridValue::exact(gauss(if neg { -1 } else { 1 }, 0))
}

/// h = −1 iff ⌊v_p/w⌋ mod u lies in `minus`.
pub fn window_function(primes: &[u64], idx: usize, w: i64, u: i64, minus: &[i64]) -> PeriodicGridFunction {
    let set = minus.to_vec();
    let mut period = vec![1; primes.len()];
    period[idx] = (w * u) as u64;
    PeriodicGridFunction::new(
        primes,
        period,
        true,
        format!("window p={} w={w} u={u} minus={minus:?}", primes[idx]),
        Arc::new(move |v| pm1(set.contains(&floor_div(v[idx], w).rem_euclid(u)))),
    )
}

/// h = i on odd ⌊v_p/w⌋, 1 on even.
pub fn odd_phase_function(primes: &[u64], idx: usize, w: i64) -> PeriodicGridFunction {
    let mut period = vec![1; primes.len()];
    period[idx] = 2 * w as u64;
    PeriodicGridFunction::new(
        primes,
        period,
        true,
        format!("odd-phase p={} w={w}", primes[idx]),
        Arc::new(move |v| {
            if floor_div(v[idx], w).rem_euclid(2) == 1 {
                GridValue::exact(gauss(0, 1))
            } else {
                GridValue::one()
            }
        }),
    )
}

/// h = e(1/8) on odd ⌊v_p/w⌋ and e(−1/8) on even (for r > 0).
pub fn eighth_parity_function(primes: &[u64], idx: usize, w: i64) -> PeriodicGridFunction {
    let mut period = vec![1; primes.len()];
    period[idx] = 2 * w as u64;
    PeriodicGridFunction::new(
        primes,
        period,
        false,
        format!("eighth-parity p={} w={w}", primes[idx]),
        Arc::new(move |v| {
            let odd = floor_div(v[idx], w).rem_euclid(2) == 1;
            GridValue::float(templates::e(if odd { 1.0 } else { -1.0 } / 8.0))
        }),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RectangleRule {
    /// −1 iff both parities are odd.
    BothOdd,
    /// −1 iff both parities are even.
    BothEven,
    /// e(1/8) when the parities agree, e(−1/8) otherwise (r > 0).
    EighthAgree,
}

pub fn rectangle_function(
    primes: &[u64],
    (i, w1): (usize, i64),
    (j, w2): (usize, i64),
    rule: RectangleRule,
) -> PeriodicGridFunction {
    let mut period = vec![1; primes.len()];
    period[i] = 2 * w1 as u64;
    period[j] = period[j].lcm(&(2 * w2 as u64));
    PeriodicGridFunction::new(
        primes,
        period,
        rule != RectangleRule::EighthAgree,
        format!("rectangle {rule:?} p={} w={w1} q={} w={w2}", primes[i], primes[j]),
        Arc::new(move |v| {
            let a = floor_div(v[i], w1).rem_euclid(2);
            let b = floor_div(v[j], w2).rem_euclid(2);
            match rule {
                RectangleRule::BothOdd => pm1(a == 1 && b == 1),
                RectangleRule::BothEven => pm1(a == 0 && b == 0),
                RectangleRule::EighthAgree => GridValue::float(templates::e(if a == b { 1.0 } else { -1.0 } / 8.0)),
            }
        }),
    )
}

/// Cancelling pattern of a family, as classified for Case B.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CancellingPattern {
    /// V_p = {{0, v1, v2, v1+v2}}, 0 < v1 < v2.
    Spread { prime: usize, v1: i64, v2: i64 },
    /// V_p = {{0, v, v, 2v}}.
    Double { prime: usize, v: i64 },
    /// V_{p,q} = {{(0,0),(v1,0),(0,v2),(v1,v2)}}.
    Rectangle { p: usize, q: usize, v1: i64, v2: i64 },
}

pub fn cancelling_patterns(a: &[i64], primes: &[u64]) -> Vec<CancellingPattern> {
    let prof = ValuationProfile::new(a, primes);
    let mut out = Vec::new();
    for i in 0..primes.len() {
        let v = prof.single(i);
        if v[0] == 0 && v[1] > 0 && v[1] < v[2] && v[3] == v[1] + v[2] {
            out.push(CancellingPattern::Spread { prime: i, v1: v[1], v2: v[2] });
        }
        if v[0] == 0 && v[1] > 0 && v[1] == v[2] && v[3] == 2 * v[1] {
            out.push(CancellingPattern::Double { prime: i, v: v[1] });
        }
    }
    for i in 0..primes.len() {
        for j in i + 1..primes.len() {
            let pv = prof.pair(i, j);
            let (v1, v2) = (pv[3].0, pv[3].1);
            if v1 > 0 && v2 > 0 && pv == vec![(0, 0), (0, v2), (v1, 0), (v1, v2)] {
                out.push(CancellingPattern::Rectangle { p: i, q: j, v1, v2 });
            }
        }
    }
    out
}

fn spread_candidates(primes: &[u64], idx: usize, v1: i64, v2: i64) -> Vec<PeriodicGridFunction> {
    let w = v1.gcd(&v2);
    let (a, b) = (v1 / w, v2 / w);
    let mut out = Vec::new();
    for ue in [a, b] {
        if ue % 2 == 0 {
            let minus: Vec<i64> = (0..ue / 2).map(|k| 2 * k).collect();
            out.push(window_function(primes, idx, w, 2 * ue, &minus));
        }
    }
    if a % 2 == 1 && b % 2 == 1 {
        let (ue, we) = if (a + b) % 4 == 0 { (a + b, b - a) } else { (b - a, a + b) };
        let mut minus: Vec<i64> = Vec::new();
        let mut x = 0i64;
        loop {
            for y in [x, x + 1] {
                let y = y.rem_euclid(ue);
                if !minus.contains(&y) {
                    minus.push(y);
                }
            }
            x = (x + 2 * we).rem_euclid(ue);
            if x == 0 {
                break;
            }
        }
        minus.sort_unstable();
        out.push(window_function(primes, idx, w, ue, &minus));
    }
    out
}

fn divisors(n: i64) -> Vec<i64> {
    (1..=n).filter(|d| n % d == 0).collect()
}

fn pattern_candidates(primes: &[u64], pat: &CancellingPattern) -> Vec<PeriodicGridFunction> {
    match *pat {
        CancellingPattern::Spread { prime, v1, v2 } => spread_candidates(primes, prime, v1, v2),
        CancellingPattern::Double { prime, v } => {
            let mut out = vec![odd_phase_function(primes, prime, v), eighth_parity_function(primes, prime, v)];
            for w in divisors(v).into_iter().rev() {
                out.push(window_function(primes, prime, 2 * w, 2, &[1]));
            }
            out
        }
        CancellingPattern::Rectangle { p, q, v1, v2 } => vec![
            rectangle_function(primes, (p, v1), (q, v2), RectangleRule::BothOdd),
            rectangle_function(primes, (p, v1), (q, v2), RectangleRule::EighthAgree),
            rectangle_function(primes, (p, v1), (q, v2), RectangleRule::BothEven),
        ],
    }
}

/// Single-prime ±1 windows over small moduli, tried after the pattern constructions.
fn library_candidates(families: &[Vec<i64>], primes: &[u64]) -> Vec<PeriodicGridFunction> {
    let mut out = Vec::new();
    for (idx, &p) in primes.iter().enumerate() {
        let vmax = families.iter().flatten().map(|&a| vp(p, a as i128)).max().unwrap_or(0);
        if vmax == 0 {
            continue;
        }
        for w in 1..=vmax {
            for u in 2..=6i64 {
                for mask in 1u32..(1 << u) - 1 {
                    if mask & 1 == 0 {
                        continue; // complement gives the negated function
                    }
                    let minus: Vec<i64> = (0..u).filter(|k| mask >> k & 1 == 1).collect();
                    out.push(window_function(primes, idx, w, u, &minus));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Case B

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseBReport {
    pub branch: String,
    pub construction: String,
    pub primes: Vec<u64>,
    pub period: Vec<u64>,
    pub periodic_sum: (f64, f64),
    pub truncation: Option<TruncationReport>,
}

fn is_additive_quadruple(a: &[i64]) -> bool {
    let mut v = orient(a);
    v.sort_unstable();
    v.len() == 4 && v[0] == v[1] && v[2] == v[3] && v[0] == -v[3]
}

fn verify_candidate(h: &PeriodicGridFunction, families: &[Vec<i64>]) -> Option<PeriodicSum> {
    let ps = periodic_sum(h, families, h.period()).ok()?;
    (ps.value.re < -VALUE_TOL).then_some(ps)
}

fn tuned_h3_products(
    base: &PeriodicGridFunction,
    families: &[Vec<i64>],
    primes: &[u64],
    h2: &PeriodicGridFunction,
) -> Option<(PeriodicGridFunction, PeriodicSum)> {
    let targets: Vec<usize> =
        (0..families.len()).filter(|&i| sign_class(&families[i]) == SignClass::P2).collect();
    if targets.is_empty() {
        return None;
    }
    let theta = choose_theta(families, &targets, primes).ok()?;
    for n in 1..=12i64 {
        for k in 1..2 * n {
            if k.gcd(&n) != 1 {
                continue;
            }
            let h = base.product(&h3(primes, &theta, &Q::new(k.into(), n.into())));
            for cand in [h.clone(), h.product(h2)] {
                if box_volume(cand.period()).is_err() {
                    continue;
                }
                if let Some(ps) = verify_candidate(&cand, families) {
                    return Some((cand, ps));
                }
            }
        }
    }
    None
}

/// Periodic function for a Case B system together with its branch label.
pub fn case_b_grid(families: &[Vec<i64>]) -> Result<(PeriodicGridFunction, PeriodicSum, String), GridError> {
    let families: Vec<Vec<i64>> = families.iter().map(|a| orient(a)).collect();
    let aq: Vec<usize> = (0..families.len()).filter(|&i| is_additive_quadruple(&families[i])).collect();
    if aq.len() != 1 {
        return Err(GridError::NotApplicable(format!("expected one additive quadruple, found {}", aq.len())));
    }
    let primes = prime_set(&families);
    let others: Vec<usize> = (0..families.len()).filter(|&i| i != aq[0]).collect();
    let classes: Vec<SignClass> = others.iter().map(|&i| sign_class(&families[i])).collect();
    let count = |c: SignClass| classes.iter().filter(|&&x| x == c).count();
    let h2 = build_signed_constant(SignedKind::H2, &primes);
    let accept = |h: PeriodicGridFunction, branch: &str| -> Option<(PeriodicGridFunction, PeriodicSum, String)> {
        verify_candidate(&h, &families).map(|ps| (h, ps, branch.to_string()))
    };

    if count(SignClass::Cancelling) > 0 {
        let mut bases: Vec<(PeriodicGridFunction, &str)> = Vec::new();
        let cancelling: Vec<usize> =
            others.iter().copied().filter(|&i| sign_class(&families[i]) == SignClass::Cancelling).collect();
        for &i in &cancelling {
            for pat in cancelling_patterns(&families[i], &primes) {
                let label = match pat {
                    CancellingPattern::Spread { .. } => "cancelling-spread",
                    CancellingPattern::Double { .. } => "cancelling-double",
                    CancellingPattern::Rectangle { .. } => "cancelling-rectangle",
                };
                for h in pattern_candidates(&primes, &pat) {
                    bases.push((h, label));
                }
            }
        }
        // two cancelling rectangles on different prime pairs: product of both-even indicators
        if cancelling.len() == 2 {
            let rects = |i: usize| -> Vec<PeriodicGridFunction> {
                cancelling_patterns(&families[i], &primes)
                    .into_iter()
                    .filter_map(|p| match p {
                        CancellingPattern::Rectangle { p, q, v1, v2 } => {
                            Some(rectangle_function(&primes, (p, v1), (q, v2), RectangleRule::BothEven))
                        }
                        _ => None,
                    })
                    .collect()
            };
            for a in rects(cancelling[0]) {
                for b in rects(cancelling[1]) {
                    bases.push((a.product(&b), "cancelling-double-rectangle"));
                }
            }
        }
        for h in library_candidates(&families, &primes) {
            bases.push((h, "cancelling-library"));
        }
        for (base, label) in &bases {
            for cand in [base.clone(), base.product(&h2)] {
                if let Some(r) = accept(cand, label) {
                    return Ok(r);
                }
            }
        }
        for (base, label) in &bases {
            if let Some((h, ps)) = tuned_h3_products(base, &families, &primes, &h2) {
                return Ok((h, ps, label.to_string()));
            }
        }
        return Err(GridError::Inconclusive("no cancelling construction verified".into()));
    }

    let (p4, p3, p2) = (count(SignClass::P4), count(SignClass::P3), count(SignClass::P2));
    if p4 == 2 && p3 == 2 {
        if let Some(r) = accept(build_signed_constant(SignedKind::H1, &primes), "h1") {
            return Ok(r);
        }
    }
    if p3 == 4 {
        if let Some(r) = accept(h2.clone(), "h2") {
            return Ok(r);
        }
    }
    if p2 > 0 {
        let targets: Vec<usize> = others.iter().copied().filter(|&i| sign_class(&families[i]) == SignClass::P2).collect();
        let theta = choose_theta(&families, &targets, &primes)?;
        let gq: Vec<Q> = targets.iter().map(|&i| q(gamma(&families[i], &primes, &theta))).collect();
        let branch = if p2 == 4 { "h3" } else { "h3-mixed" };
        if let Ok(hit) = cosine_search(&gq) {
            let h = h3(&primes, &theta, &hit.s);
            for cand in [h.clone(), h.product(&h2)] {
                if let Some(r) = accept(cand, branch) {
                    return Ok(r);
                }
            }
        }
    }
    // remaining sign mixtures: small search over the same building blocks
    let h1 = build_signed_constant(SignedKind::H1, &primes);
    for cand in [h1.clone(), h2.clone(), h1.product(&h2)] {
        if let Some(r) = accept(cand, "signed-constant") {
            return Ok(r);
        }
    }
    let one = PeriodicGridFunction::constant(&primes, GridValue::one(), "1");
    for base in [one, h1] {
        if let Some((h, ps)) = tuned_h3_products(&base, &families, &primes, &h2) {
            return Ok((h, ps, "h3-search".into()));
        }
    }
    Err(GridError::Inconclusive("no Case B construction verified".into()))
}

pub fn case_b_template(families: &[Vec<i64>]) -> Result<(Option<FourierTemplate>, CaseBReport), GridError> {
    let (h, ps, branch) = case_b_grid(families)?;
    let (g, rep) = truncate_verified(&h, families, h.period())?;
    Ok((
        g,
        CaseBReport {
            branch,
            construction: h.provenance().to_string(),
            primes: h.primes().to_vec(),
            period: h.period().to_vec(),
            periodic_sum: (ps.value.re, ps.value.im),
            truncation: Some(rep),
        },
    ))
}

// ---------------------------------------------------------------------------
// Case C

/// Critical-equation multisets of [[1,1,-1,-1,0],[b,-b,a,0,-a]], scaled to integers.
pub fn case_c_families(a: i64, b: i64) -> Vec<Vec<i64>> {
    vec![
        vec![1, 1, -1, -1],
        vec![b, -b, a, -a],
        vec![a + b, a - b, -a, -a],
        vec![2 * b, a - b, -b, -a],
        vec![-2 * b, a + b, b, -a],
    ]
}

/// φ: Z^ℓ → Z_{2m}×Z_2×Z_2 of the form
/// D = v_2 + Σ n_p⌊v_p/k_p⌋, φ = (D mod m + m·F_0, F_1, F_2),
/// F = ⌊D/m⌋·c_D + Σ ⌊v_p/k_p⌋·c_p over Z_2³.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CasePhi {
    pub m: i64,
    pub two: usize,
    pub k: Vec<i64>,
    pub n: Vec<i64>,
    pub c_d: [u8; 3],
    pub c: Vec<[u8; 3]>,
}

impl CasePhi {
    pub fn eval(&self, v: &[i64]) -> (i64, u8, u8) {
        let mut d = v[self.two];
        let mut f = [0u8; 3];
        for j in 0..v.len() {
            if j == self.two || self.k[j] == 0 {
                continue;
            }
            let fl = floor_div(v[j], self.k[j]);
            d += self.n[j] * fl;
            let par = fl.rem_euclid(2) as u8;
            for t in 0..3 {
                f[t] ^= par & self.c[j][t];
            }
        }
        let hi = floor_div(d, self.m).rem_euclid(2) as u8;
        for t in 0..3 {
            f[t] ^= hi & self.c_d[t];
        }
        (d.rem_euclid(self.m) + self.m * f[0] as i64, f[1], f[2])
    }
}

fn add_phi(x: (i64, u8, u8), y: (i64, u8, u8), m: i64) -> (i64, u8, u8) {
    ((x.0 + y.0).rem_euclid(2 * m), x.1 ^ y.1, x.2 ^ y.2)
}

/// The four shift conditions, checked on sampled valuation vectors.
pub fn check_phi(phi: &CasePhi, shifts: &[Vec<i64>; 3], samples: usize) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED ^ 0xc);
    let l = phi.k.len();
    let targets = [(phi.m, 0u8, 0u8), (0, 1, 0), (0, 0, 1)];
    for _ in 0..samples {
        let v: Vec<i64> = (0..l).map(|_| rng.gen_range(0..24)).collect();
        let base = phi.eval(&v);
        for (s, t) in shifts.iter().zip(targets) {
            let w: Vec<i64> = v.iter().zip(s).map(|(a, b)| a + b).collect();
            if phi.eval(&w) != add_phi(base, t, phi.m) {
                return false;
            }
        }
        if base.0 == 0 || base.0 == phi.m {
            let mut w = v.clone();
            w[phi.two] += 1;
            if phi.eval(&w) != add_phi(base, (1, 0, 0), phi.m) {
                return false;
            }
        }
    }
    true
}

/// Solves M·C = I over GF(2) for a 3×g matrix by enumeration.
fn gf2_right_inverse(rows: &[Vec<u8>; 3]) -> Option<Vec<[u8; 3]>> {
    let g = rows[0].len();
    if g > 16 {
        return None;
    }
    let mut cols = vec![[0u8; 3]; g];
    for (t, col) in (0..3).map(|t| (t, t)) {
        let mut found = false;
        for mask in 0u32..(1 << g) {
            let ok = (0..3).all(|r| {
                let dot = (0..g).fold(0u8, |acc, j| acc ^ (rows[r][j] & (mask >> j & 1) as u8));
                dot == u8::from(r == t)
            });
            if ok {
                for (j, c) in cols.iter_mut().enumerate() {
                    c[col] = (mask >> j & 1) as u8;
                }
                found = true;
                break;
            }
        }
        if !found {
            return None;
        }
    }
    Some(cols)
}

/// Searches the floor-linear φ family, which contains the five hand-built φ cases.
pub fn find_case_c_phi(a: i64, b: i64, primes: &[u64]) -> Option<CasePhi> {
    let two = primes.iter().position(|&p| p == 2)?;
    let val = |x: i64| -> Vec<i64> { primes.iter().map(|&p| vp(p, x as i128)).collect() };
    let vb = val(b);
    let rel = |x: i64| -> Vec<i64> { val(x).iter().zip(&vb).map(|(s, t)| s - t).collect() };
    let shifts = [rel(a), rel((a - b).abs()), rel(a + b)];
    let l = primes.len();
    let odd: Vec<usize> = (0..l).filter(|&j| j != two && shifts.iter().any(|s| s[j] != 0)).collect();
    let gcds: Vec<i64> = (0..l)
        .map(|j| shifts.iter().fold(0i64, |g, s| g.gcd(&s[j])))
        .collect();
    let nvals = [0i64, 1, -1, 2, -2];
    let mut k_choices: Vec<Vec<i64>> = Vec::new();
    for &j in &odd {
        let mut ds = divisors(gcds[j]);
        ds.reverse();
        k_choices.push(ds);
    }
    for m in 2i64..=12 {
        let mut kidx = vec![0usize; odd.len()];
        loop {
            let mut k = vec![0i64; l];
            for (t, &j) in odd.iter().enumerate() {
                k[j] = k_choices[t][kidx[t]];
            }
            let mut nidx = vec![0usize; odd.len()];
            loop {
                let mut n = vec![0i64; l];
                for (t, &j) in odd.iter().enumerate() {
                    n[j] = nvals[nidx[t]];
                }
                if let Some(phi) = try_phi(m, two, &k, &n, &odd, &shifts) {
                    if check_phi(&phi, &shifts, 200) {
                        return Some(phi);
                    }
                }
                if !advance(&mut nidx, &vec![nvals.len(); odd.len()]) {
                    break;
                }
            }
            let lens: Vec<usize> = k_choices.iter().map(|c| c.len()).collect();
            if !advance(&mut kidx, &lens) {
                break;
            }
        }
    }
    None
}

fn advance(idx: &mut [usize], lens: &[usize]) -> bool {
    for t in 0..idx.len() {
        idx[t] += 1;
        if idx[t] < lens[t] {
            return true;
        }
        idx[t] = 0;
    }
    false
}

fn try_phi(m: i64, two: usize, k: &[i64], n: &[i64], odd: &[usize], shifts: &[Vec<i64>; 3]) -> Option<CasePhi> {
    // generator order: ⌊D/m⌋ then the odd primes
    let mut rows: [Vec<u8>; 3] = Default::default();
    for (r, s) in shifts.iter().enumerate() {
        let mut delta = s[two];
        for &j in odd {
            if s[j] % k[j] != 0 {
                return None;
            }
            delta += n[j] * (s[j] / k[j]);
        }
        if delta % m != 0 {
            return None;
        }
        rows[r].push((delta / m).rem_euclid(2) as u8);
        for &j in odd {
            rows[r].push((s[j] / k[j]).rem_euclid(2) as u8);
        }
    }
    let cols = gf2_right_inverse(&rows)?;
    let mut c = vec![[0u8; 3]; k.len()];
    for (t, &j) in odd.iter().enumerate() {
        c[j] = cols[t + 1];
    }
    Some(CasePhi { m, two, k: k.to_vec(), n: n.to_vec(), c_d: cols[0], c })
}

/// The 8m-entry value table f on Z_{2m}×Z_2×Z_2.
pub fn case_c_table(m: i64, i: i64, j: u8, k: u8) -> GaussQ {
    let i = i.rem_euclid(2 * m);
    let (a, b, c, d) = (
        gauss_ratio((1, 4), (21, 50)),
        gauss_ratio((7, 20), (-7, 20)),
        gauss_ratio((-7, 20), (7, 20)),
        gauss_ratio((12, 25), (3, 25)),
    );
    match (i, j, k) {
        (0, 0, 0) => a,
        (0, 0, 1) => b,
        (0, 1, 0) => c.clone(),
        (0, 1, 1) => -a,
        (i, 0, 0) if i == m => c,
        (i, 0, 1) | (i, 1, 0) if i == m => d,
        (i, 1, 1) if i == m => b,
        (i, j, k) if i < m => {
            if j == k {
                gauss(0, 0)
            } else {
                gauss(-1, -1)
            }
        }
        (_, j, k) => {
            if j == k {
                gauss(1, -1)
            } else {
                gauss(0, 0)
            }
        }
    }
}

/// Values of the two special tables on Z_2×Z_4.
pub fn special_table(x: i64, y: i64) -> GaussQ {
    let base = match y.rem_euclid(4) {
        0 => gauss(1, 0),
        1 => gauss(0, 0),
        2 => gauss_ratio((0, 1), (1, 4)),
        _ => gauss_ratio((0, 1), (1, 2)),
    };
    if x.rem_euclid(2) == 0 {
        base
    } else {
        -base
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseCReport {
    pub a: i64,
    pub b: i64,
    pub construction: String,
    pub phi: Option<CasePhi>,
    pub primes: Vec<u64>,
    pub period: Vec<u64>,
    pub periodic_sum: (f64, f64),
    pub periodic_sum_exact: Option<(String, String)>,
    pub truncation: Option<TruncationReport>,
}

fn minimal_period(primes: &[u64], upper: &[u64], f: &dyn Fn(&[i64]) -> GridValue) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED ^ 0x9);
    let pts: Vec<Vec<i64>> =
        (0..64).map(|_| (0..primes.len()).map(|_| rng.gen_range(0..30)).collect()).collect();
    (0..primes.len())
        .map(|j| {
            for t in divisors(upper[j] as i64) {
                let ok = pts.iter().all(|v| {
                    let mut w = v.clone();
                    w[j] += t;
                    close(&f(v), &f(&w))
                });
                if ok {
                    return t as u64;
                }
            }
            upper[j]
        })
        .collect()
}

/// Periodic function for the Case C system with parameters (a, b).
pub fn case_c_grid(a: i64, b: i64) -> Result<(PeriodicGridFunction, Option<CasePhi>), GridError> {
    if a <= 0 || b <= 0 || a.gcd(&b) != 1 || a == b {
        return Err(GridError::NotApplicable(format!("(a,b)=({a},{b}) must be distinct coprime positives")));
    }
    match (a, b) {
        (1, 2) => return Err(GridError::NotApplicable("(1,2) is common".into())),
        (3, 1) | (3, 2) => return Err(GridError::Unknown(format!("({a},{b}) is an exceptional system"))),
        _ => {}
    }
    let families = case_c_families(a, b);
    let primes = prime_set(&families);
    if (a, b) == (1, 3) || (a, b) == (2, 3) {
        let px = primes.iter().position(|&p| p == if a == 1 { 2 } else { 5 }).unwrap();
        let py = primes.iter().position(|&p| p == 3).unwrap();
        let mut period = vec![1; primes.len()];
        period[px] = 2;
        period[py] = 4;
        let h = PeriodicGridFunction::new(
            &primes,
            period,
            true,
            format!("special table ({a},{b})"),
            Arc::new(move |v| GridValue::exact(special_table(v[px], v[py]))),
        );
        return Ok((h, None));
    }
    let phi = find_case_c_phi(a, b, &primes)
        .ok_or_else(|| GridError::Inconclusive(format!("no admissible φ for ({a},{b})")))?;
    let m = phi.m;
    let conj_odd = a < b;
    let p2 = phi.clone();
    let f = move |v: &[i64]| {
        let (i, j, k) = p2.eval(v);
        let x = case_c_table(m, i, j, k);
        GridValue::exact(if conj_odd && j == 1 { x.conj() } else { x })
    };
    let upper: Vec<u64> = (0..primes.len())
        .map(|j| (2 * m * if j == phi.two { 1 } else { phi.k[j].max(1) }) as u64)
        .collect();
    let period = minimal_period(&primes, &upper, &f);
    let h = PeriodicGridFunction::new(&primes, period, true, format!("f∘φ m={m}"), Arc::new(f));
    Ok((h, Some(phi)))
}

pub fn case_c_template(a: i64, b: i64) -> Result<(Option<FourierTemplate>, CaseCReport), GridError> {
    let (h, phi) = case_c_grid(a, b)?;
    let families = case_c_families(a, b);
    let ps = periodic_sum(&h, &families, h.period())?;
    if ps.value.re >= -VALUE_TOL {
        return Err(GridError::Inconclusive(format!("periodic sum {} is not negative", ps.value)));
    }
    let (g, rep) = truncate_verified(&h, &families, h.period())?;
    Ok((
        g,
        CaseCReport {
            a,
            b,
            construction: h.provenance().to_string(),
            phi,
            primes: h.primes().to_vec(),
            period: h.period().to_vec(),
            periodic_sum: (ps.value.re, ps.value.im),
            periodic_sum_exact: ps.exact.map(|x| (x.re.to_string(), x.im.to_string())),
            truncation: Some(rep),
        },
    ))
}

// ---------------------------------------------------------------------------
// Case E (girth three, one 1×3 subsystem)

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseEReport {
    pub construction: String,
    pub periodic_sum: Option<(f64, f64)>,
    pub total: f64,
}

/// z = e^{iπs} with Re(z⁴ + z² + 1) ≤ −10⁻³.
pub fn z_search() -> PhaseHit {
    let terms = [(Complex64::new(1.0, 0.0), q(4)), (Complex64::new(1.0, 0.0), q(2))];
    phase_search(1.0, &terms, 100).expect("z⁴+z²+1 takes negative real values")
}

fn z_function(primes: &[u64], z: Complex64, flip: Option<(usize, i64)>) -> PeriodicGridFunction {
    let mut period = vec![1; primes.len()];
    let label = match flip {
        Some((idx, w)) => {
            period[idx] = 2 * w as u64;
            format!("z-flip p={} w={w}", primes[idx])
        }
        None => "z-constant".to_string(),
    };
    PeriodicGridFunction::new(
        primes,
        period,
        false,
        label,
        Arc::new(move |v| match flip {
            Some((idx, w)) if floor_div(v[idx], w).rem_euclid(2) == 1 => GridValue::float(z.conj()),
            _ => GridValue::float(z),
        }),
    )
}

/// Template for the girth-three families {A_5, A_i, A_j}.
pub fn case_e_template(families: &[Vec<i64>]) -> Result<(Option<FourierTemplate>, CaseEReport), GridError> {
    let lambdas = templates::family_lambdas(families);
    let oriented: Vec<Vec<i64>> = families.iter().map(|a| orient(a)).collect();
    let has_aq = oriented.iter().any(|a| is_additive_quadruple(a));
    if !has_aq && lambdas.iter().any(|l| l != &BigRational::one()) {
        let (g, rep) = templates::case_a_template(families)?;
        return Ok((Some(g), CaseEReport { construction: format!("spike {}", rep.subcase), periodic_sum: None, total: rep.total }));
    }
    let primes = prime_set(families);
    let mut cands: Vec<PeriodicGridFunction> = vec![build_signed_constant(SignedKind::H2, &primes)];
    if let Ok((h, _)) = build_h3(families) {
        cands.push(h);
    }
    let z = Complex64::from_polar(1.0, z_search().t);
    cands.push(z_function(&primes, z, None));
    for (idx, &p) in primes.iter().enumerate() {
        let mut ws: Vec<i64> = families.iter().flatten().map(|&a| vp(p, a as i128)).filter(|&v| v > 0).collect();
        ws.sort_unstable();
        ws.dedup();
        for w in ws {
            cands.push(z_function(&primes, z, Some((idx, w))));
        }
    }
    for h in cands {
        if let Some(ps) = verify_candidate(&h, families) {
            let (g, rep) = truncate_verified(&h, families, h.period())?;
            return Ok((
                g,
                CaseEReport {
                    construction: h.provenance().to_string(),
                    periodic_sum: Some((ps.value.re, ps.value.im)),
                    total: rep.total,
                },
            ));
        }
    }
    if families.len() >= 2 {
        if let Ok((g, rep)) = templates::case_a_template(families) {
            return Ok((Some(g), CaseEReport { construction: format!("spike {}", rep.subcase), periodic_sum: None, total: rep.total }));
        }
    }
    Err(GridError::Inconclusive("no Case E construction verified".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_uncommon() -> Vec<Vec<i64>> {
        vec![vec![1, -1, 1, -1], vec![-2, 4, 3, -9], vec![5, -7, -3, 9], vec![2, 7, -4, -9], vec![2, 5, -2, -9]]
    }
    fn cancelling_1() -> Vec<Vec<i64>> {
        vec![vec![1, 1, -1, -1], vec![1, -3, -4, 12], vec![-3, -7, 4, 12], vec![4, -7, -3, 12], vec![-4, -3, 1, 12]]
    }
    fn cancelling_2() -> Vec<Vec<i64>> {
        vec![
            vec![1, 1, -1, -1],
            vec![6, 24, -144, -1],
            vec![-138, -120, 144, -1],
            vec![-18, -120, 24, -1],
            vec![18, -138, 6, -1],
        ]
    }

    #[test]
    fn primes_and_valuations() {
        assert_eq!(prime_set(&cos_uncommon()), vec![2, 3, 5, 7]);
        assert!(prime_set(&[vec![1, 1, -1, -1]]).is_empty());
        assert_eq!(prime_set(&cancelling_2()), vec![2, 3, 5, 23]);
        assert_eq!(valuation(2, &q(12)).unwrap(), 2);
        assert_eq!(valuation(3, &Q::new(5.into(), 9.into())).unwrap(), -2);
        assert_eq!(valuation(2, &q(-144)).unwrap(), 4);
        assert_eq!(valuation(5, &q(0)), Err(GridError::ZeroInput));
    }

    #[test]
    fn cancelling_detection() {
        assert!(is_cancelling(&[1, -3, -4, 12]));
        assert!(!is_cancelling(&[1, 2, -3, -4]));
        assert!(is_cancelling(&[1, 1, -1, -1]));
        assert!(!is_cancelling(&[2, -1, 5, -6]));
    }

    #[test]
    fn cosine_branches() {
        let h = cosine_search(&[q(1), q(1), q(1), q(1)]).unwrap();
        assert_eq!(h.s, q(1));
        assert!((h.value + 3.0).abs() < 1e-12);
        let h = cosine_search(&[q(1), q(2)]).unwrap();
        assert_eq!(h.s, Q::new(7.into(), 5.into()));
        let h = cosine_search(&[q(1), q(3)]).unwrap();
        assert_eq!(h.s, Q::new(8.into(), 9.into()));
        assert!(h.value < 0.0);
        // generic rationals fall through to the scan
        let g = [Q::new(3.into(), 7.into()), q(5), q(-2), Q::new(1.into(), 3.into())];
        let h = cosine_search(&g).unwrap();
        assert!(cos_value(&g, &h.s) <= -1e-3);
    }

    #[test]
    fn signed_constants() {
        let h1 = build_signed_constant(SignedKind::H1, &[2, 3]);
        let f = GridFamily::new(&[1, 2, 3, 4], &[2, 3]).unwrap();
        assert!((f.eval(&h1, &[0, 0]).z - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        let h2 = build_signed_constant(SignedKind::H2, &[2, 3]);
        let f = GridFamily::new(&[1, 2, 3, -4], &[2, 3]).unwrap();
        assert_eq!(f.eval(&h2, &[1, 2]).exact, Some(gauss(-1, 0)));
        let f = GridFamily::new(&[1, -2, 3, -4], &[2, 3]).unwrap();
        assert_eq!(f.eval(&h2, &[1, 2]).exact, Some(gauss(1, 0)));
    }

    #[test]
    fn h3_cos_uncommon_override() {
        let fams = cos_uncommon();
        let primes = prime_set(&fams);
        let h = h3(&primes, &[1, 0, 1, 0], &q(1));
        let ps = periodic_sum(&h, &fams, &[1, 1, 1, 1]).unwrap();
        assert!((ps.value - Complex64::new(-3.0, 0.0)).norm() < 1e-9);
        // a cancelling family is constantly 1
        let f = GridFamily::new(&[1, -3, -4, 12], &[2, 3, 5, 7]).unwrap();
        assert_eq!(f.eval(&h, &[3, 1, 0, 2]).z, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn h3_generic_exponent() {
        let primes = [2, 3, 5];
        let a = [2, -1, 5, -6];
        let theta = choose_theta(&[a.to_vec()], &[0], &primes).unwrap();
        assert_eq!(theta, vec![1, 2, 4]);
        // Σ sign·v: v2: 1-0+0-1 = 0, v3: -1, v5: +1 → γ = -2 + 4
        assert_eq!(gamma(&a, &primes, &theta), 2);
    }

    #[test]
    fn build_h3_cos_uncommon() {
        let fams = cos_uncommon();
        let (h, p) = build_h3(&fams).unwrap();
        assert_eq!(p.gammas.len(), 4);
        let ps = periodic_sum(&h, &fams, h.period()).unwrap();
        assert!(ps.value.re / ps.volume as f64 <= -1e-3);
    }

    #[test]
    fn cancelling_examples() {
        let fams = cancelling_1();
        let primes = prime_set(&fams);
        assert_eq!(primes, vec![2, 3, 7]);
        let h = rectangle_function(&primes, (0, 2), (1, 1), RectangleRule::BothOdd);
        assert_eq!(h.period(), &[4, 2, 1]);
        let ps = periodic_sum(&h, &fams, &[4, 2, 1]).unwrap();
        assert_eq!(ps.exact, Some(gauss(-24, 0)));

        let fams = cancelling_2();
        let primes = prime_set(&fams);
        let h = window_function(&primes, 0, 1, 4, &[0, 1]);
        let ps = periodic_sum(&h, &fams, &[4, 1, 1, 1]).unwrap();
        assert_eq!(ps.exact, Some(gauss(-4, 0)));
        let per: Vec<f64> = ps.per_family.iter().map(|z| z.re).collect();
        assert_eq!(per, vec![4.0, -4.0, -4.0, 0.0, 0.0]);
    }

    #[test]
    fn case_b_dispatch() {
        let (h, ps, branch) = case_b_grid(&cancelling_1()).unwrap();
        assert_eq!(branch, "cancelling-rectangle");
        assert_eq!(h.period(), &[4, 2, 1]);
        assert_eq!(ps.exact, Some(gauss(-24, 0)));
        let (h, ps, branch) = case_b_grid(&cancelling_2()).unwrap();
        assert_eq!(branch, "cancelling-spread");
        assert_eq!(h.period(), &[4, 1, 1, 1]);
        assert_eq!(ps.exact, Some(gauss(-4, 0)));
        let (_, ps, branch) = case_b_grid(&cos_uncommon()).unwrap();
        assert_eq!(branch, "h3");
        assert!(ps.value.re < 0.0);
    }

    #[test]
    fn case_b_templates_verify() {
        for fams in [cos_uncommon(), cancelling_1(), cancelling_2()] {
            let (g, rep) = case_b_template(&fams).unwrap();
            let t = rep.truncation.unwrap();
            assert!(t.total <= -1e-6, "{} at D={}", t.total, t.depth);
            if let Some(g) = g {
                let (direct, _) = templates::sigma_families(&fams, &g).unwrap();
                assert!((direct - t.total).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn periodicity_mismatch_reported() {
        let fams = cancelling_2();
        let primes = prime_set(&fams);
        let h = window_function(&primes, 0, 1, 4, &[0, 1]);
        assert!(matches!(periodic_sum(&h, &fams, &[3, 1, 1, 1]), Err(GridError::PeriodMismatch { .. })));
        let zero = PeriodicGridFunction::constant(&primes, GridValue::exact(gauss(0, 0)), "0");
        assert_eq!(periodic_sum(&zero, &fams, &[1, 1, 1, 1]).unwrap().exact, Some(gauss(0, 0)));
    }

    #[test]
    fn truncation_small() {
        let h = build_signed_constant(SignedKind::H1, &[2]);
        let g = truncate(&h, 2).unwrap();
        let mut keys: Vec<i128> = g.support().iter().map(|r| r[0]).collect();
        keys.sort_unstable();
        assert_eq!(keys, vec![-4, -2, -1, 1, 2, 4]);
        assert!((g.get(&[2]) - templates::e(1.0 / 8.0)).norm() < 1e-15);
        assert!((g.get(&[-4]) - templates::e(-1.0 / 8.0)).norm() < 1e-15);
    }

    #[test]
    fn truncation_cos_uncommon() {
        let fams = cos_uncommon();
        let h = h3(&prime_set(&fams), &[1, 0, 1, 0], &q(1));
        let (_, rep) = truncation_report(&h, &fams, &[1, 1, 1, 1], 10).unwrap();
        assert!(rep.total < 0.0);
        assert!((rep.normalized + 3.0).abs() < 0.15, "{}", rep.normalized);
    }

    #[test]
    fn case_c_phi_for_4_1() {
        let primes = prime_set(&case_c_families(4, 1));
        let phi = find_case_c_phi(4, 1, &primes).unwrap();
        assert_eq!(phi.m, 2);
        // φ = (v2 mod 4, v3, v5)
        for v in [[0, 0, 0], [1, 1, 0], [3, 0, 1], [5, 3, 2]] {
            let (i, j, k) = phi.eval(&v);
            assert_eq!((i, j as i64, k as i64), (v[0] % 4, v[1] % 2, v[2] % 2));
        }
    }

    #[test]
    fn case_c_example_sum() {
        let (h, _) = case_c_grid(4, 1).unwrap();
        assert_eq!(h.period(), &[4, 2, 2]);
        let ps = periodic_sum(&h, &case_c_families(4, 1), h.period()).unwrap();
        assert!((ps.value - Complex64::new(-0.249573, 0.723675)).norm() < 1e-5, "{}", ps.value);
    }

    #[test]
    fn valuation_sigma_matches_materialized() {
        let (h, _) = case_c_grid(4, 1).unwrap();
        let fams = case_c_families(4, 1);
        for d in [3u32, 6, 9] {
            let (_, direct) = truncation_report(&h, &fams, h.period(), d).unwrap();
            let fast = truncated_sigma(&h, &fams, h.period(), d).unwrap();
            for (x, y) in direct.per_family.iter().zip(&fast.per_family) {
                assert!((x - y).abs() < 1e-6, "D={d}: {x} vs {y}");
            }
        }
        let fams = cancelling_1();
        let h = rectangle_function(&prime_set(&fams), (0, 2), (1, 1), RectangleRule::BothOdd);
        let (_, direct) = truncation_report(&h, &fams, h.period(), 7).unwrap();
        let fast = truncated_sigma(&h, &fams, h.period(), 7).unwrap();
        assert_eq!(fast.total_exact.as_deref(), Some(direct.total.to_string().as_str()));
    }

    #[test]
    fn case_c_truncation() {
        let (h, _) = case_c_grid(4, 1).unwrap();
        let fams = case_c_families(4, 1);
        let at = |d: u32| truncated_sigma(&h, &fams, h.period(), d).unwrap();
        // boundary terms dominate at small depth
        assert!(at(12).total > 0.0);
        assert!((at(100).normalized + 0.249573).abs() < 0.05);
        assert!((at(400).normalized + 0.249573).abs() < 0.005);
        let (g, rep) = case_c_template(4, 1).unwrap();
        let t = rep.truncation.unwrap();
        assert_eq!(t.depth, 267);
        assert!(t.total < 0.0);
        assert!(g.is_none());
    }

    #[test]
    fn case_c_table_shape() {
        // columns strictly between 0 and m carry the yellow values
        for m in 2..6 {
            for i in 1..m {
                assert_eq!(case_c_table(m, i, 0, 1), gauss(-1, -1));
                assert_eq!(case_c_table(m, i + m, 1, 1), gauss(1, -1));
                assert_eq!(case_c_table(m, i, 1, 1), gauss(0, 0));
            }
        }
        assert_eq!(case_c_table(2, 2, 1, 0), gauss_ratio((12, 25), (3, 25)));
    }

    #[test]
    fn case_c_special_tables() {
        for (a, b) in [(1, 3), (2, 3)] {
            let (h, _) = case_c_grid(a, b).unwrap();
            let ps = periodic_sum(&h, &case_c_families(a, b), h.period()).unwrap();
            assert_eq!(ps.exact, Some(gauss_ratio((-17, 64), (0, 1))), "({a},{b})");
        }
    }

    #[test]
    fn case_c_exceptions() {
        assert!(matches!(case_c_grid(3, 1), Err(GridError::Unknown(_))));
        assert!(matches!(case_c_grid(3, 2), Err(GridError::Unknown(_))));
        assert!(matches!(case_c_grid(1, 2), Err(GridError::NotApplicable(_))));
    }

    #[test]
    fn case_c_ten_one() {
        let primes = prime_set(&case_c_families(10, 1));
        assert_eq!(primes, vec![2, 3, 5, 11]);
        let (h, phi) = case_c_grid(10, 1).unwrap();
        assert!(phi.is_some());
        let ps = periodic_sum(&h, &case_c_families(10, 1), h.period()).unwrap();
        // same average over a larger period box
        let avg = ps.value / ps.volume as f64 * 16.0;
        assert!((avg - Complex64::new(-0.249573, 0.723675)).norm() < 1e-5, "{}", ps.value);
    }

    #[test]
    fn z_phase() {
        let h = z_search();
        let z = Complex64::from_polar(1.0, h.t);
        assert!((z.powi(4) + z * z + 1.0).re <= -1e-3);
    }

    #[test]
    fn doc_tabulates_period_box() {
        let h = window_function(&[2, 3], 0, 1, 4, &[0, 1]);
        let doc = h.to_doc().unwrap();
        assert_eq!(doc.table.len(), 8);
        assert!(doc.table.iter().any(|e| e.residues == vec![1, 0] && e.re == -1.0));
    }
}
