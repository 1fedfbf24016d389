//! Explicit F_p witnesses: projection of templates, density evaluation and
//! two-colouring gaps.

use crate::classify::{self, Status};
use crate::grids::{GridDoc, PeriodicGridFunction};
use crate::linalg;
use crate::sysalg::{self, LinearSystem};
use crate::templates::{self, FourierTemplate, SigmaReport, TemplateDoc, TemplateError};
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

const FOURIER_BUDGET: u128 = 100_000_000;
const DIRECT_BUDGET: u128 = 100_000_000;
const WITNESS_BUDGET: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("prime too small: need p > {bound}, smallest admissible prime is {min_prime}")]
    PrimeTooSmall { bound: u64, min_prime: u64 },
    #[error("evaluation too large: {0}")]
    TooLarge(String),
    #[error("h = 1/2 + εf leaves [0,1]: max |f| = {0}")]
    RangeViolation(f64),
    #[error("coefficients are not hermitian")]
    NotHermitian,
    #[error("density has imaginary part {0}")]
    NotReal(f64),
    #[error("witness skipped: smallest admissible prime {min_prime} exceeds the resource guard")]
    WitnessSkipped { min_prime: u64 },
    #[error("system is not certified uncommon: {0}")]
    NotUncommon(String),
    #[error("classification failed: {0}")]
    Classify(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("grid: {0}")]
    Grid(String),
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime(n: u64) -> u64 {
    let mut p = n + 1;
    while !is_prime(p) {
        p += 1;
    }
    p
}

fn modp(x: i128, p: u64) -> usize {
    x.rem_euclid(p as i128) as usize
}

/// f: F_p → C given by its Fourier coefficients f̂(r) = E_x f(x) e(−rx/p).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFunction {
    p: u64,
    coeffs: Vec<Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldCoefficient {
    pub r: u64,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldFunctionDoc {
    pub p: u64,
    pub coefficients: Vec<FieldCoefficient>,
}

impl FieldFunction {
    pub fn new(p: u64, coeffs: Vec<Complex64>) -> Result<Self, CertifyError> {
        assert_eq!(coeffs.len() as u64, p, "one coefficient per residue");
        let f = FieldFunction { p, coeffs };
        if !f.is_hermitian(1e-12) {
            return Err(CertifyError::NotHermitian);
        }
        Ok(f)
    }

    /// Sets f̂(r) and f̂(−r) = conj for each listed r; everything else is zero.
    pub fn from_sparse(p: u64, mean: f64, points: &[(i64, Complex64)]) -> Self {
        let mut coeffs = vec![Complex64::zero(); p as usize];
        coeffs[0] = Complex64::new(mean, 0.0);
        for &(r, v) in points {
            let i = modp(r as i128, p);
            coeffs[i] = v;
            coeffs[modp(-(r as i128), p)] = v.conj();
        }
        FieldFunction { p, coeffs }
    }

    /// Fourier coefficients of a real function given by its values.
    pub fn from_values(values: &[f64]) -> Self {
        let p = values.len() as u64;
        let n = p as usize;
        let coeffs = (0..n)
            .map(|r| {
                let s: Complex64 = values
                    .iter()
                    .enumerate()
                    .map(|(x, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((r * x) % n) as f64 / p as f64))
                    .sum();
                s / p as f64
            })
            .collect();
        FieldFunction { p, coeffs }
    }

    pub fn constant(p: u64, c: f64) -> Self {
        FieldFunction::from_sparse(p, c, &[])
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }
    pub fn coeff(&self, r: i128) -> Complex64 {
        self.coeffs[modp(r, self.p)]
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.coeffs.len();
        (0..n).all(|r| (self.coeffs[r] - self.coeffs[(n - r) % n].conj()).norm() <= tol)
    }

    /// f(x) = Σ_r f̂(r) e(rx/p); real by hermitian symmetry.
    pub fn values(&self) -> Vec<f64> {
        let n = self.p as usize;
        let support: Vec<(usize, Complex64)> =
            self.coeffs.iter().copied().enumerate().filter(|(_, c)| c.norm() > 0.0).collect();
        (0..n)
            .map(|x| {
                support
                    .iter()
                    .map(|&(r, c)| (c * Complex64::from_polar(1.0, 2.0 * PI * ((r * x) % n) as f64 / n as f64)).re)
                    .sum()
            })
            .collect()
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// |Σ|f̂|² − E|f|²|.
    pub fn parseval_residual(&self) -> f64 {
        let lhs: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        let vals = self.values();
        let rhs = vals.iter().map(|v| v * v).sum::<f64>() / self.p as f64;
        (lhs - rhs).abs()
    }

    /// a + b·f.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let mut coeffs: Vec<Complex64> = self.coeffs.iter().map(|c| c * b).collect();
        coeffs[0] += a;
        FieldFunction { p: self.p, coeffs }
    }

    pub fn to_doc(&self) -> FieldFunctionDoc {
        FieldFunctionDoc {
            p: self.p,
            coefficients: self
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| c.norm() > 0.0)
                .map(|(r, c)| FieldCoefficient { r: r as u64, re: c.re, im: c.im })
                .collect(),
        }
    }

    pub fn from_doc(doc: &FieldFunctionDoc) -> Result<Self, CertifyError> {
        let mut coeffs = vec![Complex64::zero(); doc.p as usize];
        for c in &doc.coefficients {
            coeffs[(c.r % doc.p) as usize] = Complex64::new(c.re, c.im);
        }
        FieldFunction::new(doc.p, coeffs)
    }
}

fn pow_guard(p: u64, e: usize, budget: u128, what: &str) -> Result<u128, CertifyError> {
    let n = (p as u128).checked_pow(e as u32).filter(|&n| n <= budget);
    n.ok_or_else(|| CertifyError::TooLarge(format!("{what}: {p}^{e} exceeds {budget}")))
}

/// t_L(f) = p^{rank_p(L) − m} Σ_{r ∈ F_p^m} Π_j f̂(a_j·r).
pub fn density_fourier(rows: &[Vec<i64>], f: &FieldFunction) -> Result<f64, CertifyError> {
    let m = rows.len();
    let k = rows[0].len();
    let p = f.p;
    pow_guard(p, m, FOURIER_BUDGET, "Fourier side")?;
    let cols: Vec<Vec<i128>> = (0..k).map(|j| rows.iter().map(|r| r[j] as i128).collect()).collect();
    // the first coordinate is split across threads, the rest enumerated in order
    let partial: Vec<Complex64> = (0..p)
        .into_par_iter()
        .map(|r0| {
            let mut acc = Complex64::zero();
            let mut r = vec![0i128; m];
            r[0] = r0 as i128;
            let inner = (p as u128).pow(m as u32 - 1);
            for idx in 0..inner {
                let mut t = idx;
                for slot in r.iter_mut().skip(1) {
                    *slot = (t % p as u128) as i128;
                    t /= p as u128;
                }
                let mut prod = Complex64::new(1.0, 0.0);
                for c in &cols {
                    let s: i128 = c.iter().zip(&r).map(|(a, x)| a * x).sum();
                    let v = f.coeffs[modp(s, p)];
                    if v.re == 0.0 && v.im == 0.0 {
                        prod = Complex64::zero();
                        break;
                    }
                    prod *= v;
                }
                acc += prod;
            }
            acc
        })
        .collect();
    let total: Complex64 = partial.iter().sum();
    if total.im.abs() > 1e-8 * (1.0 + total.re.abs()) {
        return Err(CertifyError::NotReal(total.im));
    }
    // the character sum counts each kernel point p^{m − rank_p(L)} times
    let rank = k - kernel_mod_p(rows, p).free.len();
    Ok(total.re / (p as f64).powi((m - rank) as i32))
}

/// Basis of the kernel of L over F_p: (free columns, particular rows) such that
/// x_pivot = −Σ c·x_free.
struct KernelModP {
    p: u64,
    k: usize,
    free: Vec<usize>,
    /// For each pivot column, coefficients on the free columns.
    pivots: Vec<(usize, Vec<u64>)>,
}

fn inv_mod(a: u64, p: u64) -> u64 {
    let (mut t, mut nt, mut r, mut nr) = (0i128, 1i128, p as i128, a as i128);
    while nr != 0 {
        let qt = r / nr;
        (t, nt) = (nt, t - qt * nt);
        (r, nr) = (nr, r - qt * nr);
    }
    t.rem_euclid(p as i128) as u64
}

fn kernel_mod_p(rows: &[Vec<i64>], p: u64) -> KernelModP {
    let k = rows[0].len();
    let mut a: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|&x| modp(x as i128, p) as u64).collect()).collect();
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..k {
        let Some(piv) = (row..a.len()).find(|&i| a[i][col] != 0) else { continue };
        a.swap(row, piv);
        let inv = inv_mod(a[row][col], p);
        for x in a[row].iter_mut() {
            *x = *x * inv % p;
        }
        for i in 0..a.len() {
            if i != row && a[i][col] != 0 {
                let fct = a[i][col];
                for j in 0..k {
                    a[i][j] = (a[i][j] + p * p - fct * a[row][j] % p) % p;
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == a.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..k).filter(|c| !pivot_cols.contains(c)).collect();
    let pivots = pivot_cols
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, free.iter().map(|&fc| a[i][fc]).collect()))
        .collect();
    KernelModP { p, k, free, pivots }
}

impl KernelModP {
    fn for_each(&self, mut f: impl FnMut(&[usize])) {
        let p = self.p as usize;
        let nf = self.free.len();
        let mut t = vec![0usize; nf];
        let mut x = vec![0usize; self.k];
        loop {
            for (i, &c) in self.free.iter().enumerate() {
                x[c] = t[i];
            }
            for (c, coef) in &self.pivots {
                let s: usize = coef.iter().zip(&t).map(|(&a, &b)| (a as usize * b) % p).sum::<usize>() % p;
                x[*c] = (p - s) % p;
            }
            f(&x);
            let mut j = 0;
            loop {
                if j == nf {
                    return;
                }
                t[j] += 1;
                if t[j] < p {
                    break;
                }
                t[j] = 0;
                j += 1;
            }
        }
    }
}

fn density_direct_values(rows: &[Vec<i64>], values: &[f64]) -> Result<f64, CertifyError> {
    let p = values.len() as u64;
    let ker = kernel_mod_p(rows, p);
    let n = pow_guard(p, ker.free.len(), DIRECT_BUDGET, "kernel enumeration")?;
    let mut acc = 0.0;
    ker.for_each(|x| acc += x.iter().map(|&v| values[v]).product::<f64>());
    Ok(acc / n as f64)
}

/// t_L(f) = E over the kernel of L in F_p^k of Π f(x_j).
pub fn density_direct(rows: &[Vec<i64>], f: &FieldFunction) -> Result<f64, CertifyError> {
    let ker_dim = rows[0].len() - rows.len();
    pow_guard(f.p, ker_dim, DIRECT_BUDGET, "kernel enumeration")?;
    density_direct_values(rows, &f.values())
}

/// t_L(h) + t_L(1−h) − 2^{1−k} for h = 1/2 + εf.
pub fn two_color_gap(rows: &[Vec<i64>], f: &FieldFunction, epsilon: f64) -> Result<f64, CertifyError> {
    let maxf = f.max_abs_value();
    if epsilon * maxf > 0.5 + 1e-12 || epsilon.is_nan() {
        return Err(CertifyError::RangeViolation(maxf));
    }
    let h = f.affine(0.5, epsilon);
    let g = f.affine(0.5, -epsilon);
    coloring_excess(rows, &h, &g)
}

fn coloring_excess(rows: &[Vec<i64>], h: &FieldFunction, g: &FieldFunction) -> Result<f64, CertifyError> {
    let k = rows[0].len() as i32;
    Ok(density_fourier(rows, h)? + density_fourier(rows, g)? - 2f64.powi(1 - k))
}

/// t_L(f) + t_L(1−f) − 2^{1−k} for a [0,1]-valued f.
pub fn coloring_gap(rows: &[Vec<i64>], f: &FieldFunction) -> Result<f64, CertifyError> {
    let vals = f.values();
    if vals.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
        return Err(CertifyError::RangeViolation(vals.iter().fold(0.0, |m, v| m.max(v.abs()))));
    }
    coloring_excess(rows, f, &f.affine(1.0, -1.0))
}

// ---------------------------------------------------------------------------
// projection

/// Largest ℓ¹ row norm among integer relation matrices of the critical subsystems.
pub fn relation_width(l: &LinearSystem) -> u64 {
    sysalg::critical_sets(l)
        .iter()
        .flat_map(|cs| {
            let rows = linalg::to_q(cs.l_b.rows());
            linalg::orthogonal_complement(&rows, cs.l_b.k())
        })
        .map(|row| row.iter().map(|x| x.magnitude().to_u64().unwrap_or(u64::MAX)).fold(0u64, |a, b| a.saturating_add(b)))
        .max()
        .unwrap_or(1)
        .max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub f: FieldFunction,
    pub base: u64,
    pub bound: u64,
}

/// (C, bound): C = 2MW + 1 and p must exceed M·W·(1 + C + … + C^{d−1}).
pub fn projection_bound(g: &FourierTemplate, width: u64) -> (u64, u64) {
    let m = (g.max_abs_coord().max(1)) as u64;
    let c = 2 * m * width + 1;
    let geo: u64 = (0..g.d()).fold(0u64, |acc, t| acc.saturating_add(c.saturating_pow(t as u32)));
    (c, m.saturating_mul(width).saturating_mul(geo))
}

/// f̂(γ(w)) = g(w) with γ(w) = Σ_t w_t C^t mod p.
pub fn freiman_project(g: &FourierTemplate, p: u64, width: u64) -> Result<Projection, CertifyError> {
    let (c, bound) = projection_bound(g, width);
    if p <= bound || !is_prime(p) || p == 2 {
        return Err(CertifyError::PrimeTooSmall { bound, min_prime: next_prime(bound.max(2)) });
    }
    project_with_base(g, p, c).map(|f| Projection { f, base: c, bound })
}

fn project_with_base(g: &FourierTemplate, p: u64, c: u64) -> Result<FieldFunction, CertifyError> {
    let mut coeffs = vec![Complex64::zero(); p as usize];
    for (w, v) in g.entries() {
        let mut x: i128 = 0;
        let mut pw: i128 = 1;
        for &wt in w {
            x = (x + wt * pw).rem_euclid(p as i128);
            pw = pw * c as i128 % p as i128;
        }
        coeffs[x as usize] = v;
    }
    FieldFunction::new(p, coeffs)
}

/// σ_{L_B}(g) against t_{L_B}(f) for every critical set.
pub fn projection_agrees(l: &LinearSystem, g: &FourierTemplate, f: &FieldFunction) -> Result<bool, CertifyError> {
    for cs in sysalg::critical_sets(l) {
        let s = templates::sigma(&cs.l_b, g)?;
        let t = density_fourier(cs.l_b.rows(), f)?;
        if (s - t).abs() > 1e-9 * (1.0 + s.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// tensoring

/// h(y, z) = f(y)·1_{z=0} on F_p², with ĥ(r, s) = f̂(r)/p.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFunction {
    pub f: FieldFunction,
}

pub fn tensor_indicator(f: &FieldFunction) -> TensorFunction {
    TensorFunction { f: f.clone() }
}

impl TensorFunction {
    pub fn mean(&self) -> f64 {
        self.f.mean() / self.f.p as f64
    }

    pub fn coeff(&self, r: i128, _s: i128) -> Complex64 {
        self.f.coeff(r) / self.f.p as f64
    }

    /// Σ over R ∈ (F_p²)^m of Π_j ĥ(a_j·R), enumerated explicitly.
    pub fn density_fourier(&self, rows: &[Vec<i64>]) -> Result<f64, CertifyError> {
        let p = self.f.p;
        let m = rows.len();
        let n = pow_guard(p, 2 * m, FOURIER_BUDGET, "tensor Fourier side")?;
        let k = rows[0].len();
        let mut acc = Complex64::zero();
        for idx in 0..n {
            let mut t = idx;
            let mut r = vec![0i128; m];
            let mut s = vec![0i128; m];
            for i in 0..m {
                r[i] = (t % p as u128) as i128;
                t /= p as u128;
                s[i] = (t % p as u128) as i128;
                t /= p as u128;
            }
            let mut prod = Complex64::new(1.0, 0.0);
            for j in 0..k {
                let a: i128 = (0..m).map(|i| rows[i][j] as i128 * r[i]).sum();
                let b: i128 = (0..m).map(|i| rows[i][j] as i128 * s[i]).sum();
                prod *= self.coeff(a, b);
            }
            acc += prod;
        }
        let rank = k - kernel_mod_p(rows, p).free.len();
        Ok(acc.re / (p as f64).powi(2 * (m - rank) as i32))
    }

    /// E over the kernel of L in (F_p²)^k of Π h(x_j).
    pub fn density_direct(&self, rows: &[Vec<i64>]) -> Result<f64, CertifyError> {
        let p = self.f.p;
        let vals = self.f.values();
        let ker = kernel_mod_p(rows, p);
        let n = pow_guard(p, 2 * ker.free.len(), DIRECT_BUDGET, "tensor kernel")?;
        // the two coordinates are independent kernel elements
        let mut ys: Vec<f64> = Vec::new();
        ker.for_each(|x| ys.push(x.iter().map(|&v| vals[v]).product()));
        let mut zero_z = 0u64;
        ker.for_each(|x| zero_z += u64::from(x.iter().all(|&v| v == 0)));
        Ok(ys.iter().sum::<f64>() * zero_z as f64 / n as f64)
    }
}

/// Σ_B t_{L_B}(h) split as p^{1−c}·Σ_{C₁} t(f) + p^{2−c}·Σ_{C₂} t(f).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorWeights {
    pub direct: f64,
    pub predicted: f64,
}

pub fn tensor_weights(l: &LinearSystem, f: &FieldFunction) -> Result<TensorWeights, CertifyError> {
    let h = tensor_indicator(f);
    let p = f.p as f64;
    let mut direct = 0.0;
    let mut predicted = 0.0;
    for cs in sysalg::critical_sets(l) {
        let c = cs.b.len() as i32;
        direct += h.density_direct(cs.l_b.rows())?;
        predicted += p.powi(cs.m_b as i32 - c) * density_direct(cs.l_b.rows(), f)?;
    }
    Ok(TensorWeights { direct, predicted })
}

// ---------------------------------------------------------------------------
// certificates

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Witness {
    pub p: u64,
    pub base: u64,
    pub epsilon: f64,
    pub t_h: f64,
    pub t_one_minus_h: f64,
    pub threshold: f64,
    pub gap: f64,
}

/// A [0,1]-valued f on F_p given directly by a few Fourier coefficients.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldWitness {
    pub p: u64,
    pub alpha: f64,
    pub beta: f64,
    pub support: Vec<i64>,
    pub value: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridCertificate {
    pub construction: String,
    pub depth: u32,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub total_exact: Option<String>,
    pub per_family: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub table: Option<GridDoc>,
    /// Coefficient families the grid sum runs over.
    #[serde(default)]
    pub families: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Certificate {
    pub construction: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub template: Option<TemplateDoc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<SigmaReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<GridCertificate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<FieldWitness>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_skipped: Option<String>,
}

pub const SIGMA_TOL: f64 = -1e-6;

impl Certificate {
    /// Certificate from a template, with Σ_B σ_{L_B}(g) evaluated on `l`.
    pub fn from_template(l: &LinearSystem, g: &FourierTemplate, construction: impl Into<String>) -> Result<Self, CertifyError> {
        let sigma = templates::sigma_critical_sum(l, g)?;
        Ok(Certificate {
            construction: construction.into(),
            template: Some(g.to_doc()),
            sigma: Some(sigma),
            ..Default::default()
        })
    }

    pub fn template(&self) -> Option<FourierTemplate> {
        self.template.as_ref().and_then(|d| FourierTemplate::from_doc(d).ok())
    }

    /// The inequality carried by the certificate.
    pub fn sigma_total(&self) -> Option<f64> {
        self.sigma.as_ref().map(|s| s.total).or(self.grid.as_ref().map(|g| g.total))
    }

    pub fn verified(&self) -> bool {
        if let Some(w) = &self.witness {
            if w.gap >= 0.0 {
                return false;
            }
        }
        match (self.sigma_total(), &self.field) {
            (Some(t), _) => t <= SIGMA_TOL,
            (None, Some(f)) => f.gap < 0.0,
            _ => false,
        }
    }

    /// Recomputes the σ report on `l` from the stored template, or the grid total from the stored table.
    pub fn reverify(&self, l: &LinearSystem) -> Result<bool, CertifyError> {
        self.reverify_at(l, None)
    }

    /// As `reverify`; a grid certificate is re-summed at `depth` instead of its recorded depth.
    pub fn reverify_at(&self, l: &LinearSystem, depth: Option<u32>) -> Result<bool, CertifyError> {
        if let Some(g) = self.template() {
            return Ok(templates::sigma_critical_sum(l, &g)?.total <= SIGMA_TOL);
        }
        if let Some(grid) = &self.grid {
            if let (Some(doc), false) = (&grid.table, grid.families.is_empty()) {
                let gerr = |e: crate::grids::GridError| CertifyError::Grid(e.to_string());
                let h = PeriodicGridFunction::from_doc(doc).map_err(gerr)?;
                let rep = crate::grids::truncated_sigma(&h, &grid.families, &doc.period, depth.unwrap_or(grid.depth))
                    .map_err(gerr)?;
                let same = depth.is_some() || (rep.total - grid.total).abs() <= 1e-6 * (1.0 + grid.total.abs());
                return Ok(same && rep.total <= SIGMA_TOL);
            }
        }
        Ok(self.verified())
    }
}


/// Smallest admitted prime with p^m Fourier-side work under the guard, and the witness there.
pub fn build_witness(l: &LinearSystem, g: &FourierTemplate) -> Result<Witness, CertifyError> {
    let (_, bound) = projection_bound(g, relation_width(l));
    let p = next_prime(bound.max(2));
    if (p as u128).checked_pow(l.m() as u32).is_none_or(|w| w > WITNESS_BUDGET) {
        return Err(CertifyError::WitnessSkipped { min_prime: p });
    }
    witness_at(l, g, p, None)
}

/// Witness at a given prime. Without `epsilon`, starts at 1/(4 max|f|) and halves until the gap is negative.
pub fn witness_at(l: &LinearSystem, g: &FourierTemplate, p: u64, epsilon: Option<f64>) -> Result<Witness, CertifyError> {
    let width = relation_width(l);
    let mut proj = freiman_project(g, p, width)?;
    let mut agrees = projection_agrees(l, g, &proj.f)?;
    for _ in 0..8 {
        if agrees {
            break;
        }
        proj.base *= 2;
        proj.f = project_with_base(g, p, proj.base)?;
        agrees = projection_agrees(l, g, &proj.f)?;
    }
    if !agrees {
        return Err(CertifyError::NotUncommon(format!("projection at p={p} does not preserve σ")));
    }
    let rows = l.rows();
    let threshold = 2f64.powi(1 - l.k() as i32);
    let eval = |eps: f64| -> Result<Witness, CertifyError> {
        let t_h = density_fourier(rows, &proj.f.affine(0.5, eps))?;
        let t_g = density_fourier(rows, &proj.f.affine(0.5, -eps))?;
        Ok(Witness { p, base: proj.base, epsilon: eps, t_h, t_one_minus_h: t_g, threshold, gap: t_h + t_g - threshold })
    };
    if let Some(eps) = epsilon {
        let top = eps.abs() * proj.f.max_abs_value();
        if top > 0.5 + 1e-12 {
            return Err(CertifyError::RangeViolation(proj.f.max_abs_value()));
        }
        let w = eval(eps)?;
        if w.gap >= 0.0 {
            return Err(CertifyError::NotUncommon(format!("gap {} at p={p}, ε={eps}", w.gap)));
        }
        return Ok(w);
    }
    let mut eps = 1.0 / (4.0 * proj.f.max_abs_value());
    for _ in 0..20 {
        let w = eval(eps)?;
        if w.gap < 0.0 {
            return Ok(w);
        }
        eps /= 2.0;
    }
    Err(CertifyError::NotUncommon(format!("no negative gap at p={p}")))
}

/// Classification plus, when it fits, an explicit F_p witness.
pub fn certify_uncommon(l: &LinearSystem) -> Result<Certificate, CertifyError> {
    let verdict = classify::classify_system(l).map_err(|e| CertifyError::Classify(e.to_string()))?;
    if verdict.status != Status::Uncommon {
        return Err(CertifyError::NotUncommon(format!("{:?}", verdict.status)));
    }
    let mut cert = verdict.certificate.expect("uncommon verdicts carry certificates");
    let reduced = sysalg::validate(verdict.reduced.clone()).map_err(|e| CertifyError::Classify(e.to_string()))?;
    if let Some(g) = cert.template() {
        match build_witness(&reduced, &g) {
            Ok(w) => cert.witness = Some(w),
            Err(CertifyError::WitnessSkipped { min_prime }) => {
                cert.witness_skipped = Some(format!("minimal admissible prime {min_prime}"))
            }
            Err(e) => return Err(e),
        }
    } else if cert.field.is_none() {
        cert.witness_skipped = Some("grid certificate without materialized template".into());
    }
    Ok(cert)
}

// ---------------------------------------------------------------------------
// girth-three field witness

pub const WITNESS_ALPHA: f64 = 0.4995;
pub const WITNESS_BETA: f64 = 0.0834;

/// f̂(0) = α and f̂(±u) = β for the coefficients u of a 3-term subsystem.
pub fn alpha_beta_function(p: u64, support: &[i64], alpha: f64, beta: f64) -> FieldFunction {
    let pts: Vec<(i64, Complex64)> = support.iter().map(|&u| (u, Complex64::new(beta, 0.0))).collect();
    FieldFunction::from_sparse(p, alpha, &pts)
}

/// Primitive span vectors of L with support exactly 3.
pub fn three_term_relations(l: &LinearSystem) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = Vec::new();
    for s in sysalg::subsets(l.k(), 3) {
        let sub = sysalg::supported_subspace(l, &s);
        if sub.len() != 1 {
            continue;
        }
        let v = linalg::primitive(&sub[0]);
        if v.iter().filter(|x| !x.is_zero()).count() != 3 {
            continue;
        }
        if let Some(v) = linalg::big_to_i64(&v) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

/// Searches the α/β spike on the coefficients of each 3-term subsystem.
pub fn alpha_beta_witness(l: &LinearSystem, p: u64) -> Result<FieldWitness, CertifyError> {
    let threshold = 2f64.powi(1 - l.k() as i32);
    let mut best: Option<FieldWitness> = None;
    for rel in three_term_relations(l) {
        let mut support: Vec<i64> = rel.iter().filter(|&&x| x != 0).map(|x| x.abs()).collect();
        support.sort_unstable();
        support.dedup();
        for beta in [WITNESS_BETA, -WITNESS_BETA] {
            let f = alpha_beta_function(p, &support, WITNESS_ALPHA, beta);
            let value = density_fourier(l.rows(), &f)? + density_fourier(l.rows(), &f.affine(1.0, -1.0))?;
            let w = FieldWitness { p, alpha: WITNESS_ALPHA, beta, support: support.clone(), value, gap: value - threshold };
            if best.as_ref().is_none_or(|b| w.gap < b.gap) {
                best = Some(w);
            }
        }
    }
    match best {
        Some(w) if w.gap < 0.0 => Ok(w),
        Some(w) => Err(CertifyError::NotUncommon(format!("α/β spike gives gap {}", w.gap))),
        None => Err(CertifyError::NotUncommon("no 3-term subsystem".into())),
    }
}

// ---------------------------------------------------------------------------
// sampling

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SampleReport {
    pub p: u64,
    pub trials: u64,
    pub min_gap: f64,
    pub argmin_trial: u64,
    pub argmin_kind: String,
    pub argmin_mean: f64,
}

fn sample_values(p: usize, trial: u64, seed: u64) -> (Vec<f64>, &'static str) {
    let mut rng = templates::trial_rng(seed, trial);
    match trial % 4 {
        0 | 1 => ((0..p).map(|_| rng.gen::<f64>()).collect(), "uniform"),
        2 => {
            let d = rng.gen::<f64>();
            ((0..p).map(|_| if rng.gen::<f64>() < d { 1.0 } else { 0.0 }).collect(), "indicator")
        }
        _ => {
            // α + 2β Σ cos(2π u x/p) over a few random frequencies, clipped into range
            let alpha = rng.gen_range(0.3..0.7);
            let n = rng.gen_range(1..=3usize);
            let us: Vec<usize> = (0..n).map(|_| rng.gen_range(1..p)).collect();
            let beta = rng.gen_range(-0.1..0.1);
            let vals = (0..p)
                .map(|x| {
                    let s: f64 = us.iter().map(|&u| (2.0 * PI * ((u * x) % p) as f64 / p as f64).cos()).sum();
                    (alpha + 2.0 * beta * s).clamp(0.0, 1.0)
                })
                .collect();
            (vals, "spike")
        }
    }
}

/// Minimum of t_L(f) + t_L(1−f) − 2^{1−k} over sampled f: F_p → [0,1].
pub fn sample_commonness(rows: &[Vec<i64>], p: u64, trials: u64, seed: u64) -> Result<SampleReport, CertifyError> {
    let k = rows[0].len() as i32;
    let threshold = 2f64.powi(1 - k);
    let gaps: Vec<Result<(f64, &'static str, f64), CertifyError>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (vals, kind) = sample_values(p as usize, t, seed);
            let comp: Vec<f64> = vals.iter().map(|v| 1.0 - v).collect();
            let gap = density_direct_values(rows, &vals)? + density_direct_values(rows, &comp)? - threshold;
            Ok((gap, kind, vals.iter().sum::<f64>() / p as f64))
        })
        .collect();
    let mut best = (f64::INFINITY, 0u64, "", 0.0);
    for (t, g) in gaps.into_iter().enumerate() {
        let (gap, kind, mean) = g?;
        if gap < best.0 {
            best = (gap, t as u64, kind, mean);
        }
    }
    Ok(SampleReport {
        p,
        trials,
        min_gap: best.0,
        argmin_trial: best.1,
        argmin_kind: best.2.to_string(),
        argmin_mean: best.3,
    })
}

/// Lower bound min_α α^k + (1−α)^k − 2^{1−k} is zero; exposed for the sampling check.
pub fn constant_gap(rows: &[Vec<i64>], p: u64, c: f64) -> Result<f64, CertifyError> {
    coloring_gap(rows, &FieldFunction::constant(p, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ex31() -> FourierTemplate {
        templates::spike_exact(&[
            (1, templates::gauss(-1, 0)),
            (2, templates::gauss(1, 0)),
            (3, templates::gauss(1, 0)),
            (4, templates::gauss(1, 0)),
        ])
        .unwrap()
    }

    fn row(v: &[i64]) -> Vec<Vec<i64>> {
        vec![v.to_vec()]
    }

    #[test]
    fn primes() {
        assert!(is_prime(101) && !is_prime(91) && !is_prime(1));
        assert_eq!(next_prime(100), 101);
        assert_eq!(next_prime(2), 3);
    }

    #[test]
    fn ex31_projection_and_density() {
        let l = sysalg::validate(row(&[1, 2, 3, 4])).unwrap();
        let g = ex31();
        let w = relation_width(&l);
        let proj = freiman_project(&g, 101, w).unwrap();
        assert_eq!(proj.f.coeff(1), Complex64::new(-1.0, 0.0));
        assert_eq!(proj.f.coeff(-3), Complex64::new(1.0, 0.0));
        assert_eq!(proj.f.coeff(5), Complex64::zero());
        let t = density_fourier(l.rows(), &proj.f).unwrap();
        assert!((t + 2.0).abs() < 1e-9);
        let gap = two_color_gap(l.rows(), &proj.f, 0.05).unwrap();
        assert!((gap - 2.0 * 0.05f64.powi(4) * -2.0).abs() < 1e-9, "{gap}");
        assert!(proj.f.parseval_residual() < 1e-9);
    }

    #[test]
    fn small_prime_rejected() {
        let l = sysalg::validate(row(&[1, 2, 3, 4])).unwrap();
        let w = relation_width(&l);
        let (_, bound) = projection_bound(&ex31(), w);
        match freiman_project(&ex31(), 11, w) {
            Err(CertifyError::PrimeTooSmall { min_prime, .. }) => assert!(bound >= 11 && min_prime > bound),
            Ok(p) => assert!(projection_agrees(&l, &ex31(), &p.f).unwrap()),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn two_dimensional_projection() {
        let g = FourierTemplate::from_half(2, &[(vec![1, 0], Complex64::new(1.0, 0.0)), (vec![0, 1], Complex64::new(0.0, 1.0))])
            .unwrap();
        let proj = freiman_project(&g, 1009, 1).unwrap();
        assert_eq!(proj.base, 3);
        assert_eq!(proj.f.coeff(3), Complex64::new(0.0, 1.0));
        assert_eq!(proj.f.coeff(-3), Complex64::new(0.0, -1.0));
        assert_eq!(proj.f.coeff(-1), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn density_basics() {
        let rows = vec![vec![1, 1, -1, -1, 0], vec![2, -2, 3, 0, -3]];
        let one = FieldFunction::constant(7, 1.0);
        assert!((density_fourier(&rows, &one).unwrap() - 1.0).abs() < 1e-12);
        assert!((density_direct(&rows, &one).unwrap() - 1.0).abs() < 1e-12);
        let mut vals = vec![0.0; 7];
        vals[0] = 1.0;
        let delta = FieldFunction::from_values(&vals);
        assert!((density_direct(&rows, &delta).unwrap() - 7f64.powi(-3)).abs() < 1e-15);
        assert!((density_fourier(&rows, &delta).unwrap() - 7f64.powi(-3)).abs() < 1e-12);
    }

    #[test]
    fn fourier_matches_direct() {
        let rows = vec![vec![1, 1, -1, -1, 0], vec![2, -2, 3, 0, -3]];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [11u64, 31] {
            let vals: Vec<f64> = (0..p).map(|_| rng.gen()).collect();
            let f = FieldFunction::from_values(&vals);
            let a = density_fourier(&rows, &f).unwrap();
            let b = density_direct(&rows, &f).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
        // rows coincide mod 3
        let rows = vec![vec![4, -1, 2, 1], vec![-2, 2, -4, -2]];
        let f = FieldFunction::from_values(&[0.0, 0.0, 0.33]);
        assert!((density_fourier(&rows, &f).unwrap() - density_direct(&rows, &f).unwrap()).abs() < 1e-12);
        let h = tensor_indicator(&FieldFunction::from_values(&[0.2, 0.9, 0.4]));
        assert!((h.density_fourier(&rows).unwrap() - h.density_direct(&rows).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_and_constant_gaps() {
        let rows = vec![vec![1, 2, 3, 4]];
        assert!(two_color_gap(&rows, &FieldFunction::constant(11, 0.0), 0.3).unwrap().abs() < 1e-15);
        assert!(constant_gap(&rows, 11, 0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn alpha_beta_value() {
        let l = sysalg::validate(vec![vec![3, -3, 0, 0, 6], vec![0, 0, 2, -2, 6]]).unwrap();
        let w = alpha_beta_witness(&l, 1009).unwrap();
        assert!((w.value - 0.0624995).abs() < 1e-6, "{}", w.value);
        assert!(w.gap < 0.0);
        let f = alpha_beta_function(1009, &w.support, w.alpha, w.beta);
        let vals = f.values();
        assert!(vals.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn tensor_identity() {
        let l = sysalg::validate(vec![vec![1, -2, 1, 0, 0], vec![0, 1, 1, -1, -1]]).unwrap();
        let f = FieldFunction::from_values(&[0.2, 0.9, 0.4, 0.1, 0.7]);
        let h = tensor_indicator(&f);
        assert!((h.mean() - f.mean() / 5.0).abs() < 1e-15);
        let w = tensor_weights(&l, &f).unwrap();
        assert!((w.direct - w.predicted).abs() < 1e-8, "{w:?}");
        for cs in sysalg::critical_sets(&l) {
            let a = h.density_fourier(cs.l_b.rows()).unwrap();
            let b = h.density_direct(cs.l_b.rows()).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
        let z = tensor_indicator(&FieldFunction::constant(5, 0.0));
        assert_eq!(z.density_direct(&[vec![1, 1, -1, -1]]).unwrap(), 0.0);
    }

    #[test]
    fn doc_roundtrip() {
        let f = FieldFunction::from_values(&[0.2, 0.9, 0.4, 0.1, 0.7]);
        let g = FieldFunction::from_doc(&f.to_doc()).unwrap();
        for (a, b) in f.coeffs().iter().zip(g.coeffs()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
