//! Verdicts for single equations and 2×k systems.

use crate::certify::{self, Certificate, GridCertificate};
use crate::grids::{self, GridError, PeriodicGridFunction};
use crate::linalg::{self, Q};
use crate::sysalg::{self, LinearSystem, SysError};
use crate::templates::{self, FourierTemplate, TemplateError};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationClass {
    pub sidorenko: bool,
    pub common: bool,
}

/// Whether the coefficients split into pairs summing to zero.
pub fn splits_into_cancelling_pairs(coeffs: &[i64]) -> bool {
    if coeffs.len() % 2 == 1 {
        return false;
    }
    let mut count: std::collections::BTreeMap<i64, i64> = Default::default();
    for &c in coeffs {
        *count.entry(c).or_default() += 1;
    }
    count.iter().all(|(&c, &n)| count.get(&-c).copied().unwrap_or(0) == n)
}

pub fn classify_equation(coeffs: &[i64]) -> EquationClass {
    let sidorenko = splits_into_cancelling_pairs(coeffs);
    EquationClass { sidorenko, common: sidorenko || coeffs.len() % 2 == 1 }
}

/// λ ≥ 1 when A = {{a, −a, λa, −λa}}.
pub fn is_lambda_common(a: &[i64]) -> Option<BigRational> {
    if a.len() != 4 || !splits_into_cancelling_pairs(a) {
        return None;
    }
    let mut abs: Vec<i64> = a.iter().map(|x| x.abs()).collect();
    abs.sort();
    // pairs are (abs[0], abs[1]) and (abs[2], abs[3])
    Some(BigRational::new(abs[2].into(), abs[0].into()))
}

/// |a/b| or |b/a| equals some |λ|.
pub fn coincidental(a: &Q, b: &Q, lambdas: &[BigRational]) -> bool {
    if a.is_zero() || b.is_zero() {
        return false;
    }
    let r = (a / b).abs();
    let rinv = (b / a).abs();
    lambdas.iter().any(|l| l.abs() == r || l.abs() == rinv)
}

pub fn additive_quadruple(a: &[i64]) -> bool {
    is_lambda_common(a).is_some_and(|l| l == linalg::q(1))
}

// ---------------------------------------------------------------------------
// girth-four case split

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    A,
    B,
    C,
    D,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// The five critical equations of a 2×5 girth-4 system as coefficient vectors.
pub fn critical_families(l: &LinearSystem) -> Result<Vec<Vec<i64>>, SysError> {
    Ok(sysalg::critical_equation_multisets(l)?.into_iter().map(|(_, a)| a).collect())
}

pub fn case_of(l: &LinearSystem) -> Result<Case, SysError> {
    let fams = critical_families(l)?;
    let aq = fams.iter().filter(|a| additive_quadruple(a)).count();
    let common = fams.iter().filter(|a| classify_equation(a).common).count();
    match (aq, common) {
        (_, c) if c >= 3 => Ok(Case::D),
        (0, _) => Ok(Case::A),
        (1, 1) => Ok(Case::B),
        (1, 2) => Ok(Case::C),
        _ => Err(SysError::NotApplicable(format!("{aq} additive quadruples"))),
    }
}

// ---------------------------------------------------------------------------
// common families

pub const EXPLICIT_COMMON: [[[i64; 5]; 2]; 3] = [
    [[1, 0, -1, 2, -2], [0, 1, 2, -1, -2]],
    [[1, -1, 1, -1, 0], [1, 2, -1, 0, -2]],
    [[1, 1, -1, -1, 0], [2, -2, 1, 0, -1]],
];

pub const EXCEPTIONAL: [[[i64; 5]; 2]; 2] = [[[1, 1, -1, -1, 0], [1, -1, 3, 0, -3]], [[1, 1, -1, -1, 0], [2, -2, 3, 0, -3]]];

fn fixed(rows: &[[i64; 5]; 2]) -> LinearSystem {
    sysalg::validate(rows.iter().map(|r| r.to_vec()).collect()).expect("fixed systems are valid")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommonFamily {
    Explicit(u8),
    /// [[a,b,0,0,c],[0,0,a,b,c]].
    One { a: i64, b: i64, c: i64 },
    /// [[1,−1,λ,−λ,0],[a,b,0,0,−a−b]] with the ratio condition met by `witness`.
    Two { lambda: String, a: i64, b: i64, witness: String },
}

impl CommonFamily {
    pub fn id(&self) -> String {
        match self {
            CommonFamily::Explicit(i) => format!("explicit-common-{i}"),
            CommonFamily::One { .. } => "family-one".into(),
            CommonFamily::Two { .. } => "family-two".into(),
        }
    }
}

fn primitive_i64(v: &[Q]) -> Option<Vec<i64>> {
    linalg::big_to_i64(&linalg::primitive(v))
}

/// Primitive span vectors with support exactly `size`, one per support set.
pub fn span_vectors_of_support(l: &LinearSystem, size: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for s in sysalg::subsets(l.k(), size) {
        let sub = sysalg::supported_subspace(l, &s);
        if sub.len() != 1 {
            continue;
        }
        if let Some(v) = primitive_i64(&sub[0]) {
            if v.iter().filter(|&&x| x != 0).count() == size {
                out.push(v);
            }
        }
    }
    out
}

fn support(v: &[i64]) -> Vec<usize> {
    (0..v.len()).filter(|&i| v[i] != 0).collect()
}

fn family_one(l: &LinearSystem) -> Option<CommonFamily> {
    let threes = span_vectors_of_support(l, 3);
    for (x, u) in threes.iter().enumerate() {
        for v in &threes[x + 1..] {
            let (su, sv) = (support(u), support(v));
            let shared: Vec<usize> = su.iter().copied().filter(|j| sv.contains(j)).collect();
            if shared.len() != 1 {
                continue;
            }
            let j = shared[0];
            let us: Vec<i64> = u.iter().map(|x| x * v[j]).collect();
            let vs: Vec<i64> = v.iter().map(|x| x * u[j]).collect();
            let rest = |w: &[i64]| {
                let mut r: Vec<i64> = (0..w.len()).filter(|&i| i != j && w[i] != 0).map(|i| w[i]).collect();
                r.sort_unstable();
                r
            };
            if rest(&us) == rest(&vs) {
                let g = us.iter().fold(0i64, |g, &x| g.gcd(&x));
                let sign = if us[j] < 0 { -1 } else { 1 };
                let ab: Vec<i64> = (0..5).filter(|&i| i != j && us[i] != 0).map(|i| sign * us[i] / g).collect();
                return Some(CommonFamily::One { a: ab[0], b: ab[1], c: sign * us[j] / g });
            }
        }
    }
    None
}

fn family_two(l: &LinearSystem) -> Option<CommonFamily> {
    let fours = span_vectors_of_support(l, 4);
    let threes: Vec<Vec<i64>> =
        span_vectors_of_support(l, 3).into_iter().filter(|w| w.iter().sum::<i64>() == 0).collect();
    for u in &fours {
        let nz: Vec<i64> = u.iter().copied().filter(|&x| x != 0).collect();
        let Some(lambda) = is_lambda_common(&nz) else { continue };
        for w in &threes {
            let inside: Vec<usize> = support(w).into_iter().filter(|&i| u[i] != 0).collect();
            if inside.len() != 2 || u[inside[0]] != -u[inside[1]] {
                continue;
            }
            let (a, b) = (w[inside[0]], w[inside[1]]);
            let (qa, qb) = (linalg::q(a), linalg::q(b));
            let s = &qa + &qb;
            let mut ratios = vec![(&qa / &qb).abs()];
            if !s.is_zero() {
                ratios.push((&qa / &s).abs());
                ratios.push((&qb / &s).abs());
            }
            let inv = linalg::q(1) / &lambda;
            if let Some(r) = ratios.iter().find(|r| **r == lambda || **r == inv) {
                return Some(CommonFamily::Two {
                    lambda: templates::rational_to_string(&lambda),
                    a,
                    b,
                    witness: templates::rational_to_string(r),
                });
            }
        }
    }
    None
}

pub fn match_common_family(l: &LinearSystem) -> Option<CommonFamily> {
    if l.m() != 2 || l.k() != 5 {
        return None;
    }
    for (i, rows) in EXPLICIT_COMMON.iter().enumerate() {
        if sysalg::isomorphic(l, &fixed(rows)).unwrap_or(false) {
            return Some(CommonFamily::Explicit(i as u8 + 1));
        }
    }
    family_one(l).or_else(|| family_two(l))
}

pub fn is_exceptional(l: &LinearSystem) -> bool {
    l.m() == 2 && l.k() == 5 && EXCEPTIONAL.iter().any(|rows| sysalg::isomorphic(l, &fixed(rows)).unwrap_or(false))
}

/// (a, b) with L ≅ [[1,1,−1,−1,0],[b,−b,a,0,−a]] for a Case C system.
pub fn case_c_parameters(l: &LinearSystem) -> Option<(i64, i64)> {
    let eqs = sysalg::critical_equations(l);
    let (j5, _) = eqs.iter().enumerate().find(|(_, (_, a))| additive_quadruple(a))?;
    let (b4, w) = eqs.iter().find(|(_, a)| !additive_quadruple(a) && is_lambda_common(a).is_some())?;
    let pos = b4.iter().position(|&c| c == j5)?;
    let a = w[pos].abs();
    let b = w.iter().map(|x| x.abs()).find(|&x| x != a)?;
    let g = a.gcd(&b);
    let (a, b) = (a / g, b / g);
    let model = |a: i64, b: i64| sysalg::validate(vec![vec![1, 1, -1, -1, 0], vec![b, -b, a, 0, -a]]).ok();
    for (x, y) in [(a, b), (b, a)] {
        if let Some(m) = model(x, y) {
            if sysalg::isomorphic(l, &m).unwrap_or(false) {
                return Some((x, y));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// verdicts

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Common,
    Uncommon,
    Unknown,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub case: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<CommonFamily>,
    /// The irredundant system actually classified.
    pub reduced: Vec<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<Certificate>,
    pub notes: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error(transparent)]
    System(#[from] SysError),
    #[error("outside the classified range: {0}")]
    OutOfScope(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

impl From<TemplateError> for ClassifyError {
    fn from(e: TemplateError) -> Self {
        ClassifyError::Inconclusive(e.to_string())
    }
}

impl From<GridError> for ClassifyError {
    fn from(e: GridError) -> Self {
        ClassifyError::Inconclusive(e.to_string())
    }
}

impl From<certify::CertifyError> for ClassifyError {
    fn from(e: certify::CertifyError) -> Self {
        ClassifyError::Inconclusive(e.to_string())
    }
}

pub const MC_SIZES: [u64; 4] = [3, 5, 8, 12];
pub const MC_TRIALS: u64 = 2000;
pub const MC_SEED: u64 = 0;

/// Random-phase template search with escalating support size.
pub fn monte_carlo_certificate(l: &LinearSystem) -> Result<Certificate, ClassifyError> {
    for m in MC_SIZES {
        if let Ok(hit) = templates::monte_carlo_find(l, m, MC_TRIALS, MC_SEED) {
            let label = format!("random phases M={m} trial={} seed={MC_SEED}", hit.trial);
            return Ok(Certificate::from_template(l, &hit.template, label)?);
        }
    }
    Err(ClassifyError::Inconclusive(format!("no random template with M up to 12 in {MC_TRIALS} trials")))
}

/// ±1 spikes on the absolute coefficients, fewest minus signs first.
pub fn equation_spike(l: &LinearSystem) -> Option<FourierTemplate> {
    let mut vals: Vec<i64> = l.rows().iter().flatten().filter(|&&x| x != 0).map(|x| x.abs()).collect();
    vals.sort_unstable();
    vals.dedup();
    if vals.len() > 10 {
        return None;
    }
    let n = vals.len();
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|&m| (m.count_ones(), m.reverse_bits()));
    for mask in masks {
        let pts: Vec<(i128, templates::GaussQ)> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| (v as i128, templates::gauss(if mask >> i & 1 == 1 { -1 } else { 1 }, 0)))
            .collect();
        let g = templates::spike_exact(&pts).ok()?;
        if templates::sigma_critical_sum(l, &g).is_ok_and(|r| r.total <= certify::SIGMA_TOL) {
            return Some(g);
        }
    }
    None
}

fn uncommon_by_templates(l: &LinearSystem) -> Result<Certificate, ClassifyError> {
    if let Some(g) = equation_spike(l) {
        return Ok(Certificate::from_template(l, &g, "±1 spike on coefficients")?);
    }
    monte_carlo_certificate(l)
}

fn grid_certificate(
    l: &LinearSystem,
    h: &PeriodicGridFunction,
    families: &[Vec<i64>],
    label: String,
) -> Result<Certificate, ClassifyError> {
    let (g, rep) = grids::truncate_verified(h, families, h.period())?;
    let grid = GridCertificate {
        construction: h.provenance().to_string(),
        depth: rep.depth,
        total: rep.total,
        total_exact: rep.total_exact.clone(),
        per_family: rep.per_family.clone(),
        table: h.to_doc().ok(),
        families: families.to_vec(),
    };
    let mut cert = match g {
        Some(g) => Certificate::from_template(l, &g, label)?,
        None => Certificate { construction: label, ..Default::default() },
    };
    cert.grid = Some(grid);
    Ok(cert)
}

/// Spike search with values in {−C, 1} over supports from the coefficient set.
pub fn generic_spike(families: &[Vec<i64>]) -> Option<FourierTemplate> {
    let mut vals: Vec<i64> = families.iter().flatten().map(|x| x.abs()).collect();
    vals.sort_unstable();
    vals.dedup();
    for e in 1..=10 {
        let c = 1i64 << e;
        for (i, &big) in vals.iter().enumerate() {
            let others: Vec<i64> = vals.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
            for size in 1..=others.len().min(3) {
                for sub in sysalg::subsets(others.len(), size) {
                    for star in [false, true] {
                        let (bv, sv) = if star { (1, -c) } else { (-c, 1) };
                        let mut pts = vec![(big as i128, templates::gauss(bv, 0))];
                        pts.extend(sub.iter().map(|&s| (others[s] as i128, templates::gauss(sv, 0))));
                        let g = templates::spike_exact(&pts).ok()?;
                        if templates::sigma_families(families, &g).is_ok_and(|(t, _)| t <= -1.0) {
                            return Some(g);
                        }
                    }
                }
            }
        }
    }
    None
}

fn alpha_beta_certificate(l: &LinearSystem) -> Result<Certificate, ClassifyError> {
    let w = certify::alpha_beta_witness(l, 1009)?;
    Ok(Certificate { construction: "alpha/beta spike".into(), field: Some(w), ..Default::default() })
}

struct Outcome {
    status: Status,
    case: String,
    family: Option<CommonFamily>,
    certificate: Option<Certificate>,
    notes: Vec<String>,
}

impl Outcome {
    fn common(case: &str, family: Option<CommonFamily>) -> Self {
        Outcome { status: Status::Common, case: case.into(), family, certificate: None, notes: vec![] }
    }
    fn uncommon(case: &str, cert: Certificate) -> Self {
        Outcome { status: Status::Uncommon, case: case.into(), family: None, certificate: Some(cert), notes: vec![] }
    }
}

pub fn classify_system(l: &LinearSystem) -> Result<Verdict, ClassifyError> {
    let (red, fates) = sysalg::irredundant_reduce(l)?;
    let mut out = dispatch(&red)?;
    if red.k() != l.k() || red.m() != l.m() {
        out.notes.push(format!("reduced to {}x{}: {fates:?}", red.m(), red.k()));
    }
    if out.status == Status::Uncommon {
        let cert = out.certificate.as_ref().expect("uncommon outcome carries a certificate");
        if !cert.verified() {
            return Err(ClassifyError::Inconclusive(format!("certificate {} does not verify", cert.construction)));
        }
    }
    Ok(Verdict {
        status: out.status,
        case: out.case,
        family: out.family,
        reduced: red.rows().to_vec(),
        certificate: out.certificate,
        notes: out.notes,
    })
}

fn dispatch(l: &LinearSystem) -> Result<Outcome, ClassifyError> {
    let (m, k) = (l.m(), l.k());
    if m == 1 {
        let class = classify_equation(&l.rows()[0]);
        if class.common {
            let mut o = Outcome::common("equation", None);
            o.notes.push(if class.sidorenko { "cancelling pairs".into() } else { "odd length".into() });
            return Ok(o);
        }
        return Ok(Outcome::uncommon("equation", uncommon_by_templates(l)?));
    }
    if m != 2 {
        return Err(ClassifyError::OutOfScope(format!("{m} equations")));
    }
    let s = sysalg::girth(l);
    let crit = sysalg::critical_sets(l);
    if k == 4 {
        return Ok(Outcome::uncommon("2x4", monte_carlo_certificate(l)?));
    }
    if k == 5 {
        if let Some(f) = match_common_family(l) {
            return Ok(Outcome::common("family", Some(f)));
        }
        return match s {
            2 => Ok(Outcome::uncommon("E", uncommon_by_templates(l)?)),
            3 => girth_three(l, &crit),
            4 => girth_four(l),
            _ => Err(ClassifyError::OutOfScope(format!("2x5 with girth {s}"))),
        };
    }
    if crit.iter().any(|c| c.m_b == 2 && c.b.len() == 4) {
        return Ok(Outcome::uncommon("2x4", monte_carlo_certificate(l)?));
    }
    if k % 2 == 0 && s == k - 1 {
        return Ok(Outcome::uncommon("2xk", monte_carlo_certificate(l)?));
    }
    Err(ClassifyError::OutOfScope(format!("2x{k} with girth {s}")))
}

fn girth_three(l: &LinearSystem, crit: &[sysalg::CriticalSet]) -> Result<Outcome, ClassifyError> {
    if crit.iter().any(|c| c.m_b == 2) {
        return Ok(Outcome::uncommon("2x4", monte_carlo_certificate(l)?));
    }
    let threes = span_vectors_of_support(l, 3);
    if threes.len() >= 2 {
        // the only critical set combines the two 3-term equations
        let l5 = &crit[0].l_b;
        if !classify_equation(&l5.rows()[0]).common {
            let cert = match equation_spike(l) {
                Some(g) => Certificate::from_template(l, &g, "±1 spike on the 4-term equation")?,
                None => monte_carlo_certificate(l)?,
            };
            return Ok(Outcome::uncommon("E", cert));
        }
        return Ok(Outcome::uncommon("E", alpha_beta_certificate(l)?));
    }
    let families: Vec<Vec<i64>> = crit.iter().map(|c| c.l_b.rows()[0].clone()).collect();
    let mut notes = Vec::new();
    match grids::case_e_template(&families) {
        Ok((Some(g), rep)) => {
            let cert = Certificate::from_template(l, &g, rep.construction)?;
            if cert.verified() {
                return Ok(Outcome::uncommon("E", cert));
            }
            notes.push("case E template failed re-verification".to_string());
        }
        Ok((None, rep)) => notes.push(format!("case E grid {} not materialized", rep.construction)),
        Err(e) => notes.push(format!("case E: {e}")),
    }
    let cert = match uncommon_by_templates(l) {
        Ok(c) => c,
        Err(_) => alpha_beta_certificate(l)?,
    };
    let mut o = Outcome::uncommon("E", cert);
    o.notes = notes;
    Ok(o)
}

fn girth_four(l: &LinearSystem) -> Result<Outcome, ClassifyError> {
    if is_exceptional(l) {
        let mut o = Outcome { status: Status::Unknown, case: "C".into(), family: None, certificate: None, notes: vec![] };
        o.notes.push("isomorphic to an exceptional system".into());
        return Ok(o);
    }
    let case = case_of(l)?;
    let families = critical_families(l)?;
    let tag = case.to_string();
    let cert = match case {
        Case::A => {
            let (g, rep) = templates::case_a_template(&families)?;
            Certificate::from_template(l, &g, format!("spike {}", rep.subcase))?
        }
        Case::B => {
            let (h, _, branch) = grids::case_b_grid(&families)?;
            let oriented: Vec<Vec<i64>> = families.iter().map(|a| grids::orient(a)).collect();
            grid_certificate(l, &h, &oriented, format!("grid {branch}"))?
        }
        Case::C => {
            let (a, b) = case_c_parameters(l)
                .ok_or_else(|| ClassifyError::Inconclusive("Case C parameters not recovered".into()))?;
            let (h, _) = grids::case_c_grid(a, b)?;
            let mut cert = grid_certificate(l, &h, &grids::case_c_families(a, b), format!("grid case C ({a},{b})"))?;
            cert.construction = format!("{} {}", cert.construction, h.provenance());
            cert
        }
        Case::D => match templates::case_a_template(&families) {
            Ok((g, rep)) => Certificate::from_template(l, &g, format!("spike {}", rep.subcase))?,
            Err(_) => match generic_spike(&families) {
                Some(g) => Certificate::from_template(l, &g, "spike {-C, 1}")?,
                None => monte_carlo_certificate(l)?,
            },
        },
    };
    Ok(Outcome::uncommon(&tag, cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(rows: &[&[i64]]) -> LinearSystem {
        sysalg::validate(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn equations() {
        assert_eq!(classify_equation(&[1, -1, 2, -2]), EquationClass { sidorenko: true, common: true });
        assert_eq!(classify_equation(&[1, 1, 1]), EquationClass { sidorenko: false, common: true });
        assert_eq!(classify_equation(&[1, 2, 3, 4]), EquationClass { sidorenko: false, common: false });
        assert!(!splits_into_cancelling_pairs(&[1, 1, -1, 2]));
    }

    #[test]
    fn lambda_and_coincidence() {
        assert_eq!(is_lambda_common(&[2, -2, 6, -6]), Some(linalg::q(3)));
        assert_eq!(is_lambda_common(&[1, 1, -1, -1]), Some(linalg::q(1)));
        assert_eq!(is_lambda_common(&[2, 3, -1, -4]), None);
        let l3 = [linalg::q(3)];
        assert!(coincidental(&linalg::q(2), &linalg::q(6), &l3));
        assert!(!coincidental(&linalg::q(2), &linalg::q(5), &l3));
    }

    #[test]
    fn cases() {
        assert_eq!(case_of(&sys(&[&[1, 3, -1, -3, 0], &[2, 3, -3, 0, -2]])).unwrap(), Case::A);
        assert_eq!(case_of(&sys(&[&[1, -1, 1, -1, 0], &[-2, 4, 3, 0, -9]])).unwrap(), Case::B);
        assert_eq!(case_of(&sys(&[&[1, 1, -1, -1, 0], &[1, -1, 4, 0, -4]])).unwrap(), Case::C);
        assert!(case_of(&sys(&[&[1, 2, 0, 0, 3], &[0, 0, 1, 2, 3]])).is_err());
    }

    #[test]
    fn families() {
        assert_eq!(match_common_family(&sys(&[&[1, 0, -1, 2, -2], &[0, 1, 2, -1, -2]])), Some(CommonFamily::Explicit(1)));
        assert_eq!(
            match_common_family(&sys(&[&[1, 2, 0, 0, 3], &[0, 0, 1, 2, 3]])),
            Some(CommonFamily::One { a: 1, b: 2, c: 3 })
        );
        match match_common_family(&sys(&[&[1, -1, 2, -2, 0], &[1, 1, 0, 0, -2]])) {
            Some(CommonFamily::Two { witness, lambda, .. }) => {
                assert_eq!(witness, "1/2");
                assert_eq!(lambda, "2/1");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(match_common_family(&sys(&[&[1, 3, -1, -3, 0], &[2, 3, -3, 0, -2]])), None);
        assert_eq!(match_common_family(&sys(&[&[3, -3, 0, 0, 6], &[0, 0, 2, -2, 6]])), None);
    }

    #[test]
    fn case_c_recovery() {
        assert_eq!(case_c_parameters(&sys(&[&[1, 1, -1, -1, 0], &[1, -1, 4, 0, -4]])), Some((4, 1)));
        let perm = sys(&[&[1, 1, -1, -1, 0], &[1, -1, 4, 0, -4]]).permute_columns(&[4, 2, 0, 3, 1]);
        assert_eq!(case_c_parameters(&perm), Some((4, 1)));
        assert_eq!(case_c_parameters(&sys(&[&[1, 1, -1, -1, 0], &[3, -3, 2, 0, -2]])), Some((2, 3)));
    }

    #[test]
    fn verdicts() {
        let v = classify_system(&sys(&[&[1, 1, -1, -1, 0], &[1, -1, 3, 0, -3]])).unwrap();
        assert_eq!(v.status, Status::Unknown);
        let v = classify_system(&sys(&[&[1, 1, -1, -1, 0], &[2, -2, 1, 0, -1]])).unwrap();
        assert_eq!((v.status, v.family.unwrap().id()), (Status::Common, "explicit-common-3".to_string()));
        let v = classify_system(&sys(&[&[1, 2, 3, 4]])).unwrap();
        assert_eq!(v.status, Status::Uncommon);
        assert_eq!(v.certificate.unwrap().sigma.unwrap().total, -2.0);
        let v = classify_system(&sys(&[&[1, 1, -1]])).unwrap();
        assert_eq!(v.status, Status::Common);
        let v = classify_system(&sys(&[&[1, 3, -1, -3, 0], &[2, 3, -3, 0, -2]])).unwrap();
        assert_eq!((v.status, v.case.as_str()), (Status::Uncommon, "A"));
        let c = v.certificate.unwrap();
        assert_eq!(c.construction, "spike isolated");
        assert_eq!(c.sigma.unwrap().total, -4.0);
    }

    #[test]
    fn girth_three_witness() {
        let v = classify_system(&sys(&[&[3, -3, 0, 0, 6], &[0, 0, 2, -2, 6]])).unwrap();
        assert_eq!((v.status, v.case.as_str()), (Status::Uncommon, "E"));
        let c = v.certificate.unwrap();
        assert!(c.verified());
    }

    #[test]
    fn out_of_scope() {
        let l = sys(&[&[1, 1, 1, 0, 0, 0, 0], &[0, 0, 0, 1, 1, 1, 1], &[1, 0, 0, 1, 0, 0, 0]]);
        assert!(matches!(classify_system(&l), Err(ClassifyError::OutOfScope(_))));
    }
}
