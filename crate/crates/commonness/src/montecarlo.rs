//! Exact counts behind the random-phase argument and the resulting diagnostics.
//!
//! For a random template f_M with independent uniform phases on [−M, M] \ {0},
//! E Π f_M(s) over a multiset S is 1 when S ⊆ [−M, M] \ {0} splits into
//! cancelling pairs and 0 otherwise. All sums below count such events.

use crate::classify::splits_into_cancelling_pairs;
use crate::linalg::{self, Q};
use crate::sysalg::{self, LinearSystem};
use crate::templates;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use thiserror::Error;

const MAX_BOX_POINTS: u128 = 20_000_000;
const MAX_CLAIM_N: i64 = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("box with {0} points is too large")]
    TooLarge(u128),
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

/// r-box inflation: every r whose images lie in [−M, M] has |r_i| ≤ λM.
pub fn box_factor(l: &LinearSystem) -> i64 {
    let m = l.m();
    let cols = l.columns();
    let mut best: Option<Q> = None;
    for s in sysalg::subsets(l.k(), m) {
        // rows of the square matrix are the chosen columns: A r = x
        let a: Vec<Vec<Q>> = s.iter().map(|&j| cols[j].iter().map(|&x| linalg::q(x)).collect()).collect();
        let Some(inv) = linalg::inverse(&a) else { continue };
        let norm = inv.iter().map(|row| row.iter().map(|x| x.abs()).sum::<Q>()).max().unwrap();
        if best.as_ref().is_none_or(|b| norm < *b) {
            best = Some(norm);
        }
    }
    best.map(|b| b.ceil().to_integer().to_i64().unwrap_or(i64::MAX)).unwrap_or(1).max(1)
}

fn images(cols: &[Vec<i64>], r: &[i64]) -> Vec<i64> {
    cols.iter().map(|c| c.iter().zip(r).map(|(a, x)| a * x).sum()).collect()
}

fn in_support(s: &[i64], m: i64) -> bool {
    s.iter().all(|&x| x != 0 && x.abs() <= m)
}

fn for_each_point(m: usize, n: i64, mut f: impl FnMut(&[i64])) {
    let mut r = vec![-n; m];
    loop {
        f(&r);
        let mut j = 0;
        loop {
            if j == m {
                return;
            }
            r[j] += 1;
            if r[j] <= n {
                break;
            }
            r[j] = -n;
            j += 1;
        }
    }
}

fn guard(m: usize, n: i64) -> Result<(), McError> {
    let pts = ((2 * n + 1) as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if pts > MAX_BOX_POINTS {
        return Err(McError::TooLarge(pts));
    }
    Ok(())
}

/// Points r of the λM-box whose image multiset lies in [−M, M] \ {0}.
fn support_points(l: &LinearSystem, m_sup: i64) -> Result<Vec<(Vec<i64>, Vec<i64>)>, McError> {
    let n = box_factor(l) * m_sup;
    guard(l.m(), n)?;
    let cols = l.columns();
    let mut out = Vec::new();
    for_each_point(l.m(), n, |r| {
        let s = images(&cols, r);
        if in_support(&s, m_sup) {
            out.push((r.to_vec(), s));
        }
    });
    Ok(out)
}

/// |B|: r with all images in [−M, M] \ {0} splitting into cancelling pairs.
pub fn count_b(l: &LinearSystem, m_sup: i64) -> Result<u64, McError> {
    if m_sup <= 0 {
        return Ok(0);
    }
    Ok(support_points(l, m_sup)?.iter().filter(|(_, s)| splits_into_cancelling_pairs(s)).count() as u64)
}

fn matchings(items: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let first = items[0];
    let mut out = Vec::new();
    for i in 1..items.len() {
        let rest: Vec<usize> = items[1..].iter().copied().filter(|&x| x != items[i]).collect();
        for mut m in matchings(&rest) {
            m.push((first, items[i]));
            out.push(m);
        }
    }
    out
}

/// Second strategy for |B| (m ≤ 2): union over column matchings of the lattice
/// {r : (a_i + a_j)·r = 0 for every matched pair}.
pub fn count_b_by_matchings(l: &LinearSystem, m_sup: i64) -> Result<u64, McError> {
    if l.m() > 2 || l.k() % 2 == 1 {
        return Err(McError::NotApplicable("needs m ≤ 2 and even k".into()));
    }
    if m_sup <= 0 {
        return Ok(0);
    }
    let cols = l.columns();
    let n = box_factor(l) * m_sup;
    let mut found: HashSet<Vec<i64>> = HashSet::new();
    for mt in matchings(&(0..l.k()).collect::<Vec<_>>()) {
        let cons: Vec<Vec<Q>> = mt
            .iter()
            .map(|&(i, j)| cols[i].iter().zip(&cols[j]).map(|(a, b)| linalg::q(a + b)).collect())
            .collect();
        let ker = linalg::kernel(&cons, l.m());
        match ker.len() {
            0 => {}
            1 => {
                let v = linalg::big_to_i64(&linalg::primitive(&ker[0])).expect("small kernel vector");
                for t in -n..=n {
                    let r: Vec<i64> = v.iter().map(|x| x * t).collect();
                    if in_support(&images(&cols, &r), m_sup) {
                        found.insert(r);
                    }
                }
            }
            _ => {
                guard(l.m(), n)?;
                for_each_point(l.m(), n, |r| {
                    if in_support(&images(&cols, r), m_sup) {
                        found.insert(r.to_vec());
                    }
                });
            }
        }
    }
    Ok(found.len() as u64)
}

/// Net signed multiplicities: for t > 0, #{s = t} − #{s = −t}; zero entries dropped.
type Net = Vec<(i64, i32)>;

fn net(s: &[i64]) -> Net {
    let mut m: std::collections::BTreeMap<i64, i32> = Default::default();
    for &x in s {
        *m.entry(x.abs()).or_default() += x.signum() as i32;
    }
    m.into_iter().filter(|&(_, c)| c != 0).collect()
}

fn net_add(a: &Net, b: &Net) -> Net {
    let mut m: std::collections::BTreeMap<i64, i32> = a.iter().copied().collect();
    for &(t, c) in b {
        *m.entry(t).or_default() += c;
    }
    m.into_iter().filter(|&(_, c)| c != 0).collect()
}

fn net_neg(a: &Net) -> Net {
    a.iter().map(|&(t, c)| (t, -c)).collect()
}

fn net_mass(a: &Net) -> i32 {
    a.iter().map(|&(_, c)| c.abs()).sum()
}

/// Exact Claim-4.4 quantities on the active set A = {r : S_r ⊆ [−M, M] \ {0}, S_r unpaired}.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CountReport {
    /// r-box radius.
    pub n: i64,
    /// Support radius of the random template.
    pub m: i64,
    pub b_count: u64,
    pub active: u64,
    /// Σ_{u,v∈A} E[X_u X_v].
    pub variance_sum: u64,
    /// Pairs (u, −u): a lower bound for the variance sum.
    pub antipodal: u64,
    /// max_u Σ_{v∈A} E[X_u X_v].
    pub pair_sum_max: u64,
    /// Σ_{u,v,w∈A} E[X_u X_v X_w].
    pub triple_sum: u64,
    /// Σ_u Σ_{v,w∈N_u} E[X_u X_v X_w].
    pub local_triple_sum: u64,
    /// max over u and v ∈ N_u with E[X_u X_v] ≠ 0 of Σ_{w1,w2∈N_u∪N_v} E[X_{w1} X̄_{w2}].
    pub neighbor_sum_max: u64,
    /// Σ_u Σ_{v∈N_u} E[X_u X_v]·√(that neighbourhood sum).
    pub weighted_pair_sum: f64,
}

struct Active {
    nets: Vec<Net>,
    /// Closed neighbourhoods: ±S_u ∩ ±S_v ≠ ∅.
    nbrs: Vec<Vec<usize>>,
    count_by_net: HashMap<Net, u64>,
}

fn build_active(pts: &[(Vec<i64>, Vec<i64>)]) -> Active {
    let active: Vec<&Vec<i64>> = pts.iter().map(|(_, s)| s).filter(|s| !splits_into_cancelling_pairs(s)).collect();
    let nets: Vec<Net> = active.iter().map(|s| net(s)).collect();
    let mut by_abs: HashMap<i64, Vec<usize>> = HashMap::new();
    for (i, s) in active.iter().enumerate() {
        let abs: BTreeSet<i64> = s.iter().map(|x| x.abs()).collect();
        for t in abs {
            by_abs.entry(t).or_default().push(i);
        }
    }
    let nbrs = active
        .par_iter()
        .map(|s| {
            let abs: BTreeSet<i64> = s.iter().map(|x| x.abs()).collect();
            let mut v: Vec<usize> = abs.iter().flat_map(|t| by_abs[t].iter().copied()).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let mut count_by_net: HashMap<Net, u64> = HashMap::new();
    for n in &nets {
        *count_by_net.entry(n.clone()).or_default() += 1;
    }
    Active { nets, nbrs, count_by_net }
}

/// Support radius used for a given r-box radius.
pub fn support_radius(l: &LinearSystem, n: i64) -> i64 {
    (n / box_factor(l)).max(1)
}

pub fn claim44_stats(l: &LinearSystem, n: i64) -> Result<CountReport, McError> {
    if n > MAX_CLAIM_N {
        return Err(McError::TooLarge(((2 * n + 1) as u128).pow(l.m() as u32)));
    }
    let m_sup = support_radius(l, n);
    let pts = support_points(l, m_sup)?;
    let b_count = pts.iter().filter(|(_, s)| splits_into_cancelling_pairs(s)).count() as u64;
    let act = build_active(&pts);
    let size = act.nets.len();
    let k = l.k() as i32;
    let cnt = |key: &Net| act.count_by_net.get(key).copied().unwrap_or(0);

    let pair: Vec<u64> = act.nets.iter().map(|x| cnt(&net_neg(x))).collect();
    let variance_sum: u64 = pair.iter().sum();
    let pair_sum_max = pair.iter().copied().max().unwrap_or(0);

    // triples: w is fixed by net_w = −(net_u + net_v); non-adjacent (u, v) need low net mass
    let low: Vec<usize> = (0..size).filter(|&i| net_mass(&act.nets[i]) <= k / 2).collect();
    let triple_sum: u64 = (0..size)
        .into_par_iter()
        .map(|u| {
            let mut t = 0u64;
            for &v in &act.nbrs[u] {
                let s = net_add(&act.nets[u], &act.nets[v]);
                if net_mass(&s) <= k {
                    t += cnt(&net_neg(&s));
                }
            }
            if net_mass(&act.nets[u]) <= k / 2 {
                for &v in &low {
                    if act.nbrs[u].binary_search(&v).is_err() {
                        let s = net_add(&act.nets[u], &act.nets[v]);
                        if net_mass(&s) <= k {
                            t += cnt(&net_neg(&s));
                        }
                    }
                }
            }
            t
        })
        .sum();

    let local: Vec<(u64, u64, f64)> = (0..size)
        .into_par_iter()
        .map(|u| {
            let nu = &act.nbrs[u];
            let mut local_net: HashMap<&Net, u64> = HashMap::new();
            for &w in nu {
                *local_net.entry(&act.nets[w]).or_default() += 1;
            }
            let mut tri = 0u64;
            let mut nb_max = 0u64;
            let mut weighted = 0.0;
            for &v in nu {
                let s = net_add(&act.nets[u], &act.nets[v]);
                if net_mass(&s) <= k {
                    tri += local_net.get(&net_neg(&s)).copied().unwrap_or(0);
                }
                if s.is_empty() {
                    let mut union: Vec<usize> = nu.iter().chain(&act.nbrs[v]).copied().collect();
                    union.sort_unstable();
                    union.dedup();
                    let mut groups: HashMap<&Net, u64> = HashMap::new();
                    for &w in &union {
                        *groups.entry(&act.nets[w]).or_default() += 1;
                    }
                    let nb: u64 = groups.values().map(|c| c * c).sum();
                    nb_max = nb_max.max(nb);
                    weighted += (nb as f64).sqrt();
                }
            }
            (tri, nb_max, weighted)
        })
        .collect();

    Ok(CountReport {
        n,
        m: m_sup,
        b_count,
        active: size as u64,
        variance_sum,
        antipodal: size as u64,
        pair_sum_max,
        triple_sum,
        local_triple_sum: local.iter().map(|x| x.0).sum(),
        neighbor_sum_max: local.iter().map(|x| x.1).max().unwrap_or(0),
        weighted_pair_sum: local.iter().map(|x| x.2).sum(),
    })
}

/// Right-hand side of the dependency-graph Stein estimate for |P[W ≤ x] − P[Z ≤ x]|,
/// with E|Σ_w X_w| replaced by its Cauchy–Schwarz bound.
pub fn stein_from_counts(c: &CountReport) -> f64 {
    if c.variance_sum == 0 {
        return f64::INFINITY;
    }
    let rho = (c.variance_sum as f64).sqrt();
    let s = 3.0 * c.local_triple_sum as f64 + 4.0 * c.weighted_pair_sum;
    (2.0 / std::f64::consts::PI * s / rho.powi(3)).sqrt()
}

pub fn stein_bound(l: &LinearSystem, n: i64) -> Result<f64, McError> {
    Ok(stein_from_counts(&claim44_stats(l, n)?))
}

/// Fraction of random templates on [−M, M] with Σ_B σ_{L_B} < 0.
pub fn negative_fraction(l: &LinearSystem, m: u64, trials: u64, seed: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    sigma_samples(l, m, trials, seed).iter().filter(|&&s| s < 0.0).count() as f64 / trials as f64
}

/// Σ_B σ_{L_B}(f_M) for each trial stream.
pub fn sigma_samples(l: &LinearSystem, m: u64, trials: u64, seed: u64) -> Vec<f64> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let g = templates::random_template_stream(m, seed, t);
            templates::sigma_critical_sum(l, &g).map(|r| r.total).unwrap_or(f64::NAN)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeanCheck {
    pub mean: f64,
    pub std_error: f64,
    pub expected: u64,
    pub z: f64,
}

pub fn mean_check(l: &LinearSystem, m: u64, trials: u64, seed: u64) -> Result<MeanCheck, McError> {
    let xs = sigma_samples(l, m, trials, seed);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let std_error = (var / n).sqrt();
    let expected = count_b(l, m as i64)?;
    Ok(MeanCheck { mean, std_error, expected, z: (mean - expected as f64) / std_error })
}

/// CSV rows: N, B-count, variance-sum, triple-sum, neighbor-sum, stein-bound.
pub fn counts_csv(reports: &[CountReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N", "B_count", "variance_sum", "triple_sum", "neighbor_sum", "stein_bound"]).unwrap();
    for c in reports {
        w.write_record([
            c.n.to_string(),
            c.b_count.to_string(),
            c.variance_sum.to_string(),
            c.triple_sum.to_string(),
            c.neighbor_sum_max.to_string(),
            format!("{:.6}", stein_from_counts(c)),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> LinearSystem {
        sysalg::validate(vec![vec![1, 0, -3, -4], vec![0, 1, 1, 2]]).unwrap()
    }

    /// Perfect matching on s₁ + s₂ = 0 by exhaustive pairing.
    fn brute_pairs(s: &[i64]) -> bool {
        if s.is_empty() {
            return true;
        }
        (1..s.len()).any(|i| {
            s[0] + s[i] == 0 && {
                let rest: Vec<i64> = s[1..].iter().enumerate().filter(|&(j, _)| j + 1 != i).map(|(_, &x)| x).collect();
                brute_pairs(&rest)
            }
        })
    }

    #[test]
    fn pairing_matches_brute_force() {
        for s in [vec![1, -1, 2, -2], vec![1, 1, -1, -1], vec![1, 2, -1, -3], vec![3, -3, 3, -3, 1, -1], vec![2, 2, -2, 3]] {
            assert_eq!(splits_into_cancelling_pairs(&s), brute_pairs(&s), "{s:?}");
        }
    }

    #[test]
    fn b_counts() {
        let l = example();
        assert_eq!(box_factor(&l), 1);
        assert_eq!(count_b(&l, 10).unwrap(), 6);
        assert_eq!(count_b(&l, 0).unwrap(), 0);
        for m in [1, 5, 10, 20] {
            assert_eq!(count_b(&l, m).unwrap(), count_b_by_matchings(&l, m).unwrap());
        }
        let eq = sysalg::validate(vec![vec![1, -1, 2, -2]]).unwrap();
        assert_eq!(count_b(&eq, 4).unwrap(), 4);
        assert_eq!(count_b(&eq, 4).unwrap(), count_b_by_matchings(&eq, 4).unwrap());
    }

    #[test]
    fn claim_counts_against_brute_force() {
        let l = example();
        let c = claim44_stats(&l, 6).unwrap();
        let pts = support_points(&l, c.m).unwrap();
        let act: Vec<&Vec<i64>> = pts.iter().map(|(_, s)| s).filter(|s| !splits_into_cancelling_pairs(s)).collect();
        let joint = |xs: &[&Vec<i64>]| -> bool {
            let all: Vec<i64> = xs.iter().flat_map(|s| s.iter().copied()).collect();
            splits_into_cancelling_pairs(&all)
        };
        let mut var = 0u64;
        let mut tri = 0u64;
        for u in &act {
            for v in &act {
                var += u64::from(joint(&[u, v]));
                for w in &act {
                    tri += u64::from(joint(&[u, v, w]));
                }
            }
        }
        assert_eq!(c.variance_sum, var);
        assert_eq!(c.triple_sum, tri);
        assert!(c.variance_sum >= c.antipodal);
        assert!(c.local_triple_sum <= c.triple_sum);
    }

    #[test]
    fn sign_symmetry() {
        let l = example();
        let neg = sysalg::validate(vec![vec![-1, 0, 3, 4], vec![0, -1, -1, -2]]).unwrap();
        let perm = l.permute_columns(&[2, 0, 3, 1]);
        let key = |c: CountReport| (c.variance_sum, c.pair_sum_max, c.triple_sum, c.local_triple_sum, c.neighbor_sum_max);
        let a = key(claim44_stats(&l, 8).unwrap());
        assert_eq!(a, key(claim44_stats(&neg, 8).unwrap()));
        assert_eq!(a, key(claim44_stats(&perm, 8).unwrap()));
    }

    #[test]
    fn sidorenko_never_negative() {
        let eq = sysalg::validate(vec![vec![1, -1, 2, -2]]).unwrap();
        assert_eq!(negative_fraction(&eq, 6, 50, 1), 0.0);
        let f = negative_fraction(&example(), 10, 1, 3);
        assert!(f == 0.0 || f == 1.0);
    }

    #[test]
    fn csv_header() {
        let c = claim44_stats(&example(), 4).unwrap();
        let s = counts_csv(&[c]);
        assert!(s.starts_with("N,B_count,variance_sum,triple_sum,neighbor_sum,stein_bound\n4,"));
    }
}
