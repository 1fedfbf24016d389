//! Acceptance criteria 1-9. Each test prints one PASS/FAIL line to stderr.

use commonness::certify::{self, FieldFunction, SIGMA_TOL};
use commonness::classify::{self, CommonFamily, Status, EXCEPTIONAL, EXPLICIT_COMMON};
use commonness::grids::{self, case_c_families, periodic_sum, prime_set, RectangleRule};
use commonness::linalg::Q;
use commonness::montecarlo;
use commonness::search;
use commonness::sysalg::{self, LinearSystem};
use commonness::templates::{self, gauss, gauss_ratio, FourierTemplate};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

#[derive(Default)]
struct Checks(Vec<(String, bool)>);

impl Checks {
    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.0.push((what.into(), ok));
    }

    fn report(self, n: u32, name: &str) {
        let ok = self.0.iter().all(|c| c.1);
        let failed: Vec<&str> = self.0.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "acceptance {n} {}: {name} ({} checks)", if ok { "PASS" } else { "FAIL" }, self.0.len());
        for f in &failed {
            let _ = writeln!(err, "    failed: {f}");
        }
        assert!(ok, "criterion {n} failed: {failed:?}");
    }
}

fn sys(rows: &[&[i64]]) -> LinearSystem {
    sysalg::validate(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn fixed(rows: &[[i64; 5]; 2]) -> LinearSystem {
    sysalg::validate(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn qq(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

/// Coefficient multiset up to global sign.
fn multiset(a: &[i64]) -> Vec<i64> {
    let mut x = a.to_vec();
    let mut y: Vec<i64> = a.iter().map(|v| -v).collect();
    x.sort_unstable();
    y.sort_unstable();
    x.min(y)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn criterion_1_single_equation() {
    let mut c = Checks::default();
    let start = Instant::now();
    let l = sys(&[&[1, 2, 3, 4]]);
    let g = templates::spike_exact(&[(1, gauss(-1, 0)), (2, gauss(1, 0)), (3, gauss(1, 0)), (4, gauss(1, 0))]).unwrap();
    let s = templates::sigma_rows(l.rows(), &g).unwrap();
    c.check(format!("sigma exact -2, got {:?}", s.exact), s.exact == Some(gauss(-2, 0)));
    let proj = certify::freiman_project(&g, 101, certify::relation_width(&l)).unwrap();
    let t = certify::density_fourier(l.rows(), &proj.f).unwrap();
    c.check(format!("density at p=101 is {t}"), close(t, -2.0, 1e-9));
    let eps = 0.05;
    let gap = certify::two_color_gap(l.rows(), &proj.f, eps).unwrap();
    c.check(format!("two-color gap {gap}"), close(gap, 2.0 * eps.powi(4) * -2.0, 1e-9));
    let secs = start.elapsed().as_secs_f64();
    c.check(format!("runtime {secs:.3}s"), secs < 1.0);
    c.report(1, "single equation template, sigma -2 and witness at p=101");
}

#[test]
fn criterion_2_case_a() {
    let mut c = Checks::default();
    let l = sys(&[&[1, 3, -1, -3, 0], &[2, 3, -3, 0, -2]]);
    let fams = classify::critical_families(&l).unwrap();
    let (g, rep) = templates::case_a_template_at(&fams, 100).unwrap();
    c.check(format!("construction total {}", rep.total), rep.total == -196.0);
    let s = templates::sigma_critical_sum(&l, &g).unwrap();
    c.check(format!("exact critical sum {:?}", s.total_exact), s.total_exact.as_deref() == Some("-196"));
    c.report(2, "Case A sum -196");
}

#[test]
fn criterion_3_case_b() {
    let mut c = Checks::default();
    let start = Instant::now();
    let cos_uncommon = classify::critical_families(&sys(&[&[1, -1, 1, -1, 0], &[-2, 4, 3, 0, -9]])).unwrap();
    let fams: BTreeSet<Vec<i64>> = cos_uncommon.iter().map(|a| multiset(a)).collect();
    let listed: BTreeSet<Vec<i64>> =
        [[1, -1, 1, -1], [-2, 4, 3, -9], [5, -7, -3, 9], [2, 7, -4, -9], [2, 5, -2, -9]].iter().map(|a| multiset(a)).collect();
    c.check("cos-uncommon families", fams == listed);
    let cos_fams = vec![vec![1, -1, 1, -1], vec![-2, 4, 3, -9], vec![5, -7, -3, 9], vec![2, 7, -4, -9], vec![2, 5, -2, -9]];
    let h = grids::h3(&prime_set(&cos_fams), &[1, 0, 1, 0], &qq(1, 1));
    let ps = periodic_sum(&h, &cos_fams, &[1, 1, 1, 1]).unwrap();
    c.check(format!("cos-uncommon per-point sum {}", ps.value), (ps.value - Complex64::new(-3.0, 0.0)).norm() <= 1e-9);

    let cancelling_1 = vec![vec![1, 1, -1, -1], vec![1, -3, -4, 12], vec![-3, -7, 4, 12], vec![4, -7, -3, 12], vec![-4, -3, 1, 12]];
    let h = grids::rectangle_function(&prime_set(&cancelling_1), (0, 2), (1, 1), RectangleRule::BothOdd);
    let ps = periodic_sum(&h, &cancelling_1, &[4, 2, 1]).unwrap();
    c.check(format!("cancelling-1 sum {:?}", ps.exact), ps.exact == Some(gauss(-24, 0)));
    let (_, ps, _) = grids::case_b_grid(&cancelling_1).unwrap();
    c.check(format!("cancelling-1 via dispatcher {:?}", ps.exact), ps.exact == Some(gauss(-24, 0)));

    let cancelling_2 = vec![
        vec![1, 1, -1, -1],
        vec![6, 24, -144, -1],
        vec![-138, -120, 144, -1],
        vec![-18, -120, 24, -1],
        vec![18, -138, 6, -1],
    ];
    let h = grids::window_function(&prime_set(&cancelling_2), 0, 1, 4, &[0, 1]);
    let ps = periodic_sum(&h, &cancelling_2, &[4, 1, 1, 1]).unwrap();
    c.check(format!("cancelling-2 sum {:?}", ps.exact), ps.exact == Some(gauss(-4, 0)));
    let (_, ps, _) = grids::case_b_grid(&cancelling_2).unwrap();
    c.check(format!("cancelling-2 via dispatcher {:?}", ps.exact), ps.exact == Some(gauss(-4, 0)));

    let h = grids::h3(&prime_set(&cos_fams), &[1, 0, 1, 0], &qq(1, 1));
    let (_, rep) = grids::truncation_report(&h, &cos_fams, &[1, 1, 1, 1], 10).unwrap();
    c.check(format!("normalized at D=10 is {}", rep.normalized), close(rep.normalized, -3.0, 0.15));
    c.check(format!("truncated total {}", rep.total), rep.total < 0.0);
    let secs = start.elapsed().as_secs_f64();
    c.check(format!("runtime {secs:.1}s"), secs < 30.0);
    c.report(3, "Case B sums -3, -24, -4 and truncation at D=10");
}

#[test]
fn criterion_4_case_c() {
    let mut c = Checks::default();
    let (h, _) = grids::case_c_grid(4, 1).unwrap();
    let ps = periodic_sum(&h, &case_c_families(4, 1), h.period()).unwrap();
    c.check(format!("(4,1) sum {}", ps.value), (ps.value - Complex64::new(-0.249573, 0.723675)).norm() <= 1e-5);
    // the special tables sit at internal (1,3) and (2,3), reported as (3,1) and (3,2)
    for ((a, b), label) in [((1, 3), "(3,1)"), ((2, 3), "(3,2)")] {
        let (h, _) = grids::case_c_grid(a, b).unwrap();
        let ps = periodic_sum(&h, &case_c_families(a, b), h.period()).unwrap();
        c.check(format!("{label} sum {:?}", ps.exact), ps.exact == Some(gauss_ratio((-17, 64), (0, 1))));
        c.check(format!("{label} float {}", ps.value.re), close(ps.value.re, -0.265625, 1e-12));
    }
    c.report(4, "Case C sums");
}

fn transform(l: &LinearSystem, rng: &mut ChaCha8Rng) -> LinearSystem {
    let mut perm: Vec<usize> = (0..l.k()).collect();
    perm.shuffle(rng);
    let p = l.permute_columns(&perm);
    let mut rows: Vec<Vec<i64>> = p.rows().to_vec();
    if rows.len() == 2 {
        // random unimodular mix: two shears, an optional swap and sign flips
        let (a, b) = (rng.gen_range(-2..=2), rng.gen_range(-2..=2));
        rows[0] = rows[0].iter().zip(&rows[1]).map(|(x, y)| x + a * y).collect();
        rows[1] = rows[1].iter().zip(&rows[0]).map(|(x, y)| x + b * y).collect();
        if rng.gen_bool(0.5) {
            rows.swap(0, 1);
        }
    }
    for r in rows.iter_mut() {
        if rng.gen_bool(0.5) {
            r.iter_mut().for_each(|x| *x = -*x);
        }
    }
    sysalg::validate(rows).unwrap()
}

#[test]
fn criterion_5_verdicts() {
    let mut c = Checks::default();
    let mut cases: Vec<(String, LinearSystem, Status)> = Vec::new();
    for (i, m) in EXPLICIT_COMMON.iter().enumerate() {
        cases.push((format!("explicit {i}"), fixed(m), Status::Common));
    }
    for (i, m) in EXCEPTIONAL.iter().enumerate() {
        cases.push((format!("exceptional {i}"), fixed(m), Status::Unknown));
    }
    cases.push(("family one".into(), sys(&[&[1, 2, 0, 0, 3], &[0, 0, 1, 2, 3]]), Status::Common));
    cases.push(("2x4".into(), sys(&[&[1, -2, 1, 0], &[0, 1, -2, 1]]), Status::Uncommon));
    let examples = [
        ("Case A example", sys(&[&[1, 3, -1, -3, 0], &[2, 3, -3, 0, -2]])),
        ("Case B example", sys(&[&[1, -1, 1, -1, 0], &[-2, 4, 3, 0, -9]])),
        ("Case C example", sys(&[&[1, 1, -1, -1, 0], &[1, -1, 4, 0, -4]])),
    ];
    for (name, l) in &examples {
        let v = classify::classify_system(l).unwrap();
        let cert = v.certificate.as_ref();
        let total = cert.and_then(|c| c.sigma_total());
        c.check(format!("{name}: status {:?}", v.status), v.status == Status::Uncommon);
        c.check(format!("{name}: certificate verified"), cert.is_some_and(|c| c.verified()));
        c.check(format!("{name}: total {total:?}"), total.is_some_and(|t| t <= SIGMA_TOL));
        cases.push((name.to_string(), l.clone(), Status::Uncommon));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (name, l, want) in &cases {
        let v = classify::classify_system(l).unwrap();
        c.check(format!("{name}: {:?} expected {want:?}", v.status), v.status == *want);
        if name == "family one" {
            c.check("family one matched", matches!(v.family, Some(CommonFamily::One { .. })));
        }
        for t in 0..20 {
            let lt = transform(l, &mut rng);
            let vt = classify::classify_system(&lt).unwrap();
            c.check(format!("{name} transform {t} {:?}: {:?}", lt.rows(), vt.status), vt.status == *want);
        }
    }
    c.report(5, "classifier verdicts and their invariance");
}

#[test]
fn criterion_6_monte_carlo() {
    let mut c = Checks::default();
    let l = sys(&[&[1, 0, -3, -4], &[0, 1, 1, 2]]);
    let frac = montecarlo::negative_fraction(&l, 30, 200, 42);
    c.check(format!("negative fraction {frac}"), frac > 0.0);
    let mc = montecarlo::mean_check(&l, 30, 200, 42).unwrap();
    c.check(format!("mean {} vs count {} (z = {})", mc.mean, mc.expected, mc.z), mc.z.abs() <= 3.0);
    let n = montecarlo::count_b(&l, 10).unwrap();
    c.check(format!("count_B(10) = {n}"), n == 6);
    c.check("count by matchings agrees", montecarlo::count_b_by_matchings(&l, 10).unwrap() == 6);
    c.report(6, "Monte Carlo negativity and mean");
}

#[test]
fn criterion_7_searches() {
    let mut c = Checks::default();
    let start = Instant::now();
    let a1 = search::search_case_a1();
    let secs = start.elapsed().as_secs_f64();
    c.check(format!("A1 enumerated {}", a1.enumerated), a1.enumerated == search::A1_SIZE);
    c.check(format!("A1 solutions {:?}", a1.solutions), a1.solutions.is_empty() && a1.components.is_empty());
    c.check(format!("A1 runtime {secs:.1}s"), secs <= 600.0);

    let a3 = search::search_case_a3();
    let listed = [
        (qq(1, 2), qq(-1, 4)),
        (qq(-1, 4), qq(1, 2)),
        (qq(-2, 1), qq(-1, 3)),
        (qq(-1, 3), qq(-2, 1)),
        (qq(-2, 1), qq(-2, 3)),
        (qq(-2, 3), qq(-2, 1)),
        (qq(1, 2), qq(-3, 4)),
        (qq(-3, 4), qq(1, 2)),
        (qq(-2, 1), qq(3, 1)),
        (qq(3, 1), qq(-2, 1)),
        (qq(-2, 1), qq(-5, 1)),
        // printed as (-5,2); substitution gives (-5,-2)
        (qq(-5, 1), qq(-2, 1)),
        (qq(-2, 1), qq(-2, 1)),
    ];
    let want: BTreeSet<(Q, Q)> = listed.into_iter().collect();
    let got: BTreeSet<(Q, Q)> = a3.points.keys().cloned().collect();
    c.check(format!("A3 points ({} found)", got.len()), got == want);
    let comps: Vec<String> = a3.components.keys().map(|p| p.display()).collect();
    // μ = −λ/(1+λ)
    c.check(format!("A3 components {comps:?}"), comps == ["lambda*mu + lambda + mu"]);

    let d = search::search_case_d();
    let vals: Vec<Q> = d.values.keys().cloned().collect();
    c.check(format!("D values {vals:?}"), vals == [qq(1, 2)]);
    c.check("D has no identities", d.identities.is_empty());
    c.report(7, "relation searches A1, A3, D");
}

#[test]
fn criterion_8_sampling() {
    let mut c = Checks::default();
    let mut systems: Vec<(String, LinearSystem)> =
        EXPLICIT_COMMON.iter().enumerate().map(|(i, m)| (format!("explicit {i}"), fixed(m))).collect();
    let one = sys(&[&[1, 2, 0, 0, 3], &[0, 0, 1, 2, 3]]);
    let two = sys(&[&[1, -1, 2, -2, 0], &[1, 1, 0, 0, -2]]);
    c.check("family one instance", matches!(classify::match_common_family(&one), Some(CommonFamily::One { .. })));
    c.check("family two instance", matches!(classify::match_common_family(&two), Some(CommonFamily::Two { .. })));
    systems.push(("family one".into(), one));
    systems.push(("family two".into(), two));
    for (name, l) in &systems {
        for p in [5, 7] {
            let r = certify::sample_commonness(l.rows(), p, 500, 8).unwrap();
            c.check(format!("{name} p={p} min gap {}", r.min_gap), r.min_gap >= -1e-9);
        }
    }
    let l = sys(&[&[3, -3, 0, 0, 6], &[0, 0, 2, -2, 6]]);
    let w = certify::alpha_beta_witness(&l, 1009).unwrap();
    c.check(format!("witness value {}", w.value), close(w.value, 0.0624995, 1e-6));
    c.check(format!("witness gap {}", w.gap), w.gap < 0.0);
    c.report(8, "sampled commonness and the field witness");
}

fn random_system(rng: &mut ChaCha8Rng) -> LinearSystem {
    loop {
        let m = rng.gen_range(1..=2);
        let k = rng.gen_range(m + 2..=m + 3);
        let rows: Vec<Vec<i64>> = (0..m).map(|_| (0..k).map(|_| rng.gen_range(-4..=4)).collect()).collect();
        if let Ok(l) = sysalg::validate(rows) {
            return l;
        }
    }
}

fn random_template(rng: &mut ChaCha8Rng, t: u64) -> FourierTemplate {
    let g = templates::random_template_stream(rng.gen_range(2..=4), 9, t);
    if rng.gen_bool(0.25) {
        templates::join(&g, &templates::random_template_stream(2, 10, t))
    } else {
        g
    }
}

#[test]
fn criterion_9_properties() {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let mut worst: f64 = 0.0;
    for t in 0..1000 {
        let l = random_system(&mut rng);
        let g = random_template(&mut rng, t);
        worst = worst.max(templates::sigma_rows(l.rows(), &g).unwrap().im.abs());
    }
    c.check(format!("realness residual {worst:e}"), worst <= 1e-9);

    let mut worst: f64 = 0.0;
    for t in 0..200 {
        let l = random_system(&mut rng);
        let g = templates::random_template_stream(rng.gen_range(2..=4), 11, t);
        let g2 = templates::random_template_stream(rng.gen_range(2..=3), 12, t);
        let joint = templates::sigma_rows(l.rows(), &templates::join(&g, &g2)).unwrap();
        let a = Complex64::new(templates::sigma_rows(l.rows(), &g).unwrap().re, 0.0);
        let b = Complex64::new(templates::sigma_rows(l.rows(), &g2).unwrap().re, 0.0);
        let prod = a * b;
        let err = (Complex64::new(joint.re, joint.im) - prod).norm() / prod.norm().max(1.0);
        worst = worst.max(err);
    }
    c.check(format!("join relative error {worst:e}"), worst <= 1e-8);

    let primes: Vec<u64> = (3..=101).filter(|&p| certify::is_prime(p)).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let l = random_system(&mut rng);
        let free = l.k() - l.m();
        let p = loop {
            let p = *primes.choose(&mut rng).unwrap();
            if (p as f64).powi(free as i32) <= 2e6 {
                break p;
            }
        };
        let vals: Vec<f64> = (0..p).map(|_| rng.gen()).collect();
        let f = FieldFunction::from_values(&vals);
        let a = certify::density_fourier(l.rows(), &f).unwrap();
        let b = certify::density_direct(l.rows(), &f).unwrap();
        worst = worst.max((a - b).abs());
    }
    c.check(format!("fourier vs direct {worst:e}"), worst <= 1e-9);

    let certified = [
        sys(&[&[1, 2, 3, 4]]),
        sys(&[&[1, -2, 1, 0], &[0, 1, -2, 1]]),
        sys(&[&[1, 0, -3, -4], &[0, 1, 1, 2]]),
        sys(&[&[1, 3, -1, -3, 0], &[2, 3, -3, 0, -2]]),
    ];
    for l in &certified {
        let v = classify::classify_system(l).unwrap();
        let reduced = sysalg::validate(v.reduced.clone()).unwrap();
        let Some(g) = v.certificate.as_ref().and_then(|c| c.template()) else {
            c.check(format!("{:?} has a template certificate", l.rows()), false);
            continue;
        };
        let width = certify::relation_width(&reduced);
        let (_, bound) = certify::projection_bound(&g, width);
        let p = certify::next_prime(bound + 1);
        let proj = certify::freiman_project(&g, p, width).unwrap();
        let agrees = certify::projection_agrees(&reduced, &g, &proj.f).unwrap();
        c.check(format!("{:?} projected at p={p}", l.rows()), agrees);
    }

    let l = sys(&[&[1, 0, -3, -4], &[0, 1, 1, 2]]);
    let reps: Vec<_> = [10, 20, 40].iter().map(|&n| montecarlo::claim44_stats(&l, n).unwrap()).collect();
    for w in reps.windows(2) {
        c.check(
            format!("variance sum {} -> {}", w[0].variance_sum, w[1].variance_sum),
            w[1].variance_sum >= 4 * w[0].variance_sum,
        );
        let stein = (montecarlo::stein_from_counts(&w[0]), montecarlo::stein_from_counts(&w[1]));
        c.check(format!("stein bound {} -> {}", stein.0, stein.1), stein.1 < stein.0);
    }
    let pair: Vec<u64> = reps.iter().map(|r| r.pair_sum_max).collect();
    c.check(format!("pair sums {pair:?}"), pair[2] <= pair[1]);
    c.report(9, "property suites");
}
