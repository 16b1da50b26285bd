//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Seeds stay below the calibration range.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use poisson_lab::calibration::{CALIBRATION_BASE_SEED, SADDLE_OFFSET_P95};
use poisson_lab::cli::{dispatch, EXIT_OK};
use poisson_lab::contour::{build_contour, coefficient_via_contour, Arc, ContourSpec};
use poisson_lab::montecarlo::{
    e1_samples, poisson_integral_stats, run_replicas, test_e1_cauchy, test_saddle_localization,
    test_sign_periodicity, test_translate_uniformity, EnsembleConfig, ReplicaSummary,
};
use poisson_lab::saddle::{default_tol, find_saddle};
use poisson_lab::series::{coefficients_newton, coefficients_product, derivative_coefficients, eval_h, eval_log_f};
use poisson_lab::stats::quantile;
use poisson_lab::{sample_poisson, LogComplex, PoissonSample, PrecisionConfig};
use rug::Float;
use tempfile::TempDir;

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    summary: String,
}

impl Outcome {
    fn print(&self) {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {}: {}", self.id, self.title, self.summary);
    }
}

fn note(msg: impl AsRef<str>) {
    println!("    {}", msg.as_ref());
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn rel_log(a: &LogComplex, b: &Float) -> f64 {
    let bl = LogComplex::from_float(b);
    (a.sub(&bl).log_mag - bl.log_mag).exp()
}

fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

fn oracle_exactness() -> Outcome {
    let start = Instant::now();
    let s = PoissonSample::from_points_tight(vec![1.0, -2.0, 4.0]).unwrap();
    let p = PrecisionConfig::default();
    let table = coefficients_product(&s, 3, p).unwrap();
    let mut worst: f64 = 0.0;
    for (j, want) in [1.0, -0.75, -0.375, 0.125].into_iter().enumerate() {
        worst = worst.max(rel(table.e[j].to_f64(), want));
    }
    worst = worst.max(rel(eval_h(&s, Complex64::new(0.0, 0.0)).unwrap().re, -0.75));
    worst = worst.max(rel(eval_log_f(&s, Complex64::new(2.0, 0.0), p).to_complex().re, -1.0));
    let d = derivative_coefficients(&table, 3, 0, None).unwrap();
    worst = worst.max(rel(d.a[0].to_f64(), 0.75));
    // any circle about 0 that avoids the points encloses only the pole at 0
    let spec = ContourSpec::from_sigma(3, Complex64::new(0.1, 0.8), 0.4, 512).unwrap();
    let res = coefficient_via_contour(&s, 3, 0, &spec, p).unwrap();
    let total = res.total_complex();
    worst = worst.max((total - 0.125).norm() / 0.125);
    let elapsed = start.elapsed();
    Outcome {
        id: 1,
        title: "oracle exactness on the cubic {1, -2, 4}",
        pass: worst <= 1e-8 && elapsed < Duration::from_secs(1),
        summary: format!("worst relative error {worst:.2e} <= 1e-8, {:.3} s < 1 s", elapsed.as_secs_f64()),
    }
}

fn cross_oracle() -> Outcome {
    let start = Instant::now();
    let n_max = 200;
    let p = PrecisionConfig::for_order(n_max as u32);
    // both sides of the comparison underflow f64, so work with log2
    let tol_log2 = -f64::from(p.bits()) / 2.0;
    let mut worst = f64::NEG_INFINITY;
    let mut points = Vec::new();
    for r in 0..20u64 {
        let s = sample_poisson(1000.0, 1.0, 2_000 + r).unwrap();
        points.push(s.len());
        let a = coefficients_product(&s, n_max, p).unwrap();
        let b = coefficients_newton(&s, n_max, p).unwrap();
        worst = worst.max(a.max_relative_difference_log2(&b));
    }
    let elapsed = start.elapsed();
    note(format!(
        "{} bits, point counts {}..{}",
        p.bits(),
        points.iter().min().unwrap(),
        points.iter().max().unwrap()
    ));
    Outcome {
        id: 2,
        title: "product vs Newton-identity coefficients, 20 samples, n_max = 200",
        pass: worst <= tol_log2 && elapsed < Duration::from_secs(120),
        summary: format!(
            "max relative difference 2^{worst:.1} <= 2^(-bits/2) = 2^{tol_log2:.1}, {:.1} s < 120 s",
            elapsed.as_secs_f64()
        ),
    }
}

fn contour_equals_coefficient() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut all_converged = true;
    for k in [10u32, 20, 40] {
        let m = (10.0 * f64::from(k)).max(500.0);
        for rep in 0..10u64 {
            let s = sample_poisson(m, 1.0, 3_000 + 100 * u64::from(k) + rep).unwrap();
            let sp = find_saddle(&s, k, default_tol(k), 100).unwrap();
            let spec = build_contour(&sp, 0.4, 512).unwrap();
            for r in 0..=2u32 {
                let prec = PrecisionConfig::for_order(k + r);
                let res = coefficient_via_contour(&s, k, r, &spec, prec).unwrap();
                let direct = coefficients_product(&s, (k + r) as usize, prec).unwrap();
                worst = worst.max(rel_log(&res.total, &direct.e[(k + r) as usize]));
                all_converged &= res.converged();
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        id: 3,
        title: "six-arc Cauchy integral equals e_{k+r}, k in {10, 20, 40}, r in {0, 1, 2}",
        pass: worst <= 1e-6 && all_converged && elapsed < Duration::from_secs(600),
        summary: format!(
            "max relative error {worst:.2e} <= 1e-6, quadrature converged {all_converged}, {:.1} s < 600 s",
            elapsed.as_secs_f64()
        ),
    }
}

/// 1000 replicas at k = 100, M = 1000 with zeros on [-5, 5]; shared by
/// the saddle, spacing and uniformity criteria.
fn k100_ensemble() -> Vec<ReplicaSummary> {
    let mut cfg = EnsembleConfig::new(100);
    cfg.replicas = 1000;
    cfg.base_seed = 1;
    cfg.cosine_window = None;
    assert_eq!(cfg.window_halfwidth, 1000.0);
    run_replicas(&cfg).unwrap()
}

fn saddle_localization(k100: &[ReplicaSummary]) -> Outcome {
    let tests = test_saddle_localization(&k100[..200], SADDLE_OFFSET_P95);
    let residual_ok = k100[..200]
        .iter()
        .filter(|s| s.saddle_ok())
        .all(|s| s.residual.unwrap() <= default_tol(100) && s.sigma.unwrap().im > 0.0);
    for t in &tests {
        note(t.line());
    }
    Outcome {
        id: 4,
        title: "saddle localization at k = 100, M = 1000, 200 replicas",
        pass: residual_ok && tests.iter().all(|t| t.pass),
        summary: tests
            .iter()
            .map(|t| format!("{} {:.3}", t.name, t.statistic))
            .collect::<Vec<_>>()
            .join(", "),
    }
}

fn dominant_arc(k60: &[ReplicaSummary]) -> Outcome {
    let with_contour: Vec<_> = k60.iter().filter(|s| !s.contour.is_empty()).collect();
    let n = 100;
    let close = with_contour
        .iter()
        .filter(|s| (s.contour[0].dominant_ratio - 1.0).norm() <= 0.15)
        .count();
    let g2: Vec<f64> = with_contour
        .iter()
        .map(|s| s.contour[0].negligible[Arc::Gamma2.label()])
        .collect();
    let devs: Vec<f64> = with_contour
        .iter()
        .map(|s| (s.contour[0].dominant_ratio - 1.0).norm())
        .collect();
    let share = close as f64 / n as f64;
    let g2_median = median(&g2);
    note(format!(
        "{} of {n} replicas carry a contour; |ratio - 1| median {:.4}",
        with_contour.len(),
        median(&devs)
    ));
    Outcome {
        id: 5,
        title: "dominant arc at k = 60, delta = 0.4, 100 replicas",
        pass: with_contour.len() == n && share >= 0.8 && g2_median <= 1e-3,
        summary: format!("share with |ratio - 1| <= 0.15: {share:.2} >= 0.8, Gamma2 fraction median {g2_median:.3e} <= 1e-3"),
    }
}

fn cosine_law() -> Outcome {
    let med = |k: u32, base: u64| {
        let mut cfg = EnsembleConfig::new(k);
        cfg.replicas = 50;
        cfg.base_seed = base;
        cfg.zero_window = None;
        cfg.cosine_window = None;
        let runs = run_replicas(&cfg).unwrap();
        let v: Vec<f64> = runs.iter().filter_map(|s| s.law_error).collect();
        assert_eq!(v.len(), 50, "law error missing for some replicas");
        median(&v)
    };
    let m40 = med(40, 6_000);
    let m80 = med(80, 6_100);
    Outcome {
        id: 6,
        title: "coefficient cosine law, max over r <= 6",
        pass: m80 <= 0.1 && m80 < m40,
        summary: format!("median at k = 80 {m80:.4} <= 0.1, decreasing from k = 40 ({m40:.4})"),
    }
}

fn sign_periodicity(k60: &[ReplicaSummary]) -> Outcome {
    let t = test_sign_periodicity(k60, (60, 60)).unwrap();
    Outcome {
        id: 7,
        title: "sign 4-periodicity at k = 60, 200 replicas",
        pass: t.pass && t.n_replicas == 200,
        summary: format!("frequency of sign(e_60) = -sign(e_62): {:.3} >= 0.9 over {}", t.statistic, t.n_replicas),
    }
}

fn spacing(k100: &[ReplicaSummary]) -> Outcome {
    let stat = |runs: &[ReplicaSummary]| {
        let v: Vec<f64> = runs
            .iter()
            .filter_map(|s| s.spacing.as_ref().map(|d| d.max_abs_dev_from_1))
            .collect();
        (median(&v), v.len())
    };
    let small = |k: u32, base: u64| {
        let mut cfg = EnsembleConfig::new(k);
        cfg.replicas = 100;
        cfg.base_seed = base;
        cfg.cosine_window = None;
        run_replicas(&cfg).unwrap()
    };
    let (m25, _) = stat(&small(25, 8_000));
    let (m50, _) = stat(&small(50, 8_200));
    let first = &k100[..100];
    let (m100, n100) = stat(first);
    let (matched, interior) = first
        .iter()
        .filter_map(|s| s.spacing.as_ref())
        .fold((0.0, 0usize), |(m, n), d| (m + d.match_fraction * d.interior_zeros as f64, n + d.interior_zeros));
    let pooled = matched / interior as f64;
    note(format!("median max |gap - 1|: k = 25 {m25:.4}, k = 50 {m50:.4}, k = 100 {m100:.4} ({n100} replicas)"));
    note(format!("lattice matching within 0.1 on [-5, 5]: {matched:.0} of {interior} interior zeros"));
    Outcome {
        id: 8,
        title: "zero spacing at k = 100 and lattice matching",
        pass: m100 <= 0.1 && m25 > m50 && m50 > m100 && pooled >= 0.95,
        summary: format!(
            "median {m100:.4} <= 0.1, monotone {}, matched share {pooled:.3} >= 0.95",
            m25 > m50 && m50 > m100
        ),
    }
}

fn distributions(k100: &[ReplicaSummary]) -> Outcome {
    let e1 = e1_samples(10_000, 1e4, 9_000).unwrap();
    let cauchy = test_e1_cauchy(&e1).unwrap();
    note(cauchy.line());
    let fracs: Vec<f64> = k100
        .iter()
        .filter_map(|s| s.spacing.as_ref().and_then(|d| d.nearest_fraction))
        .collect();
    let uniform = test_translate_uniformity(&fracs).unwrap();
    note(uniform.line());
    let w1 = poisson_integral_stats(Complex64::new(0.0, 1.0), 1, 10_000, 1000.0, 30_000).unwrap();
    let w1_tests = w1.tests();
    for t in &w1_tests {
        note(t.line());
    }
    note(format!("W1(i) mean {:.4}, expected {:.4}", w1.mean, Complex64::new(0.0, -PI)));
    Outcome {
        id: 9,
        title: "e1 Cauchy, translate uniformity, first Poisson integral",
        pass: cauchy.pass && uniform.pass && fracs.len() == 1000 && w1_tests.iter().all(|t| t.pass),
        summary: format!(
            "KS p {:.3}, Kuiper p {:.3} on {} fractions, W1 z-score {:.2}, variance rel. error {:.3}",
            cauchy.statistic,
            uniform.statistic,
            fracs.len(),
            w1.mean_z_score(),
            (w1.variance / PI - 1.0).abs()
        ),
    }
}

fn summary_bytes(dir: &Path) -> Vec<u8> {
    let name = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .find(|n| n.starts_with("summary-"))
        .expect("summary written");
    fs::read(dir.join(name)).unwrap()
}

fn determinism() -> Outcome {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    let codes: Vec<i32> = dirs
        .iter()
        .map(|d| {
            dispatch([
                "poisson-lab",
                "verify",
                "--k",
                "60",
                "--replicas",
                "100",
                "--base-seed",
                "1",
                "--output-dir",
                d.path().to_str().unwrap(),
            ])
        })
        .collect();
    let same = summary_bytes(dirs[0].path()) == summary_bytes(dirs[1].path());
    Outcome {
        id: 10,
        title: "verify twice gives byte-identical summary JSON",
        pass: same && codes.iter().all(|&c| c == EXIT_OK),
        summary: format!("identical {same}, exit codes {codes:?}"),
    }
}

fn main() {
    let t0 = Instant::now();
    let mut outcomes = Vec::new();
    let mut run = |o: Outcome| {
        o.print();
        outcomes.push(o.pass);
    };
    run(oracle_exactness());
    run(cross_oracle());
    run(contour_equals_coefficient());

    let k100 = k100_ensemble();
    assert!(k100.iter().all(|s| s.seed < CALIBRATION_BASE_SEED));
    run(saddle_localization(&k100));

    // k = 60: contour on the first 100 replicas, signs on all 200
    let start = Instant::now();
    let mut cfg = EnsembleConfig::new(60);
    cfg.replicas = 100;
    cfg.base_seed = 5_000;
    cfg.zero_window = None;
    cfg.cosine_window = None;
    cfg.sign_range = Some((60, 60));
    cfg.contour_r = vec![0];
    let mut k60 = run_replicas(&cfg).unwrap();
    let contour_time = start.elapsed();
    cfg.base_seed += 100;
    cfg.contour_r.clear();
    k60.extend(run_replicas(&cfg).unwrap());
    let mut dom = dominant_arc(&k60);
    dom.pass &= contour_time < Duration::from_secs(1800);
    dom.summary.push_str(&format!(", {:.1} s < 1800 s", contour_time.as_secs_f64()));
    run(dom);

    run(cosine_law());
    run(sign_periodicity(&k60));
    run(spacing(&k100));
    run(distributions(&k100));
    run(determinism());

    let passed = outcomes.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria pass in {:.0} s", outcomes.len(), t0.elapsed().as_secs_f64());
    if passed != outcomes.len() {
        std::process::exit(1);
    }
}
