use std::f64::consts::PI;

use num_complex::Complex64;
use poisson_lab::calibration::SADDLE_OFFSET_P95;
use poisson_lab::saddle::{
    default_tol, eval_h_rescaled, eval_phase, eval_phase_derivative, find_saddle, saddle_diagnostics,
};
use poisson_lab::series::{eval_h, eval_log_f};
use poisson_lab::stats::quantile;
use poisson_lab::{sample_poisson, LabError, PoissonSample, PrecisionConfig};
use proptest::prelude::*;
use proptest::test_runner::Config;

fn cubic() -> PoissonSample {
    PoissonSample::from_points_tight(vec![1.0, -2.0, 4.0]).unwrap()
}

fn p() -> PrecisionConfig {
    PrecisionConfig::default()
}

#[test]
fn phase_examples() {
    let s = cubic();
    let z = Complex64::new(0.7, 1.3);
    let a = eval_phase(&s, 0, z, p()).unwrap();
    let b = eval_log_f(&s, z, p());
    assert!((a.log_mag - b.log_mag).abs() < 1e-15 && (a.arg - b.arg).abs() < 1e-15);
    // f(2) = -1, so φ_1(2) = log(-1) - log 2
    let v = eval_phase(&s, 1, Complex64::new(2.0, 0.0), p()).unwrap();
    assert!((v.log_mag - 0.5f64.ln()).abs() < 1e-15);
    assert!((v.arg.abs() - PI).abs() < 1e-15);
}

#[test]
fn first_derivative_examples() {
    let s = cubic();
    let z = Complex64::new(0.0, 1.0);
    let want = -2.0 / z + 1.0 / (z - 1.0) + 1.0 / (z + 2.0) + 1.0 / (z - 4.0);
    let got = eval_phase_derivative(&s, 2, z, 1).unwrap();
    assert!((got - want).norm() < 1e-15);
    let big = sample_poisson(300.0, 1.0, 2).unwrap();
    let w = Complex64::new(3.3, 0.4);
    let h = eval_h(&big, w).unwrap();
    assert!((eval_phase_derivative(&big, 0, w, 1).unwrap() - h).norm() <= 1e-14 * h.norm());
    assert!(matches!(
        eval_phase_derivative(&s, 1, Complex64::new(0.0, 0.0), 1),
        Err(LabError::Pole { .. })
    ));
}

#[test]
fn rescaled_h_is_h_at_scaled_argument() {
    let s = sample_poisson(500.0, 1.0, 4).unwrap();
    let y = Complex64::new(0.01, 0.3);
    assert_eq!(eval_h_rescaled(&s, 50, y).unwrap(), eval_h(&s, y * 50.0).unwrap());
}

proptest! {
    #![proptest_config(Config { cases: 64, failure_persistence: None, ..Config::default() })]

    #[test]
    fn derivatives_match_finite_differences(
        seed in 0u64..1_000_000,
        k in 1u32..60,
        re in -20.0f64..20.0,
        im in 1.0f64..40.0,
        r in 1u32..4,
    ) {
        let s = sample_poisson(200.0, 1.0, seed).unwrap();
        let z = Complex64::new(re, im);
        let h = 1e-6;
        let up = eval_phase_derivative(&s, k, z + h, r).unwrap();
        let down = eval_phase_derivative(&s, k, z - h, r).unwrap();
        let fd = (up - down) / (2.0 * h);
        let exact = eval_phase_derivative(&s, k, z, r + 1).unwrap();
        prop_assert!((fd - exact).norm() <= 1e-6 * exact.norm(), "fd {} exact {}", fd, exact);
    }

    #[test]
    fn real_part_of_phase_is_conjugation_symmetric(
        seed in 0u64..1_000_000,
        k in 0u32..50,
        re in -30.0f64..30.0,
        im in 0.1f64..30.0,
    ) {
        let s = sample_poisson(100.0, 1.0, seed).unwrap();
        let z = Complex64::new(re, im);
        let a = eval_phase(&s, k, z, p()).unwrap();
        let b = eval_phase(&s, k, z.conj(), p()).unwrap();
        prop_assert!((a.log_mag - b.log_mag).abs() <= 1e-12 * (1.0 + a.log_mag.abs()));
    }

    #[test]
    fn saddle_contract(seed in 0u64..1_000_000, k in 10u32..120) {
        let m = (10.0 * f64::from(k)).max(500.0);
        let s = sample_poisson(m, 1.0, seed).unwrap();
        let tol = default_tol(k);
        let sp = find_saddle(&s, k, tol, 100).unwrap();
        prop_assert!(sp.residual <= tol);
        prop_assert!(sp.sigma.im > 0.0);
        prop_assert!((sp.sigma - Complex64::new(0.0, f64::from(k) / PI)).norm() <= f64::from(k) / 2.0);
        prop_assert!(sp.trace.iter().all(|st| st.z.im > 0.0));
        prop_assert!(sp.trace.windows(2).all(|w| w[1].residual < w[0].residual));
        let direct = eval_phase_derivative(&s, k, sp.sigma, 1).unwrap().norm();
        prop_assert!(direct <= tol);
    }
}

#[test]
fn failure_carries_trace() {
    let s = sample_poisson(1000.0, 1.0, 9).unwrap();
    match find_saddle(&s, 100, 1e-300, 3) {
        Err(LabError::SaddleFailure { k, seed, trace, .. }) => {
            assert_eq!((k, seed), (100, 9));
            assert!(!trace.is_empty());
        }
        other => panic!("expected a saddle failure, got {other:?}"),
    }
    assert!(find_saddle(&s, 0, 1e-10, 50).is_err());
}

#[test]
fn json_line_has_trace_fields() {
    let s = sample_poisson(500.0, 1.0, 3).unwrap();
    let sp = find_saddle(&s, 40, default_tol(40), 100).unwrap();
    let v: serde_json::Value = serde_json::from_str(&sp.to_json_line()).unwrap();
    for key in ["k", "seed", "sigma", "residual", "iterations", "normalized_offset"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["seed"], 3);
}

#[test]
fn offsets_and_curvature_at_k100() {
    let k = 100;
    let mut offsets = Vec::new();
    let mut curvature_ok = 0;
    for seed in 0..200u64 {
        let s = sample_poisson(1000.0, 1.0, 20_000 + seed).unwrap();
        let sp = find_saddle(&s, k, default_tol(k), 100).unwrap();
        let d = saddle_diagnostics(&s, &sp).unwrap();
        assert!(d.residual <= default_tol(k));
        offsets.push(sp.normalized_offset);
        if (d.second_scaled - 1.0).norm() <= 0.5 {
            curvature_ok += 1;
        }
    }
    let median = quantile(&offsets, 0.5);
    let p95 = quantile(&offsets, 0.95);
    println!("k = 100 normalized offset: median {median:.3}, p95 {p95:.3}");
    assert!(median > 0.05 && median < 1.0, "median {median}");
    assert!(p95 <= SADDLE_OFFSET_P95, "p95 {p95}");
    assert!(curvature_ok >= 180, "{curvature_ok} of 200");
}

#[test]
fn third_derivative_scale_is_recorded() {
    // The probe circle |z - σ| = k/2 dips below Im σ ≈ k/π onto the real
    // axis, so single probes can sit next to a point; only the bulk is
    // compared across k.
    let mut medians = Vec::new();
    for k in [50u32, 100] {
        let m = (10.0 * f64::from(k)).max(500.0);
        let mut v: Vec<f64> = (0..100u64)
            .map(|seed| {
                let s = sample_poisson(m, 1.0, 31_000 + seed).unwrap();
                let sp = find_saddle(&s, k, default_tol(k), 100).unwrap();
                saddle_diagnostics(&s, &sp).unwrap().third_scaled_max
            })
            .collect();
        v.sort_by(f64::total_cmp);
        assert!(v.iter().all(|x| x.is_finite()));
        println!(
            "k = {k}: max |k³φ'''|/k on the probe circle, median {:.1}, p95 {:.1}",
            quantile(&v, 0.5),
            quantile(&v, 0.95)
        );
        medians.push(quantile(&v, 0.5));
    }
    assert!(medians[1] <= 2.0 * medians[0], "{medians:?}");
}

#[test]
fn cauchy_transform_concentrates_near_saddle_scale() {
    // 95th percentile of max over the circle |y - i/π| = m/√k of |h_k(y) + iπ|
    let k = 400u32;
    let kf = f64::from(k);
    let center = Complex64::new(0.0, 1.0 / PI);
    let mut p95 = Vec::new();
    for m in [1.0, 4.0] {
        let radius = m / kf.sqrt();
        let vals: Vec<f64> = (0..500u64)
            .map(|seed| {
                let s = sample_poisson(4000.0, 1.0, 41_000 + seed).unwrap();
                (0..16)
                    .map(|j| {
                        let y = center + Complex64::from_polar(radius, f64::from(j) * PI / 8.0);
                        (eval_h_rescaled(&s, k, y).unwrap() + Complex64::new(0.0, PI)).norm()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        p95.push(quantile(&vals, 0.95));
    }
    println!("h_k concentration p95: m = 1 {:.4}, m = 4 {:.4}", p95[0], p95[1]);
    assert!(p95[1] <= 4.0 * p95[0], "{p95:?}");
}
