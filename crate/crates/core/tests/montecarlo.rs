use std::f64::consts::PI;

use num_complex::Complex64;
use poisson_lab::calibration::SADDLE_OFFSET_P95;
use poisson_lab::montecarlo::{
    cauchy_scale_oracle, e1_samples, poisson_integral_stats, run_replica_indices, run_replicas,
    summaries_to_json_lines, summarize, test_e1_cauchy, test_sign_periodicity, test_translate_uniformity,
    EnsembleConfig, ReplicaSummary,
};
use poisson_lab::{sample_poisson, LabError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal, Uniform};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn cauchy_test_null_calibration() {
    let law = Cauchy::new(0.0, 2.5).unwrap();
    let passes = (0..100u64)
        .filter(|&t| {
            let mut g = rng(t);
            let xs: Vec<f64> = (0..1000).map(|_| law.sample(&mut g)).collect();
            test_e1_cauchy(&xs).unwrap().pass
        })
        .count();
    println!("Cauchy null: {passes}/100 meta-trials pass");
    assert!(passes >= 95, "{passes}");
}

#[test]
fn cauchy_test_rejects_gaussian() {
    let law = Normal::new(0.0, 1.0).unwrap();
    let mut g = rng(1);
    let xs: Vec<f64> = (0..2000).map(|_| law.sample(&mut g)).collect();
    assert!(!test_e1_cauchy(&xs).unwrap().pass);
    assert!(matches!(test_e1_cauchy(&xs[..999]), Err(LabError::TooFewSamples { .. })));
}

#[test]
fn uniformity_test_null_and_alternative() {
    let u = Uniform::new(0.0, 1.0).unwrap();
    let passes = (0..100u64)
        .filter(|&t| {
            let mut g = rng(500 + t);
            let xs: Vec<f64> = (0..1000).map(|_| u.sample(&mut g)).collect();
            test_translate_uniformity(&xs).unwrap().pass
        })
        .count();
    println!("uniform null: {passes}/100 meta-trials pass");
    assert!(passes >= 95, "{passes}");
    assert!(!test_translate_uniformity(&vec![0.5; 1000]).unwrap().pass);
    assert!(test_translate_uniformity(&[0.1; 10]).is_err());
}

fn with_signs(seed: u64, signs: Vec<i8>) -> ReplicaSummary {
    ReplicaSummary {
        seed,
        k: 1,
        n_points: 0,
        failure: None,
        sigma: None,
        residual: None,
        normalized_offset: None,
        second_scaled: None,
        theta_k: None,
        ln_a_k: None,
        retained_bits: None,
        e_signs: signs,
        law_error: None,
        spacing: None,
        cosine: None,
        contour: Vec::new(),
    }
}

#[test]
fn four_periodic_signs_alternate_every_time() {
    // Taylor coefficients of cos(πx) + sin(πx): signs + + - - + + - - ...
    let signs: Vec<i8> = (0..24).map(|j| if (j / 2) % 2 == 0 { 1 } else { -1 }).collect();
    let summaries: Vec<_> = (0..5).map(|s| with_signs(s, signs[3..3 + 13].to_vec())).collect();
    let res = test_sign_periodicity(&summaries, (3, 13)).unwrap();
    assert_eq!(res.statistic, 1.0);
    assert!(res.pass);
    assert!(res.detail.values().all(|&f| f == 1.0));
    // signs that never alternate
    let flat: Vec<_> = (0..5).map(|s| with_signs(s, vec![1; 13])).collect();
    assert_eq!(test_sign_periodicity(&flat, (3, 13)).unwrap().statistic, 0.0);
}

#[test]
fn sign_frequency_baseline_at_k20() {
    let mut cfg = EnsembleConfig::new(20);
    cfg.replicas = 100;
    cfg.base_seed = 70_000;
    cfg.zero_window = None;
    cfg.cosine_window = None;
    cfg.sign_range = Some((14, 20));
    let res = test_sign_periodicity(&run_replicas(&cfg).unwrap(), (14, 20)).unwrap();
    println!("sign alternation frequency near k = 20: {:.3}", res.statistic);
    assert!(res.statistic > 0.5);
}

#[test]
fn saddle_solves_succeed_at_k60() {
    let mut cfg = EnsembleConfig::new(60);
    cfg.replicas = 100;
    cfg.base_seed = 71_000;
    cfg.zero_window = None;
    cfg.cosine_window = None;
    let runs = run_replicas(&cfg).unwrap();
    let ok = runs.iter().filter(|s| s.saddle_ok()).count();
    assert!(ok >= 95, "{ok}");
}

#[test]
fn reruns_and_reordering_are_identical() {
    let mut cfg = EnsembleConfig::new(30);
    cfg.replicas = 1;
    cfg.base_seed = 72_000;
    let a = summaries_to_json_lines(&run_replicas(&cfg).unwrap()).unwrap();
    let b = summaries_to_json_lines(&run_replicas(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);

    cfg.replicas = 6;
    let forward = run_replicas(&cfg).unwrap();
    let mut shuffled = run_replica_indices(&cfg, &[4, 1, 5, 0, 3, 2]).unwrap();
    shuffled.sort_by_key(|s| s.seed);
    assert_eq!(
        summaries_to_json_lines(&forward).unwrap(),
        summaries_to_json_lines(&shuffled).unwrap()
    );
    let ra = serde_json::to_string(&summarize(&cfg, &forward, SADDLE_OFFSET_P95).unwrap()).unwrap();
    let rb = serde_json::to_string(&summarize(&cfg, &shuffled, SADDLE_OFFSET_P95).unwrap()).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn invalid_config_fails_before_work() {
    let mut cfg = EnsembleConfig::new(30);
    cfg.delta = 0.2;
    assert!(run_replicas(&cfg).is_err());
}

#[test]
fn e1_is_cauchy_with_oracle_scale() {
    let n = 2000;
    let xs = e1_samples(n, 1000.0, 73_000).unwrap();
    let res = test_e1_cauchy(&xs).unwrap();
    let fitted = res.detail["fitted_scale"];
    let oracle = cauchy_scale_oracle(1000.0);
    // the sample median of |X| has standard deviation π s/(2√n)
    let sd = PI / (2.0 * f64::from(n).sqrt());
    println!("e1: p = {:.3}, fitted scale {fitted:.4}, oracle {oracle:.4}", res.statistic);
    assert!(res.pass);
    assert!((fitted / oracle - 1.0).abs() <= 4.0 * sd);
    assert!((oracle - (PI - 1e-3)).abs() < 1e-5);
}

#[test]
fn fitted_scale_is_stable_under_window_doubling() {
    // nested windows on the same configurations
    let (m, n) = (2000.0, 10_000u64);
    let mut small = Vec::with_capacity(n as usize);
    let mut large = Vec::with_capacity(n as usize);
    for r in 0..n {
        let s = sample_poisson(2.0 * m, 1.0, 74_000 + r).unwrap();
        large.push(s.points().map(|x| -1.0 / x).sum::<f64>());
        small.push(s.points().filter(|x| x.abs() <= m).map(|x| -1.0 / x).sum::<f64>());
    }
    let a = test_e1_cauchy(&small).unwrap().detail["fitted_scale"];
    let b = test_e1_cauchy(&large).unwrap().detail["fitted_scale"];
    println!("fitted scale: M = {m} {a:.4}, M = {} {b:.4}", 2.0 * m);
    assert!((b / a - 1.0).abs() <= 0.05);
}

#[test]
fn first_poisson_integral() {
    let up = poisson_integral_stats(Complex64::new(0.0, 1.0), 1, 10_000, 1000.0, 75_000).unwrap();
    for t in up.tests() {
        println!("{}", t.line());
        assert!(t.pass);
    }
    assert!((up.oracle_variance / PI - 1.0).abs() < 1e-3);
    let down = poisson_integral_stats(Complex64::new(0.5, -2.0), 1, 10_000, 1000.0, 76_000).unwrap();
    assert_eq!(down.expected_mean, Complex64::new(0.0, PI));
    assert!(down.tests().iter().all(|t| t.pass));
    assert!(poisson_integral_stats(Complex64::new(1.0, 0.0), 1, 10, 100.0, 0).is_err());
}

#[test]
fn higher_poisson_integrals() {
    let mut scaled = Vec::new();
    for y in [1.0, 2.0] {
        let rep = poisson_integral_stats(Complex64::new(0.0, y), 2, 10_000, 1000.0, 77_000).unwrap();
        assert!(rep.mean_z_score() <= 3.0, "z = {}", rep.mean_z_score());
        // ∫|z - x|⁻⁴ dx = π/(2y³)
        let exact = PI / (2.0 * y * y * y);
        assert!((rep.oracle_variance / exact - 1.0).abs() < 1e-6);
        assert!((rep.variance / rep.oracle_variance - 1.0).abs() < 0.1);
        scaled.push(rep.scaled_variance);
    }
    println!("variance·y³ for r = 2 at y = 1, 2: {scaled:?}");
    assert!((scaled[1] / scaled[0] - 1.0).abs() <= 0.15);

    for r in [2u32, 3] {
        let gamma: Vec<f64> = [1.0, 2.0]
            .iter()
            .map(|&y| {
                poisson_integral_stats(Complex64::new(0.0, y), r, 4000, 1000.0, 78_000)
                    .unwrap()
                    .scaled_variance
            })
            .collect();
        println!("γ̂_{r} at heights 1, 2: {gamma:?}");
        assert!(gamma.iter().all(|g| g.is_finite() && *g > 0.0));
    }
}
