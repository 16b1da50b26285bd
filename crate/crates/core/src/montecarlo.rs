//! Replica ensembles and the statistical tests run over them.
//!
//! Replica `r` of a run draws its sample from seed `base_seed + r`, so an
//! ensemble is a pure function of its config whatever the thread count.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{build_contour, coefficient_via_contour, Arc, DEFAULT_DELTA, DEFAULT_NODES_PER_ARC};
use crate::error::{LabError, Result};
use crate::numeric::{powi_complex, CompensatedComplexSum, CompensatedSum};
use crate::precision::PrecisionConfig;
use crate::quadrature::composite_rule;
use crate::saddle::{default_tol, find_saddle};
use crate::sampler::{sample_poisson, PoissonSample};
use crate::series::{coefficients_product_certified, derivative_coefficients, Amplitude};
use crate::stats;
use crate::zeros::{
    cosine_compare, default_r_max, find_real_zeros, match_zero_sets, spacing_stats, FkEvaluator,
    DEFAULT_GRID_STEP, DEFAULT_REFINE_TOL, DEFAULT_WINDOW,
};

pub const SIGNIFICANCE: f64 = 0.01;
/// Bits that must survive cancellation in every coefficient table.
pub const MIN_RETAINED_BITS: f64 = 64.0;
pub const DEFAULT_MAX_ITER: u32 = 100;

/// `max(10k, 500)`
pub fn default_window(k: u32) -> f64 {
    (10.0 * f64::from(k)).max(500.0)
}

/// Which stages a replica runs, and with what parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub k: u32,
    pub window_halfwidth: f64,
    pub bits: u32,
    pub delta: f64,
    pub replicas: u32,
    pub base_seed: u64,
    pub max_iter: u32,
    /// Largest `r` in the cosine-law check.
    pub law_r: usize,
    /// Inclusive range of indices `j` whose sign pattern `e_j, e_{j+2}` is kept.
    pub sign_range: Option<(u32, u32)>,
    /// Half-width of the zero search; `None` skips zeros.
    pub zero_window: Option<f64>,
    pub grid_step: f64,
    pub refine_tol: f64,
    /// Matching tolerance `ε` and slope floor `c` for the lattice comparison.
    pub match_eps: f64,
    pub match_c: f64,
    /// Half-width of the cosine-profile comparison; `None` skips it.
    pub cosine_window: Option<f64>,
    /// Contour integrals for these `r`; empty skips the contour.
    pub contour_r: Vec<u32>,
    pub nodes_per_arc: usize,
}

impl EnsembleConfig {
    /// Defaults: window `max(10k, 500)`, bits from the order rule, zeros on
    /// `[-5, 5]`, cosine comparison on `[-3, 3]`, no contour.
    pub fn new(k: u32) -> Self {
        EnsembleConfig {
            k,
            window_halfwidth: default_window(k),
            bits: PrecisionConfig::for_order(k).bits(),
            delta: DEFAULT_DELTA,
            replicas: 100,
            base_seed: 1,
            max_iter: DEFAULT_MAX_ITER,
            law_r: 6,
            sign_range: None,
            zero_window: Some(DEFAULT_WINDOW),
            grid_step: DEFAULT_GRID_STEP,
            refine_tol: DEFAULT_REFINE_TOL,
            match_eps: 0.05,
            match_c: 0.5,
            cosine_window: Some(3.0),
            contour_r: Vec::new(),
            nodes_per_arc: DEFAULT_NODES_PER_ARC,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(LabError::invalid("k must be at least 1"));
        }
        if !(self.window_halfwidth.is_finite() && self.window_halfwidth > 0.0) {
            return Err(LabError::invalid("window half-width must be positive"));
        }
        PrecisionConfig::new(self.bits)?;
        if !(self.delta > 1.0 / 3.0 && self.delta < 0.5) {
            return Err(LabError::invalid(format!("delta must lie in (1/3, 1/2), got {}", self.delta)));
        }
        if self.replicas == 0 {
            return Err(LabError::invalid("need at least one replica"));
        }
        if let Some((lo, hi)) = self.sign_range {
            if lo > hi {
                return Err(LabError::invalid("sign range is empty"));
            }
        }
        if let Some(w) = self.zero_window {
            if !(w > 0.0) {
                return Err(LabError::invalid("zero window must be positive"));
            }
            if !(self.grid_step > 0.0 && self.grid_step <= 0.1) {
                return Err(LabError::invalid("grid step must lie in (0, 0.1]"));
            }
        }
        if !(self.match_eps > 0.0 && self.match_eps < self.match_c * self.match_c) {
            return Err(LabError::invalid("matching needs 0 < ε < c²"));
        }
        if !self.contour_r.is_empty() && self.nodes_per_arc < 16 {
            return Err(LabError::invalid("need at least 16 nodes per arc"));
        }
        if self.window_halfwidth * 2.0 < f64::from(self.k) + 10.0 {
            return Err(LabError::invalid(format!(
                "window {} is too small for k = {}",
                self.window_halfwidth, self.k
            )));
        }
        Ok(())
    }

    pub fn precision(&self) -> PrecisionConfig {
        PrecisionConfig::new(self.bits).expect("validated")
    }

    /// `r_max` needed by the widest real-axis stage.
    pub fn r_max(&self) -> usize {
        let w = self
            .zero_window
            .unwrap_or(0.0)
            .max(self.cosine_window.unwrap_or(0.0));
        default_r_max(w.max(1.0)).max(self.law_r)
    }

    fn n_max(&self) -> usize {
        let mut n = self.k as usize + 1 + self.r_max();
        if let Some((_, hi)) = self.sign_range {
            n = n.max(hi as usize + 2);
        }
        n
    }

    pub fn seed(&self, replica: u32) -> u64 {
        self.base_seed.wrapping_add(u64::from(replica))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingDigest {
    pub n_zeros: usize,
    pub mean_gap: f64,
    pub median_gap: f64,
    pub max_abs_dev_from_1: f64,
    /// Fractional part of the zero nearest 0.
    pub nearest_fraction: Option<f64>,
    pub match_fraction: f64,
    /// Found zeros inside the shrunk matching window.
    pub interior_zeros: usize,
    pub match_max_distance: f64,
    pub unmatched: usize,
    /// Share of zeros with `|f^(k+1)|/A_k ≥ 0.7·π/2`.
    pub slope_ok_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourDigest {
    pub r: u32,
    pub dominant_ratio: Complex64,
    pub negligible: BTreeMap<String, f64>,
    /// `|total - e_{k+r}| / |e_{k+r}|`
    pub total_rel_error: f64,
    pub converged: bool,
    pub exceptional: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub seed: u64,
    pub k: u32,
    pub n_points: usize,
    pub failure: Option<String>,
    pub sigma: Option<Complex64>,
    pub residual: Option<f64>,
    pub normalized_offset: Option<f64>,
    /// `σ²φ''(σ)/k`
    pub second_scaled: Option<Complex64>,
    pub theta_k: Option<f64>,
    /// `ln A_k`
    pub ln_a_k: Option<f64>,
    pub retained_bits: Option<f64>,
    /// Signs of `e_j` for `j` in `sign_range.0 ..= sign_range.1 + 2`.
    pub e_signs: Vec<i8>,
    pub law_error: Option<f64>,
    pub spacing: Option<SpacingDigest>,
    pub cosine: Option<(f64, f64)>,
    pub contour: Vec<ContourDigest>,
}

impl ReplicaSummary {
    fn empty(seed: u64, k: u32, n_points: usize) -> Self {
        ReplicaSummary {
            seed,
            k,
            n_points,
            failure: None,
            sigma: None,
            residual: None,
            normalized_offset: None,
            second_scaled: None,
            theta_k: None,
            ln_a_k: None,
            retained_bits: None,
            e_signs: Vec::new(),
            law_error: None,
            spacing: None,
            cosine: None,
            contour: Vec::new(),
        }
    }

    pub fn saddle_ok(&self) -> bool {
        self.sigma.is_some()
    }
}

/// Full pipeline for one replica. Numerical failures are recorded in the
/// summary rather than returned.
pub fn run_replica(cfg: &EnsembleConfig, replica: u32) -> Result<ReplicaSummary> {
    let seed = cfg.seed(replica);
    let s = sample_poisson(cfg.window_halfwidth, 1.0, seed)?;
    let mut out = ReplicaSummary::empty(seed, cfg.k, s.len());
    if let Err(e) = replica_stages(cfg, &s, &mut out) {
        out.failure = Some(e.to_string());
    }
    Ok(out)
}

fn replica_stages(cfg: &EnsembleConfig, s: &PoissonSample, out: &mut ReplicaSummary) -> Result<()> {
    let k = cfg.k;
    let p = cfg.precision();
    let n_max = cfg.n_max();
    if n_max > s.len() {
        return Err(LabError::invalid(format!(
            "sample has {} points, need {n_max}",
            s.len()
        )));
    }
    let table = coefficients_product_certified(s, n_max, p, MIN_RETAINED_BITS)?;
    out.retained_bits = table.retained_bits;
    if let Some((lo, hi)) = cfg.sign_range {
        out.e_signs = (lo..=hi + 2).map(|j| table.sign(j as usize)).collect();
    }

    let sp = find_saddle(s, k, default_tol(k), cfg.max_iter)?;
    out.sigma = Some(sp.sigma);
    out.residual = Some(sp.residual);
    out.normalized_offset = Some(sp.normalized_offset);
    out.second_scaled = Some(sp.sigma * sp.sigma * sp.second_derivative / f64::from(k));
    let amp = Amplitude::at_saddle(s, k, sp.sigma, p)?;
    out.theta_k = Some(amp.theta);
    out.ln_a_k = Some(amp.ln_a());

    let r_max = cfg.r_max();
    let d = derivative_coefficients(&table, k, r_max, Some(amp))?;
    out.law_error = Some(d.cosine_law_error(cfg.law_r)?);
    let d_next = derivative_coefficients(&table, k + 1, r_max, None)?;

    if let Some(w) = cfg.zero_window {
        let zs = find_real_zeros(&d, w, cfg.grid_step, cfg.refine_tol)?;
        let report = spacing_stats(&zs);
        let matching = match_zero_sets(&zs, amp.theta, cfg.match_eps, cfg.match_c)?;
        let slope = FkEvaluator::with_scale(&d_next, Some(amp.ln_a()));
        let floor = 0.7 * PI / 2.0;
        let slope_ok = zs.zeros.iter().filter(|&&x| slope.value(x).abs() >= floor).count();
        out.spacing = Some(SpacingDigest {
            n_zeros: zs.zeros.len(),
            mean_gap: report.mean_gap,
            median_gap: report.median_gap,
            max_abs_dev_from_1: report.max_abs_dev_from_1,
            nearest_fraction: zs.nearest_to_origin().map(|z| z.rem_euclid(1.0) % 1.0),
            match_fraction: matching.matched_fraction(),
            interior_zeros: matching.interior_found,
            match_max_distance: matching.max_distance,
            unmatched: matching.unmatched_found.len() + matching.unmatched_lattice.len(),
            slope_ok_fraction: if zs.zeros.is_empty() {
                0.0
            } else {
                slope_ok as f64 / zs.zeros.len() as f64
            },
        });
    }
    if let Some(w) = cfg.cosine_window {
        let cc = cosine_compare(&d, &d_next, w, cfg.grid_step)?;
        out.cosine = Some((cc.sup_error_f, cc.sup_error_fprime));
    }
    if !cfg.contour_r.is_empty() {
        let spec = build_contour(&sp, cfg.delta, cfg.nodes_per_arc)?;
        for &r in &cfg.contour_r {
            let res = coefficient_via_contour(s, k, r, &spec, p)?;
            let direct = crate::logcomplex::LogComplex::from_float(&table.e[(k + r) as usize]);
            let diff = res.total.sub(&direct);
            out.contour.push(ContourDigest {
                r,
                dominant_ratio: res.dominant_ratio,
                negligible: res
                    .negligible_fractions
                    .iter()
                    .map(|(a, v)| (a.label().to_string(), *v))
                    .collect(),
                total_rel_error: (diff.log_mag - direct.log_mag).exp(),
                converged: res.converged(),
                exceptional: res.exceptional,
            });
        }
    }
    Ok(())
}

/// Runs every replica of the ensemble; output is ordered by replica index.
pub fn run_replicas(cfg: &EnsembleConfig) -> Result<Vec<ReplicaSummary>> {
    run_replica_indices(cfg, &(0..cfg.replicas).collect::<Vec<_>>())
}

/// Runs the listed replica indices, in the order given.
pub fn run_replica_indices(cfg: &EnsembleConfig, indices: &[u32]) -> Result<Vec<ReplicaSummary>> {
    cfg.validate()?;
    indices.par_iter().map(|&r| run_replica(cfg, r)).collect()
}

pub fn summaries_to_json_lines(summaries: &[ReplicaSummary]) -> Result<String> {
    let mut out = String::new();
    for s in summaries {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtLeast,
    AtMost,
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub n_replicas: usize,
    pub pass: bool,
    pub detail: BTreeMap<String, f64>,
}

impl TestResult {
    pub fn new(name: &str, statistic: f64, comparison: Comparison, threshold: f64, n: usize) -> Self {
        let pass = match comparison {
            Comparison::AtLeast => statistic >= threshold,
            Comparison::AtMost => statistic <= threshold,
            Comparison::Above => statistic > threshold,
        };
        TestResult {
            name: name.to_string(),
            statistic,
            threshold,
            comparison,
            n_replicas: n,
            pass,
            detail: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.detail.insert(key.to_string(), value);
        self
    }

    /// Combine with another condition that must also hold.
    pub fn and(mut self, other: bool) -> Self {
        self.pass &= other;
        self
    }

    pub fn line(&self) -> String {
        let op = match self.comparison {
            Comparison::AtLeast => ">=",
            Comparison::AtMost => "<=",
            Comparison::Above => ">",
        };
        format!(
            "{} {}: {:.6} {op} {} (n = {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold,
            self.n_replicas
        )
    }
}

const MIN_DISTRIBUTION_SAMPLES: usize = 1000;

/// KS test of `e_1` draws against a centred Cauchy law whose scale is the
/// median absolute value.
pub fn test_e1_cauchy(e1_samples: &[f64]) -> Result<TestResult> {
    if e1_samples.len() < MIN_DISTRIBUTION_SAMPLES {
        return Err(LabError::TooFewSamples {
            needed: MIN_DISTRIBUTION_SAMPLES,
            got: e1_samples.len(),
        });
    }
    let mut sorted = e1_samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let abs: Vec<f64> = sorted.iter().map(|x| x.abs()).collect();
    let scale = crate::zeros::median(&abs);
    let d = stats::ks_statistic(&sorted, |x| stats::cauchy_cdf(x, scale));
    let p = stats::ks_p_value(d, sorted.len());
    Ok(TestResult::new("e1_cauchy_ks_p", p, Comparison::Above, SIGNIFICANCE, sorted.len())
        .with("ks_distance", d)
        .with("fitted_scale", scale))
}

/// `e_1 = Σ -1/x` for `replicas` independent samples on `[-M, M]`.
pub fn e1_samples(replicas: u32, window_halfwidth: f64, base_seed: u64) -> Result<Vec<f64>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = sample_poisson(window_halfwidth, 1.0, base_seed.wrapping_add(u64::from(r)))?;
            Ok(s.points().map(|x| -1.0 / x).collect::<CompensatedSum>().value())
        })
        .collect()
}

/// Scale `s` with `E exp(it e_1) = exp(-s|t|)` at `t = 1` for the window
/// `[-M, M]`: `s = ∫_{-M}^{M} (1 - cos(1/x)) dx = 2∫_{1/M}^∞ (1 - cos u)/u² du`.
pub fn cauchy_scale_oracle(window_halfwidth: f64) -> f64 {
    let lo = 1.0 / window_halfwidth;
    // integrate to a multiple of 2π and add the tail ∫_U^∞ (1 - cos u)/u² du
    let upper = 2000.0 * PI;
    let g = |u: f64| (1.0 - u.cos()) / (u * u);
    let head: f64 = composite_rule(lo, 1.0, 64, 16).iter().map(|(u, w)| w * g(*u)).sum();
    let body: f64 = composite_rule(1.0, upper, 40_000, 16)
        .iter()
        .map(|(u, w)| w * g(*u))
        .sum();
    // ∫_U^∞ cos u/u² du ≈ -sin U/U² - 2cos U/U³ with sin U = 0, cos U = 1
    let tail = 1.0 / upper + 2.0 / upper.powi(3);
    2.0 * (head + body + tail)
}

/// Frequency with which `sign(e_j) = -sign(e_{j+2})`, per `j` in the range
/// the summaries were built with; the statistic is the frequency at the
/// top of `k_range`.
pub fn test_sign_periodicity(summaries: &[ReplicaSummary], k_range: (u32, u32)) -> Result<TestResult> {
    let (lo, hi) = k_range;
    let width = (hi - lo + 3) as usize;
    let usable: Vec<&ReplicaSummary> = summaries.iter().filter(|s| s.e_signs.len() >= width).collect();
    if usable.is_empty() {
        return Err(LabError::invalid("no summaries carry signs for the requested range"));
    }
    let freq = |j: u32| {
        let idx = (j - lo) as usize;
        let hits = usable
            .iter()
            .filter(|s| s.e_signs[idx] != 0 && s.e_signs[idx] == -s.e_signs[idx + 2])
            .count();
        hits as f64 / usable.len() as f64
    };
    let mut result = TestResult::new("sign_alternation_frequency", freq(hi), Comparison::AtLeast, 0.9, usable.len());
    for j in lo..=hi {
        result = result.with(&format!("freq_{j}"), freq(j));
    }
    Ok(result)
}

/// Kuiper's test of fractional parts against Uniform on the circle.
pub fn test_translate_uniformity(fractional_parts: &[f64]) -> Result<TestResult> {
    if fractional_parts.len() < MIN_DISTRIBUTION_SAMPLES {
        return Err(LabError::TooFewSamples {
            needed: MIN_DISTRIBUTION_SAMPLES,
            got: fractional_parts.len(),
        });
    }
    let v = stats::kuiper_statistic(fractional_parts);
    let p = stats::kuiper_p_value(v, fractional_parts.len());
    Ok(
        TestResult::new("translate_uniformity_kuiper_p", p, Comparison::Above, SIGNIFICANCE, fractional_parts.len())
            .with("kuiper_v", v),
    )
}

/// Moments of `W_r(z) = Σ (z - x)^{-r}` over an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonIntegralReport {
    pub z: Complex64,
    pub r: u32,
    pub replicas: u32,
    pub window_halfwidth: f64,
    pub mean: Complex64,
    /// Standard error of each component of the mean.
    pub mean_se: (f64, f64),
    /// `E|W - EW|²`
    pub variance: f64,
    /// Limit of the mean: `-iπ·sgn(Im z)` for `r = 1`, else 0.
    pub expected_mean: Complex64,
    /// `∫_{-M}^{M} |z - x|^{-2r} dx`
    pub oracle_variance: f64,
    /// `variance·|Im z|^{2r-1}`
    pub scaled_variance: f64,
}

impl PoissonIntegralReport {
    /// Largest componentwise deviation of the mean, in standard errors.
    pub fn mean_z_score(&self) -> f64 {
        let d = self.mean - self.expected_mean;
        (d.re.abs() / self.mean_se.0).max(d.im.abs() / self.mean_se.1)
    }

    pub fn tests(&self) -> Vec<TestResult> {
        let mut out = vec![TestResult::new(
            &format!("w{}_mean_z_score", self.r),
            self.mean_z_score(),
            Comparison::AtMost,
            3.0,
            self.replicas as usize,
        )
        .with("mean_re", self.mean.re)
        .with("mean_im", self.mean.im)];
        if self.r == 1 {
            let limit = PI / self.z.im.abs();
            out.push(
                TestResult::new(
                    "w1_variance_rel_error",
                    (self.variance / limit - 1.0).abs(),
                    Comparison::AtMost,
                    0.1,
                    self.replicas as usize,
                )
                .with("variance", self.variance)
                .with("oracle_variance", self.oracle_variance),
            );
        }
        out
    }
}

/// `∫_{-M}^{M} |z - x|^{-2r} dx` by composite Gauss–Legendre, with panels
/// concentrated near `Re z`.
pub fn poisson_variance_oracle(z: Complex64, r: u32, window_halfwidth: f64) -> f64 {
    let y = z.im.abs();
    let g = |x: f64| ((z.re - x).powi(2) + y * y).powi(-(r as i32));
    let mut total = 0.0;
    // breakpoints at Re z ± y·2^j
    let mut cuts = vec![-window_halfwidth, window_halfwidth];
    for j in -4..40 {
        let d = y * 2f64.powi(j);
        for c in [z.re - d, z.re + d] {
            if c > -window_halfwidth && c < window_halfwidth {
                cuts.push(c);
            }
        }
    }
    if z.re > -window_halfwidth && z.re < window_halfwidth {
        cuts.push(z.re);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    for w in cuts.windows(2) {
        total += composite_rule(w[0], w[1], 4, 16).iter().map(|(x, wt)| wt * g(*x)).sum::<f64>();
    }
    total
}

/// `W_r(z)` for one configuration.
pub fn poisson_sum(s: &PoissonSample, z: Complex64, r: u32) -> Complex64 {
    s.points()
        .map(|x| powi_complex((z - x).inv(), r as i32))
        .collect::<CompensatedComplexSum>()
        .value()
}

pub fn poisson_integral_stats(
    z: Complex64,
    r: u32,
    replicas: u32,
    window_halfwidth: f64,
    base_seed: u64,
) -> Result<PoissonIntegralReport> {
    if z.im == 0.0 {
        return Err(LabError::invalid("z must be off the real axis"));
    }
    if r == 0 || replicas < 2 {
        return Err(LabError::invalid("need r ≥ 1 and at least two replicas"));
    }
    let values: Vec<Complex64> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let s = sample_poisson(window_halfwidth, 1.0, base_seed.wrapping_add(u64::from(i)))?;
            Ok(poisson_sum(&s, z, r))
        })
        .collect::<Result<_>>()?;
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    let n = f64::from(replicas);
    let (var_re, var_im) = (stats::variance(&re), stats::variance(&im));
    let expected_mean = if r == 1 {
        Complex64::new(0.0, -PI * z.im.signum())
    } else {
        Complex64::new(0.0, 0.0)
    };
    let variance = var_re + var_im;
    Ok(PoissonIntegralReport {
        z,
        r,
        replicas,
        window_halfwidth,
        mean: Complex64::new(stats::mean(&re), stats::mean(&im)),
        mean_se: ((var_re / n).sqrt(), (var_im / n).sqrt()),
        variance,
        expected_mean,
        oracle_variance: poisson_variance_oracle(z, r, window_halfwidth),
        scaled_variance: variance * z.im.abs().powi(2 * r as i32 - 1),
    })
}

/// Offsets and curvature of the saddle over an ensemble.
pub fn test_saddle_localization(summaries: &[ReplicaSummary], offset_bound: f64) -> Vec<TestResult> {
    let n = summaries.len();
    let ok: Vec<&ReplicaSummary> = summaries.iter().filter(|s| s.saddle_ok()).collect();
    let converged = ok.len() as f64 / n as f64;
    let offsets: Vec<f64> = ok.iter().filter_map(|s| s.normalized_offset).collect();
    let curvature_ok = ok
        .iter()
        .filter_map(|s| s.second_scaled)
        .filter(|c| (0.5..=1.5).contains(&c.re) && c.im.abs() <= 0.5)
        .count() as f64
        / n as f64;
    vec![
        TestResult::new("saddle_converged_fraction", converged, Comparison::AtLeast, 0.95, n),
        TestResult::new(
            "saddle_offset_p95",
            stats::quantile(&offsets, 0.95),
            Comparison::AtMost,
            offset_bound,
            n,
        )
        .with("offset_median", stats::quantile(&offsets, 0.5)),
        TestResult::new("saddle_curvature_fraction", curvature_ok, Comparison::AtLeast, 0.9, n),
    ]
}

/// Ensemble results plus every test that applies to them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub artifact_version: String,
    pub config: EnsembleConfig,
    pub n_failures: usize,
    pub tests: Vec<TestResult>,
    pub medians: BTreeMap<String, f64>,
}

fn median_of<F: Fn(&ReplicaSummary) -> Option<f64>>(summaries: &[ReplicaSummary], f: F) -> Option<f64> {
    let v: Vec<f64> = summaries.iter().filter_map(f).collect();
    if v.is_empty() {
        None
    } else {
        Some(crate::zeros::median(&v))
    }
}

/// Aggregate an ensemble; a deterministic fold over seed-ordered summaries.
pub fn summarize(cfg: &EnsembleConfig, summaries: &[ReplicaSummary], offset_bound: f64) -> Result<EnsembleReport> {
    let mut sorted: Vec<&ReplicaSummary> = summaries.iter().collect();
    sorted.sort_by_key(|s| s.seed);
    let sorted: Vec<ReplicaSummary> = sorted.into_iter().cloned().collect();
    let mut tests = test_saddle_localization(&sorted, offset_bound);
    if let Some(range) = cfg.sign_range {
        tests.push(test_sign_periodicity(&sorted, range)?);
    }
    let fracs: Vec<f64> = sorted
        .iter()
        .filter_map(|s| s.spacing.as_ref().and_then(|d| d.nearest_fraction))
        .collect();
    if fracs.len() >= MIN_DISTRIBUTION_SAMPLES {
        tests.push(test_translate_uniformity(&fracs)?);
    }
    let mut medians = BTreeMap::new();
    let mut put = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            medians.insert(name.to_string(), v);
        }
    };
    put("normalized_offset", median_of(&sorted, |s| s.normalized_offset));
    put("law_error", median_of(&sorted, |s| s.law_error));
    put(
        "max_abs_dev_from_1",
        median_of(&sorted, |s| s.spacing.as_ref().map(|d| d.max_abs_dev_from_1)),
    );
    put(
        "match_fraction",
        median_of(&sorted, |s| s.spacing.as_ref().map(|d| d.match_fraction)),
    );
    put("cosine_sup_error_f", median_of(&sorted, |s| s.cosine.map(|c| c.0)));
    put("cosine_sup_error_fprime", median_of(&sorted, |s| s.cosine.map(|c| c.1)));
    for r in &cfg.contour_r {
        let pick = |s: &ReplicaSummary| s.contour.iter().find(|c| c.r == *r).cloned();
        put(
            &format!("contour_r{r}_dominant_ratio_abs_dev"),
            median_of(&sorted, |s| pick(s).map(|c| (c.dominant_ratio - 1.0).norm())),
        );
        put(
            &format!("contour_r{r}_g2_fraction"),
            median_of(&sorted, |s| pick(s).and_then(|c| c.negligible.get(Arc::Gamma2.label()).copied())),
        );
        put(
            &format!("contour_r{r}_total_rel_error"),
            median_of(&sorted, |s| pick(s).map(|c| c.total_rel_error)),
        );
    }
    Ok(EnsembleReport {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        n_failures: sorted.iter().filter(|s| s.failure.is_some()).count(),
        tests,
        medians,
    })
}
