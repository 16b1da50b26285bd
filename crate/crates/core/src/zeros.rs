//! Real zeros of `f^(k)` near the origin, and their comparison with the
//! zeros of `ψ_k(x) = cos(πx - θ_k)`, which sit on the shifted lattice
//! `θ_k/π + 1/2 + ℤ`.

use std::f64::consts::PI;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::wrap_angle;
use crate::series::{CoefficientTable, DerivativeCoefficients};

pub const DEFAULT_WINDOW: f64 = 5.0;
pub const DEFAULT_GRID_STEP: f64 = 0.01;
pub const DEFAULT_REFINE_TOL: f64 = 1e-9;
pub const TAIL_FRACTION: f64 = 1e-3;

/// `ceil(8·W·π/ln 2)`
pub fn default_r_max(window: f64) -> usize {
    (8.0 * window * PI / std::f64::consts::LN_2).ceil() as usize
}

/// Horner evaluator of `Σ a[r] x^r`, optionally divided by `A_k`.
#[derive(Clone, Debug)]
pub struct FkEvaluator {
    coeffs: Vec<Float>,
    prec: u32,
    /// `A_k` has been divided out.
    pub scaled: bool,
    exact: bool,
}

impl FkEvaluator {
    pub fn new(d: &DerivativeCoefficients) -> Self {
        Self::with_scale(d, d.amplitude.map(|a| a.ln_a()))
    }

    /// Divide by `exp(ln_scale)` instead of the table's own amplitude.
    pub fn with_scale(d: &DerivativeCoefficients, ln_scale: Option<f64>) -> Self {
        let prec = d.precision.bits();
        let coeffs = match ln_scale {
            Some(ln_a) => {
                let inv = Float::with_val(prec, -ln_a).exp();
                d.a.iter().map(|a| Float::with_val(prec, a * &inv)).collect()
            }
            None => d.a.clone(),
        };
        FkEvaluator {
            coeffs,
            prec,
            scaled: ln_scale.is_some(),
            exact: d.exact,
        }
    }

    /// Value at `x` without the tail check.
    pub fn value(&self, x: f64) -> f64 {
        let xf = Float::with_val(self.prec, x);
        let mut acc = Float::new(self.prec);
        for c in self.coeffs.iter().rev() {
            acc *= &xf;
            acc += c;
        }
        acc.to_f64()
    }

    /// Estimate of `Σ_{r > r_max} |a_r x^r|` from the last two stored
    /// terms, assuming the ratio of successive terms keeps shrinking like
    /// `π|x|/r`; `None` when that ratio is not below one.
    pub fn tail_estimate(&self, x: f64) -> Option<f64> {
        if self.exact {
            return Some(0.0);
        }
        let n = self.coeffs.len() - 1;
        if n == 0 {
            return None;
        }
        let ax = x.abs();
        let term = |r: usize| {
            crate::logcomplex::LogComplex::from_float(&self.coeffs[r])
                .scale_log(r as f64 * ax.ln())
                .log_mag
                .exp()
        };
        if ax == 0.0 {
            return Some(0.0);
        }
        let q = PI * ax / (n + 1) as f64;
        if q >= 1.0 {
            return None;
        }
        Some((term(n) + term(n - 1)) * q / (1.0 - q))
    }

    /// Largest `|x|` on a symmetric window that passes the tail check.
    fn reference_size(&self) -> f64 {
        if self.scaled {
            1.0
        } else {
            self.coeffs
                .iter()
                .map(|c| c.to_f64().abs())
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE)
        }
    }

    pub fn check_window(&self, w: f64) -> Result<()> {
        let tail = self.tail_estimate(w);
        match tail {
            Some(t) if t < TAIL_FRACTION * self.reference_size() => Ok(()),
            Some(t) => Err(LabError::WindowTooLarge { x: w, tail: t }),
            None => Err(LabError::WindowTooLarge {
                x: w,
                tail: f64::INFINITY,
            }),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_window(x)?;
        Ok(self.value(x))
    }
}

/// `f^(k)(x)/A_k`, or the raw value when no amplitude is attached.
pub fn eval_fk(d: &DerivativeCoefficients, x: f64) -> Result<f64> {
    FkEvaluator::new(d).eval(x)
}

/// `f^(k)(x)` of the truncated polynomial `Σ_{j ≤ n_max} e_j z^j`, by
/// differentiating the coefficient list one order at a time.
pub fn synthetic_derivative(c: &CoefficientTable, k: u32, x: f64) -> Float {
    let prec = c.precision.bits();
    let mut coeffs = c.e.clone();
    for _ in 0..k {
        if coeffs.len() <= 1 {
            return Float::new(prec);
        }
        coeffs = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, v)| Float::with_val(prec, v * j as u32))
            .collect();
    }
    let xf = Float::with_val(prec, x);
    let mut acc = Float::new(prec);
    for v in coeffs.iter().rev() {
        acc *= &xf;
        acc += v;
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub zeros: Vec<f64>,
    pub k: u32,
    pub window_halfwidth: f64,
    pub refine_tol: f64,
    pub grid_step: f64,
    /// Final bisection bracket of each zero.
    pub brackets: Vec<(f64, f64)>,
}

impl ZeroSet {
    /// A zero set read off directly, with point brackets.
    pub fn from_zeros(mut zeros: Vec<f64>, k: u32, window_halfwidth: f64) -> Self {
        zeros.sort_by(f64::total_cmp);
        let brackets = zeros.iter().map(|&z| (z, z)).collect();
        ZeroSet {
            zeros,
            k,
            window_halfwidth,
            refine_tol: 0.0,
            grid_step: 0.0,
            brackets,
        }
    }

    /// The zero closest to the origin.
    pub fn nearest_to_origin(&self) -> Option<f64> {
        self.zeros
            .iter()
            .copied()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
    }
}

fn bisect(ev: &FkEvaluator, mut lo: f64, mut hi: f64, mut f_lo: f64, tol: f64) -> (f64, f64) {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = ev.value(mid);
        if f_mid == 0.0 {
            return (mid, mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Sign changes of `f^(k)` on a grid over `[-W, W]`, each refined by
/// bisection to width `refine_tol`.
pub fn find_real_zeros(d: &DerivativeCoefficients, w: f64, grid_step: f64, refine_tol: f64) -> Result<ZeroSet> {
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(LabError::invalid(format!("grid step must lie in (0, 0.1], got {grid_step}")));
    }
    if !(refine_tol > 0.0) || !(w > 0.0) {
        return Err(LabError::invalid("window and refine tolerance must be positive"));
    }
    let ev = FkEvaluator::new(d);
    ev.check_window(w)?;
    let n = (2.0 * w / grid_step).ceil() as usize;
    let step = 2.0 * w / n as f64;
    let mut grid: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut x = -w + step * i as f64;
        let mut v = ev.value(x);
        if v == 0.0 {
            // move off an exact node zero
            x += if i == n { -step / 7.0 } else { step / 7.0 };
            v = ev.value(x);
        }
        grid.push((x, v));
    }
    let mut zeros = Vec::new();
    let mut brackets = Vec::new();
    for pair in grid.windows(2) {
        let ((x0, v0), (x1, v1)) = (pair[0], pair[1]);
        if (v0 < 0.0) != (v1 < 0.0) {
            let (lo, hi) = bisect(&ev, x0, x1, v0, refine_tol);
            zeros.push(0.5 * (lo + hi));
            brackets.push((lo, hi));
        }
    }
    Ok(ZeroSet {
        zeros,
        k: d.k,
        window_halfwidth: w,
        refine_tol,
        grid_step: step,
        brackets,
    })
}

/// Predicted zeros `θ/π + 1/2 + m` inside `[lo, hi]`.
pub fn lattice_points(theta: f64, lo: f64, hi: f64) -> Vec<f64> {
    let offset = wrap_angle(theta) / PI + 0.5;
    let m_lo = (lo - offset).ceil() as i64;
    let m_hi = (hi - offset).floor() as i64;
    (m_lo..=m_hi).map(|m| offset + m as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub theta: f64,
    pub radius: f64,
    /// `(found, lattice)` pairs.
    pub pairs: Vec<(f64, f64)>,
    pub unmatched_found: Vec<f64>,
    pub unmatched_lattice: Vec<f64>,
    pub max_distance: f64,
    pub interior_found: usize,
    pub interior_lattice: usize,
}

impl MatchReport {
    /// Fraction of interior found zeros that were paired.
    pub fn matched_fraction(&self) -> f64 {
        if self.interior_found == 0 {
            return 1.0;
        }
        1.0 - self.unmatched_found.len() as f64 / self.interior_found as f64
    }

    pub fn is_perfect(&self) -> bool {
        self.unmatched_found.is_empty() && self.unmatched_lattice.is_empty()
    }
}

fn nearest(xs: &[f64], y: f64) -> Option<usize> {
    (0..xs.len()).min_by(|&a, &b| (xs[a] - y).abs().total_cmp(&(xs[b] - y).abs()))
}

/// Mutual-nearest pairing within `ε/c` between the zeros and the
/// lattice. Pairs are formed over the whole window, so the pairing is the
/// same whichever side is searched from; a pair is reported when either
/// member lies in the window shrunk by `ε/c` at each end.
pub fn match_zero_sets(found: &ZeroSet, theta: f64, eps: f64, c: f64) -> Result<MatchReport> {
    if !(eps > 0.0 && c > 0.0 && eps < c * c) {
        return Err(LabError::invalid(format!("need 0 < ε < c², got ε = {eps}, c = {c}")));
    }
    let radius = eps / c;
    let w = found.window_halfwidth;
    let (lo, hi) = (-w + radius, w - radius);
    let lattice = lattice_points(theta, -w, w);
    let zeros = &found.zeros;
    let inside = |x: f64| x >= lo && x <= hi;

    let mut found_paired = vec![false; zeros.len()];
    let mut lattice_paired = vec![false; lattice.len()];
    let mut pairs = Vec::new();
    for (i, &x) in zeros.iter().enumerate() {
        let Some(j) = nearest(&lattice, x) else { continue };
        let y = lattice[j];
        if (y - x).abs() <= radius && nearest(zeros, y) == Some(i) {
            found_paired[i] = true;
            lattice_paired[j] = true;
            if inside(x) || inside(y) {
                pairs.push((x, y));
            }
        }
    }
    let unmatched = |xs: &[f64], paired: &[bool]| -> Vec<f64> {
        xs.iter()
            .zip(paired)
            .filter(|(x, p)| inside(**x) && !**p)
            .map(|(x, _)| *x)
            .collect()
    };
    let max_distance = pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(MatchReport {
        theta,
        radius,
        interior_found: zeros.iter().filter(|x| inside(**x)).count(),
        interior_lattice: lattice.iter().filter(|x| inside(**x)).count(),
        unmatched_found: unmatched(zeros, &found_paired),
        unmatched_lattice: unmatched(&lattice, &lattice_paired),
        pairs,
        max_distance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineComparison {
    pub sup_error_f: f64,
    pub sup_error_fprime: f64,
    pub grid_step: f64,
}

/// Sup-norm distance of `f^(k)/A_k` from `ψ_k` and of `f^(k+1)/A_k` from
/// `η_k(x) = -π sin(πx - θ_k)`, with `A_k`, `θ_k` from `d`.
pub fn cosine_compare(
    d: &DerivativeCoefficients,
    d_next: &DerivativeCoefficients,
    w: f64,
    grid_step: f64,
) -> Result<CosineComparison> {
    let amp = d
        .amplitude
        .ok_or_else(|| LabError::invalid("cosine comparison needs the order-k amplitude"))?;
    if d_next.k != d.k + 1 && !(d.k == 0 && d_next.k == 0) {
        return Err(LabError::invalid(format!(
            "expected orders k and k+1, got {} and {}",
            d.k, d_next.k
        )));
    }
    if !(grid_step > 0.0) {
        return Err(LabError::invalid("grid step must be positive"));
    }
    let f = FkEvaluator::with_scale(d, Some(amp.ln_a()));
    let g = FkEvaluator::with_scale(d_next, Some(amp.ln_a()));
    f.check_window(w)?;
    g.check_window(w).or_else(|e| match e {
        // η_k has amplitude π, so its tail check is scaled accordingly
        LabError::WindowTooLarge { tail, .. } if tail < PI * TAIL_FRACTION => Ok(()),
        e => Err(e),
    })?;
    let n = (2.0 * w / grid_step).ceil() as usize;
    let step = 2.0 * w / n as f64;
    let mut sup_f: f64 = 0.0;
    let mut sup_g: f64 = 0.0;
    for i in 0..=n {
        let x = -w + step * i as f64;
        let arg = PI * x - amp.theta;
        sup_f = sup_f.max((f.value(x) - arg.cos()).abs());
        sup_g = sup_g.max((g.value(x) + PI * arg.sin()).abs());
    }
    Ok(CosineComparison {
        sup_error_f: sup_f,
        sup_error_fprime: sup_g,
        grid_step: step,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingReport {
    pub gaps: Vec<f64>,
    pub mean_gap: f64,
    pub median_gap: f64,
    pub max_abs_dev_from_1: f64,
    pub fractional_parts: Vec<f64>,
    /// Fewer than two zeros: no gaps and undefined statistics.
    pub empty: bool,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn spacing_stats(zs: &ZeroSet) -> SpacingReport {
    let fractional_parts = zs.zeros.iter().map(|z| z.rem_euclid(1.0) % 1.0).collect();
    if zs.zeros.len() < 2 {
        return SpacingReport {
            gaps: Vec::new(),
            mean_gap: f64::NAN,
            median_gap: f64::NAN,
            max_abs_dev_from_1: f64::NAN,
            fractional_parts,
            empty: true,
        };
    }
    let gaps: Vec<f64> = zs.zeros.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    SpacingReport {
        median_gap: median(&gaps),
        max_abs_dev_from_1: gaps.iter().map(|g| (g - 1.0).abs()).fold(0.0, f64::max),
        mean_gap,
        gaps,
        fractional_parts,
        empty: false,
    }
}

/// CSV rows `replica_seed,k,kind,value` for zeros and gaps.
pub fn zeros_csv_rows(seed: u64, zs: &ZeroSet, report: &SpacingReport) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for z in &zs.zeros {
        let _ = writeln!(out, "{seed},{},zero,{z:?}", zs.k);
    }
    for g in &report.gaps {
        let _ = writeln!(out, "{seed},{},gap,{g:?}", zs.k);
    }
    out
}
