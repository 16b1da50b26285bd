//! The phase function `φ_k(z) = log f(z) - k log z` and its saddle
//! `σ_k`, the root of `φ_k'` close to `ik/π`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::logcomplex::LogComplex;
use crate::numeric::{powi_complex, CompensatedComplexSum};
use crate::precision::PrecisionConfig;
use crate::sampler::PoissonSample;
use crate::series::{log_f_hp, wrap_angle_hp};

/// `exp(φ_k(z)) = z^{-k} f(z)` in log form.
pub fn eval_phase(s: &PoissonSample, k: u32, z: Complex64, p: PrecisionConfig) -> Result<LogComplex> {
    if z.re == 0.0 && z.im == 0.0 {
        return Err(LabError::Pole { z });
    }
    let prec = p.bits();
    let lf = log_f_hp(s, z, prec);
    if lf.is_zero {
        return Err(LabError::Pole { z });
    }
    if k == 0 {
        return Ok(LogComplex::new(lf.log_mag.to_f64(), lf.arg.to_f64()));
    }
    let z_re = Float::with_val(prec, z.re);
    let z_im = Float::with_val(prec, z.im);
    let ln_abs = Float::with_val(prec, z_re.hypot_ref(&z_im)).ln();
    let arg_z = Float::with_val(prec, z_im.atan2_ref(&z_re));
    let log_mag = lf.log_mag - ln_abs * k;
    let arg = wrap_angle_hp(&(lf.arg - arg_z * k));
    Ok(LogComplex::new(log_mag.to_f64(), arg.to_f64()))
}

/// `φ_k^{(r)}(z) = (-1)^{r-1}(r-1)!·[-k/z^r + Σ (z-x)^{-r}]`, `r ≥ 1`.
pub fn eval_phase_derivative(s: &PoissonSample, k: u32, z: Complex64, r: u32) -> Result<Complex64> {
    if r == 0 {
        return Err(LabError::invalid("derivative order must be at least 1"));
    }
    if z.re == 0.0 && z.im == 0.0 {
        return Err(LabError::Pole { z });
    }
    let r_i = r as i32;
    let mut acc = CompensatedComplexSum::new();
    acc.add(-f64::from(k) * powi_complex(z, -r_i));
    for x in s.points() {
        let d = z - x;
        if d.re == 0.0 && d.im == 0.0 {
            return Err(LabError::Pole { z });
        }
        acc.add(powi_complex(d.inv(), r_i));
    }
    let factorial: f64 = (1..r).map(f64::from).product();
    let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
    Ok(acc.value() * sign * factorial)
}

/// `h_k(y)`: the Cauchy transform of the rescaled measure `N^(k)`,
/// which equals `h(k·y)`.
pub fn eval_h_rescaled(s: &PoissonSample, k: u32, y: Complex64) -> Result<Complex64> {
    crate::series::eval_h(s, y * f64::from(k))
}

/// One accepted damped-Newton iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub iteration: u32,
    pub z: Complex64,
    pub residual: f64,
    /// Fraction of the full Newton step taken.
    pub damping: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddlePoint {
    pub k: u32,
    pub seed: u64,
    pub sigma: Complex64,
    pub residual: f64,
    pub iterations: u32,
    pub second_derivative: Complex64,
    /// `|σ - ik/π| / √k`
    pub normalized_offset: f64,
    pub trace: Vec<NewtonStep>,
}

impl SaddlePoint {
    /// `β = arg σ - π/2`.
    pub fn beta(&self) -> f64 {
        self.sigma.arg() - PI / 2.0
    }

    /// Trace record as a JSON line.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "k": self.k,
            "seed": self.seed,
            "sigma": [self.sigma.re, self.sigma.im],
            "residual": self.residual,
            "iterations": self.iterations,
            "normalized_offset": self.normalized_offset,
        })
        .to_string()
    }
}

/// Default residual tolerance `10⁻¹⁰·π/k`.
pub fn default_tol(k: u32) -> f64 {
    1e-10 * PI / f64::from(k.max(1))
}

pub const MAX_HALVINGS: u32 = 40;

/// Damped Newton on `φ_k'` starting from `ik/π`.
pub fn find_saddle(s: &PoissonSample, k: u32, tol: f64, max_iter: u32) -> Result<SaddlePoint> {
    if k == 0 {
        return Err(LabError::invalid("k = 0 has no saddle"));
    }
    if !(tol > 0.0) {
        return Err(LabError::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let kf = f64::from(k);
    let start = Complex64::new(0.0, kf / PI);
    let fail = |reason: String, trace: Vec<NewtonStep>| LabError::SaddleFailure {
        k,
        seed: s.seed(),
        reason,
        trace,
    };

    let mut z = start;
    let mut g = eval_phase_derivative(s, k, z, 1)?;
    let mut residual = g.norm();
    let mut trace = vec![NewtonStep {
        iteration: 0,
        z,
        residual,
        damping: 0.0,
    }];
    let mut iteration = 0;
    while residual > tol {
        if iteration >= max_iter {
            return Err(fail(format!("no convergence in {max_iter} iterations"), trace));
        }
        iteration += 1;
        let h = eval_phase_derivative(s, k, z, 2)?;
        let step = g / h;
        let mut damping = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = z - step * damping;
            if cand.im > 0.0 {
                if let Ok(gc) = eval_phase_derivative(s, k, cand, 1) {
                    if gc.norm() < residual {
                        accepted = Some((cand, gc));
                        break;
                    }
                }
            }
            damping *= 0.5;
        }
        let Some((cand, gc)) = accepted else {
            return Err(fail(
                format!("no decrease after {MAX_HALVINGS} step halvings"),
                trace,
            ));
        };
        z = cand;
        g = gc;
        residual = g.norm();
        trace.push(NewtonStep {
            iteration,
            z,
            residual,
            damping,
        });
    }
    if !(z.im > 0.0) {
        return Err(fail("saddle left the upper half plane".into(), trace));
    }
    if (z - start).norm() > kf / 2.0 {
        return Err(fail(format!("saddle {z} is farther than k/2 from ik/π"), trace));
    }
    Ok(SaddlePoint {
        k,
        seed: s.seed(),
        sigma: z,
        residual,
        iterations: iteration,
        second_derivative: eval_phase_derivative(s, k, z, 2)?,
        normalized_offset: (z - start).norm() / kf.sqrt(),
        trace,
    })
}

/// The three scaled checks at a located saddle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleDiagnostics {
    /// `|φ_k'(σ)|`
    pub residual: f64,
    /// `σ²φ_k''(σ)/k`
    pub second_scaled: Complex64,
    /// `max |k³φ_k'''(z)|/k` over 16 points of `|z - σ| = k/2`.
    pub third_scaled_max: f64,
}

pub fn saddle_diagnostics(s: &PoissonSample, sp: &SaddlePoint) -> Result<SaddleDiagnostics> {
    let kf = f64::from(sp.k);
    let radius = kf / 2.0;
    let mut third: f64 = 0.0;
    for j in 0..16 {
        let z = sp.sigma + Complex64::from_polar(radius, f64::from(j) * PI / 8.0);
        let d3 = eval_phase_derivative(s, sp.k, z, 3)?;
        third = third.max(kf.powi(3) * d3.norm() / kf);
    }
    Ok(SaddleDiagnostics {
        residual: eval_phase_derivative(s, sp.k, sp.sigma, 1)?.norm(),
        second_scaled: sp.sigma * sp.sigma * sp.second_derivative / kf,
        third_scaled_max: third,
    })
}
