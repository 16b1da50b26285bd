//! Cauchy's coefficient integral `e_{k+r} = (2πi)⁻¹ ∮ f(z) z^{-k-r-1} dz`
//! over the circle through the saddle, split into six arcs.
//!
//! Angles are polar angles of points on the circle `|z| = R`. `Γ₁` is
//! centred on `arg σ_k` with half-width `k^{-δ}`; `Γ₂` and `Γ₃` are the
//! rest of the upper half-circle on either side of it, and the primed
//! arcs are their mirror images below the real axis.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::logcomplex::LogComplex;
use crate::numeric::CompensatedComplexSum;
use crate::precision::PrecisionConfig;
use crate::quadrature::composite_rule;
use crate::saddle::{eval_phase, SaddlePoint};
use crate::sampler::PoissonSample;
use crate::series::log_f_fast;

pub const GL_ORDER: usize = 8;
pub const DEFAULT_DELTA: f64 = 0.4;
pub const DEFAULT_NODES_PER_ARC: usize = 512;
/// Node-doubling passes attempted before an arc is reported unconverged.
pub const MAX_DOUBLINGS: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arc {
    Gamma1,
    Gamma1Conj,
    Gamma2,
    Gamma3,
    Gamma2Conj,
    Gamma3Conj,
}

impl Arc {
    pub const ALL: [Arc; 6] = [
        Arc::Gamma1,
        Arc::Gamma1Conj,
        Arc::Gamma2,
        Arc::Gamma3,
        Arc::Gamma2Conj,
        Arc::Gamma3Conj,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Arc::Gamma1 => "G1",
            Arc::Gamma1Conj => "G1'",
            Arc::Gamma2 => "G2",
            Arc::Gamma3 => "G3",
            Arc::Gamma2Conj => "G2'",
            Arc::Gamma3Conj => "G3'",
        }
    }

    pub fn parse(s: &str) -> Result<Arc> {
        Arc::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| LabError::invalid(format!("unknown arc label '{s}'")))
    }
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub k: u32,
    pub sigma: Complex64,
    pub radius: f64,
    /// `arg σ - π/2`
    pub beta: f64,
    pub delta: f64,
    pub nodes_per_arc: usize,
    /// Polar-angle interval of each arc, counterclockwise.
    pub arcs: BTreeMap<Arc, (f64, f64)>,
}

impl ContourSpec {
    /// Arcs for an arbitrary point `sigma` in the open upper half plane.
    pub fn from_sigma(k: u32, sigma: Complex64, delta: f64, nodes_per_arc: usize) -> Result<Self> {
        if !(delta > 1.0 / 3.0 && delta < 0.5) {
            return Err(LabError::invalid(format!("delta must lie in (1/3, 1/2), got {delta}")));
        }
        if nodes_per_arc < 16 {
            return Err(LabError::invalid(format!(
                "need at least 16 nodes per arc, got {nodes_per_arc}"
            )));
        }
        if !(sigma.im > 0.0) || k == 0 {
            return Err(LabError::invalid("contour needs k ≥ 1 and Im σ > 0"));
        }
        let radius = sigma.norm();
        let centre = sigma.arg();
        let half = f64::from(k).powf(-delta);
        let lo = (centre - half).max(0.0);
        let hi = (centre + half).min(PI);
        let mut arcs = BTreeMap::new();
        arcs.insert(Arc::Gamma1, (lo, hi));
        arcs.insert(Arc::Gamma2, (hi, PI));
        arcs.insert(Arc::Gamma3, (0.0, lo));
        arcs.insert(Arc::Gamma1Conj, (-hi, -lo));
        arcs.insert(Arc::Gamma2Conj, (-PI, -hi));
        arcs.insert(Arc::Gamma3Conj, (-lo, 0.0));
        Ok(ContourSpec {
            k,
            sigma,
            radius,
            beta: centre - PI / 2.0,
            delta,
            nodes_per_arc,
            arcs,
        })
    }

    pub fn half_angle(&self) -> f64 {
        f64::from(self.k).powf(-self.delta)
    }

    pub fn angular_measure(&self, arc: Arc) -> f64 {
        let (a, b) = self.arcs[&arc];
        b - a
    }

    /// `|β| > k^{-δ}/2`: the saddle sits unusually far off the imaginary axis.
    pub fn is_exceptional(&self) -> bool {
        self.beta.abs() > self.half_angle() / 2.0
    }
}

pub fn build_contour(sp: &SaddlePoint, delta: f64, nodes_per_arc: usize) -> Result<ContourSpec> {
    ContourSpec::from_sigma(sp.k, sp.sigma, delta, nodes_per_arc)
}

/// `∫_arc f(z) z^{-k-r-1} dz` together with its quadrature audit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcIntegral {
    pub arc: Arc,
    pub value: LogComplex,
    pub nodes: usize,
    /// Relative change at the last node doubling.
    pub change: f64,
    pub converged: bool,
}

/// Integrand values are formed relative to `exp(Re φ_k(σ))` so they stay
/// in double range.
struct Integrand<'a> {
    points: &'a [f64],
    k: f64,
    r: i32,
    radius: f64,
    log_ref: f64,
}

impl Integrand<'_> {
    /// `i·z^{-k-r} f(z) / exp(log_ref)` at `z = R e^{iα}`, so that
    /// `dz/z = i dα` is absorbed.
    fn at(&self, alpha: f64) -> Result<Complex64> {
        let z = Complex64::from_polar(self.radius, alpha);
        let lf = log_f_fast(self.points, z).ok_or(LabError::Pole { z })?;
        let ln_z = Complex64::new(self.radius.ln(), alpha);
        let w = lf - ln_z * (self.k + f64::from(self.r)) - self.log_ref;
        Ok(Complex64::new(0.0, 1.0) * w.exp())
    }

    fn quadrature(&self, a: f64, b: f64, panels: usize) -> Result<(Complex64, f64)> {
        let mut acc = CompensatedComplexSum::new();
        let mut l1 = 0.0;
        for (x, w) in composite_rule(a, b, panels, GL_ORDER) {
            let v = self.at(x)? * w;
            l1 += v.norm();
            acc.add(v);
        }
        Ok((acc.value(), l1))
    }
}

const DOUBLING_TOL: f64 = 1e-10;

fn integrate_normalized(ig: &Integrand<'_>, arc: Arc, a: f64, b: f64, nodes: usize) -> Result<(Complex64, ArcIntegral)> {
    if b <= a {
        let zero = ArcIntegral {
            arc,
            value: LogComplex::ZERO,
            nodes: 0,
            change: 0.0,
            converged: true,
        };
        return Ok((Complex64::new(0.0, 0.0), zero));
    }
    let mut panels = nodes.div_ceil(GL_ORDER).max(1);
    let (mut value, _) = ig.quadrature(a, b, panels)?;
    let mut change = f64::INFINITY;
    let mut converged = false;
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let (next, l1) = ig.quadrature(a, b, panels)?;
        let scale = next.norm().max(1e-6 * l1);
        change = if scale == 0.0 { 0.0 } else { (next - value).norm() / scale };
        value = next;
        if change <= DOUBLING_TOL {
            converged = true;
            break;
        }
    }
    let record = ArcIntegral {
        arc,
        value: LogComplex::from_complex(value),
        nodes: panels * GL_ORDER,
        change,
        converged,
    };
    Ok((value, record))
}

fn reference_log(s: &PoissonSample, spec: &ContourSpec, r: u32, p: PrecisionConfig) -> Result<(f64, LogComplex)> {
    let phase = eval_phase(s, spec.k, spec.sigma, p)?;
    // k^{-1/2} f(σ) σ^{-k-r}
    let scale = phase * LogComplex::from_complex(spec.sigma).powi(-i64::from(r));
    Ok((phase.log_mag, scale.scale_log(-0.5 * f64::from(spec.k).ln())))
}

/// `∫_arc f(z) z^{-k-r-1} dz` in log form.
pub fn integrate_arc(
    s: &PoissonSample,
    k: u32,
    r: u32,
    spec: &ContourSpec,
    arc: Arc,
    p: PrecisionConfig,
) -> Result<ArcIntegral> {
    if k != spec.k {
        return Err(LabError::invalid(format!("contour built for k = {}, asked for k = {k}", spec.k)));
    }
    let (log_ref, _) = reference_log(s, spec, r, p)?;
    let points = s.to_vec();
    let ig = Integrand {
        points: &points,
        k: f64::from(k),
        r: r as i32,
        radius: spec.radius,
        log_ref,
    };
    let (a, b) = spec.arcs[&arc];
    let (_, mut rec) = integrate_normalized(&ig, arc, a, b, spec.nodes_per_arc)?;
    rec.value = rec.value.scale_log(log_ref);
    Ok(rec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourResult {
    pub k: u32,
    pub r: u32,
    pub per_arc: BTreeMap<Arc, ArcIntegral>,
    /// `Σ per_arc / (2πi)`, the estimate of `e_{k+r}`.
    pub total: LogComplex,
    /// Γ₁ integral ÷ `i√(2π)·k^{-1/2} f(σ) σ^{-k-r}`.
    pub dominant_ratio: Complex64,
    /// `|arc integral| ÷ k^{-1/2}|f(σ) σ^{-k-r}|`
    pub negligible_fractions: BTreeMap<Arc, f64>,
    pub exceptional: bool,
}

impl ContourResult {
    /// Arc integral divided by `2πi`.
    pub fn contribution(&self, arc: Arc) -> LogComplex {
        self.per_arc[&arc].value / LogComplex::new((2.0 * PI).ln(), PI / 2.0)
    }

    pub fn total_complex(&self) -> Complex64 {
        self.total.to_complex()
    }

    pub fn converged(&self) -> bool {
        self.per_arc.values().all(|a| a.converged)
    }

    /// CSV rows `k,r,arc,log10_abs,arg,nodes` of the raw arc integrals.
    pub fn to_csv_rows(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str("k,r,arc,log10_abs,arg,nodes\n");
        }
        for rec in self.per_arc.values() {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{:?},{}",
                self.k,
                self.r,
                rec.arc,
                rec.value.abs_log10(),
                rec.value.arg,
                rec.nodes
            );
        }
        out
    }
}

pub fn coefficient_via_contour(
    s: &PoissonSample,
    k: u32,
    r: u32,
    spec: &ContourSpec,
    p: PrecisionConfig,
) -> Result<ContourResult> {
    if k != spec.k {
        return Err(LabError::invalid(format!("contour built for k = {}, asked for k = {k}", spec.k)));
    }
    if (k + r) as usize > s.len() {
        return Err(LabError::invalid(format!(
            "k + r = {} exceeds the number of points ({})",
            k + r,
            s.len()
        )));
    }
    let (log_ref, asym) = reference_log(s, spec, r, p)?;
    let points = s.to_vec();
    let ig = Integrand {
        points: &points,
        k: f64::from(k),
        r: r as i32,
        radius: spec.radius,
        log_ref,
    };
    let mut per_arc = BTreeMap::new();
    let mut sum = CompensatedComplexSum::new();
    let mut normalized = BTreeMap::new();
    for arc in Arc::ALL {
        let (a, b) = spec.arcs[&arc];
        let (v, mut rec) = integrate_normalized(&ig, arc, a, b, spec.nodes_per_arc)?;
        rec.value = rec.value.scale_log(log_ref);
        sum.add(v);
        normalized.insert(arc, v);
        per_arc.insert(arc, rec);
    }
    let two_pi_i = LogComplex::new((2.0 * PI).ln(), PI / 2.0);
    let total = LogComplex::from_complex(sum.value()).scale_log(log_ref) / two_pi_i;
    let root_two_pi_i = LogComplex::new(0.5 * (2.0 * PI).ln(), PI / 2.0);
    let dominant_ratio = (per_arc[&Arc::Gamma1].value / (asym * root_two_pi_i)).to_complex();
    let negligible_fractions = per_arc
        .iter()
        .map(|(arc, rec)| (*arc, (rec.value.log_mag - asym.log_mag).exp()))
        .collect();
    Ok(ContourResult {
        k,
        r,
        per_arc,
        total,
        dominant_ratio,
        negligible_fractions,
        exceptional: spec.is_exceptional(),
    })
}
