//! Seeded unit-intensity Poisson configurations on symmetric windows.
//!
//! A sample is drawn by first drawing the count `~ Poisson(2M·intensity)`
//! and then that many uniforms on `[-M, M]`, sorted. Each seed feeds its
//! own ChaCha8 stream, so replica `r` of an ensemble is simply
//! `seed = base_seed + r` and regenerating a sample is bit-identical.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Sorted point configuration `N_M` on the window `[-M, M] + shift`.
///
/// Translations are recorded in `shift` rather than folded into the stored
/// abscissas: `points()` yields `x + shift`, while gaps and round trips
/// through [`shift_sample`] stay exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleRecord", into = "SampleRecord")]
pub struct PoissonSample {
    seed: u64,
    window_halfwidth: f64,
    intensity: f64,
    shift: f64,
    base: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct SampleRecord {
    seed: u64,
    window_halfwidth: f64,
    intensity: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    shift: f64,
    points: Vec<f64>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl TryFrom<SampleRecord> for PoissonSample {
    type Error = LabError;

    fn try_from(rec: SampleRecord) -> Result<Self> {
        let mut sample = PoissonSample::from_points(rec.points, rec.window_halfwidth)?;
        if !(rec.intensity.is_finite() && rec.intensity > 0.0) {
            return Err(LabError::invalid("intensity must be positive and finite"));
        }
        if !rec.shift.is_finite() {
            return Err(LabError::invalid("shift must be finite"));
        }
        sample.seed = rec.seed;
        sample.intensity = rec.intensity;
        sample.shift = rec.shift;
        Ok(sample)
    }
}

impl From<PoissonSample> for SampleRecord {
    fn from(s: PoissonSample) -> Self {
        SampleRecord {
            seed: s.seed,
            window_halfwidth: s.window_halfwidth,
            intensity: s.intensity,
            shift: s.shift,
            points: s.base,
        }
    }
}

impl PoissonSample {
    /// Explicit configuration (debug mode). Points are sorted; duplicates,
    /// non-finite values and points outside `[-M, M]` are rejected.
    pub fn from_points(mut points: Vec<f64>, window_halfwidth: f64) -> Result<Self> {
        if !(window_halfwidth.is_finite() && window_halfwidth >= 0.0) {
            return Err(LabError::invalid(format!(
                "window half-width must be finite and non-negative, got {window_halfwidth}"
            )));
        }
        if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
            return Err(LabError::InvalidSample(format!("non-finite point {bad}")));
        }
        points.sort_by(f64::total_cmp);
        if let Some(w) = points.windows(2).find(|w| w[0] == w[1]) {
            return Err(LabError::InvalidSample(format!("duplicate point {}", w[0])));
        }
        if let Some(out) = points.iter().find(|x| x.abs() > window_halfwidth) {
            return Err(LabError::InvalidSample(format!(
                "point {out} lies outside [-{window_halfwidth}, {window_halfwidth}]"
            )));
        }
        Ok(PoissonSample {
            seed: 0,
            window_halfwidth,
            intensity: 1.0,
            shift: 0.0,
            base: points,
        })
    }

    /// Explicit points with the smallest window that contains them.
    pub fn from_points_tight(points: Vec<f64>) -> Result<Self> {
        let m = points.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Self::from_points(points, m)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn window_halfwidth(&self) -> f64 {
        self.window_halfwidth
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Window `[lo, hi]`; asymmetric only after a shift.
    pub fn window(&self) -> (f64, f64) {
        (
            -self.window_halfwidth + self.shift,
            self.window_halfwidth + self.shift,
        )
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// Point locations, shift applied, in increasing order.
    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + Clone + '_ {
        let shift = self.shift;
        self.base.iter().map(move |&x| x + shift)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }

    /// Points as arbitrary-precision reals; the shift is added without
    /// rounding whenever `prec` can hold both summands.
    pub fn points_hp(&self, prec: u32) -> Vec<Float> {
        self.base
            .iter()
            .map(|&x| {
                let mut v = Float::with_val(prec, x);
                if self.shift != 0.0 {
                    v += self.shift;
                }
                v
            })
            .collect()
    }

    /// Differences between consecutive points (shift-invariant, exact).
    pub fn gaps(&self) -> Vec<f64> {
        self.base.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Number of points in `[a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let lo = self.base.partition_point(|&x| x + self.shift < a);
        let hi = self.base.partition_point(|&x| x + self.shift <= b);
        hi.saturating_sub(lo)
    }

    /// Restriction `N_{M'}` to the symmetric sub-window `[-M', M']`
    /// (only for unshifted samples).
    pub fn restrict(&self, window_halfwidth: f64) -> Result<Self> {
        if self.shift != 0.0 {
            return Err(LabError::invalid("cannot restrict a shifted sample"));
        }
        if !(window_halfwidth >= 0.0 && window_halfwidth <= self.window_halfwidth) {
            return Err(LabError::invalid(format!(
                "sub-window {window_halfwidth} not inside [0, {}]",
                self.window_halfwidth
            )));
        }
        Ok(PoissonSample {
            base: self
                .base
                .iter()
                .copied()
                .filter(|x| x.abs() <= window_halfwidth)
                .collect(),
            window_halfwidth,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Draw a Poisson configuration on `[-M, M]`.
pub fn sample_poisson(window_halfwidth: f64, intensity: f64, seed: u64) -> Result<PoissonSample> {
    if !(window_halfwidth.is_finite() && window_halfwidth >= 0.0) {
        return Err(LabError::invalid(format!(
            "window half-width must be finite and non-negative, got {window_halfwidth}"
        )));
    }
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(LabError::invalid(format!(
            "intensity must be positive and finite, got {intensity}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = 2.0 * window_halfwidth * intensity;
    let count = if mean > 0.0 {
        let poisson = Poisson::new(mean).map_err(|e| LabError::invalid(e.to_string()))?;
        poisson.sample(&mut rng) as usize
    } else {
        0
    };
    let mut points = Vec::with_capacity(count);
    if count > 0 {
        let uniform = Uniform::new_inclusive(-window_halfwidth, window_halfwidth)
            .map_err(|e| LabError::invalid(e.to_string()))?;
        points.extend((0..count).map(|_| uniform.sample(&mut rng)));
        points.sort_by(f64::total_cmp);
        // Ties have probability zero; redraw from the same stream if one occurs.
        while points.windows(2).any(|w| w[0] == w[1]) {
            points.dedup();
            while points.len() < count {
                points.push(uniform.sample(&mut rng));
            }
            points.sort_by(f64::total_cmp);
        }
    }
    Ok(PoissonSample {
        seed,
        window_halfwidth,
        intensity,
        shift: 0.0,
        base: points,
    })
}

/// Translation `τ_λ`: every point moves right by `λ`.
pub fn shift_sample(s: &PoissonSample, lambda: f64) -> PoissonSample {
    PoissonSample {
        shift: s.shift + lambda,
        ..s.clone()
    }
}

/// The rescaled measure `N^(k)(A) = N(kA)/k`: point `x` becomes `x/k`
/// carrying mass `1/k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaledSample {
    base: PoissonSample,
    scale: u32,
}

pub fn rescale_sample(s: &PoissonSample, k: i64) -> Result<RescaledSample> {
    if k <= 0 {
        return Err(LabError::invalid(format!("scale must be >= 1, got {k}")));
    }
    let scale = u32::try_from(k).map_err(|_| LabError::invalid("scale too large"))?;
    Ok(RescaledSample {
        base: s.clone(),
        scale,
    })
}

impl RescaledSample {
    pub fn base(&self) -> &PoissonSample {
        &self.base
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn mass(&self) -> f64 {
        1.0 / f64::from(self.scale)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let k = f64::from(self.scale);
        self.base.points().map(move |x| x / k)
    }

    /// `N^(k)([a, b])`.
    pub fn measure(&self, a: f64, b: f64) -> f64 {
        let k = f64::from(self.scale);
        self.base.count_in(k * a, k * b) as f64 / k
    }
}
