//! The windowed product `f_M(z) = ∏ (1 - z/x)`, its logarithmic
//! derivative, its Taylor coefficients, and the coefficients of its
//! derivatives.
//!
//! Taylor coefficients are the elementary symmetric functions of the
//! negative reciprocals `-1/x`. They alternate wildly in sign across
//! partial products, so they are accumulated in MPFR arithmetic at a
//! configurable precision. Alongside each table we keep a running bound
//! on the precision actually retained after cancellation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rug::float::Constant;
use rug::ops::Pow;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::logcomplex::LogComplex;
use crate::numeric::{wrap_angle, CompensatedComplexSum, CompensatedSum};
use crate::precision::PrecisionConfig;
use crate::sampler::PoissonSample;

/// High-precision `log f` as (log-modulus, argument mod 2π).
#[derive(Clone, Debug)]
pub(crate) struct HpLog {
    pub log_mag: Float,
    pub arg: Float,
    pub is_zero: bool,
}

impl HpLog {
    fn to_log_complex(&self) -> LogComplex {
        if self.is_zero {
            return LogComplex::ZERO;
        }
        LogComplex::new(self.log_mag.to_f64(), self.arg.to_f64())
    }
}

/// Reduce a high-precision angle to [-π, π].
pub(crate) fn wrap_angle_hp(theta: &Float) -> Float {
    let prec = theta.prec();
    let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
    Float::with_val(prec, theta.remainder_ref(&two_pi))
}

/// `Σ log(1 - z/x)` over the given points, every operation at `prec` bits.
pub(crate) fn log_product_hp(points: &[Float], z_re: &Float, z_im: &Float, prec: u32) -> HpLog {
    let mut log_mag = Float::new(prec);
    let mut arg = Float::new(prec);
    let mut re = Float::new(prec);
    let mut im = Float::new(prec);
    let mut norm = Float::new(prec);
    let mut theta = Float::new(prec);
    for x in points {
        // 1 - z/x = (x - z)/x
        re.assign(x - z_re);
        re /= x;
        im.assign(z_im / x);
        im = -im;
        if re.is_zero() && im.is_zero() {
            return HpLog {
                log_mag: Float::with_val(prec, f64::NEG_INFINITY),
                arg: Float::new(prec),
                is_zero: true,
            };
        }
        norm.assign(re.square_ref());
        theta.assign(im.square_ref());
        norm += &theta;
        norm.ln_mut();
        log_mag += &norm;
        theta.assign(im.atan2_ref(&re));
        arg += &theta;
    }
    log_mag /= 2u32;
    HpLog {
        log_mag,
        arg: wrap_angle_hp(&arg),
        is_zero: false,
    }
}

pub(crate) fn log_f_hp(s: &PoissonSample, z: Complex64, prec: u32) -> HpLog {
    let pts = s.points_hp(prec);
    log_product_hp(
        &pts,
        &Float::with_val(prec, z.re),
        &Float::with_val(prec, z.im),
        prec,
    )
}

/// `log f_M(z)` in log-complex form; the zero element when `z` is a point.
pub fn eval_log_f(s: &PoissonSample, z: Complex64, p: PrecisionConfig) -> LogComplex {
    log_f_hp(s, z, p.bits()).to_log_complex()
}

/// Double-precision `Σ Log(1 - z/x)` with compensated accumulation;
/// `None` at a zero of `f_M`. Only the exponential of the result is
/// meaningful (the imaginary part is not reduced mod 2π).
pub(crate) fn log_f_fast(points: &[f64], z: Complex64) -> Option<Complex64> {
    let mut acc = CompensatedComplexSum::new();
    for &x in points {
        let w = Complex64::new(1.0 - z.re / x, -z.im / x);
        if w.re == 0.0 && w.im == 0.0 {
            return None;
        }
        acc.add(Complex64::new(w.norm().ln(), w.im.atan2(w.re)));
    }
    Some(acc.value())
}

/// `h_M(z) = Σ 1/(z - x)`, the logarithmic derivative of `f_M`.
pub fn eval_h(s: &PoissonSample, z: Complex64) -> Result<Complex64> {
    let mut acc = CompensatedComplexSum::new();
    for x in s.points() {
        let d = z - x;
        if d.re == 0.0 && d.im == 0.0 {
            return Err(LabError::Pole { z });
        }
        acc.add(d.inv());
    }
    Ok(acc.value())
}

/// Taylor coefficients `e_0..=e_{n_max}` of `f_M`.
#[derive(Clone, Debug)]
pub struct CoefficientTable {
    pub e: Vec<Float>,
    pub window_halfwidth: f64,
    pub precision: PrecisionConfig,
    pub n_points: usize,
    pub seed: u64,
    /// Lower bound on correct bits across the table (product method only).
    pub retained_bits: Option<f64>,
}

impl CoefficientTable {
    pub fn n_max(&self) -> usize {
        self.e.len() - 1
    }

    /// True when the table holds every coefficient of the polynomial.
    pub fn is_complete(&self) -> bool {
        self.n_max() >= self.n_points
    }

    pub fn sign(&self, j: usize) -> i8 {
        let v = &self.e[j];
        if v.is_zero() {
            0
        } else if v.is_sign_negative() {
            -1
        } else {
            1
        }
    }

    /// Largest relative deviation between two tables over common indices.
    pub fn max_relative_difference(&self, other: &CoefficientTable) -> f64 {
        let prec = self.precision.bits().max(other.precision.bits());
        self.e
            .iter()
            .zip(&other.e)
            .map(|(a, b)| {
                if a.is_zero() && b.is_zero() {
                    return 0.0;
                }
                let diff = Float::with_val(prec, a - b);
                let scale = Float::with_val(prec, a.abs_ref());
                if scale.is_zero() {
                    return f64::INFINITY;
                }
                Float::with_val(prec, diff / scale).abs().to_f64()
            })
            .fold(0.0, f64::max)
    }

    /// `log2` of [`max_relative_difference`](Self::max_relative_difference),
    /// computed without leaving MPFR's exponent range; `-inf` when the
    /// tables agree exactly.
    pub fn max_relative_difference_log2(&self, other: &CoefficientTable) -> f64 {
        let prec = self.precision.bits().max(other.precision.bits());
        self.e
            .iter()
            .zip(&other.e)
            .map(|(a, b)| {
                let diff = Float::with_val(prec, a - b);
                if diff.is_zero() {
                    return f64::NEG_INFINITY;
                }
                if a.is_zero() {
                    return f64::INFINITY;
                }
                let ratio = Float::with_val(prec, diff / a).abs();
                ratio.log2().to_f64()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV: a `# table:` JSON header line, then `index,sign,log10_abs`.
    pub fn to_csv(&self) -> String {
        let header = serde_json::json!({
            "seed": self.seed,
            "window_halfwidth": self.window_halfwidth,
            "bits": self.precision.bits(),
            "n_points": self.n_points,
        });
        let mut out = format!("# table: {header}\nindex,sign,log10_abs\n");
        let prec = self.precision.bits();
        for (j, v) in self.e.iter().enumerate() {
            let log10 = if v.is_zero() {
                f64::NEG_INFINITY
            } else {
                Float::with_val(prec, v.abs_ref()).log10().to_f64()
            };
            let _ = writeln!(out, "{j},{},{}", self.sign(j), fmt_log10(log10));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            seed: u64,
            window_halfwidth: f64,
            bits: u32,
            n_points: usize,
        }
        let header_line = text
            .lines()
            .find_map(|l| l.strip_prefix("# table:"))
            .ok_or_else(|| LabError::Parse("missing '# table:' header".into()))?;
        let header: Header = serde_json::from_str(header_line.trim())?;
        let precision = PrecisionConfig::new(header.bits)?;
        let prec = header.bits;
        let mut e = Vec::new();
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let [idx, sign, log10] = fields[..] else {
                return Err(LabError::Parse(format!("bad row '{line}'")));
            };
            let idx: usize = idx.parse().map_err(|_| LabError::Parse(format!("bad index '{idx}'")))?;
            if idx != e.len() {
                return Err(LabError::Parse(format!("index {idx} out of sequence")));
            }
            let sign: i8 = sign.parse().map_err(|_| LabError::Parse(format!("bad sign '{sign}'")))?;
            let log10: f64 = parse_log10(log10)?;
            let value = if sign == 0 || log10 == f64::NEG_INFINITY {
                Float::new(prec)
            } else {
                let mag = Float::with_val(prec, 10u32).pow(Float::with_val(prec, log10));
                if sign < 0 {
                    -mag
                } else {
                    mag
                }
            };
            e.push(value);
        }
        if e.is_empty() {
            return Err(LabError::Parse("table has no rows".into()));
        }
        Ok(CoefficientTable {
            e,
            window_halfwidth: header.window_halfwidth,
            precision,
            n_points: header.n_points,
            seed: header.seed,
            retained_bits: None,
        })
    }
}

fn fmt_log10(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:?}")
    }
}

fn parse_log10(s: &str) -> Result<f64> {
    if s == "-inf" {
        return Ok(f64::NEG_INFINITY);
    }
    s.parse()
        .map_err(|_| LabError::Parse(format!("bad log10 value '{s}'")))
}

fn negative_reciprocals(s: &PoissonSample, prec: u32) -> Result<Vec<Float>> {
    s.points_hp(prec)
        .into_iter()
        .map(|x| {
            if x.is_zero() {
                Err(LabError::InvalidSample("a sample point lies at the origin".into()))
            } else {
                Ok(Float::with_val(prec, -1i32) / x)
            }
        })
        .collect()
}

fn check_n_max(s: &PoissonSample, n_max: usize) -> Result<()> {
    if n_max > s.len() {
        return Err(LabError::invalid(format!(
            "n_max = {n_max} exceeds the number of points ({})",
            s.len()
        )));
    }
    Ok(())
}

/// `ln(a + b)` from `ln a`, `ln b`.
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Coefficients by multiplying in one linear factor `(1 + y z)` at a time,
/// `y = -1/x`, truncating at degree `n_max`.
pub fn coefficients_product(
    s: &PoissonSample,
    n_max: usize,
    p: PrecisionConfig,
) -> Result<CoefficientTable> {
    check_n_max(s, n_max)?;
    let prec = p.bits();
    let ys = negative_reciprocals(s, prec)?;
    let mut e: Vec<Float> = (0..=n_max).map(|_| Float::new(prec)).collect();
    e[0] = Float::with_val(prec, 1u32);
    // ln e_j(|y|): bounds every partial coefficient in absolute value.
    let mut bound = vec![f64::NEG_INFINITY; n_max + 1];
    bound[0] = 0.0;
    for (count, y) in ys.iter().enumerate() {
        let ln_y = LogComplex::from_float(y).log_mag;
        let top = n_max.min(count + 1);
        for j in (1..=top).rev() {
            let (lo, hi) = e.split_at_mut(j);
            hi[0] += &lo[j - 1] * y;
            bound[j] = log_add_exp(bound[j], bound[j - 1] + ln_y);
        }
    }
    let ops = ((ys.len() + n_max + 1) as f64).log2();
    let worst_loss = e
        .iter()
        .zip(&bound)
        .filter(|(v, _)| !v.is_zero())
        .map(|(v, b)| (b - LogComplex::from_float(v).log_mag) / std::f64::consts::LN_2)
        .fold(0.0, f64::max);
    Ok(CoefficientTable {
        e,
        window_halfwidth: s.window_halfwidth(),
        precision: p,
        n_points: s.len(),
        seed: s.seed(),
        retained_bits: Some(f64::from(prec) - ops - worst_loss),
    })
}

/// Product-method table, recomputed at wider precision until at least
/// `min_retained_bits` survive cancellation.
pub fn coefficients_product_certified(
    s: &PoissonSample,
    n_max: usize,
    p: PrecisionConfig,
    min_retained_bits: f64,
) -> Result<CoefficientTable> {
    let mut p = p;
    for _ in 0..4 {
        let table = coefficients_product(s, n_max, p)?;
        let retained = table.retained_bits.unwrap_or(f64::NEG_INFINITY);
        if retained >= min_retained_bits {
            return Ok(table);
        }
        let deficit = (min_retained_bits - retained).ceil() as u32;
        p = p.widened(deficit + 32);
    }
    coefficients_product(s, n_max, p)
}

/// Independent route: power sums `p_r = Σ (-1/x)^r` and Newton's identities
/// `n e_n = Σ_{i=1}^{n} (-1)^{i-1} e_{n-i} p_i`.
///
/// The recurrence cancels badly when a point sits near the origin, so a
/// forward error bound is carried along and the working precision is
/// raised until every entry is good to about `p.bits()` bits.
pub fn coefficients_newton(
    s: &PoissonSample,
    n_max: usize,
    p: PrecisionConfig,
) -> Result<CoefficientTable> {
    check_n_max(s, n_max)?;
    let target = f64::from(p.bits());
    let mut work = p;
    for _ in 0..10 {
        let (e, retained) = newton_pass(s, n_max, work)?;
        if retained >= target || work.bits() >= 1 << 20 {
            let prec = p.bits();
            return Ok(CoefficientTable {
                e: e.into_iter().map(|v| Float::with_val(prec, v)).collect(),
                window_halfwidth: s.window_halfwidth(),
                precision: p,
                n_points: s.len(),
                seed: s.seed(),
                retained_bits: Some(retained.min(target)),
            });
        }
        // a value swamped by its own error hides the true deficit; at
        // least double
        let deficit = (target - retained).ceil() as u32 + 32;
        work = work.widened(deficit.max(work.bits()));
    }
    Err(LabError::invalid("Newton identities did not reach the requested precision"))
}

/// One Newton-identity pass at `p`; returns the coefficients and a lower
/// bound on their correct bits.
fn newton_pass(s: &PoissonSample, n_max: usize, p: PrecisionConfig) -> Result<(Vec<Float>, f64)> {
    let prec = p.bits();
    let ys = negative_reciprocals(s, prec)?;
    let mut power_sums: Vec<Float> = (0..=n_max).map(|_| Float::new(prec)).collect();
    // ln Σ|y|^i bounds |p_i| and scales its rounding error
    let mut abs_sums = vec![f64::NEG_INFINITY; n_max + 1];
    let mut pw = Float::new(prec);
    for y in &ys {
        let ln_y = LogComplex::from_float(y).log_mag;
        pw.clone_from(y);
        for (i, ps) in power_sums.iter_mut().enumerate().skip(1) {
            *ps += &pw;
            pw *= y;
            abs_sums[i] = log_add_exp(abs_sums[i], i as f64 * ln_y);
        }
    }
    let ln_u = -f64::from(prec) * std::f64::consts::LN_2;
    let ln_terms = ((ys.len() + n_max + 2) as f64).ln();
    let mut e: Vec<Float> = Vec::with_capacity(n_max + 1);
    e.push(Float::with_val(prec, 1u32));
    // ln of an absolute error bound on each e_n
    let mut err = vec![f64::NEG_INFINITY; n_max + 1];
    let mut worst_bits = f64::INFINITY;
    for n in 1..=n_max {
        let mut acc = Float::new(prec);
        let mut bound = f64::NEG_INFINITY;
        for i in 1..=n {
            let term = Float::with_val(prec, &e[n - i] * &power_sums[i]);
            let ln_e = LogComplex::from_float(&e[n - i]).log_mag;
            let inherited = err[n - i] + abs_sums[i];
            let rounding = ln_e + abs_sums[i] + ln_u + ln_terms;
            bound = log_add_exp(bound, log_add_exp(inherited, rounding));
            if i % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        acc /= n as u32;
        err[n] = bound - (n as f64).ln();
        let ln_val = LogComplex::from_float(&acc).log_mag;
        if ln_val.is_finite() {
            worst_bits = worst_bits.min((ln_val - err[n]) / std::f64::consts::LN_2);
        }
        e.push(acc);
    }
    Ok((e, worst_bits))
}

/// Amplitude `A_k` and phase `θ_k` of the cosine profile, read off the
/// saddle `σ_k`:
/// `A_k = k!·√(2/(πk))·|σ_k^{-k} f(σ_k)|`, `θ_k = arg(σ_k^{-k} f(σ_k))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub k: u32,
    pub sigma: Complex64,
    /// `A_k` as a positive real in log form.
    pub a_k: LogComplex,
    pub theta: f64,
}

impl Amplitude {
    pub fn at_saddle(s: &PoissonSample, k: u32, sigma: Complex64, p: PrecisionConfig) -> Result<Self> {
        if k == 0 {
            return Err(LabError::invalid("amplitude needs k >= 1"));
        }
        let phase = crate::saddle::eval_phase(s, k, sigma, p)?;
        if phase.is_zero() {
            return Err(LabError::Pole { z: sigma });
        }
        let ln_k_factorial = ln_factorial(k);
        let kf = f64::from(k);
        let log_a = ln_k_factorial + 0.5 * (2.0 / (PI * kf)).ln() + phase.log_mag;
        Ok(Amplitude {
            k,
            sigma,
            a_k: LogComplex::new(log_a, 0.0),
            theta: phase.arg,
        })
    }

    /// Synthetic amplitude with `A = 1`; used with pure-cosine tables.
    pub fn unit(k: u32, theta: f64) -> Self {
        Amplitude {
            k,
            sigma: Complex64::new(0.0, f64::from(k) / PI),
            a_k: LogComplex::ONE,
            theta: wrap_angle(theta),
        }
    }

    pub fn ln_a(&self) -> f64 {
        self.a_k.log_mag
    }
}

/// `ln n!` through MPFR's log-gamma.
pub fn ln_factorial(n: u32) -> f64 {
    Float::with_val(128, n + 1).ln_gamma().to_f64()
}

/// Taylor coefficients `a_{k,r} = [z^r] f^(k)(z) = e_{k+r}·(k+r)!/r!`.
#[derive(Clone, Debug)]
pub struct DerivativeCoefficients {
    pub k: u32,
    pub a: Vec<Float>,
    pub amplitude: Option<Amplitude>,
    pub precision: PrecisionConfig,
    /// The stored coefficients are the whole polynomial `f_M^(k)`.
    pub exact: bool,
}

pub fn derivative_coefficients(
    c: &CoefficientTable,
    k: u32,
    r_max: usize,
    amplitude: Option<Amplitude>,
) -> Result<DerivativeCoefficients> {
    let ku = k as usize;
    if ku + r_max > c.n_max() {
        return Err(LabError::invalid(format!(
            "k + r_max = {} exceeds the table's n_max = {}",
            ku + r_max,
            c.n_max()
        )));
    }
    if let Some(amp) = &amplitude {
        if amp.k != k {
            return Err(LabError::invalid(format!(
                "amplitude is for order {}, coefficients for order {k}",
                amp.k
            )));
        }
    }
    let prec = c.precision.bits();
    // (k+r)!/r!, starting from k! and stepping the ratio by (k+r)/r.
    let mut ratio = Float::with_val(prec, Float::factorial(k));
    let mut a = Vec::with_capacity(r_max + 1);
    for r in 0..=r_max {
        if r > 0 {
            ratio *= (ku + r) as u32;
            ratio /= r as u32;
        }
        a.push(Float::with_val(prec, &c.e[ku + r] * &ratio));
    }
    Ok(DerivativeCoefficients {
        k,
        a,
        amplitude,
        precision: c.precision,
        exact: c.is_complete() && ku + r_max >= c.n_points,
    })
}

impl DerivativeCoefficients {
    pub fn r_max(&self) -> usize {
        self.a.len() - 1
    }

    /// Coefficients `cos(θ - rπ/2)·π^r/r!` of `cos(πx - θ)`, with `A = 1`.
    pub fn pure_cosine(theta: f64, r_max: usize, p: PrecisionConfig) -> Self {
        let prec = p.bits();
        let pi = Float::with_val(prec, Constant::Pi);
        let theta_hp = Float::with_val(prec, theta);
        let mut pow = Float::with_val(prec, 1u32);
        let mut a = Vec::with_capacity(r_max + 1);
        for r in 0..=r_max {
            if r > 0 {
                pow *= &pi;
                pow /= r as u32;
            }
            let shift = Float::with_val(prec, &pi * (r as u32)) / 2u32;
            let c = Float::with_val(prec, &theta_hp - &shift).cos();
            a.push(c * &pow);
        }
        DerivativeCoefficients {
            k: 0,
            a,
            amplitude: Some(Amplitude::unit(0, theta)),
            precision: p,
            exact: false,
        }
    }

    /// `max_{r ≤ r_hi} |a_{k,r}·r!/(π^r A_k) - cos(θ_k - rπ/2)|`.
    pub fn cosine_law_error(&self, r_hi: usize) -> Result<f64> {
        let amp = self
            .amplitude
            .ok_or_else(|| LabError::invalid("cosine law needs an amplitude"))?;
        let r_hi = r_hi.min(self.r_max());
        let mut worst: f64 = 0.0;
        let mut log_fact = 0.0;
        for r in 0..=r_hi {
            if r > 0 {
                log_fact += (r as f64).ln();
            }
            let scaled = LogComplex::from_float(&self.a[r])
                .scale_log(log_fact - r as f64 * PI.ln() - amp.ln_a())
                .to_complex()
                .re;
            let expect = (amp.theta - r as f64 * PI / 2.0).cos();
            worst = worst.max((scaled - expect).abs());
        }
        Ok(worst)
    }
}

/// Moduli `|f(a + ib)|` along a grid of `b` values.
#[derive(Clone, Debug, Serialize)]
pub struct ModulusReport {
    pub a: f64,
    pub b_grid: Vec<f64>,
    pub log_moduli: Vec<f64>,
    pub nondecreasing: bool,
    pub strictly_increasing: bool,
}

/// Checks that `|f(a + bi)|` grows with `|b|`. Entries with equal `|b|`
/// must have equal moduli.
pub fn check_increasing_modulus(s: &PoissonSample, a: f64, b_grid: &[f64]) -> Result<ModulusReport> {
    if b_grid.windows(2).any(|w| w[1].abs() < w[0].abs()) {
        return Err(LabError::invalid("b grid must be ordered by |b|"));
    }
    let pts = s.to_vec();
    let log_moduli: Vec<f64> = b_grid
        .iter()
        .map(|&b| {
            let z = Complex64::new(a, b);
            pts.iter()
                .map(|&x| Complex64::new(1.0 - z.re / x, -z.im / x).norm().ln())
                .collect::<CompensatedSum>()
                .value()
        })
        .collect();
    let slack = |v: f64| 1e-12 * (1.0 + v.abs());
    let mut nondecreasing = true;
    let mut strictly = true;
    for i in 1..b_grid.len() {
        let (prev, cur) = (log_moduli[i - 1], log_moduli[i]);
        if b_grid[i].abs() == b_grid[i - 1].abs() {
            if (cur - prev).abs() > slack(cur) {
                nondecreasing = false;
            }
            strictly = false;
        } else {
            if cur < prev - slack(cur) {
                nondecreasing = false;
            }
            if cur <= prev {
                strictly = false;
            }
        }
    }
    Ok(ModulusReport {
        a,
        b_grid: b_grid.to_vec(),
        log_moduli,
        nondecreasing,
        strictly_increasing: strictly && nondecreasing,
    })
}

/// Largest relative deviation, over the grid, between
/// `f(τ_λ N, z)` and `f(N, z - λ)/f(N, -λ)`. Both sides are formed on
/// the same finite point set with the shift applied in high precision,
/// so the identity is exact up to rounding at `p`.
pub fn check_translation_covariance(
    s: &PoissonSample,
    lambda: f64,
    z_grid: &[Complex64],
    p: PrecisionConfig,
) -> Result<f64> {
    let prec = p.bits();
    let base = s.points_hp(prec);
    let lambda_hp = Float::with_val(prec, lambda);
    let shifted: Vec<Float> = base
        .iter()
        .map(|x| Float::with_val(prec, x + &lambda_hp))
        .collect();
    let zero = Float::new(prec);
    let neg_lambda = Float::with_val(prec, -&lambda_hp);
    let denom = log_product_hp(&base, &neg_lambda, &zero, prec);
    if denom.is_zero {
        return Err(LabError::invalid("-λ coincides with a sample point"));
    }
    let mut worst: f64 = 0.0;
    for &z in z_grid {
        let z_re = Float::with_val(prec, z.re);
        let z_im = Float::with_val(prec, z.im);
        let lhs = log_product_hp(&shifted, &z_re, &z_im, prec);
        let z_minus = Float::with_val(prec, &z_re - &lambda_hp);
        let num = log_product_hp(&base, &z_minus, &z_im, prec);
        if lhs.is_zero || num.is_zero {
            return Err(LabError::invalid(format!(
                "grid point {z} coincides with a shifted sample point"
            )));
        }
        let d_mag = Float::with_val(prec, &lhs.log_mag - &num.log_mag) + &denom.log_mag;
        let d_arg = wrap_angle_hp(&(Float::with_val(prec, &lhs.arg - &num.arg) + &denom.arg));
        // |e^{d} - 1|
        let scale = d_mag.exp();
        let re = Float::with_val(prec, &scale * Float::with_val(prec, d_arg.cos_ref())) - 1u32;
        let im = Float::with_val(prec, &scale * Float::with_val(prec, d_arg.sin_ref()));
        let err = Float::with_val(prec, re.hypot_ref(&im)).to_f64();
        worst = worst.max(err);
    }
    Ok(worst)
}
