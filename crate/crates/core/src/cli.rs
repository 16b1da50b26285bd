//! Command-line front end.
//!
//! Settings resolve in three layers: built-in defaults, then an optional
//! TOML config file, then flags. The resolved config is echoed at the top
//! of every output file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::SADDLE_OFFSET_P95;
use crate::contour::{build_contour, coefficient_via_contour, ContourSpec, DEFAULT_DELTA, DEFAULT_NODES_PER_ARC};
use crate::error::{LabError, Result};
use crate::logcomplex::LogComplex;
use crate::montecarlo::{default_window, run_replicas, summaries_to_json_lines, summarize, EnsembleConfig};
use crate::precision::PrecisionConfig;
use crate::saddle::{default_tol, find_saddle};
use crate::sampler::{sample_poisson, PoissonSample};
use crate::series::{coefficients_product, derivative_coefficients, Amplitude};
use crate::zeros::{default_r_max, find_real_zeros, spacing_stats, zeros_csv_rows, DEFAULT_GRID_STEP, DEFAULT_REFINE_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
/// Share of replicas allowed to fail numerically before exit code 3.
pub const FAILURE_QUOTA: f64 = 0.05;

#[derive(Parser, Debug)]
#[command(name = "poisson-lab", version, about = "Random entire functions with Poisson zeros, and their derivatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Draw samples and write them as JSON
    Sample,
    /// Taylor coefficients of the windowed product
    Coeffs,
    /// Locate the saddle of the phase function
    Saddle,
    /// Six-arc Cauchy integral for e_{k+r}
    Contour,
    /// Real zeros of the k-th derivative
    Zeros,
    /// Replica ensemble and statistical tests
    Verify,
    /// Every stage in sequence
    All,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Derivative order
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Sample half-width M; for `zeros`, the extraction half-width W
    #[arg(long, global = true)]
    pub window: Option<f64>,
    /// Sample half-width M (any subcommand)
    #[arg(long, global = true)]
    pub sample_window: Option<f64>,
    /// Mantissa bits of high-precision reals
    #[arg(long, global = true)]
    pub bits: Option<u32>,
    /// Half-angle exponent of the dominant arc
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub replicas: Option<u32>,
    #[arg(long, global = true, env = "POISSON_LAB_SEED")]
    pub base_seed: Option<u64>,
    /// Worker threads
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Explicit comma-separated points, bypassing the sampler
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub points: Option<String>,
    /// Highest coefficient index for `coeffs`
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Coefficient offset r in e_{k+r} for `contour`
    #[arg(long, global = true)]
    pub r: Option<u32>,
    #[arg(long, global = true)]
    pub nodes_per_arc: Option<usize>,
    /// TOML config file; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Config-file layer; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    k: Option<u32>,
    window_halfwidth: Option<f64>,
    zero_window: Option<f64>,
    bits: Option<u32>,
    delta: Option<f64>,
    replicas: Option<u32>,
    base_seed: Option<u64>,
    threads: Option<usize>,
    output_dir: Option<PathBuf>,
    points: Option<Vec<f64>>,
    n_max: Option<usize>,
    r: Option<u32>,
    nodes_per_arc: Option<usize>,
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub k: u32,
    pub window_halfwidth: f64,
    pub zero_window: f64,
    pub bits: u32,
    pub delta: f64,
    pub replicas: u32,
    pub base_seed: u64,
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
    pub points: Option<Vec<f64>>,
    pub n_max: Option<usize>,
    pub r: u32,
    pub nodes_per_arc: usize,
    pub grid_step: f64,
    pub refine_tol: f64,
}

fn parse_points(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| LabError::Parse(format!("bad point '{t}'")))
        })
        .collect()
}

impl RunConfig {
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self> {
        let file: FileConfig = match &flags.config {
            Some(path) => toml::from_str(&fs::read_to_string(path)?)
                .map_err(|e| LabError::Parse(format!("{}: {e}", path.display())))?,
            None => FileConfig::default(),
        };
        let k = flags.k.or(file.k).unwrap_or(60);
        let (window_flag, zero_flag) = if command == Command::Zeros {
            (flags.sample_window, flags.window)
        } else {
            (flags.sample_window.or(flags.window), None)
        };
        let points = match &flags.points {
            Some(s) => Some(parse_points(s)?),
            None => file.points,
        };
        let tight = points
            .as_ref()
            .map(|p| p.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        let window_halfwidth = window_flag
            .or(file.window_halfwidth)
            .or(tight)
            .unwrap_or_else(|| default_window(k));
        let cfg = RunConfig {
            command: format!("{command:?}").to_lowercase(),
            k,
            window_halfwidth,
            zero_window: zero_flag.or(file.zero_window).unwrap_or(5.0),
            bits: flags
                .bits
                .or(file.bits)
                .unwrap_or_else(|| PrecisionConfig::for_order(k).bits()),
            delta: flags.delta.or(file.delta).unwrap_or(DEFAULT_DELTA),
            replicas: flags.replicas.or(file.replicas).unwrap_or(1),
            base_seed: flags.base_seed.or(file.base_seed).unwrap_or(1),
            threads: flags.threads.or(file.threads),
            output_dir: flags
                .output_dir
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            points,
            n_max: flags.n_max.or(file.n_max),
            r: flags.r.or(file.r).unwrap_or(0),
            nodes_per_arc: flags
                .nodes_per_arc
                .or(file.nodes_per_arc)
                .unwrap_or(DEFAULT_NODES_PER_ARC),
            grid_step: DEFAULT_GRID_STEP,
            refine_tol: DEFAULT_REFINE_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        PrecisionConfig::new(self.bits)?;
        if self.k == 0 {
            return Err(LabError::invalid("--k must be at least 1"));
        }
        if self.replicas == 0 {
            return Err(LabError::invalid("--replicas must be at least 1"));
        }
        if !(self.window_halfwidth.is_finite() && self.window_halfwidth >= 0.0) {
            return Err(LabError::invalid("--window must be finite and non-negative"));
        }
        if !(self.zero_window > 0.0) {
            return Err(LabError::invalid("zero window must be positive"));
        }
        if !(self.delta > 1.0 / 3.0 && self.delta < 0.5) {
            return Err(LabError::invalid("--delta must lie in (1/3, 1/2)"));
        }
        if self.nodes_per_arc < 16 {
            return Err(LabError::invalid("--nodes-per-arc must be at least 16"));
        }
        if self.threads == Some(0) {
            return Err(LabError::invalid("--threads must be at least 1"));
        }
        Ok(())
    }

    pub fn precision(&self) -> PrecisionConfig {
        PrecisionConfig::new(self.bits).expect("validated")
    }

    /// Resolved config without the output location, so that identical runs
    /// written to different directories produce identical files.
    fn echoed(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("serializable");
        v.as_object_mut().expect("object").remove("output_dir");
        v
    }

    fn header(&self) -> serde_json::Value {
        serde_json::json!({
            "artifact": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.echoed(),
        })
    }

    /// First 12 hex digits of the SHA-256 of the config minus its command
    /// and output directory.
    pub fn hash(&self) -> String {
        let mut v = self.echoed();
        v.as_object_mut().expect("object").remove("command");
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    fn seeds(&self) -> Vec<u64> {
        (0..self.replicas)
            .map(|r| self.base_seed.wrapping_add(u64::from(r)))
            .collect()
    }

    fn samples(&self) -> Result<Vec<PoissonSample>> {
        match &self.points {
            Some(p) => Ok(vec![PoissonSample::from_points(p.clone(), self.window_halfwidth)?]),
            None => self
                .seeds()
                .into_iter()
                .map(|seed| sample_poisson(self.window_halfwidth, 1.0, seed))
                .collect(),
        }
    }

    fn ensemble(&self) -> EnsembleConfig {
        let mut e = EnsembleConfig::new(self.k);
        e.window_halfwidth = self.window_halfwidth;
        e.bits = self.bits;
        e.delta = self.delta;
        e.replicas = self.replicas;
        e.base_seed = self.base_seed;
        e.zero_window = Some(self.zero_window);
        e.sign_range = Some(((self.k / 3).max(1), self.k));
        e.nodes_per_arc = self.nodes_per_arc;
        e
    }
}

fn write_csv(path: &Path, cfg: &RunConfig, body: &str) -> Result<()> {
    let text = format!("# run: {}\n{body}", cfg.header());
    fs::write(path, text)?;
    Ok(())
}

fn write_json(path: &Path, cfg: &RunConfig, key: &str, value: serde_json::Value) -> Result<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("header".into(), cfg.header());
    doc.insert(key.into(), value);
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(doc))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_json_lines(path: &Path, cfg: &RunConfig, lines: &str) -> Result<()> {
    let head = serde_json::json!({ "header": cfg.header() });
    fs::write(path, format!("{head}\n{lines}"))?;
    Ok(())
}

/// Outcome of one stage: output written; numerical trouble beyond quota.
struct Stage {
    numerical_failure: bool,
}

fn run_sample(cfg: &RunConfig) -> Result<Stage> {
    let samples = cfg.samples()?;
    let values: Vec<serde_json::Value> = samples
        .iter()
        .map(|s| serde_json::to_value(s))
        .collect::<std::result::Result<_, _>>()?;
    let counts: Vec<usize> = samples.iter().map(|s| s.len()).collect();
    write_json(&cfg.output_dir.join("samples.json"), cfg, "samples", serde_json::Value::Array(values))?;
    println!(
        "sample: {} sample(s) on [-{}, {}], point counts {:?}",
        samples.len(),
        cfg.window_halfwidth,
        cfg.window_halfwidth,
        counts
    );
    Ok(Stage { numerical_failure: false })
}

fn run_coeffs(cfg: &RunConfig) -> Result<Stage> {
    let p = cfg.precision();
    let mut body = String::new();
    for s in cfg.samples()? {
        let n_max = cfg.n_max.unwrap_or_else(|| s.len().min(cfg.k as usize + 20));
        let table = coefficients_product(&s, n_max, p)?;
        body.push_str(&table.to_csv());
        if n_max <= 10 {
            let shown: Vec<String> = table.e.iter().map(|v| format!("{}", v.to_f64())).collect();
            println!("coeffs: seed {} e = {}", s.seed(), shown.join(", "));
        } else {
            println!(
                "coeffs: seed {} n_max {} retained bits {:.0}",
                s.seed(),
                n_max,
                table.retained_bits.unwrap_or(f64::NAN)
            );
        }
    }
    write_csv(&cfg.output_dir.join("coeffs.csv"), cfg, &body)?;
    Ok(Stage { numerical_failure: false })
}

fn over_quota(failures: usize, total: usize) -> bool {
    failures as f64 > FAILURE_QUOTA * total as f64
}

fn run_saddle(cfg: &RunConfig) -> Result<Stage> {
    let samples = cfg.samples()?;
    let mut lines = String::new();
    let mut offsets = Vec::new();
    let mut failures = 0;
    for s in &samples {
        match find_saddle(s, cfg.k, default_tol(cfg.k), 100) {
            Ok(sp) => {
                lines.push_str(&sp.to_json_line());
                lines.push('\n');
                offsets.push(sp.normalized_offset);
            }
            Err(e) => {
                failures += 1;
                lines.push_str(&serde_json::json!({ "seed": s.seed(), "k": cfg.k, "error": e.to_string() }).to_string());
                lines.push('\n');
            }
        }
    }
    write_json_lines(&cfg.output_dir.join("saddle.jsonl"), cfg, &lines)?;
    println!(
        "saddle: k {} converged {}/{} offset median {:.4} p95 {:.4}",
        cfg.k,
        offsets.len(),
        samples.len(),
        crate::stats::quantile(&offsets, 0.5),
        crate::stats::quantile(&offsets, 0.95)
    );
    Ok(Stage {
        numerical_failure: over_quota(failures, samples.len()),
    })
}

/// Saddle contour, or for explicit points without a usable saddle the
/// circle through `i·max(k/π, 1)`.
fn contour_for(cfg: &RunConfig, s: &PoissonSample) -> Result<ContourSpec> {
    match find_saddle(s, cfg.k, default_tol(cfg.k), 100) {
        Ok(sp) => build_contour(&sp, cfg.delta, cfg.nodes_per_arc),
        Err(e) if cfg.points.is_some() => {
            let radius = (f64::from(cfg.k) / std::f64::consts::PI).max(1.0);
            println!("contour: no saddle ({e}); using |z| = {radius}");
            ContourSpec::from_sigma(cfg.k, Complex64::new(0.0, radius), cfg.delta, cfg.nodes_per_arc)
        }
        Err(e) => Err(e),
    }
}

fn run_contour(cfg: &RunConfig) -> Result<Stage> {
    let p = cfg.precision();
    let samples = cfg.samples()?;
    let mut body = String::from("seed,k,r,arc,log10_abs,arg,nodes\n");
    let mut failures = 0;
    for s in &samples {
        let idx = (cfg.k + cfg.r) as usize;
        let outcome = contour_for(cfg, s).and_then(|spec| {
            let res = coefficient_via_contour(s, cfg.k, cfg.r, &spec, p)?;
            let direct = coefficients_product(s, idx, p)?;
            Ok((res, LogComplex::from_float(&direct.e[idx])))
        });
        match outcome {
            Ok((res, direct)) => {
                for row in res.to_csv_rows(false).lines() {
                    body.push_str(&format!("{},{row}\n", s.seed()));
                }
                let rel = (res.total.sub(&direct).log_mag - direct.log_mag).exp();
                println!(
                    "contour: seed {} e_{} = {:.12e} (direct {:.12e}, rel. diff {:.2e}) dominant ratio {:.4}",
                    s.seed(),
                    idx,
                    res.total_complex().re,
                    direct.to_complex().re,
                    rel,
                    res.dominant_ratio
                );
            }
            Err(e @ LabError::SaddleFailure { .. }) => {
                failures += 1;
                println!("contour: seed {} failed: {e}", s.seed());
            }
            Err(e) => return Err(e),
        }
    }
    write_csv(&cfg.output_dir.join("contour.csv"), cfg, &body)?;
    Ok(Stage {
        numerical_failure: over_quota(failures, samples.len()),
    })
}

fn run_zeros(cfg: &RunConfig) -> Result<Stage> {
    let p = cfg.precision();
    let samples = cfg.samples()?;
    let r_max = default_r_max(cfg.zero_window);
    let mut rows = String::from("replica_seed,k,kind,value\n");
    let mut fractions = String::from("replica_seed,k,fractional_part\n");
    let mut failures = 0;
    for s in &samples {
        let n_max = (cfg.k as usize + r_max).min(s.len());
        let amplitude = find_saddle(s, cfg.k, default_tol(cfg.k), 100)
            .and_then(|sp| Amplitude::at_saddle(s, cfg.k, sp.sigma, p));
        let amplitude = match amplitude {
            Ok(a) => Some(a),
            Err(_) if cfg.points.is_some() => None,
            Err(e) => {
                failures += 1;
                println!("zeros: seed {} failed: {e}", s.seed());
                continue;
            }
        };
        if (cfg.k as usize) > n_max {
            return Err(LabError::invalid(format!("k = {} exceeds the point count", cfg.k)));
        }
        let table = coefficients_product(s, n_max, p)?;
        let d = derivative_coefficients(&table, cfg.k, n_max - cfg.k as usize, amplitude)?;
        let zs = match find_real_zeros(&d, cfg.zero_window, cfg.grid_step, cfg.refine_tol) {
            Ok(z) => z,
            Err(e @ LabError::WindowTooLarge { .. }) => {
                failures += 1;
                println!("zeros: seed {} failed: {e}", s.seed());
                continue;
            }
            Err(e) => return Err(e),
        };
        let report = spacing_stats(&zs);
        rows.push_str(&zeros_csv_rows(s.seed(), &zs, &report));
        for f in &report.fractional_parts {
            fractions.push_str(&format!("{},{},{f:?}\n", s.seed(), cfg.k));
        }
        println!(
            "zeros: seed {} k {} found {} on [-{w}, {w}], mean gap {:.4}, max |gap - 1| {:.4}",
            s.seed(),
            cfg.k,
            zs.zeros.len(),
            report.mean_gap,
            report.max_abs_dev_from_1,
            w = cfg.zero_window
        );
    }
    write_csv(&cfg.output_dir.join("zeros.csv"), cfg, &rows)?;
    write_csv(&cfg.output_dir.join("fractional_parts.csv"), cfg, &fractions)?;
    Ok(Stage {
        numerical_failure: over_quota(failures, samples.len()),
    })
}

fn run_verify(cfg: &RunConfig) -> Result<Stage> {
    if cfg.points.is_some() {
        return Err(LabError::invalid("verify runs on sampled replicas; drop --points"));
    }
    let ens = cfg.ensemble();
    let summaries = run_replicas(&ens)?;
    let report = summarize(&ens, &summaries, SADDLE_OFFSET_P95)?;
    let hash = cfg.hash();
    write_json_lines(
        &cfg.output_dir.join(format!("replicas-{hash}.jsonl")),
        cfg,
        &summaries_to_json_lines(&summaries)?,
    )?;
    write_json(
        &cfg.output_dir.join(format!("summary-{hash}.json")),
        cfg,
        "report",
        serde_json::to_value(&report)?,
    )?;
    for t in &report.tests {
        println!("verify: {}", t.line());
    }
    println!(
        "verify: k {} replicas {} failures {} summary-{hash}.json",
        cfg.k, cfg.replicas, report.n_failures
    );
    Ok(Stage {
        numerical_failure: over_quota(report.n_failures, summaries.len()),
    })
}

fn run(command: Command, cfg: &RunConfig) -> Result<bool> {
    fs::create_dir_all(&cfg.output_dir)?;
    let stages: &[fn(&RunConfig) -> Result<Stage>] = match command {
        Command::Sample => &[run_sample],
        Command::Coeffs => &[run_coeffs],
        Command::Saddle => &[run_saddle],
        Command::Contour => &[run_contour],
        Command::Zeros => &[run_zeros],
        Command::Verify => &[run_verify],
        Command::All => &[run_sample, run_coeffs, run_saddle, run_contour, run_zeros, run_verify],
    };
    let mut failed = false;
    for stage in stages {
        failed |= stage(cfg)?.numerical_failure;
    }
    Ok(failed)
}

fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::SaddleFailure { .. } | LabError::Pole { .. } | LabError::WindowTooLarge { .. } => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

/// Parse `argv`, run, and return the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let cfg = match RunConfig::resolve(cli.command, &cli.flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    if let Some(n) = cfg.threads {
        // a global pool may already exist when called repeatedly in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command, &cfg) {
        Ok(false) => EXIT_OK,
        Ok(true) => EXIT_NUMERICAL,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
