//! Constants pinned by calibration runs on seeds disjoint from those used
//! by the acceptance suite. Each records how it was obtained so it can be
//! regenerated with the CLI.

/// 95th percentile bound for `|σ_k - ik/π|/√k` at `k = 100`, `M = 1000`.
///
/// Calibration: `poisson-lab saddle --k 100 --sample-window 1000
/// --replicas 200 --base-seed 100000` gave an empirical 95th percentile of
/// 0.633; the bound adds a 25% margin.
pub const SADDLE_OFFSET_P95: f64 = 0.79;

/// Calibration base seed; acceptance runs use seeds far below it.
pub const CALIBRATION_BASE_SEED: u64 = 100_000;

/// Median bound for the cosine-profile sup error `sup |f^(k)/A_k - ψ_k|`
/// on `[-3, 3]` at `k = 80`, 50 replicas.
///
/// Calibration: `EnsembleConfig::new(80)` with 50 replicas from
/// `CALIBRATION_BASE_SEED` gave a median of 1.127 (an earlier exploratory
/// batch gave 0.834); the bound adds a 50% margin to the larger value.
pub const COSINE_SUP_K80_MEDIAN: f64 = 1.7;

/// Floor for the pooled share of interior zeros matched to the lattice
/// within `ε/c = 0.1` on `[-5, 5]` at `k = 100`.
///
/// Calibration: 100 replicas of `EnsembleConfig::new(100)` from
/// `CALIBRATION_BASE_SEED` gave a mean per-replica share of 0.502 and a
/// median of 0.348; the floor sits 20% under the mean.
pub const MATCH_FRACTION_K100_MEAN: f64 = 0.4;
