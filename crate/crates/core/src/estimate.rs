//! The common face of all estimators: options, result record and dispatch.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{CodecConfig, Rounding};
use crate::error::{Error, Result};
use crate::functions::FunctionDistribution;
use crate::multigrid::ParamOverrides;
use crate::rng::{machine_rng, StreamRng};
use crate::solver::SolverConfig;
use crate::{baselines, mre};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Mre,
    Avgm,
    #[serde(rename = "naive_1d")]
    Naive1d,
    OneBit,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Mre, Estimator::Avgm, Estimator::Naive1d, Estimator::OneBit];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mre => "mre",
            Estimator::Avgm => "avgm",
            Estimator::Naive1d => "naive_1d",
            Estimator::OneBit => "one_bit",
        }
    }

    /// Stable numeric tag used in seed derivation.
    pub fn id(self) -> u8 {
        match self {
            Estimator::Mre => 0,
            Estimator::Avgm => 1,
            Estimator::Naive1d => 2,
            Estimator::OneBit => 3,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s || (s == "mre_c_log" && *e == Estimator::Mre))
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}`")))
    }
}

/// Knobs shared by every estimator. Each one reads what it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorOptions {
    /// Replaces `log⁵(mn)` in the δ formula.
    pub polylog_factor: Option<f64>,
    /// Use disjoint sample halves for θ^i and F̂^i (needs n ≥ 2).
    pub strict_split: bool,
    pub rounding: Rounding,
    /// Gradient range multiplier for Δ quantization.
    pub loss_scale: f64,
    pub solver: SolverConfig,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            polylog_factor: None,
            strict_split: false,
            rounding: Rounding::Stochastic,
            loss_scale: 1.0,
            solver: SolverConfig::default(),
        }
    }
}

impl EstimatorOptions {
    pub fn param_overrides(&self) -> ParamOverrides {
        ParamOverrides { polylog_factor: self.polylog_factor }
    }

    pub fn codec_config(&self) -> CodecConfig {
        CodecConfig { rounding: self.rounding, loss_scale: self.loss_scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub estimator: Estimator,
    /// θ̂ in working coordinates.
    pub theta_hat: Vec<f64>,
    /// θ̂ in the distribution's native coordinates.
    pub theta_hat_native: Vec<f64>,
    /// `‖θ̂ - θ*‖₂` in native coordinates, when θ* is known.
    pub error: Option<f64>,
    /// Length of the longest message any machine could send.
    pub bits_per_signal: usize,
    pub total_bits: u64,
    /// Grid points that received no signal.
    pub uncovered: u64,
    /// Coordinates clamped into a quantizer range.
    pub clamped: u64,
    /// Machines whose local solver hit its iteration cap.
    pub solver_failures: u64,
}

impl EstimateResult {
    pub(crate) fn new(estimator: Estimator, dist: &FunctionDistribution, theta_hat: Vec<f64>) -> Self {
        EstimateResult {
            estimator,
            theta_hat_native: dist.domain().to_native(&theta_hat),
            error: dist.native_error(&theta_hat),
            theta_hat,
            bits_per_signal: 0,
            total_bits: 0,
            uncovered: 0,
            clamped: 0,
            solver_failures: 0,
        }
    }
}

pub fn run_estimator(
    estimator: Estimator,
    dist: &FunctionDistribution,
    m: u64,
    n: u64,
    opts: &EstimatorOptions,
    seed: u64,
) -> Result<EstimateResult> {
    match estimator {
        Estimator::Mre => mre::run_mre(dist, m, n, opts, seed),
        Estimator::Avgm => baselines::avgm(dist, m, n, opts, seed),
        Estimator::Naive1d => baselines::naive_1d(dist, m, n, opts, seed),
        Estimator::OneBit => baselines::one_bit(dist, m, n, opts, seed),
    }
}

/// Runs `f` once per machine, each with its own random stream, and
/// returns the outputs in machine order whatever the thread count.
pub(crate) fn per_machine<T, F>(m: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync + Send,
{
    (0..m as usize)
        .into_par_iter()
        .with_min_len(256)
        .map(|i| f(&mut machine_rng(seed, i)))
        .collect()
}

pub(crate) fn require_machines(m: u64) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one machine".into()));
    }
    Ok(())
}

pub(crate) fn require_samples(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample per machine".into()));
    }
    Ok(())
}
