//! Experiment configuration, read from TOML.
//!
//! ```toml
//! estimators = ["mre", "avgm"]
//! m = [1000, 10000, 100000]
//! n = 1
//! repetitions = 50
//! master_seed = 1
//! workers = 1
//! output = "results.csv"
//! timing = false
//!
//! [distribution]
//! kind = "ridge"                 # two_cubic | ridge | logistic | quadratic_bowl
//! d = 2
//! theta = { uniform = [-0.5, 0.5] }   # or a fixed list, e.g. [0.3, 0.7]
//!
//! [options]
//! polylog_factor = 4.0
//! rounding = "stochastic"        # or "midpoint"
//! loss_scale = 1.0
//! strict_split = false
//!
//! [options.solver]
//! max_iters = 10000
//! tolerance = 1e-8
//! step_rule = "backtracking"     # or { fixed = 0.5 }
//! ```

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Estimator, EstimatorOptions};
use crate::functions::{make_distribution, DistributionKind, DistributionParams, FunctionDistribution};
use crate::rng::{stream, DISTRIBUTION_STREAM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Fixed(Vec<f64>),
    Uniform { uniform: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default)]
    pub theta: Option<ThetaSpec>,
    #[serde(default)]
    pub centers: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub curvature: Option<f64>,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_penalty")]
    pub ridge_penalty: f64,
}

fn one() -> usize {
    1
}

fn default_noise() -> f64 {
    DistributionParams::default().noise_sd
}

fn default_penalty() -> f64 {
    DistributionParams::default().ridge_penalty
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind, d: usize) -> Self {
        DistributionSpec {
            kind,
            d,
            theta: None,
            centers: Vec::new(),
            weights: Vec::new(),
            curvature: None,
            noise_sd: default_noise(),
            ridge_penalty: default_penalty(),
        }
    }

    /// Builds the distribution for one problem instance. A random θ is drawn
    /// from a dedicated stream of `instance_seed`.
    pub fn instantiate(&self, instance_seed: u64) -> Result<FunctionDistribution> {
        let theta = match &self.theta {
            None => None,
            Some(ThetaSpec::Fixed(v)) => Some(v.clone()),
            Some(ThetaSpec::Uniform { uniform: [lo, hi] }) => {
                if !(lo < hi) {
                    return Err(Error::Config(format!("theta range [{lo}, {hi}] is empty")));
                }
                let mut rng = stream(instance_seed, DISTRIBUTION_STREAM);
                Some((0..self.d).map(|_| rng.random_range(*lo..*hi)).collect())
            }
        };
        let params = DistributionParams {
            theta,
            centers: self.centers.clone(),
            weights: self.weights.clone(),
            curvature: self.curvature,
            noise_sd: self.noise_sd,
            ridge_penalty: self.ridge_penalty,
        };
        make_distribution(self.kind, &params, self.d)
    }

    pub fn is_random(&self) -> bool {
        matches!(self.theta, Some(ThetaSpec::Uniform { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub estimators: Vec<Estimator>,
    pub m: Vec<u64>,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default = "default_reps")]
    pub repetitions: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Record wall-clock times. Off by default so reruns are byte-identical.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub options: EstimatorOptions,
}

fn default_n() -> u64 {
    1
}

fn default_reps() -> u64 {
    50
}

fn default_workers() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("results.csv")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("list at least one estimator".into()));
        }
        if self.m.is_empty() || self.m.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("m values must be non-empty and strictly increasing".into()));
        }
        if self.m[0] == 0 || self.n == 0 {
            return Err(Error::Config("m and n must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let mut seen = self.estimators.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(Error::Config("estimators must not repeat".into()));
        }
        self.options.solver.validate()?;
        // Catch bad distribution parameters before the sweep starts.
        self.distribution.instantiate(0)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
estimators = ["mre", "avgm"]
m = [1000, 10000]
repetitions = 3
master_seed = 9

[distribution]
kind = "ridge"
d = 2
theta = { uniform = [-0.5, 0.5] }

[options]
polylog_factor = 4.0
rounding = "midpoint"

[options.solver]
step_rule = { fixed = 0.25 }
"#;

    #[test]
    fn parses_the_documented_layout() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.estimators, vec![Estimator::Mre, Estimator::Avgm]);
        assert_eq!(cfg.n, 1);
        assert_eq!(cfg.options.polylog_factor, Some(4.0));
        assert_eq!(cfg.options.solver.step_rule, crate::solver::StepRule::Fixed(0.25));
        assert_eq!(cfg.options.solver.max_iters, 10_000);
        assert!(cfg.distribution.is_random());
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn random_theta_is_per_instance_and_reproducible() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        let a = cfg.distribution.instantiate(1).unwrap();
        let b = cfg.distribution.instantiate(1).unwrap();
        let c = cfg.distribution.instantiate(2).unwrap();
        assert_eq!(a.known_minimizer(), b.known_minimizer());
        assert_ne!(a.known_minimizer(), c.known_minimizer());
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad_m = EXAMPLE.replace("m = [1000, 10000]", "m = [10000, 1000]");
        assert!(matches!(ExperimentConfig::from_toml(&bad_m), Err(Error::Config(_))));
        let bad_reps = EXAMPLE.replace("repetitions = 3", "repetitions = 0");
        assert!(ExperimentConfig::from_toml(&bad_reps).is_err());
        let bad_kind = EXAMPLE.replace("kind = \"ridge\"", "kind = \"huber\"");
        assert!(ExperimentConfig::from_toml(&bad_kind).is_err());
        let unknown = EXAMPLE.replace("master_seed = 9", "master_seed = 9\ncolour = 3");
        assert!(ExperimentConfig::from_toml(&unknown).is_err());
    }
}
