use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{dot, norm2, sigmoid, DomainMap, Point, SampleFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    TwoCubic,
    Ridge,
    Logistic,
    QuadraticBowl,
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "two_cubic" | "twocubic" => Ok(DistributionKind::TwoCubic),
            "ridge" => Ok(DistributionKind::Ridge),
            "logistic" => Ok(DistributionKind::Logistic),
            "quadratic_bowl" | "quadraticbowl" | "bowl" => Ok(DistributionKind::QuadraticBowl),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

/// Construction parameters. Fields a kind does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionParams {
    /// Ridge: the generating parameter. Logistic: the true parameter θ*.
    pub theta: Option<Vec<f64>>,
    /// Quadratic bowl component centers.
    pub centers: Vec<Vec<f64>>,
    /// Quadratic bowl mixture weights; uniform when empty.
    pub weights: Vec<f64>,
    /// Quadratic bowl curvature `a`. When absent it is chosen so that every
    /// component satisfies the gradient and smoothness bounds exactly.
    pub curvature: Option<f64>,
    /// Standard deviation of the ridge observation noise.
    pub noise_sd: f64,
    /// Ridge penalty weight.
    pub ridge_penalty: f64,
}

impl Default for DistributionParams {
    fn default() -> Self {
        DistributionParams {
            theta: None,
            centers: Vec::new(),
            weights: Vec::new(),
            curvature: None,
            noise_sd: 0.1,
            ridge_penalty: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
enum Model {
    TwoCubic,
    Ridge { theta_gen: Vec<f64>, noise_sd: f64, reg: f64 },
    Logistic { theta: Vec<f64> },
    Bowl { centers: Vec<Vec<f64>>, weights: Vec<f64>, curvature: f64 },
}

/// A sampler of [`SampleFunction`]s plus whatever is known in closed form
/// about the expected loss `F`.
///
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct FunctionDistribution {
    kind: DistributionKind,
    model: Model,
    dim: usize,
    known_minimizer: Option<Point>,
    known_lambda: Option<f64>,
    assumption_exempt: bool,
    domain: DomainMap,
}

/// Expected gradient, with a per-coordinate standard error when it was
/// estimated by Monte Carlo.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub mean: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

pub fn make_distribution(
    kind: DistributionKind,
    params: &DistributionParams,
    d: usize,
) -> Result<FunctionDistribution> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let dist = match kind {
        DistributionKind::TwoCubic => {
            if d != 1 {
                return Err(Error::InvalidParameter("the two-cubic distribution is one-dimensional".into()));
            }
            let u_star = (15f64.sqrt() - 3.0) / 2.0;
            FunctionDistribution {
                kind,
                model: Model::TwoCubic,
                dim: 1,
                known_minimizer: Some(Point(vec![2.0 * u_star - 1.0])),
                // F''(u) = (3 + 2u) / 2 ≥ 3/2 on [0, 1]; the strong convexity
                // constant is half of that, and d²/dθ² = (1/4) d²/du².
                known_lambda: Some(0.75 / 4.0),
                // |f₀(1)| = 7/6 and |f₀'| reaches 5/4 in working coordinates.
                assumption_exempt: true,
                domain: DomainMap::UNIT_INTERVAL,
            }
        }
        DistributionKind::Ridge => {
            let theta_gen = required_theta(params, d)?;
            let reg = params.ridge_penalty;
            if reg < 0.0 || params.noise_sd < 0.0 {
                return Err(Error::InvalidParameter("ridge penalty and noise must be non-negative".into()));
            }
            // E f(θ) = ‖θ - θg‖² + σ² + reg ‖θ‖², minimized at θg / (1 + reg).
            let minimizer: Vec<f64> = theta_gen.iter().map(|t| t / (1.0 + reg)).collect();
            check_interior(&minimizer)?;
            FunctionDistribution {
                kind,
                model: Model::Ridge { theta_gen, noise_sd: params.noise_sd, reg },
                dim: d,
                known_minimizer: Some(Point(minimizer)),
                known_lambda: Some(1.0 + reg),
                assumption_exempt: true,
                domain: DomainMap::IDENTITY,
            }
        }
        DistributionKind::Logistic => {
            let theta = required_theta(params, d)?;
            check_interior(&theta)?;
            FunctionDistribution {
                kind,
                known_minimizer: Some(Point(theta.clone())),
                model: Model::Logistic { theta },
                dim: d,
                known_lambda: None,
                assumption_exempt: true,
                domain: DomainMap::IDENTITY,
            }
        }
        DistributionKind::QuadraticBowl => make_bowl(params, d)?,
    };
    Ok(dist)
}

fn required_theta(params: &DistributionParams, d: usize) -> Result<Vec<f64>> {
    let theta = params
        .theta
        .clone()
        .ok_or_else(|| Error::InvalidParameter("this distribution needs `theta`".into()))?;
    if theta.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
    }
    Ok(theta)
}

fn check_interior(theta: &[f64]) -> Result<()> {
    if theta.iter().all(|t| t.abs() < 1.0) {
        Ok(())
    } else {
        Err(Error::MinimizerOutsideCube(theta.to_vec()))
    }
}

fn make_bowl(params: &DistributionParams, d: usize) -> Result<FunctionDistribution> {
    if params.centers.is_empty() {
        return Err(Error::InvalidParameter("a quadratic bowl needs at least one center".into()));
    }
    if let Some(c) = params.centers.iter().find(|c| c.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: c.len() });
    }
    let k = params.centers.len();
    let mut weights = if params.weights.is_empty() { vec![1.0; k] } else { params.weights.clone() };
    if weights.len() != k || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidParameter("bowl weights must be positive, one per center".into()));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    // ‖∇f‖ = 2a‖θ - c‖ ≤ 2a R with R the farthest cube corner from c.
    let normalized = params
        .centers
        .iter()
        .map(|c| {
            let far: Vec<f64> = c.iter().map(|ci| 1.0 + ci.abs()).collect();
            1.0 / (2.0 * norm2(&far))
        })
        .fold(f64::INFINITY, f64::min);
    let curvature = params.curvature.unwrap_or(normalized);
    if !(curvature > 0.0) {
        return Err(Error::InvalidParameter("bowl curvature must be positive".into()));
    }
    let centers_inside = params.centers.iter().all(|c| c.iter().all(|v| v.abs() <= 1.0));
    let exempt = !centers_inside || curvature > normalized * (1.0 + 1e-12);

    let mut minimizer = vec![0.0; d];
    for (c, w) in params.centers.iter().zip(&weights) {
        for (m, ci) in minimizer.iter_mut().zip(c) {
            *m += w * ci;
        }
    }
    check_interior(&minimizer)?;
    Ok(FunctionDistribution {
        kind: DistributionKind::QuadraticBowl,
        model: Model::Bowl { centers: params.centers.clone(), weights, curvature },
        dim: d,
        known_minimizer: Some(Point(minimizer)),
        known_lambda: Some(curvature),
        assumption_exempt: exempt,
        domain: DomainMap::IDENTITY,
    })
}

impl FunctionDistribution {
    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// θ* in working coordinates.
    pub fn known_minimizer(&self) -> Option<&Point> {
        self.known_minimizer.as_ref()
    }

    /// θ* in the distribution's native coordinates.
    pub fn native_minimizer(&self) -> Option<Vec<f64>> {
        self.known_minimizer.as_ref().map(|p| self.domain.to_native(p))
    }

    /// Strong convexity constant of `F` in working coordinates.
    pub fn known_lambda(&self) -> Option<f64> {
        self.known_lambda
    }

    /// Strong convexity constant of `F` in native coordinates.
    pub fn native_lambda(&self) -> Option<f64> {
        self.known_lambda.map(|l| l / (self.domain.scale * self.domain.scale))
    }

    pub fn assumption_exempt(&self) -> bool {
        self.assumption_exempt
    }

    pub fn domain(&self) -> DomainMap {
        self.domain
    }

    pub fn has_analytic_gradient(&self) -> bool {
        !matches!(self.model, Model::Logistic { .. })
    }

    /// Native-coordinate ℓ₂ error of a working-coordinate estimate.
    pub fn native_error(&self, theta_hat: &[f64]) -> Option<f64> {
        self.known_minimizer
            .as_ref()
            .map(|star| self.domain.native_length(super::dist2(theta_hat, star)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleFunction {
        match &self.model {
            Model::TwoCubic => SampleFunction::Cubic { shift: if rng.random::<bool>() { 1.0 } else { 0.0 } },
            Model::Ridge { theta_gen, noise_sd, reg } => {
                let x = normal_vector(rng, self.dim);
                let noise: f64 = rng.sample(StandardNormal);
                let y = dot(&x, theta_gen) + noise_sd * noise;
                SampleFunction::Ridge { x, y, reg: *reg }
            }
            Model::Logistic { theta } => {
                let x = normal_vector(rng, self.dim);
                let p = sigmoid(dot(&x, theta));
                let y = if rng.random::<f64>() < p { 1.0 } else { -1.0 };
                SampleFunction::Logistic { x, y }
            }
            Model::Bowl { centers, weights, curvature } => {
                let i = pick(rng, weights);
                SampleFunction::Quadratic { curvature: *curvature, center: centers[i].clone(), offset: 0.0 }
            }
        }
    }

    /// A function distributed as the mean of `k` independent samples.
    ///
    /// Mixture models are drawn through their component counts, and ridge
    /// samples are folded into sufficient statistics, so the cost does not
    /// grow with `k` for those kinds.
    pub fn sample_mean<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> SampleFunction {
        assert!(k >= 1, "sample_mean needs at least one sample");
        if k == 1 {
            return self.sample(rng);
        }
        match &self.model {
            Model::TwoCubic => {
                let ones = Binomial::new(k as u64, 0.5).expect("valid binomial").sample(rng);
                SampleFunction::CubicMix { q: ones as f64 / k as f64 }
            }
            Model::Bowl { centers, weights, curvature } => {
                let counts = multinomial(rng, k as u64, weights);
                let kf = k as f64;
                let mut center = vec![0.0; self.dim];
                let mut mean_sq = 0.0;
                for (c, &n) in centers.iter().zip(&counts) {
                    if n == 0 {
                        continue;
                    }
                    let w = n as f64 / kf;
                    for (m, ci) in center.iter_mut().zip(c) {
                        *m += w * ci;
                    }
                    mean_sq += w * dot(c, c);
                }
                let offset = curvature * (mean_sq - dot(&center, &center)).max(0.0);
                SampleFunction::Quadratic { curvature: *curvature, center, offset }
            }
            Model::Ridge { reg, .. } => {
                let d = self.dim;
                let (mut gram, mut xy, mut yy) = (vec![0.0; d * d], vec![0.0; d], 0.0);
                for _ in 0..k {
                    if let SampleFunction::Ridge { x, y, .. } = self.sample(rng) {
                        for i in 0..d {
                            xy[i] += x[i] * y;
                            for j in 0..d {
                                gram[i * d + j] += x[i] * x[j];
                            }
                        }
                        yy += y * y;
                    }
                }
                let kf = k as f64;
                gram.iter_mut().for_each(|g| *g /= kf);
                xy.iter_mut().for_each(|v| *v /= kf);
                SampleFunction::LeastSquares { gram, xy, yy: yy / kf, reg: *reg }
            }
            Model::Logistic { .. } => SampleFunction::Mean((0..k).map(|_| self.sample(rng)).collect()),
        }
    }

    /// `F(θ)` in closed form, when available.
    pub fn expected_loss(&self, theta: &[f64]) -> Option<f64> {
        match &self.model {
            Model::TwoCubic => Some(SampleFunction::CubicMix { q: 0.5 }.value(theta)),
            Model::Ridge { theta_gen, noise_sd, reg } => {
                let diff: f64 = theta.iter().zip(theta_gen).map(|(a, b)| (a - b) * (a - b)).sum();
                Some(diff + noise_sd * noise_sd + reg * dot(theta, theta))
            }
            Model::Bowl { centers, weights, curvature } => Some(
                centers
                    .iter()
                    .zip(weights)
                    .map(|(c, w)| {
                        w * curvature * theta.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    })
                    .sum(),
            ),
            Model::Logistic { .. } => None,
        }
    }

    /// `∇F(θ)` in closed form, when available.
    pub fn analytic_gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        match &self.model {
            Model::TwoCubic => Some(SampleFunction::CubicMix { q: 0.5 }.gradient(theta).ok()?),
            Model::Ridge { theta_gen, reg, .. } => {
                Some(theta.iter().zip(theta_gen).map(|(t, g)| 2.0 * (t - g) + 2.0 * reg * t).collect())
            }
            Model::Bowl { curvature, .. } => {
                let star = self.known_minimizer.as_ref()?;
                Some(theta.iter().zip(star.iter()).map(|(t, c)| 2.0 * curvature * (t - c)).collect())
            }
            Model::Logistic { .. } => None,
        }
    }

    /// `∇F(θ)`: analytic when possible, otherwise the Monte Carlo mean of
    /// `budget` fresh sample gradients with its standard error.
    pub fn expected_gradient<R: Rng + ?Sized>(
        &self,
        theta: &[f64],
        budget: usize,
        rng: &mut R,
    ) -> Result<GradientEstimate> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: theta.len() });
        }
        if let Some(mean) = self.analytic_gradient(theta) {
            return Ok(GradientEstimate { mean, stderr: None });
        }
        let budget = budget.max(1);
        let d = self.dim;
        let (mut sum, mut sum_sq, mut g) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        for _ in 0..budget {
            self.sample(rng).gradient_into(theta, &mut g);
            for j in 0..d {
                sum[j] += g[j];
                sum_sq[j] += g[j] * g[j];
            }
        }
        let b = budget as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / b).collect();
        let stderr = if budget > 1 {
            mean.iter()
                .zip(&sum_sq)
                .map(|(m, sq)| ((sq / b - m * m).max(0.0) * b / (b - 1.0) / b).sqrt())
                .collect()
        } else {
            vec![f64::INFINITY; d]
        };
        Ok(GradientEstimate { mean, stderr: Some(stderr) })
    }
}

fn normal_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn pick<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let mut u: f64 = rng.random();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Component counts of `n` draws, by sequential conditional binomials.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, weights: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; weights.len()];
    let (mut left, mut mass) = (n, 1.0f64);
    for (i, w) in weights.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == weights.len() {
            counts[i] = left;
            break;
        }
        let p = (w / mass).clamp(0.0, 1.0);
        let c = Binomial::new(left, p).expect("valid binomial").sample(rng);
        counts[i] = c;
        left -= c;
        mass -= w;
    }
    counts
}
