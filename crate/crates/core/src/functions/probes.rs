//! Randomized checks of the regularity conditions: convexity, gradient
//! consistency, the normalization bounds and strong convexity of `F`.
//!
//! Each probe returns a [`ProbeReport`] rather than panicking so the same
//! code backs unit tests, the acceptance suite and `selfcheck`.

use rand::Rng;

use super::{FunctionDistribution, SampleFunction};

/// Finite-difference step used by [`gradient_consistency`].
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub name: &'static str,
    pub draws: usize,
    pub failures: usize,
    /// Largest observed violation (same units as the probe's inequality).
    pub worst: f64,
}

impl ProbeReport {
    fn new(name: &'static str) -> Self {
        ProbeReport { name, draws: 0, failures: 0, worst: 0.0 }
    }

    fn record(&mut self, violation: f64, tolerance: f64) {
        self.draws += 1;
        if violation > tolerance || violation.is_nan() {
            self.failures += 1;
        }
        if violation > self.worst || violation.is_nan() {
            self.worst = violation;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn interior_point<R: Rng + ?Sized>(rng: &mut R, d: usize, margin: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0 + margin..=1.0 - margin)).collect()
}

/// `f(λa + (1-λ)b) ≤ λ f(a) + (1-λ) f(b) + 1e-9` for random samples.
pub fn convexity<R: Rng + ?Sized>(dist: &FunctionDistribution, draws: usize, rng: &mut R) -> ProbeReport {
    let mut report = ProbeReport::new("convexity");
    let d = dist.dim();
    for _ in 0..draws {
        let f = dist.sample(rng);
        let a = interior_point(rng, d, 0.0);
        let b = interior_point(rng, d, 0.0);
        let w: f64 = rng.random();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| w * x + (1.0 - w) * y).collect();
        let gap = f.value(&mid) - (w * f.value(&a) + (1.0 - w) * f.value(&b));
        report.record(gap, 1e-9);
    }
    report
}

/// Largest relative disagreement between the gradient and a central
/// difference, `|fd - g| / max(|g|, 1)` over coordinates.
pub fn fd_relative_error(f: &SampleFunction, theta: &[f64]) -> f64 {
    let g = f.gradient(theta).expect("probe dimension");
    let mut x = theta.to_vec();
    let mut worst = 0.0f64;
    for j in 0..theta.len() {
        x[j] = theta[j] + FD_STEP;
        let up = f.value(&x);
        x[j] = theta[j] - FD_STEP;
        let down = f.value(&x);
        x[j] = theta[j];
        let fd = (up - down) / (2.0 * FD_STEP);
        worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
    }
    worst
}

pub fn gradient_consistency<R: Rng + ?Sized>(
    dist: &FunctionDistribution,
    draws: usize,
    rng: &mut R,
) -> ProbeReport {
    let mut report = ProbeReport::new("gradient_consistency");
    for _ in 0..draws {
        let f = dist.sample(rng);
        let theta = interior_point(rng, dist.dim(), 1e-3);
        report.record(fd_relative_error(&f, &theta), 1e-5);
    }
    report
}

/// `|f| ≤ √d`, `‖∇f‖ ≤ 1` and `‖∇f(a) - ∇f(b)‖ ≤ ‖a - b‖`, reported as
/// the worst excess over the bound. Exempt distributions still run; the
/// caller decides whether failures matter.
pub fn normalization_bounds<R: Rng + ?Sized>(
    dist: &FunctionDistribution,
    draws: usize,
    rng: &mut R,
) -> ProbeReport {
    let mut report = ProbeReport::new("normalization_bounds");
    let d = dist.dim();
    let root_d = (d as f64).sqrt();
    for _ in 0..draws {
        let f = dist.sample(rng);
        let a = interior_point(rng, d, 0.0);
        let b = interior_point(rng, d, 0.0);
        let (ga, gb) = (f.gradient(&a).unwrap(), f.gradient(&b).unwrap());
        let value_excess = f.value(&a).abs() - root_d;
        let grad_excess = super::norm2(&ga) - 1.0;
        let gd: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| x - y).collect();
        let lip_excess = super::norm2(&gd) - super::dist2(&a, &b);
        report.record(value_excess.max(grad_excess).max(lip_excess), 1e-12);
    }
    report
}

/// `F(b) ≥ F(a) + ∇F(a)ᵀ(b - a) + λ‖b - a‖²` with the analytic oracles.
/// Returns `None` when λ or the oracles are unavailable.
pub fn strong_convexity<R: Rng + ?Sized>(
    dist: &FunctionDistribution,
    draws: usize,
    rng: &mut R,
) -> Option<ProbeReport> {
    let lambda = dist.known_lambda()?;
    let d = dist.dim();
    let mut report = ProbeReport::new("strong_convexity");
    for _ in 0..draws {
        let a = interior_point(rng, d, 0.0);
        let b = interior_point(rng, d, 0.0);
        let fa = dist.expected_loss(&a)?;
        let fb = dist.expected_loss(&b)?;
        let g = dist.analytic_gradient(&a)?;
        let lin: f64 = g.iter().zip(b.iter().zip(&a)).map(|(gi, (bi, ai))| gi * (bi - ai)).sum();
        let r = super::dist2(&a, &b);
        let deficit = fa + lin + lambda * r * r - fb;
        report.record(deficit, 1e-12 * (1.0 + fb.abs()));
    }
    Some(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{make_distribution, DistributionKind, DistributionParams};
    use crate::rng::stream;

    fn all_distributions() -> Vec<FunctionDistribution> {
        let theta = DistributionParams { theta: Some(vec![0.3, 0.7]), ..Default::default() };
        let bowl = DistributionParams {
            centers: vec![vec![-0.4, 0.2], vec![0.6, -0.1], vec![0.1, 0.9]],
            ..Default::default()
        };
        vec![
            make_distribution(DistributionKind::TwoCubic, &DistributionParams::default(), 1).unwrap(),
            make_distribution(DistributionKind::Ridge, &theta, 2).unwrap(),
            make_distribution(DistributionKind::Logistic, &theta, 2).unwrap(),
            make_distribution(DistributionKind::QuadraticBowl, &bowl, 2).unwrap(),
        ]
    }

    #[test]
    fn every_distribution_is_convex_with_consistent_gradients() {
        let mut rng = stream(1, 0);
        for dist in all_distributions() {
            let c = convexity(&dist, 10_000, &mut rng);
            assert!(c.passed(), "{:?}: {c:?}", dist.kind());
            let g = gradient_consistency(&dist, 1_000, &mut rng);
            assert!(g.passed(), "{:?}: {g:?}", dist.kind());
        }
    }

    #[test]
    fn normalized_bowl_meets_the_bounds_and_exempt_kinds_do_not() {
        let mut rng = stream(2, 0);
        for dist in all_distributions() {
            let report = normalization_bounds(&dist, 10_000, &mut rng);
            if dist.assumption_exempt() {
                assert!(!report.passed(), "{:?} unexpectedly satisfies the bounds", dist.kind());
            } else {
                assert!(report.passed(), "{report:?}");
            }
        }
    }

    #[test]
    fn declared_lambda_is_a_valid_strong_convexity_constant() {
        let mut rng = stream(3, 0);
        for dist in all_distributions() {
            if let Some(report) = strong_convexity(&dist, 10_000, &mut rng) {
                assert!(report.passed(), "{:?}: {report:?}", dist.kind());
            }
        }
    }
}
