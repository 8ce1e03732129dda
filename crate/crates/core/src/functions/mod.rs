//! Sample losses, the distributions they are drawn from, and probes that
//! check the regularity conditions the estimators rely on.
//!
//! All estimators work in *working coordinates*, the cube `[-1, 1]^d`. A
//! distribution whose natural domain is different (the two-cubic example
//! lives on `[0, 1]`) carries a [`DomainMap`] that converts results back to
//! native coordinates for reporting.

mod distribution;
pub mod probes;

pub use distribution::{
    make_distribution, DistributionKind, DistributionParams, FunctionDistribution,
    GradientEstimate,
};

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the working cube `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("a point needs at least one coordinate".into()));
        }
        if let Some(c) = coords.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
            return Err(Error::InvalidParameter(format!("coordinate {c} outside [-1, 1]")));
        }
        Ok(Point(coords))
    }

    /// Clamps every coordinate into the cube.
    pub fn clamped(mut coords: Vec<f64>) -> Self {
        clamp_to_cube(&mut coords);
        Point(coords)
    }

    pub fn center(d: usize) -> Self {
        Point(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn clamp_to_cube(x: &mut [f64]) {
    for c in x {
        *c = c.clamp(-1.0, 1.0);
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Per-coordinate affine map `native = offset + scale * working`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainMap {
    pub offset: f64,
    pub scale: f64,
}

impl DomainMap {
    pub const IDENTITY: DomainMap = DomainMap { offset: 0.0, scale: 1.0 };
    /// `[-1, 1]` onto `[0, 1]`.
    pub const UNIT_INTERVAL: DomainMap = DomainMap { offset: 0.5, scale: 0.5 };

    pub fn to_native(&self, working: &[f64]) -> Vec<f64> {
        working.iter().map(|w| self.offset + self.scale * w).collect()
    }

    pub fn to_working(&self, native: &[f64]) -> Vec<f64> {
        native.iter().map(|v| (v - self.offset) / self.scale).collect()
    }

    /// Converts a working-coordinate distance into native units.
    pub fn native_length(&self, working_length: f64) -> f64 {
        working_length * self.scale.abs()
    }
}

/// A convex differentiable loss on the working cube.
///
/// Every variant is fully described by its parameters, so a sample can be
/// rebuilt deterministically from its descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SampleFunction {
    /// `g(u) = (u - shift)^2 + (u - shift)^3 / 6` with `u = (θ + 1) / 2`.
    /// `shift = 0` is f₀ of the two-cubic example, `shift = 1` is f₁.
    Cubic { shift: f64 },
    /// Convex combination `(1 - q) f₀ + q f₁` of the two cubics.
    CubicMix { q: f64 },
    /// `(θᵀx - y)^2 + reg ‖θ‖²`.
    Ridge { x: Vec<f64>, y: f64, reg: f64 },
    /// `θᵀ G θ - 2 θᵀ b + c + reg ‖θ‖²`: the mean of several ridge samples.
    LeastSquares { gram: Vec<f64>, xy: Vec<f64>, yy: f64, reg: f64 },
    /// `log(1 + exp(-y θᵀx))` with `y ∈ {-1, 1}`.
    Logistic { x: Vec<f64>, y: f64 },
    /// `a ‖θ - c‖² + offset`.
    Quadratic { curvature: f64, center: Vec<f64>, offset: f64 },
    /// Arithmetic mean of the inner functions.
    Mean(Vec<SampleFunction>),
}

impl SampleFunction {
    pub fn dim(&self) -> usize {
        match self {
            SampleFunction::Cubic { .. } | SampleFunction::CubicMix { .. } => 1,
            SampleFunction::Ridge { x, .. } | SampleFunction::Logistic { x, .. } => x.len(),
            SampleFunction::LeastSquares { xy, .. } => xy.len(),
            SampleFunction::Quadratic { center, .. } => center.len(),
            SampleFunction::Mean(fs) => fs.first().map_or(0, SampleFunction::dim),
        }
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.len() });
        }
        Ok(())
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        self.check_dim(theta)?;
        Ok(self.value(theta))
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        let mut g = vec![0.0; theta.len()];
        self.gradient_into(theta, &mut g);
        Ok(g)
    }

    /// Unchecked evaluation; `theta` must have the function's dimension.
    pub fn value(&self, theta: &[f64]) -> f64 {
        match self {
            SampleFunction::Cubic { shift } => cubic(to_unit(theta[0]) - shift),
            SampleFunction::CubicMix { q } => {
                let u = to_unit(theta[0]);
                (1.0 - q) * cubic(u) + q * cubic(u - 1.0)
            }
            SampleFunction::Ridge { x, y, reg } => {
                let r = dot(theta, x) - y;
                r * r + reg * dot(theta, theta)
            }
            SampleFunction::LeastSquares { gram, xy, yy, reg } => {
                let d = xy.len();
                let mut quad = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        quad += theta[i] * gram[i * d + j] * theta[j];
                    }
                }
                quad - 2.0 * dot(theta, xy) + yy + reg * dot(theta, theta)
            }
            SampleFunction::Logistic { x, y } => softplus(-y * dot(theta, x)),
            SampleFunction::Quadratic { curvature, center, offset } => {
                curvature * sq_dist(theta, center) + offset
            }
            SampleFunction::Mean(fs) => {
                fs.iter().map(|f| f.value(theta)).sum::<f64>() / fs.len() as f64
            }
        }
    }

    /// Unchecked gradient, written into `out` (overwritten, not accumulated).
    pub fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        match self {
            SampleFunction::Cubic { shift } => {
                out[0] = 0.5 * cubic_derivative(to_unit(theta[0]) - shift);
            }
            SampleFunction::CubicMix { q } => {
                let u = to_unit(theta[0]);
                out[0] = 0.5 * ((1.0 - q) * cubic_derivative(u) + q * cubic_derivative(u - 1.0));
            }
            SampleFunction::Ridge { x, y, reg } => {
                let r = dot(theta, x) - y;
                for ((o, xi), t) in out.iter_mut().zip(x).zip(theta) {
                    *o = 2.0 * r * xi + 2.0 * reg * t;
                }
            }
            SampleFunction::LeastSquares { gram, xy, reg, .. } => {
                let d = xy.len();
                for i in 0..d {
                    let gi: f64 = (0..d).map(|j| gram[i * d + j] * theta[j]).sum();
                    out[i] = 2.0 * gi - 2.0 * xy[i] + 2.0 * reg * theta[i];
                }
            }
            SampleFunction::Logistic { x, y } => {
                let z = y * dot(theta, x);
                let w = -y * sigmoid(-z);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = w * xi;
                }
            }
            SampleFunction::Quadratic { curvature, center, .. } => {
                for ((o, t), c) in out.iter_mut().zip(theta).zip(center) {
                    *o = 2.0 * curvature * (t - c);
                }
            }
            SampleFunction::Mean(fs) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut tmp = vec![0.0; out.len()];
                for f in fs {
                    f.gradient_into(theta, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += t;
                    }
                }
                let k = fs.len() as f64;
                out.iter_mut().for_each(|o| *o /= k);
            }
        }
    }

    /// The mean of `fs`; a single function is returned as is.
    pub fn mean_of(fs: Vec<SampleFunction>) -> SampleFunction {
        if fs.len() == 1 {
            return fs.into_iter().next().unwrap();
        }
        SampleFunction::Mean(fs)
    }
}

#[inline]
fn to_unit(theta: f64) -> f64 {
    0.5 * (theta + 1.0)
}

#[inline]
fn cubic(v: f64) -> f64 {
    v * v + v * v * v / 6.0
}

#[inline]
fn cubic_derivative(v: f64) -> f64 {
    2.0 * v + 0.5 * v * v
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `log(1 + e^t)` without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn native(theta_native: f64) -> Vec<f64> {
        DomainMap::UNIT_INTERVAL.to_working(&[theta_native])
    }

    #[test]
    fn two_cubic_components_vanish_at_their_roots() {
        let f0 = SampleFunction::Cubic { shift: 0.0 };
        let f1 = SampleFunction::Cubic { shift: 1.0 };
        assert_abs_diff_eq!(f0.evaluate(&native(0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(f1.evaluate(&native(1.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(f0.gradient(&native(0.0)).unwrap()[0], 0.0);
    }

    #[test]
    fn ridge_hand_values() {
        let f = SampleFunction::Ridge { x: vec![1.0, 0.0], y: 1.0, reg: 0.1 };
        assert_abs_diff_eq!(f.evaluate(&[0.0, 0.0]).unwrap(), 1.0);
        let g = f.gradient(&[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g[0], -2.0);
        assert_abs_diff_eq!(g[1], 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = SampleFunction::Ridge { x: vec![1.0, 0.0], y: 1.0, reg: 0.1 };
        assert!(matches!(f.evaluate(&[0.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
        assert!(f.gradient(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn least_squares_matches_mean_of_ridge_samples() {
        let a = SampleFunction::Ridge { x: vec![0.3, -1.2], y: 0.4, reg: 0.1 };
        let b = SampleFunction::Ridge { x: vec![1.1, 0.5], y: -0.7, reg: 0.1 };
        let mean = SampleFunction::Mean(vec![a, b]);
        let gram = vec![
            (0.09 + 1.21) / 2.0,
            (-0.36 + 0.55) / 2.0,
            (-0.36 + 0.55) / 2.0,
            (1.44 + 0.25) / 2.0,
        ];
        let xy = vec![(0.3 * 0.4 + 1.1 * -0.7) / 2.0, (-1.2 * 0.4 + 0.5 * -0.7) / 2.0];
        let ls = SampleFunction::LeastSquares { gram, xy, yy: (0.16 + 0.49) / 2.0, reg: 0.1 };
        let theta = [0.25, -0.6];
        assert_abs_diff_eq!(mean.value(&theta), ls.value(&theta), epsilon = 1e-12);
        let (ga, gb) = (mean.gradient(&theta).unwrap(), ls.gradient(&theta).unwrap());
        assert_abs_diff_eq!(ga[0], gb[0], epsilon = 1e-12);
        assert_abs_diff_eq!(ga[1], gb[1], epsilon = 1e-12);
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        let f = SampleFunction::Logistic { x: vec![800.0], y: 1.0 };
        assert!(f.value(&[-1.0]).is_finite());
        assert_abs_diff_eq!(f.value(&[1.0]), 0.0, epsilon = 1e-300);
        assert_abs_diff_eq!(f.gradient(&[-1.0]).unwrap()[0], -800.0, epsilon = 1e-9);
    }

    #[test]
    fn point_rejects_out_of_cube_coordinates() {
        assert!(Point::new(vec![0.5, 1.5]).is_err());
        assert!(Point::new(vec![]).is_err());
        assert_eq!(Point::clamped(vec![2.0, -3.0]).coords(), &[1.0, -1.0]);
    }
}
