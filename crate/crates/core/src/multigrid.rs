//! Grid geometry: the coarse grid, the refinement cube around a coarse
//! point, the dyadic level grids inside it, and the resolution parameters.
//!
//! All logarithms are base 2.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::Point;

/// Hard cap on `t·d`, the bit width of a level-`t` index. Keeps grid
/// enumeration and the wire format within `u64`.
pub const MAX_INDEX_BITS: u32 = 40;

/// Optional knobs that change how [`MreParams`] are derived.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    /// Replaces the `log⁵(mn)` factor in the δ formula.
    pub polylog_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MreParams {
    pub d: usize,
    pub m: u64,
    pub n: u64,
    /// `log₂(mn)`.
    pub log_mn: f64,
    /// Coarse grid spacing, `min(log(mn)/√n, 2)`.
    pub h: f64,
    /// Coarse grid points per axis, `⌈2/h⌉`.
    pub coarse_per_axis: u64,
    /// Half-edge of the refinement cube `C_s`, `min(log(mn)/√n, 1)`.
    pub rho: f64,
    /// Unsnapped δ.
    pub delta_raw: f64,
    pub t: u32,
    /// `2^{-t}`.
    pub delta: f64,
    /// Accuracy radius `2√d·ρ·δ`.
    pub eps: f64,
    /// Δ quantization accuracy `2δρ`.
    pub quant_acc: f64,
}

impl MreParams {
    /// Edge length of `C_s`.
    pub fn cube_edge(&self) -> f64 {
        2.0 * self.rho
    }

    /// Relative selection weights `2^{(d-2)l}` for `l = 0..=t`.
    pub fn level_weights(&self) -> Vec<f64> {
        let e = self.d as f64 - 2.0;
        (0..=self.t).map(|l| (e * l as f64).exp2()).collect()
    }

    pub fn level_probabilities(&self) -> Vec<f64> {
        let w = self.level_weights();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// Number of addresses at `level`, `2^{level·d}`.
    pub fn level_size(&self, level: u32) -> u64 {
        1u64 << (level as u64 * self.d as u64)
    }
}

pub fn compute_params(d: usize, m: u64, n: u64, overrides: &ParamOverrides) -> Result<MreParams> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("m and n must be at least 1".into()));
    }
    let mn = (m as f64) * (n as f64);
    if mn < 2.0 {
        return Err(Error::InvalidParameter(format!("need m·n ≥ 2, got {mn}")));
    }
    let log_mn = mn.log2();
    let scale = log_mn / (n as f64).sqrt();
    let h = scale.min(2.0);
    let rho = scale.min(1.0);
    let coarse_per_axis = (2.0 / h - 1e-12).ceil().max(1.0) as u64;

    let polylog = match overrides.polylog_factor {
        Some(p) if p > 0.0 && p.is_finite() => p,
        Some(p) => return Err(Error::InvalidParameter(format!("polylog_factor must be positive, got {p}"))),
        None => log_mn.powi(5),
    };
    let root_d = (d as f64).sqrt();
    let exponent = 1.0 / d.max(2) as f64;
    let delta_raw = 4.0 * root_d * (polylog / m as f64).powf(exponent);
    let t_real = (1.0 / delta_raw).log2().round_ties_even().max(0.0);
    if t_real * d as f64 > MAX_INDEX_BITS as f64 {
        return Err(Error::InvalidParameter(format!(
            "refinement depth t = {t_real} in d = {d} exceeds the {MAX_INDEX_BITS}-bit index limit"
        )));
    }
    let t = t_real as u32;
    let delta = (-(t as f64)).exp2();
    Ok(MreParams {
        d,
        m,
        n,
        log_mn,
        h,
        coarse_per_axis,
        rho,
        delta_raw,
        t,
        delta,
        eps: 2.0 * root_d * rho * delta,
        quant_acc: 2.0 * delta * rho,
    })
}

/// Coordinate of coarse grid point `k` on one axis.
pub fn coarse_coordinate(params: &MreParams, k: u64) -> f64 {
    (-1.0 + params.h / 2.0 + k as f64 * params.h).clamp(-1.0, 1.0)
}

/// Index of the coarse point nearest to `θ`, coordinate by coordinate
/// (which also minimizes the ℓ∞ distance). Ties go to the smaller index.
pub fn nearest_coarse_index(params: &MreParams, theta: &[f64]) -> Vec<u64> {
    let k = params.coarse_per_axis;
    theta
        .iter()
        .map(|&x| {
            let guess = ((x + 1.0) / params.h - 0.5).floor().clamp(0.0, (k - 1) as f64) as u64;
            let mut best = guess;
            let mut best_dist = (coarse_coordinate(params, guess) - x).abs();
            for cand in [guess.saturating_sub(1), guess + 1] {
                if cand >= k || cand == guess {
                    continue;
                }
                let dist = (coarse_coordinate(params, cand) - x).abs();
                if dist < best_dist || (dist == best_dist && cand < best) {
                    best = cand;
                    best_dist = dist;
                }
            }
            best
        })
        .collect()
}

pub fn coarse_point(params: &MreParams, index: &[u64]) -> Point {
    Point::clamped(index.iter().map(|&k| coarse_coordinate(params, k)).collect())
}

pub fn nearest_coarse_point(params: &MreParams, theta: &[f64]) -> Point {
    coarse_point(params, &nearest_coarse_index(params, theta))
}

/// A point of the level grid `G̃_s^level`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridAddress {
    pub level: u32,
    pub index: Vec<u64>,
}

impl GridAddress {
    pub fn root(d: usize) -> Self {
        GridAddress { level: 0, index: vec![0; d] }
    }

    pub fn validate(&self, params: &MreParams) -> Result<()> {
        if self.level > params.t {
            return Err(Error::InvalidAddress(format!("level {} exceeds t = {}", self.level, params.t)));
        }
        if self.index.len() != params.d {
            return Err(Error::DimensionMismatch { expected: params.d, got: self.index.len() });
        }
        let side = 1u64 << self.level;
        if let Some(i) = self.index.iter().find(|&&i| i >= side) {
            return Err(Error::InvalidAddress(format!("index {i} out of range at level {}", self.level)));
        }
        Ok(())
    }

    pub fn parent(&self) -> Result<GridAddress> {
        if self.level == 0 {
            return Err(Error::RootHasNoParent);
        }
        Ok(GridAddress { level: self.level - 1, index: self.index.iter().map(|i| i / 2).collect() })
    }

    /// Lexicographic rank within its level (first coordinate most significant).
    pub fn linear(&self) -> u64 {
        self.index.iter().fold(0, |acc, &i| (acc << self.level) | i)
    }

    pub fn from_linear(level: u32, d: usize, mut linear: u64) -> GridAddress {
        let mask = (1u64 << level) - 1;
        let mut index = vec![0; d];
        for slot in index.iter_mut().rev() {
            *slot = linear & mask;
            linear >>= level;
        }
        GridAddress { level, index }
    }

    /// The `2^d` addresses one level down whose parent is `self`.
    pub fn children(&self) -> Vec<GridAddress> {
        let d = self.index.len();
        (0..1u64 << d)
            .map(|bits| GridAddress {
                level: self.level + 1,
                index: self
                    .index
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| 2 * i + ((bits >> (d - 1 - j)) & 1))
                    .collect(),
            })
            .collect()
    }
}

/// Cell center of `addr` inside `C_s`, clamped into the domain.
pub fn address_to_point(s: &[f64], params: &MreParams, addr: &GridAddress) -> Result<Point> {
    addr.validate(params)?;
    if s.len() != params.d {
        return Err(Error::DimensionMismatch { expected: params.d, got: s.len() });
    }
    Ok(Point::clamped(unclamped_point(s, params, addr)))
}

pub(crate) fn unclamped_point(s: &[f64], params: &MreParams, addr: &GridAddress) -> Vec<f64> {
    let edge = params.cube_edge();
    let cell = edge / (1u64 << addr.level) as f64;
    s.iter()
        .zip(&addr.index)
        .map(|(sj, &i)| sj - edge / 2.0 + (i as f64 + 0.5) * cell)
        .collect()
}

pub fn sample_level<R: Rng + ?Sized>(rng: &mut R, params: &MreParams) -> u32 {
    let weights = params.level_weights();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (l, w) in weights.iter().enumerate() {
        if u < *w {
            return l as u32;
        }
        u -= w;
    }
    params.t
}

pub fn sample_point<R: Rng + ?Sized>(rng: &mut R, params: &MreParams, level: u32) -> GridAddress {
    let side = 1u64 << level;
    GridAddress { level, index: (0..params.d).map(|_| rng.random_range(0..side)).collect() }
}
