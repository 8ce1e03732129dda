use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::multigrid::MreParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Round to the nearest cell midpoint.
    Midpoint,
    /// Round randomly to one of the two neighbouring half-cell points, with
    /// probabilities that make the reconstruction unbiased.
    #[default]
    Stochastic,
}

/// Uniform quantizer on `[lo, hi]` with cells of width `acc`.
///
/// The `steps` cells are centered on the midpoint of the range. Codes run
/// over `0..=2·steps` and address the cell edges (even codes) and the cell
/// midpoints (odd codes): `value(code) = base + code·acc/2` where `base` is
/// the lower edge of the first cell. Midpoint rounding only emits odd
/// codes; stochastic rounding uses all of them. Either way the
/// reconstruction error is at most `acc/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub level: u32,
    pub lo: f64,
    pub hi: f64,
    pub acc: f64,
    pub steps: u64,
}

impl QuantizerSpec {
    pub fn new(level: u32, lo: f64, hi: f64, acc: f64) -> Self {
        // The tiny slack keeps exact multiples (width = k·acc) at k cells.
        let steps = ((hi - lo) / acc - 1e-9).ceil().max(1.0) as u64;
        QuantizerSpec { level, lo, hi, acc, steps }
    }

    /// Largest code, `2·steps`.
    pub fn max_code(&self) -> u64 {
        2 * self.steps
    }

    fn base(&self) -> f64 {
        0.5 * (self.lo + self.hi) - 0.5 * self.steps as f64 * self.acc
    }

    pub fn value(&self, code: u64) -> f64 {
        self.base() + code as f64 * 0.5 * self.acc
    }

    /// Quantizes one coordinate; the flag reports whether `v` had to be
    /// clamped into `[lo, hi]` first.
    pub fn quantize_one<R: Rng + ?Sized>(&self, v: f64, rounding: Rounding, rng: &mut R) -> (u64, bool) {
        let clamped = !(self.lo..=self.hi).contains(&v);
        let x = if v.is_nan() { 0.5 * (self.lo + self.hi) } else { v.clamp(self.lo, self.hi) };
        let pos = (x - self.base()) / (0.5 * self.acc);
        let top = self.max_code() as f64;
        let code = match rounding {
            Rounding::Midpoint => {
                let cell = (pos / 2.0).floor().clamp(0.0, self.steps as f64 - 1.0) as u64;
                2 * cell + 1
            }
            Rounding::Stochastic => {
                let pos = pos.clamp(0.0, top);
                let k = pos.floor().min(top - 1.0);
                let frac = pos - k;
                let up = frac > 0.0 && rng.random::<f64>() < frac;
                k as u64 + u64::from(up)
            }
        };
        (code, clamped)
    }

    /// Quantizes a vector; returns the codes and the number of clamped
    /// coordinates.
    pub fn quantize<R: Rng + ?Sized>(&self, v: &[f64], rounding: Rounding, rng: &mut R) -> (Vec<u64>, usize) {
        let mut clamped = 0;
        let codes = v
            .iter()
            .map(|&x| {
                let (c, hit) = self.quantize_one(x, rounding, rng);
                clamped += usize::from(hit);
                c
            })
            .collect();
        (codes, clamped)
    }

    pub fn dequantize(&self, codes: &[u64]) -> Vec<f64> {
        codes.iter().map(|&c| self.value(c)).collect()
    }
}

/// Quantizer for Δ at `level`, with gradient ranges scaled by `loss_scale`.
///
/// Level 0 carries a raw gradient, bounded by 1 per coordinate. Level
/// `l ≥ 1` carries a gradient difference across a parent edge of length
/// `2^{-l}√d·ρ`, bounded by that length for 1-smooth losses.
pub fn quantizer_for_level_scaled(params: &MreParams, level: u32, loss_scale: f64) -> QuantizerSpec {
    let half = if level == 0 {
        1.0
    } else {
        (-(level as f64)).exp2() * (params.d as f64).sqrt() * params.rho
    };
    let half = half * loss_scale;
    QuantizerSpec::new(level, -half, half, params.quant_acc * loss_scale)
}

pub fn quantizer_for_level(params: &MreParams, level: u32) -> QuantizerSpec {
    quantizer_for_level_scaled(params, level, 1.0)
}
