//! Projected gradient descent over the cube, used for every empirical
//! minimizer in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{clamp_to_cube, Point, SampleFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed(f64),
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Stop once the projected gradient `‖x - clamp(x - ∇f(x))‖` is below this.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iters: 10_000, step_rule: StepRule::Backtracking, tolerance: 1e-8 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("solver max_iters must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("solver tolerance must be positive".into()));
        }
        if let StepRule::Fixed(eta) = self.step_rule {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidParameter("fixed step must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub point: Point,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimizes the average of `fs` over `[-1, 1]^d`.
pub fn minimize_empirical(fs: &[SampleFunction], cfg: &SolverConfig) -> Result<SolverResult> {
    let first = fs
        .first()
        .ok_or_else(|| Error::InvalidParameter("cannot minimize an empty sum".into()))?;
    let d = first.dim();
    if let Some(f) = fs.iter().find(|f| f.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: f.dim() });
    }
    cfg.validate()?;
    if fs.len() == 1 {
        return Ok(minimize(first, cfg));
    }
    Ok(minimize(&SampleFunction::Mean(fs.to_vec()), cfg))
}

/// Minimizes a single function; `cfg` is assumed valid.
pub fn minimize(f: &SampleFunction, cfg: &SolverConfig) -> SolverResult {
    let d = f.dim();
    let mut x = vec![0.0; d];
    let mut fx = f.value(&x);
    let mut g = vec![0.0; d];
    f.gradient_into(&x, &mut g);

    let mut trial = vec![0.0; d];
    let mut g_new = vec![0.0; d];
    let mut eta = 1.0;
    let mut best = (x.clone(), fx);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        if projected_gradient_norm(&x, &g) <= cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let f_trial = match cfg.step_rule {
            StepRule::Fixed(step) => {
                step_to(&x, &g, step, &mut trial);
                f.value(&trial)
            }
            StepRule::Backtracking => {
                let slack = 1e-14 * (1.0 + fx.abs());
                let mut accepted = None;
                for _ in 0..80 {
                    step_to(&x, &g, eta, &mut trial);
                    let ft = f.value(&trial);
                    let (mut lin, mut sq) = (0.0, 0.0);
                    for j in 0..d {
                        let diff = trial[j] - x[j];
                        lin += g[j] * diff;
                        sq += diff * diff;
                    }
                    if ft <= fx + lin + sq / (2.0 * eta) + slack {
                        accepted = Some(ft);
                        break;
                    }
                    eta *= 0.5;
                }
                match accepted {
                    Some(ft) => ft,
                    // The step shrank to nothing: x is stationary to roundoff.
                    None => break,
                }
            }
        };
        f.gradient_into(&trial, &mut g_new);

        if let StepRule::Backtracking = cfg.step_rule {
            // Barzilai-Borwein guess for the next trial step.
            let (mut ss, mut sy) = (0.0, 0.0);
            for j in 0..d {
                let s = trial[j] - x[j];
                ss += s * s;
                sy += s * (g_new[j] - g[j]);
            }
            eta = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { (eta * 2.0).min(1e10) };
        }

        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_trial;
        if fx < best.1 || !best.1.is_finite() {
            best = (x.clone(), fx);
        }
    }
    if converged {
        best = (x, fx);
    }
    SolverResult { point: Point::clamped(best.0), value: best.1, converged, iterations }
}

fn step_to(x: &[f64], g: &[f64], eta: f64, out: &mut [f64]) {
    for ((o, xi), gi) in out.iter_mut().zip(x).zip(g) {
        *o = xi - eta * gi;
    }
    clamp_to_cube(out);
}

fn projected_gradient_norm(x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .map(|(xi, gi)| {
            let r = xi - (xi - gi).clamp(-1.0, 1.0);
            r * r
        })
        .sum::<f64>()
        .sqrt()
}
