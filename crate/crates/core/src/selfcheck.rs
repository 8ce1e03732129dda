//! A quick pass over the library's invariants, exposed through the CLI.

use rand::Rng;
use serde::Serialize;

use crate::codec::{Codec, CodecConfig, Rounding, Signal};
use crate::functions::{make_distribution, probes, DistributionKind, DistributionParams, FunctionDistribution, SampleFunction};
use crate::multigrid::{compute_params, GridAddress, ParamOverrides};
use crate::rng::{stream, PROBE_STREAM};
use crate::solver::{minimize_empirical, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

fn distributions() -> Vec<FunctionDistribution> {
    let theta = DistributionParams { theta: Some(vec![0.3, 0.7]), ..Default::default() };
    let bowl = DistributionParams { centers: vec![vec![-0.4, 0.2], vec![0.6, -0.1]], ..Default::default() };
    vec![
        make_distribution(DistributionKind::TwoCubic, &DistributionParams::default(), 1).expect("built-in"),
        make_distribution(DistributionKind::Ridge, &theta, 2).expect("built-in"),
        make_distribution(DistributionKind::Logistic, &theta, 2).expect("built-in"),
        make_distribution(DistributionKind::QuadraticBowl, &bowl, 2).expect("built-in"),
    ]
}

/// Runs every check with `draws` random draws per probe.
pub fn run_selfcheck(seed: u64, draws: usize) -> Vec<Check> {
    let mut rng = stream(seed, PROBE_STREAM);
    let mut out = Vec::new();

    for dist in distributions() {
        let kind = format!("{:?}", dist.kind());
        let mut reports = vec![
            probes::convexity(&dist, draws, &mut rng),
            probes::gradient_consistency(&dist, draws, &mut rng),
        ];
        if !dist.assumption_exempt() {
            reports.push(probes::normalization_bounds(&dist, draws, &mut rng));
        }
        reports.extend(probes::strong_convexity(&dist, draws, &mut rng));
        for r in reports {
            out.push(check(
                format!("{kind}/{}", r.name),
                r.passed(),
                format!("{} draws, {} failures, worst {:.3e}", r.draws, r.failures, r.worst),
            ));
        }
        if let (Some(star), true) = (dist.known_minimizer(), dist.has_analytic_gradient()) {
            let g = dist.analytic_gradient(star).expect("analytic");
            let norm = crate::functions::norm2(&g);
            out.push(check(format!("{kind}/stationary_minimizer"), norm <= 1e-9, format!("‖∇F(θ*)‖ = {norm:.3e}")));
        }
    }

    // One-sample ridge against its closed form.
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..draws.min(1000) {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
        let y = rng.random_range(-0.5..0.5);
        let Some(exact) = ridge_closed_form(&x, y, 0.1) else { continue };
        if exact.iter().any(|v| v.abs() >= 1.0) {
            continue;
        }
        let r = minimize_empirical(&[SampleFunction::Ridge { x, y, reg: 0.1 }], &cfg).expect("valid input");
        worst = worst.max(crate::functions::dist2(&r.point, &exact));
    }
    out.push(check("solver/ridge_closed_form", worst <= 1e-6, format!("worst distance {worst:.3e}")));

    // Codec round trips and quantization error.
    for (d, m, n) in [(1usize, 10_000u64, 1u64), (2, 100_000, 1), (3, 10_000, 256)] {
        let params = compute_params(d, m, n, &ParamOverrides { polylog_factor: Some(4.0) }).expect("valid");
        let codec = Codec::new(&params, CodecConfig::default()).expect("valid");
        let mut ok = true;
        let mut worst_q: f64 = 0.0;
        for _ in 0..draws {
            let level = rng.random_range(0..=params.t);
            let q = codec.quantizer(level);
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(q.lo..=q.hi)).collect();
            let (delta_q, _) = q.quantize(&v, Rounding::Stochastic, &mut rng);
            for (a, b) in q.dequantize(&delta_q).iter().zip(&v) {
                worst_q = worst_q.max((a - b).abs());
            }
            let sig = Signal {
                s_index: (0..d).map(|_| rng.random_range(0..params.coarse_per_axis)).collect(),
                addr: GridAddress { level, index: (0..d).map(|_| rng.random_range(0..1u64 << level)).collect() },
                delta_q,
            };
            let enc = codec.encode(&sig).expect("valid signal");
            ok &= enc.bit_length() == codec.bit_length(level) && codec.decode(&enc).ok() == Some(sig);
        }
        out.push(check(format!("codec/round_trip_d{d}"), ok, format!("{draws} signals")));
        out.push(check(
            format!("codec/quantization_error_d{d}"),
            worst_q <= params.quant_acc / 2.0,
            format!("worst {worst_q:.3e} vs quant_acc/2 = {:.3e}", params.quant_acc / 2.0),
        ));
        out.push(check(
            format!("codec/budget_d{d}"),
            codec.max_bit_length() <= codec.budget_bits(),
            format!("{} ≤ {} bits, measured c = {:.2}", codec.max_bit_length(), codec.budget_bits(), codec.measured_factor()),
        ));
    }
    out
}

/// Unconstrained minimizer of `(θᵀx - y)² + reg‖θ‖²` in two dimensions,
/// `(2xxᵀ + 2·reg·I)⁻¹ 2xy`, by Cramer's rule.
pub fn ridge_closed_form(x: &[f64], y: f64, reg: f64) -> Option<Vec<f64>> {
    let (a, b, d) = (2.0 * x[0] * x[0] + 2.0 * reg, 2.0 * x[0] * x[1], 2.0 * x[1] * x[1] + 2.0 * reg);
    let det = a * d - b * b;
    if det.abs() < 1e-300 {
        return None;
    }
    let (r0, r1) = (2.0 * x[0] * y, 2.0 * x[1] * y);
    Some(vec![(d * r0 - b * r1) / det, (a * r1 - b * r0) / det])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selfcheck_passes() {
        let checks = run_selfcheck(1, 500);
        let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(checks.len() > 15);
    }
}
