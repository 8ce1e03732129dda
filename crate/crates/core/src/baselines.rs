//! Comparison estimators: averaged local minimizers, the naive
//! one-dimensional derivative grid, and the one-bit estimator.

use rand::Rng;

use crate::codec::wire::width_for;
use crate::error::{Error, Result};
use crate::estimate::{per_machine, require_machines, require_samples, EstimateResult, Estimator, EstimatorOptions};
use crate::functions::FunctionDistribution;
use crate::solver::minimize;

/// Uniform `bits`-bit quantizer on `[-1, 1]` with midpoint reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuantizer {
    pub bits: u32,
}

impl UnitQuantizer {
    pub fn cells(&self) -> u64 {
        1u64 << self.bits
    }

    fn width(&self) -> f64 {
        2.0 / self.cells() as f64
    }

    /// Returns the cell index and whether `v` was outside `[-1, 1]`.
    pub fn quantize(&self, v: f64) -> (u64, bool) {
        let clamped = !(-1.0..=1.0).contains(&v);
        let x = v.clamp(-1.0, 1.0);
        let cell = ((x + 1.0) / self.width()).floor().clamp(0.0, (self.cells() - 1) as f64);
        (cell as u64, clamped)
    }

    pub fn value(&self, cell: u64) -> f64 {
        -1.0 + (cell as f64 + 0.5) * self.width()
    }
}

fn bits_for(count: f64) -> u32 {
    (count.log2().ceil() as u32).clamp(1, 52)
}

/// Every machine minimizes its own average loss and sends the minimizer,
/// quantized to `⌈log₂(mn)⌉` bits per coordinate; the server averages.
pub fn avgm(dist: &FunctionDistribution, m: u64, n: u64, opts: &EstimatorOptions, seed: u64) -> Result<EstimateResult> {
    require_machines(m)?;
    require_samples(n)?;
    opts.solver.validate()?;
    let d = dist.dim();
    let q = UnitQuantizer { bits: bits_for(m as f64 * n as f64) };
    let outputs = per_machine(m, seed, |rng| {
        let f = dist.sample_mean(n as usize, rng);
        let solved = minimize(&f, &opts.solver);
        let cells: Vec<u64> = solved.point.iter().map(|&x| q.quantize(x).0).collect();
        (cells, solved.converged)
    });
    let mut sum = vec![0.0; d];
    for (cells, _) in &outputs {
        for (acc, &c) in sum.iter_mut().zip(cells) {
            *acc += q.value(c);
        }
    }
    let theta_hat: Vec<f64> = sum.iter().map(|s| s / m as f64).collect();
    let mut result = EstimateResult::new(Estimator::Avgm, dist, theta_hat);
    result.bits_per_signal = d * q.bits as usize;
    result.total_bits = m * result.bits_per_signal as u64;
    result.solver_failures = outputs.iter().filter(|(_, ok)| !ok).count() as u64;
    Ok(result)
}

/// Number of grid points for the naive estimator, `⌈m^{1/3} / log₂ m⌉`.
pub fn naive_grid_size(m: u64) -> u64 {
    if m < 2 {
        return 1;
    }
    let m = m as f64;
    (m.cbrt() / m.log2()).ceil().max(1.0) as u64
}

/// Cell centers of `k` equal cells on `[-1, 1]`.
pub fn naive_grid_point(k: u64, j: u64) -> f64 {
    -1.0 + (2 * j + 1) as f64 / k as f64
}

/// Per-point derivative averages and the argmin rule of the naive
/// estimator. `None` entries are grid points that received nothing.
pub fn naive_argmin(averages: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, avg) in averages.iter().enumerate() {
        if let Some(v) = avg {
            if best.is_none_or(|(_, b)| v.abs() < b) {
                best = Some((j, v.abs()));
            }
        }
    }
    best.map(|(j, _)| j)
}

/// One-dimensional, one sample per machine: each machine reports the
/// derivative of its loss at a random grid point; the server returns the
/// grid point whose averaged derivative is smallest in magnitude.
pub fn naive_1d(dist: &FunctionDistribution, m: u64, n: u64, _opts: &EstimatorOptions, seed: u64) -> Result<EstimateResult> {
    require_machines(m)?;
    if dist.dim() != 1 {
        return Err(Error::Unsupported { estimator: "naive_1d".into(), reason: format!("needs d = 1, got d = {}", dist.dim()) });
    }
    if n != 1 {
        return Err(Error::Unsupported { estimator: "naive_1d".into(), reason: format!("needs n = 1, got n = {n}") });
    }
    let k = naive_grid_size(m);
    let q = UnitQuantizer { bits: bits_for(m as f64) };
    let signals = per_machine(m, seed, |rng| {
        let f = dist.sample(rng);
        let j = rng.random_range(0..k);
        let deriv = f.gradient(&[naive_grid_point(k, j)]).expect("d = 1")[0];
        let (cell, clamped) = q.quantize(deriv);
        (j, cell, clamped)
    });
    let mut sums = vec![0.0; k as usize];
    let mut counts = vec![0u64; k as usize];
    let mut clamped = 0;
    for &(j, cell, hit) in &signals {
        sums[j as usize] += q.value(cell);
        counts[j as usize] += 1;
        clamped += u64::from(hit);
    }
    let averages: Vec<Option<f64>> =
        sums.iter().zip(&counts).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect();
    let j = naive_argmin(&averages).expect("at least one machine reported");
    let mut result = EstimateResult::new(Estimator::Naive1d, dist, vec![naive_grid_point(k, j as u64)]);
    result.bits_per_signal = (width_for(k) + q.bits) as usize;
    result.total_bits = m * result.bits_per_signal as u64;
    result.uncovered = counts.iter().filter(|&&c| c == 0).count() as u64;
    result.clamped = clamped;
    Ok(result)
}

/// The bit a machine with local minimizer `theta_i` (working coordinates)
/// sends: `1` with probability `(θ^i + 1)/2`, clamped to `[0, 1]`.
pub fn one_bit_message<R: Rng + ?Sized>(theta_i: f64, rng: &mut R) -> bool {
    let u = ((theta_i + 1.0) / 2.0).clamp(0.0, 1.0);
    rng.random::<f64>() < u
}

/// The bit average mapped back to working coordinates.
pub fn one_bit_server(bits: &[bool]) -> f64 {
    let ones = bits.iter().filter(|&&b| b).count();
    2.0 * ones as f64 / bits.len() as f64 - 1.0
}

/// Each machine sends one bit, `1` with probability equal to its local
/// minimizer mapped onto `[0, 1]`; the server maps the bit average back.
pub fn one_bit(dist: &FunctionDistribution, m: u64, n: u64, opts: &EstimatorOptions, seed: u64) -> Result<EstimateResult> {
    require_machines(m)?;
    require_samples(n)?;
    opts.solver.validate()?;
    if dist.dim() != 1 {
        return Err(Error::Unsupported { estimator: "one_bit".into(), reason: format!("needs d = 1, got d = {}", dist.dim()) });
    }
    let bits = per_machine(m, seed, |rng| {
        let f = dist.sample_mean(n as usize, rng);
        let solved = minimize(&f, &opts.solver);
        (one_bit_message(solved.point[0], rng), solved.converged)
    });
    let received: Vec<bool> = bits.iter().map(|(b, _)| *b).collect();
    let mut result = EstimateResult::new(Estimator::OneBit, dist, vec![one_bit_server(&received)]);
    result.bits_per_signal = 1;
    result.total_bits = m;
    result.solver_failures = bits.iter().filter(|(_, ok)| !ok).count() as u64;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{make_distribution, DistributionKind, DistributionParams};
    use approx::assert_abs_diff_eq;

    fn bowl(centers: Vec<Vec<f64>>) -> FunctionDistribution {
        let d = centers[0].len();
        let params = DistributionParams { centers, ..Default::default() };
        make_distribution(DistributionKind::QuadraticBowl, &params, d).unwrap()
    }

    fn two_cubic() -> FunctionDistribution {
        make_distribution(DistributionKind::TwoCubic, &DistributionParams::default(), 1).unwrap()
    }

    #[test]
    fn unit_quantizer_midpoints() {
        let q = UnitQuantizer { bits: 2 };
        assert_eq!(q.quantize(-1.0), (0, false));
        assert_eq!(q.quantize(1.0), (3, false));
        assert_eq!(q.quantize(3.0), (3, true));
        assert_eq!(q.value(0), -0.75);
        assert_eq!(q.value(3), 0.75);
    }

    #[test]
    fn avgm_of_identical_functions_is_their_minimizer() {
        let dist = bowl(vec![vec![0.3, -0.45]]);
        let r = avgm(&dist, 50, 3, &EstimatorOptions::default(), 1).unwrap();
        let w = 2.0 / (1u64 << bits_for(150.0)) as f64;
        assert!((r.theta_hat[0] - 0.3).abs() <= w / 2.0);
        assert!((r.theta_hat[1] + 0.45).abs() <= w / 2.0);
        assert_eq!(r.bits_per_signal, 2 * 8);
    }

    #[test]
    fn avgm_is_stuck_near_one_half_on_two_cubic() {
        let r = avgm(&two_cubic(), 20_000, 1, &EstimatorOptions::default(), 5).unwrap();
        // Messages are 0 and 1 with equal probability: sd of the mean is 1/(2√m).
        assert_abs_diff_eq!(r.theta_hat_native[0], 0.5, epsilon = 4.0 / (2.0 * (20_000f64).sqrt()));
        assert!(r.error.unwrap() > 0.05);
    }

    #[test]
    fn naive_grid_size_examples() {
        // ⌈10 / log₂ 1000⌉ = ⌈1.003⌉
        assert_eq!(naive_grid_size(1_000), 2);
        assert_eq!(naive_grid_size(1_000_000), 6);
        assert_eq!(naive_grid_size(1), 1);
        assert_eq!(naive_grid_point(4, 0), -0.75);
        assert_eq!(naive_grid_point(4, 3), 0.75);
    }

    #[test]
    fn naive_argmin_skips_empty_points_and_breaks_ties_low() {
        assert_eq!(naive_argmin(&[None, Some(0.2), Some(-0.2), Some(0.5)]), Some(1));
        assert_eq!(naive_argmin(&[Some(0.9), None, Some(0.1)]), Some(2));
        assert_eq!(naive_argmin(&[None, None]), None);
    }

    #[test]
    fn naive_with_exact_derivatives_matches_brute_force() {
        // Feed the server exact F' at every grid point.
        let dist = two_cubic();
        for m in [1_000u64, 100_000, 1_000_000, 1 << 40] {
            let k = naive_grid_size(m);
            let exact: Vec<Option<f64>> =
                (0..k).map(|j| Some(dist.analytic_gradient(&[naive_grid_point(k, j)]).unwrap()[0])).collect();
            let brute = (0..k as usize)
                .min_by(|&a, &b| exact[a].unwrap().abs().total_cmp(&exact[b].unwrap().abs()))
                .unwrap();
            assert_eq!(naive_argmin(&exact), Some(brute));
        }
    }

    #[test]
    fn naive_requires_one_dimension_and_one_sample() {
        let opts = EstimatorOptions::default();
        assert!(matches!(naive_1d(&bowl(vec![vec![0.0, 0.0]]), 100, 1, &opts, 0), Err(Error::Unsupported { .. })));
        assert!(naive_1d(&two_cubic(), 100, 2, &opts, 0).is_err());
        assert!(one_bit(&bowl(vec![vec![0.0, 0.0]]), 100, 1, &opts, 0).is_err());
    }

    #[test]
    fn one_bit_extremes_are_exact() {
        let mut rng = crate::rng::stream(0, 0);
        let zeros: Vec<bool> = (0..1000).map(|_| one_bit_message(-1.0, &mut rng)).collect();
        let ones: Vec<bool> = (0..1000).map(|_| one_bit_message(1.0, &mut rng)).collect();
        assert_eq!(one_bit_server(&zeros), -1.0);
        assert_eq!(one_bit_server(&ones), 1.0);
        assert!(!one_bit_message(-3.0, &mut rng));
        let r = one_bit(&two_cubic(), 10_000, 1, &EstimatorOptions::default(), 2).unwrap();
        assert!((0.0..=1.0).contains(&r.theta_hat_native[0]));
    }
}
