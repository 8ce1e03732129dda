//! The multi-resolution estimator: machine-side encoding and server-side
//! reconstruction of the gradient field.

use std::collections::BTreeMap;

use rand::Rng;

use crate::codec::{Codec, Signal};
use crate::error::{Error, Result};
use crate::estimate::{per_machine, require_machines, require_samples, EstimateResult, Estimator, EstimatorOptions};
use crate::functions::{FunctionDistribution, Point, SampleFunction};
use crate::multigrid::{
    address_to_point, coarse_point, compute_params, nearest_coarse_index, sample_level, sample_point,
    GridAddress, MreParams,
};
use crate::solver::{minimize, SolverConfig};

/// The server keeps dense per-level tables; `t·d` above this is refused.
pub const MAX_SERVER_INDEX_BITS: u32 = 22;

#[derive(Debug, Clone, PartialEq)]
pub struct MachineDiagnostics {
    pub theta_i: Point,
    pub solver_converged: bool,
    pub clamped_coords: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineOutput {
    pub signal: Signal,
    pub diagnostics: MachineDiagnostics,
}

/// Encodes one machine's samples. The first `⌈n/2⌉` samples locate the
/// machine, the last `⌊n/2⌋` are differentiated; with a single sample it
/// serves both roles unless `strict_split` is set.
pub fn machine_encode<R: Rng + ?Sized>(
    samples: &[SampleFunction],
    codec: &Codec,
    opts: &EstimatorOptions,
    rng: &mut R,
) -> Result<MachineOutput> {
    let n = samples.len();
    require_samples(n as u64)?;
    let d = codec.params().d;
    if let Some(f) = samples.iter().find(|f| f.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: f.dim() });
    }
    opts.solver.validate()?;
    let (locate, differentiate) = split(samples, opts.strict_split)?;
    Ok(encode_halves(&locate, &differentiate, codec, &opts.solver, opts, rng))
}

fn split(samples: &[SampleFunction], strict: bool) -> Result<(SampleFunction, SampleFunction)> {
    let n = samples.len();
    if n == 1 {
        if strict {
            return Err(Error::InvalidParameter("strict_split needs n ≥ 2".into()));
        }
        return Ok((samples[0].clone(), samples[0].clone()));
    }
    let head = n.div_ceil(2);
    Ok((SampleFunction::mean_of(samples[..head].to_vec()), SampleFunction::mean_of(samples[head..].to_vec())))
}

fn encode_halves<R: Rng + ?Sized>(
    locate: &SampleFunction,
    differentiate: &SampleFunction,
    codec: &Codec,
    solver: &SolverConfig,
    opts: &EstimatorOptions,
    rng: &mut R,
) -> MachineOutput {
    let params = codec.params();
    let solved = minimize(locate, solver);
    let s_index = nearest_coarse_index(params, &solved.point);
    let s = coarse_point(params, &s_index);

    let level = sample_level(rng, params);
    let addr = sample_point(rng, params, level);
    let p = address_to_point(&s, params, &addr).expect("sampled address is valid");
    let mut delta = differentiate.gradient(&p).expect("dimension checked");
    if level > 0 {
        let parent = address_to_point(&s, params, &addr.parent().expect("level ≥ 1")).expect("valid parent");
        let gp = differentiate.gradient(&parent).expect("dimension checked");
        delta.iter_mut().zip(&gp).for_each(|(a, b)| *a -= b);
    }
    let (delta_q, clamped_coords) = codec.quantizer(level).quantize(&delta, opts.rounding, rng);
    MachineOutput {
        signal: Signal { s_index, addr, delta_q },
        diagnostics: MachineDiagnostics { theta_i: solved.point, solver_converged: solved.converged, clamped_coords },
    }
}

/// The server's reconstruction of `∇F` on the level grids of `C_{s*}`.
#[derive(Debug, Clone)]
pub struct ServerState {
    params: MreParams,
    pub s_index: Vec<u64>,
    pub s_star: Point,
    /// Signals whose coarse point was not `s*`.
    pub discarded: usize,
    /// Per level, `2^{ld}·d` gradient estimates in lexicographic order.
    grad: Vec<Vec<f64>>,
    counts: Vec<Vec<u32>>,
    covered: Vec<Vec<bool>>,
}

impl ServerState {
    pub fn params(&self) -> &MreParams {
        &self.params
    }

    pub fn grad_est(&self, addr: &GridAddress) -> &[f64] {
        let d = self.params.d;
        let i = addr.linear() as usize;
        &self.grad[addr.level as usize][i * d..(i + 1) * d]
    }

    /// `N_p`.
    pub fn count(&self, addr: &GridAddress) -> u32 {
        self.counts[addr.level as usize][addr.linear() as usize]
    }

    /// True when `addr` and all its ancestors received at least one signal.
    pub fn covered(&self, addr: &GridAddress) -> bool {
        self.covered[addr.level as usize][addr.linear() as usize]
    }

    /// Addresses, over all levels, with `N_p = 0`.
    pub fn uncovered_count(&self) -> u64 {
        self.counts.iter().flatten().filter(|&&c| c == 0).count() as u64
    }

    pub fn point(&self, addr: &GridAddress) -> Point {
        address_to_point(&self.s_star, &self.params, addr).expect("server addresses are valid")
    }

    /// The finest-level address with the smallest `‖∇̂F‖`, ties to the
    /// lexicographically first.
    pub fn argmin(&self) -> GridAddress {
        let d = self.params.d;
        let t = self.params.t;
        let finest = &self.grad[t as usize];
        let mut best = (0usize, f64::INFINITY);
        for (i, g) in finest.chunks_exact(d).enumerate() {
            let norm: f64 = g.iter().map(|v| v * v).sum();
            if norm < best.1 {
                best = (i, norm);
            }
        }
        GridAddress::from_linear(t, d, best.0 as u64)
    }
}

fn modal_coarse_index(signals: &[Signal]) -> Vec<u64> {
    let mut tally: BTreeMap<&[u64], usize> = BTreeMap::new();
    for s in signals {
        *tally.entry(&s.s_index).or_default() += 1;
    }
    let mut best: (&[u64], usize) = (&[], 0);
    // BTreeMap iterates in lexicographic order, so strict `>` keeps the
    // smallest index among equally frequent ones.
    for (k, c) in tally {
        if c > best.1 {
            best = (k, c);
        }
    }
    best.0.to_vec()
}

pub fn server_state(signals: &[Signal], codec: &Codec) -> Result<ServerState> {
    if signals.is_empty() {
        return Err(Error::InvalidParameter("the server needs at least one signal".into()));
    }
    let params = codec.params().clone();
    let (d, t) = (params.d, params.t);
    if t * d as u32 > MAX_SERVER_INDEX_BITS {
        return Err(Error::InvalidParameter(format!(
            "t·d = {} exceeds the server limit of {MAX_SERVER_INDEX_BITS}",
            t * d as u32
        )));
    }
    let s_index = modal_coarse_index(signals);
    let s_star = coarse_point(&params, &s_index);

    let sizes: Vec<usize> = (0..=t).map(|l| params.level_size(l) as usize).collect();
    let mut sums: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n * d]).collect();
    let mut counts: Vec<Vec<u32>> = sizes.iter().map(|&n| vec![0; n]).collect();
    let mut discarded = 0;
    for sig in signals {
        if sig.s_index != s_index {
            discarded += 1;
            continue;
        }
        codec.validate(sig)?;
        let l = sig.addr.level as usize;
        let i = sig.addr.linear() as usize;
        counts[l][i] += 1;
        for (acc, v) in sums[l][i * d..(i + 1) * d].iter_mut().zip(codec.dequantize(sig)) {
            *acc += v;
        }
    }
    if counts[0][0] == 0 {
        return Err(Error::RootUncovered);
    }

    let mut grad: Vec<Vec<f64>> = Vec::with_capacity(t as usize + 1);
    let mut covered: Vec<Vec<bool>> = Vec::with_capacity(t as usize + 1);
    let n0 = counts[0][0] as f64;
    grad.push(sums[0].iter().map(|s| s / n0).collect());
    covered.push(vec![true]);
    for l in 1..=t as usize {
        let mut g = vec![0.0; sizes[l] * d];
        let mut cov = vec![false; sizes[l]];
        for i in 0..sizes[l] {
            let addr = GridAddress::from_linear(l as u32, d, i as u64);
            let parent = addr.parent().expect("level ≥ 1").linear() as usize;
            let n = counts[l][i];
            cov[i] = n > 0 && covered[l - 1][parent];
            for j in 0..d {
                let inherited = grad[l - 1][parent * d + j];
                g[i * d + j] = if n > 0 { inherited + sums[l][i * d + j] / n as f64 } else { inherited };
            }
        }
        grad.push(g);
        covered.push(cov);
    }
    Ok(ServerState { params, s_index, s_star, discarded, grad, counts, covered })
}

pub fn server_estimate(signals: &[Signal], codec: &Codec) -> Result<Point> {
    let state = server_state(signals, codec)?;
    Ok(state.point(&state.argmin()))
}

/// A full run with everything the diagnostics checks need.
#[derive(Debug, Clone)]
pub struct MreRun {
    pub result: EstimateResult,
    pub params: MreParams,
    pub server: ServerState,
    pub machines: Vec<MachineDiagnostics>,
}

pub fn run_mre(dist: &FunctionDistribution, m: u64, n: u64, opts: &EstimatorOptions, seed: u64) -> Result<EstimateResult> {
    Ok(run_mre_detailed(dist, m, n, opts, seed)?.result)
}

pub fn run_mre_detailed(
    dist: &FunctionDistribution,
    m: u64,
    n: u64,
    opts: &EstimatorOptions,
    seed: u64,
) -> Result<MreRun> {
    require_machines(m)?;
    require_samples(n)?;
    if opts.strict_split && n < 2 {
        return Err(Error::InvalidParameter("strict_split needs n ≥ 2".into()));
    }
    opts.solver.validate()?;
    let params = compute_params(dist.dim(), m, n, &opts.param_overrides())?;
    let codec = Codec::new(&params, opts.codec_config())?;

    let outputs = per_machine(m, seed, |rng| {
        let (locate, differentiate) = if n == 1 {
            let f = dist.sample(rng);
            (f.clone(), f)
        } else {
            let head = n.div_ceil(2) as usize;
            let a = dist.sample_mean(head, rng);
            let b = dist.sample_mean(n as usize - head, rng);
            (a, b)
        };
        let out = encode_halves(&locate, &differentiate, &codec, &opts.solver, opts, rng);
        let wire = codec.encode(&out.signal).expect("machine signals are valid");
        (wire, out.diagnostics)
    });

    // The server only ever sees what survives the wire.
    let mut total_bits = 0u64;
    let mut signals = Vec::with_capacity(outputs.len());
    let mut machines = Vec::with_capacity(outputs.len());
    for (wire, diag) in outputs {
        total_bits += wire.bit_length() as u64;
        signals.push(codec.decode(&wire)?);
        machines.push(diag);
    }
    let server = server_state(&signals, &codec)?;
    let theta_hat = server.point(&server.argmin());

    let mut result = EstimateResult::new(Estimator::Mre, dist, theta_hat.into_vec());
    result.bits_per_signal = codec.max_bit_length();
    result.total_bits = total_bits;
    result.uncovered = server.uncovered_count();
    result.clamped = machines.iter().map(|d| d.clamped_coords as u64).sum();
    result.solver_failures = machines.iter().filter(|d| !d.solver_converged).count() as u64;
    Ok(MreRun { result, params, server, machines })
}
