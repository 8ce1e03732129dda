//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use oneshot::codec::{Codec, CodecConfig, Rounding, Signal};
use oneshot::estimate::{run_estimator, Estimator, EstimatorOptions};
use oneshot::functions::{
    make_distribution, DistributionKind, DistributionParams, FunctionDistribution, SampleFunction,
};
use oneshot::harness::{run_sweep, run_sweep_to_file, stats, ExperimentConfig, SweepRow};
use oneshot::mre::run_mre_detailed;
use oneshot::multigrid::{compute_params, GridAddress, ParamOverrides};
use oneshot::rng::{lattice_seed, stream};
use oneshot::solver::{minimize_empirical, SolverConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn seed(tag: u8, m: u64, rep: u64) -> u64 {
    lattice_seed(2024, tag, m, rep).unwrap()
}

fn bowl(centers: Vec<Vec<f64>>, curvature: Option<f64>) -> FunctionDistribution {
    let d = centers[0].len();
    let params = DistributionParams { centers, curvature, ..Default::default() };
    make_distribution(DistributionKind::QuadraticBowl, &params, d).unwrap()
}

fn errors_of(rows: &[SweepRow], est: Estimator, m: u64) -> Vec<f64> {
    rows.iter().filter(|r| r.estimator == est && r.m == m).map(|r| r.error).collect()
}

fn polylog4() -> EstimatorOptions {
    EstimatorOptions { polylog_factor: Some(4.0), ..Default::default() }
}

fn criterion_1() -> Outcome {
    let cfg = ExperimentConfig::from_toml(
        r#"
estimators = ["mre", "avgm"]
m = [1000, 10000, 100000]
n = 1
repetitions = 100
master_seed = 11
[distribution]
kind = "two_cubic"
[options]
polylog_factor = 4.0
"#,
    )
    .unwrap();
    let rows = run_sweep(&cfg).unwrap();
    let mean = |e, m| stats::mean(&errors_of(&rows, e, m));
    let avgm = [mean(Estimator::Avgm, 10_000), mean(Estimator::Avgm, 100_000)];
    let mre = [mean(Estimator::Mre, 1_000), mean(Estimator::Mre, 10_000), mean(Estimator::Mre, 100_000)];
    let pass = avgm.iter().all(|&a| a > 0.06) && mre[2] < 0.5 * mre[0] && mre[0] > mre[1] && mre[1] > mre[2];
    outcome(
        pass,
        format!(
            "AVGM mean |err| {:.4} (1e4), {:.4} (1e5) > 0.06; MRE {:.4} -> {:.4} -> {:.4}, ratio {:.3} < 0.5",
            avgm[0],
            avgm[1],
            mre[0],
            mre[1],
            mre[2],
            mre[2] / mre[0]
        ),
    )
}

fn criterion_2() -> Outcome {
    let dist = make_distribution(DistributionKind::TwoCubic, &DistributionParams::default(), 1).unwrap();
    let ms = [1_000u64, 10_000, 100_000, 1_000_000];
    let reps = 50;
    let opts = EstimatorOptions::default();
    let mut medians = Vec::new();
    let mut tail_violations = 0;
    for &m in &ms {
        let errs: Vec<f64> = (0..reps)
            .map(|rep| run_estimator(Estimator::Naive1d, &dist, m, 1, &opts, seed(2, m, rep)).unwrap().error.unwrap())
            .collect();
        if m == 100_000 {
            let lambda = dist.native_lambda().unwrap();
            let bound = 3.0 * 2.0 * (m as f64).log2() / (lambda * (m as f64).cbrt());
            tail_violations = errs.iter().filter(|&&e| e > bound).count();
        }
        medians.push(stats::median(&errs));
    }
    let xs: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let fit = stats::log_log_fit(&xs, &medians).unwrap();
    let rate = tail_violations as f64 / reps as f64;
    outcome(
        (-0.45..=-0.20).contains(&fit.slope) && rate < 0.05,
        format!("median-error slope {:.3} in [-0.45, -0.20]; tail bound violated in {:.0}% of runs", fit.slope, 100.0 * rate),
    )
}

fn one_bit_rms(dist: &FunctionDistribution, m: u64, n: u64, reps: u64, tag: u8) -> f64 {
    let opts = EstimatorOptions::default();
    let errs: Vec<f64> = (0..reps)
        .map(|rep| {
            run_estimator(Estimator::OneBit, dist, m, n, &opts, seed(tag, m, rep + 1_000 * n.ilog10() as u64)).unwrap().error.unwrap()
        })
        .collect();
    stats::rms(&errs)
}

fn criterion_3() -> Outcome {
    let reps = 50;
    // Interior bowl with curvature 1: local minimizers are unbiased, so
    // the bit noise sets the rate in m.
    let interior = bowl(vec![vec![-0.2], vec![0.4]], Some(1.0));
    let ms = [1_000u64, 10_000, 100_000];
    let by_m: Vec<f64> = ms.iter().map(|&m| one_bit_rms(&interior, m, 10_000, reps, 3)).collect();
    // Minimizer at the edge of the cube: clamping the local minimizers
    // leaves a bias of order 1/√n, which sets the rate in n.
    let edge = bowl(vec![vec![-1.9998], vec![0.0002]], Some(1.0));
    let ns = [100u64, 1_000, 10_000];
    let by_n: Vec<f64> = ns.iter().map(|&n| one_bit_rms(&edge, 100_000, n, reps, 4)).collect();
    let slope_m = stats::log_log_fit(&ms.map(|m| m as f64), &by_m).unwrap().slope;
    let slope_n = stats::log_log_fit(&ns.map(|n| n as f64), &by_n).unwrap().slope;
    let ok = |s: f64| (s + 0.5).abs() <= 0.15;
    outcome(
        ok(slope_m) && ok(slope_n),
        format!("RMS slope vs m {slope_m:.3}, vs n {slope_n:.3} (target -0.5 ± 0.15)"),
    )
}

fn criterion_4() -> Outcome {
    let cases = [
        ("d=1", bowl(vec![vec![-0.3], vec![0.5]], None)),
        ("d=2", bowl(vec![vec![-0.3, 0.2], vec![0.4, -0.1], vec![0.1, 0.5]], None)),
    ];
    let reps = 100;
    let m = 10_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, dist) in &cases {
        assert!(!dist.assumption_exempt());
        let lambda = dist.known_lambda().unwrap();
        let star = dist.known_minimizer().unwrap();
        let (mut inside, mut faithful, mut checked) = (0, 0, 0usize);
        for rep in 0..reps {
            let run = run_mre_detailed(dist, m, 1, &polylog4(), seed(5, m, rep)).unwrap();
            let p = &run.params;
            let err = oneshot::functions::dist2(&run.result.theta_hat, star);
            inside += usize::from(err <= p.eps / lambda);
            let mut worst: f64 = 0.0;
            for lin in 0..p.level_size(p.t) {
                let addr = GridAddress::from_linear(p.t, p.d, lin);
                if !run.server.covered(&addr) {
                    continue;
                }
                checked += 1;
                let truth = dist.analytic_gradient(&run.server.point(&addr)).unwrap();
                let est = run.server.grad_est(&addr);
                let gap: Vec<f64> = est.iter().zip(&truth).map(|(a, b)| a - b).collect();
                worst = worst.max(oneshot::functions::norm2(&gap));
            }
            faithful += usize::from(worst <= p.eps / 4.0);
        }
        let (r1, r2) = (inside as f64 / reps as f64, faithful as f64 / reps as f64);
        pass &= r1 >= 0.9 && r2 >= 0.9 && checked > 0;
        parts.push(format!("{label}: radius {:.0}%, fidelity {:.0}%", 100.0 * r1, 100.0 * r2));
    }
    outcome(pass, format!("{} (each needs ≥ 90%)", parts.join("; ")))
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, text) in [
        ("ridge", include_str!("../../../configs/ridge.toml")),
        ("logistic", include_str!("../../../configs/logistic.toml")),
    ] {
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert!(cfg.repetitions >= 30 && cfg.n == 1 && cfg.distribution.d == 2);
        let rows = run_sweep(&cfg).unwrap();
        let mre: Vec<f64> = cfg.m.iter().map(|&m| stats::mean(&errors_of(&rows, Estimator::Mre, m))).collect();
        let last = *cfg.m.last().unwrap();
        let avgm = stats::mean(&errors_of(&rows, Estimator::Avgm, last));
        let ok = mre.windows(2).all(|w| w[1] < w[0]) && *mre.last().unwrap() < avgm;
        pass &= ok;
        let trail: Vec<String> = mre.iter().map(|e| format!("{e:.4}")).collect();
        parts.push(format!("{name}: MRE {} vs AVGM {avgm:.4}", trail.join(" -> ")));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let sets = [(1usize, 1_000u64, 1u64), (1, 100_000, 1), (2, 10_000, 1), (2, 100_000, 1), (3, 10_000, 64)];
    let trips = 100_000 / sets.len();
    let mut rng = stream(6, 0);
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for (d, m, n) in sets {
        let params = compute_params(d, m, n, &ParamOverrides { polylog_factor: Some(4.0) }).unwrap();
        for rounding in [Rounding::Midpoint, Rounding::Stochastic] {
            let codec = Codec::new(&params, CodecConfig { rounding, loss_scale: 1.0 }).unwrap();
            for level in 0..=params.t {
                pass &= codec.bit_length(level) <= codec.budget_bits();
            }
            worst_c = worst_c.max(codec.measured_factor());
            for _ in 0..trips / 2 {
                let level = rng.random_range(0..=params.t);
                let q = codec.quantizer(level);
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(q.lo..=q.hi)).collect();
                let (delta_q, clamped) = q.quantize(&v, rounding, &mut rng);
                pass &= clamped == 0;
                for (a, b) in q.dequantize(&delta_q).iter().zip(&v) {
                    worst_ratio = worst_ratio.max((a - b).abs() / params.quant_acc);
                }
                let sig = Signal {
                    s_index: (0..d).map(|_| rng.random_range(0..params.coarse_per_axis)).collect(),
                    addr: GridAddress { level, index: (0..d).map(|_| rng.random_range(0..1u64 << level)).collect() },
                    delta_q,
                };
                let enc = codec.encode(&sig).unwrap();
                pass &= enc.bit_length() == codec.bit_length(level);
                let back = codec.decode(&enc).unwrap();
                pass &= back == sig && codec.encode(&back).unwrap() == enc;
            }
        }
    }
    pass &= worst_ratio <= 0.5;
    outcome(
        pass,
        format!("{} round trips bit-identical; worst |err|/quant_acc {worst_ratio:.4} ≤ 0.5; measured c ≤ {worst_c:.2}", trips / 2 * 2 * sets.len()),
    )
}

/// Exact box-constrained minimizer of a two-dimensional ridge sample:
/// enumerate every face of the square (each coordinate free or pinned at
/// ±1), solve the free coordinates, and keep the best feasible candidate.
fn box_ridge_oracle(x: &[f64], y: f64, reg: f64) -> Vec<f64> {
    let obj = |t: &[f64]| (t[0] * x[0] + t[1] * x[1] - y).powi(2) + reg * (t[0] * t[0] + t[1] * t[1]);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let states = [None, Some(-1.0), Some(1.0)];
    for a in states {
        for b in states {
            let cand = match (a, b) {
                (Some(u), Some(v)) => vec![u, v],
                (Some(u), None) => vec![u, x[1] * (y - u * x[0]) / (x[1] * x[1] + reg)],
                (None, Some(v)) => vec![x[0] * (y - v * x[1]) / (x[0] * x[0] + reg), v],
                (None, None) => {
                    let (p, q, r) = (x[0] * x[0] + reg, x[0] * x[1], x[1] * x[1] + reg);
                    let det = p * r - q * q;
                    vec![(r * x[0] * y - q * x[1] * y) / det, (p * x[1] * y - q * x[0] * y) / det]
                }
            };
            if cand.iter().all(|c| c.abs() <= 1.0 + 1e-12) {
                let v = obj(&cand);
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, cand));
                }
            }
        }
    }
    best.unwrap().1
}

fn criterion_7() -> Outcome {
    let mut rng = stream(7, 0);
    let theta = DistributionParams { theta: Some(vec![0.3, 0.7]), ..Default::default() };
    let dists = [
        make_distribution(DistributionKind::TwoCubic, &DistributionParams::default(), 1).unwrap(),
        make_distribution(DistributionKind::Ridge, &theta, 2).unwrap(),
        make_distribution(DistributionKind::Logistic, &theta, 2).unwrap(),
        bowl(vec![vec![-0.4, 0.2], vec![0.6, -0.1]], None),
    ];
    let h = 1e-6;
    let mut worst_fd: f64 = 0.0;
    for dist in &dists {
        for _ in 0..1_000 {
            let f = dist.sample(&mut rng);
            let t: Vec<f64> = (0..dist.dim()).map(|_| rng.random_range(-0.999..0.999)).collect();
            let g = f.gradient(&t).unwrap();
            for j in 0..t.len() {
                let (mut up, mut down) = (t.clone(), t.clone());
                up[j] += h;
                down[j] -= h;
                let fd = (f.evaluate(&up).unwrap() - f.evaluate(&down).unwrap()) / (2.0 * h);
                worst_fd = worst_fd.max((fd - g[j]).abs() / g[j].abs().max(1.0));
            }
        }
    }
    let cfg = SolverConfig::default();
    let mut worst_solve: f64 = 0.0;
    let mut pinned = 0;
    for _ in 0..1_000 {
        let x: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
        let tg: [f64; 2] = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let y = x[0] * tg[0] + x[1] * tg[1] + 0.1 * rng.sample::<f64, _>(StandardNormal);
        let exact = box_ridge_oracle(&x, y, 0.1);
        pinned += usize::from(exact.iter().any(|v| v.abs() == 1.0));
        let got = minimize_empirical(&[SampleFunction::Ridge { x, y, reg: 0.1 }], &cfg).unwrap();
        worst_solve = worst_solve.max(oneshot::functions::dist2(&got.point, &exact));
    }
    outcome(
        worst_fd <= 1e-5 && worst_solve <= 1e-6,
        format!("worst FD relative error {worst_fd:.2e} ≤ 1e-5; worst solver gap {worst_solve:.2e} ≤ 1e-6 ({pinned} of 1000 on a face)"),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml(include_str!("../../../configs/ridge.toml")).unwrap();
    cfg.m = vec![2_000, 5_000];
    cfg.repetitions = 4;
    cfg.estimators = vec![Estimator::Mre, Estimator::Avgm];
    let mut outputs = Vec::new();
    for workers in [1, 2, 4] {
        cfg.workers = workers;
        let path = dir.path().join(format!("w{workers}.csv"));
        run_sweep_to_file(&cfg, &path, false).unwrap();
        outputs.push(std::fs::read(&path).unwrap());
    }
    // Kill mid-row, then resume.
    let path = dir.path().join("resumed.csv");
    let full = outputs[0].clone();
    let cut = full.len() * 3 / 5;
    std::fs::write(&path, &full[..cut]).unwrap();
    cfg.workers = 3;
    let summary = run_sweep_to_file(&cfg, &path, true).unwrap();
    outputs.push(std::fs::read(&path).unwrap());
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same && summary.rows_resumed > 0,
        format!("workers 1/2/4 and a resumed run ({} rows kept) produce identical {}-byte files", summary.rows_resumed, full.len()),
    )
}

fn criterion_9() -> Outcome {
    let cases = [
        ("normalized", bowl(vec![vec![-0.3], vec![0.5]], None)),
        ("curvature 1", bowl(vec![vec![-0.4], vec![0.6]], Some(1.0))),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, dist) in &cases {
        let lambda = dist.known_lambda().unwrap();
        let star = dist.known_minimizer().unwrap();
        for n in [4u64, 16, 64] {
            let run = run_mre_detailed(dist, 10_000, n, &polylog4(), seed(9, n, 0)).unwrap();
            let dev: Vec<f64> =
                run.machines.iter().map(|mch| oneshot::functions::dist2(&mch.theta_i, star) * (n as f64).sqrt()).collect();
            let rate = |alpha: f64| dev.iter().filter(|&&v| v >= alpha).count() as f64 / dev.len() as f64;
            let alphas = [0.25 / lambda, 0.5 / lambda, 1.0 / lambda, 2.0 / lambda, 3.0 / lambda];
            let rates: Vec<f64> = alphas.iter().map(|&a| rate(a)).collect();
            let monotone = rates.windows(2).all(|w| w[1] <= w[0]);
            pass &= monotone && rates[4] < 0.05;
            parts.push(format!("{label} n={n}: {:.3}", rates[4]));
        }
    }
    outcome(pass, format!("Pr(‖θ^i-θ*‖ ≥ 3/(λ√n)) {} (< 0.05, non-increasing in α)", parts.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 counterexample separation", criterion_1),
        ("2 naive grid rate", criterion_2),
        ("3 one-bit rates", criterion_3),
        ("4 accuracy radius and gradient fidelity", criterion_4),
        ("5 ridge and logistic trends", criterion_5),
        ("6 codec properties", criterion_6),
        ("7 numerical core", criterion_7),
        ("8 determinism", criterion_8),
        ("9 local minimizer concentration", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
