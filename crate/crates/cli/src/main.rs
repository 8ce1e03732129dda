use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oneshot::codec::{Codec, CodecConfig, EncodedSignal, Rounding, Signal};
use oneshot::estimate::{run_estimator, Estimator};
use oneshot::harness::sweep::worker_pool;
use oneshot::harness::{emit_report, read_rows, run_sweep_to_file, ExperimentConfig};
use oneshot::multigrid::{compute_params, GridAddress, ParamOverrides};
use oneshot::rng::{stream, PROBE_STREAM};
use oneshot::Result;
use rand::Rng;

/// Simulator for one-shot, bit-limited distributed estimation.
#[derive(Parser)]
#[command(name = "oneshot-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimator once and print the result as JSON.
    Run(RunArgs),
    /// Run the full (estimator, m, repetition) sweep of a config.
    Sweep(SweepArgs),
    /// Write summaries, plot data and slopes from a sweep CSV.
    Report(ReportArgs),
    /// Signal wire format tools.
    Codec {
        #[command(subcommand)]
        command: CodecCommand,
    },
    /// Check the library's invariants on random draws.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    estimator: Estimator,
    #[arg(long)]
    m: u64,
    /// Samples per machine; defaults to the config's n.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Keep the valid prefix of an existing output and finish the rest.
    #[arg(long)]
    resume: bool,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep CSV to read.
    input: PathBuf,
    /// Directory for the report files.
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum CodecCommand {
    /// Print the field decomposition of an encoded signal. Without BITS a
    /// random valid signal is generated from --seed.
    Dump(DumpArgs),
}

#[derive(Args)]
struct DumpArgs {
    /// The signal as a string of 0/1 characters.
    bits: Option<String>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    m: u64,
    #[arg(long, default_value_t = 1)]
    n: u64,
    #[arg(long)]
    polylog_factor: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    loss_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SelfcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    draws: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            fail("usage", first);
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            fail(e.kind(), &e.to_string());
            ExitCode::from(1)
        }
    }
}

/// One JSON object on stderr.
fn fail(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Report(args) => report(args),
        Command::Codec { command: CodecCommand::Dump(args) } => dump(args),
        Command::Selfcheck(args) => selfcheck(args),
    }
}

fn run(args: RunArgs) -> Result<bool> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let dist = cfg.distribution.instantiate(args.seed)?;
    let n = args.n.unwrap_or(cfg.n);
    let workers = args.workers.unwrap_or(cfg.workers);
    let result = worker_pool(workers)?.install(|| run_estimator(args.estimator, &dist, args.m, n, &cfg.options, args.seed))?;
    println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
    Ok(true)
}

fn sweep(args: SweepArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(out) = args.out {
        cfg.output = out;
    }
    let summary = run_sweep_to_file(&cfg, &cfg.output, args.resume)?;
    println!(
        "{}",
        serde_json::json!({
            "output": cfg.output,
            "rows_written": summary.rows_written,
            "rows_resumed": summary.rows_resumed,
            "failures": summary.failures,
        })
    );
    Ok(true)
}

fn report(args: ReportArgs) -> Result<bool> {
    let rows = read_rows(&args.input)?;
    let files = emit_report(&rows, &args.out)?;
    println!(
        "{}",
        serde_json::json!({ "summary": files.summary, "plots": files.plots, "slopes": files.slopes })
    );
    Ok(true)
}

fn dump(args: DumpArgs) -> Result<bool> {
    let params = compute_params(args.d, args.m, args.n, &ParamOverrides { polylog_factor: args.polylog_factor })?;
    let codec = Codec::new(&params, CodecConfig { rounding: Rounding::Stochastic, loss_scale: args.loss_scale })?;
    let enc = match &args.bits {
        Some(bits) => EncodedSignal::from_bit_string(bits)?,
        None => {
            let mut rng = stream(args.seed, PROBE_STREAM);
            let level = rng.random_range(0..=params.t);
            let top = codec.quantizer(level).max_code();
            let sig = Signal {
                s_index: (0..params.d).map(|_| rng.random_range(0..params.coarse_per_axis)).collect(),
                addr: GridAddress { level, index: (0..params.d).map(|_| rng.random_range(0..1u64 << level)).collect() },
                delta_q: (0..params.d).map(|_| rng.random_range(0..=top)).collect(),
            };
            codec.encode(&sig)?
        }
    };
    let sig = codec.decode(&enc)?;
    println!("bits     {}", enc.to_bit_string());
    println!("length   {} (level {}; budget {}, measured c = {:.2})", enc.bit_length(), sig.addr.level, codec.budget_bits(), codec.measured_factor());
    println!("params   t = {}, K = {}, quant_acc = {}", params.t, params.coarse_per_axis, params.quant_acc);
    let delta = codec.dequantize(&sig);
    for span in codec.dump(&enc)? {
        let raw = &enc.to_bit_string()[span.start..span.start + span.width as usize];
        let extra = span
            .name
            .strip_prefix("delta[")
            .and_then(|rest| rest.trim_end_matches(']').parse::<usize>().ok())
            .map(|j| format!("  Δ = {}", delta[j]))
            .unwrap_or_default();
        println!("{:<9} [{:>3}, {:>3})  {raw} = {}{extra}", span.name, span.start, span.start + span.width as usize, span.value);
    }
    Ok(true)
}

fn selfcheck(args: SelfcheckArgs) -> Result<bool> {
    let checks = oneshot::selfcheck::run_selfcheck(args.seed, args.draws);
    let mut all = true;
    for c in &checks {
        all &= c.passed;
        println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if !all {
        fail("selfcheck", "one or more invariant checks failed");
    }
    Ok(all)
}
