//! Sweeps over the (estimator, m, repetition) lattice with deterministic,
//! incremental CSV output.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::estimate::{run_estimator, Estimator};
use crate::rng::lattice_seed;

pub const CSV_HEADER: &str = "estimator,m,n,rep,seed,error,bits_per_signal,wall_time_s,uncovered,clamped";

/// Tag mixed into the seed that draws a random problem instance, so every
/// estimator at the same `(m, rep)` faces the same instance.
pub const INSTANCE_TAG: u8 = 0xff;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub estimator: Estimator,
    pub m: u64,
    pub n: u64,
    pub rep: u64,
    pub seed: u64,
    /// NaN when the run failed; the reason goes to the `.errors` sidecar.
    pub error: f64,
    pub bits_per_signal: u64,
    pub wall_time_s: f64,
    pub uncovered: u64,
    pub clamped: u64,
}

/// One lattice cell, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub estimator: Estimator,
    pub m: u64,
    pub rep: u64,
}

pub fn lattice(cfg: &ExperimentConfig) -> Vec<Task> {
    let mut tasks = Vec::new();
    for &estimator in &cfg.estimators {
        for &m in &cfg.m {
            for rep in 0..cfg.repetitions {
                tasks.push(Task { estimator, m, rep });
            }
        }
    }
    tasks
}

pub fn task_seed(cfg: &ExperimentConfig, task: &Task) -> Result<u64> {
    lattice_seed(cfg.master_seed, task.estimator.id(), task.m, task.rep)
}

pub fn instance_seed(cfg: &ExperimentConfig, m: u64, rep: u64) -> Result<u64> {
    lattice_seed(cfg.master_seed, INSTANCE_TAG, m, rep)
}

/// Runs one lattice cell. Estimator failures become a NaN row plus an
/// error message; only seed derivation problems are fatal.
pub fn run_task(cfg: &ExperimentConfig, task: &Task) -> Result<(SweepRow, Option<String>)> {
    let seed = task_seed(cfg, task)?;
    let start = Instant::now();
    let outcome = cfg
        .distribution
        .instantiate(instance_seed(cfg, task.m, task.rep)?)
        .and_then(|dist| run_estimator(task.estimator, &dist, task.m, cfg.n, &cfg.options, seed));
    let wall = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let mut row = SweepRow {
        estimator: task.estimator,
        m: task.m,
        n: cfg.n,
        rep: task.rep,
        seed,
        error: f64::NAN,
        bits_per_signal: 0,
        wall_time_s: wall,
        uncovered: 0,
        clamped: 0,
    };
    match outcome {
        Ok(r) => {
            row.error = r.error.unwrap_or(f64::NAN);
            row.bits_per_signal = r.bits_per_signal as u64;
            row.uncovered = r.uncovered;
            row.clamped = r.clamped;
            Ok((row, None))
        }
        Err(e) => Ok((row, Some(format!("{}: {e}", e.kind())))),
    }
}

/// A thread pool with exactly `workers` threads.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

pub fn errors_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".errors");
    PathBuf::from(s)
}

fn row_line(row: &SweepRow) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.serialize(row)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn parse_line(line: &str) -> Option<SweepRow> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(line.as_bytes());
    r.deserialize().next()?.ok()
}

/// Number of leading complete rows of `path` that match the lattice, and
/// the byte length they occupy (header included). `None` if the file is
/// missing, empty, or has a foreign header.
fn resumable_prefix(cfg: &ExperimentConfig, tasks: &[Task], path: &Path) -> Result<Option<(usize, u64)>> {
    let mut text = String::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_string(&mut text)?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let header = format!("{CSV_HEADER}\n");
    if !text.starts_with(&header) {
        return Ok(None);
    }
    let mut offset = header.len();
    let mut done = 0;
    for line in text[offset..].split_inclusive('\n') {
        if !line.ends_with('\n') || done >= tasks.len() {
            break;
        }
        let Some(row) = parse_line(line.trim_end()) else { break };
        let task = &tasks[done];
        if row.estimator != task.estimator
            || row.m != task.m
            || row.rep != task.rep
            || row.n != cfg.n
            || row.seed != task_seed(cfg, task)?
        {
            break;
        }
        offset += line.len();
        done += 1;
    }
    Ok(Some((done, offset as u64)))
}

fn error_key(task: &Task) -> String {
    format!("{},{},{}", task.estimator, task.m, task.rep)
}

/// Keeps only sidecar lines that belong to the first `done` tasks.
fn trim_error_log(path: &Path, tasks: &[Task], done: usize) -> Result<()> {
    let Ok(f) = File::open(path) else { return Ok(()) };
    let keep: std::collections::HashSet<String> = tasks[..done].iter().map(error_key).collect();
    let mut kept = String::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        let key: String = line.splitn(4, ',').take(3).collect::<Vec<_>>().join(",");
        if keep.contains(&key) {
            kept.push_str(&line);
            kept.push('\n');
        }
    }
    std::fs::write(path, kept)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows_written: usize,
    pub rows_resumed: usize,
    pub failures: usize,
}

/// Runs the sweep into `output`, appending rows in canonical order as
/// batches complete. With `resume`, a valid prefix of an earlier run is
/// kept and only the missing cells are computed.
pub fn run_sweep_to_file(cfg: &ExperimentConfig, output: &Path, resume: bool) -> Result<SweepSummary> {
    cfg.validate()?;
    let tasks = lattice(cfg);
    let err_path = errors_path(output);
    let prefix = if resume { resumable_prefix(cfg, &tasks, output)? } else { None };

    let (mut file, start) = match prefix {
        Some((done, bytes)) => {
            let mut f = OpenOptions::new().read(true).write(true).open(output)?;
            f.set_len(bytes)?;
            f.seek(SeekFrom::End(0))?;
            trim_error_log(&err_path, &tasks, done)?;
            (f, done)
        }
        None => {
            let mut f = File::create(output)?;
            writeln!(f, "{CSV_HEADER}")?;
            f.flush()?;
            if err_path.exists() {
                std::fs::remove_file(&err_path)?;
            }
            (f, 0)
        }
    };

    let pool = worker_pool(cfg.workers)?;
    let batch = (cfg.workers * 4).max(1);
    let mut failures = 0;
    for chunk in tasks[start..].chunks(batch) {
        let results: Vec<Result<(SweepRow, Option<String>)>> =
            pool.install(|| chunk.par_iter().map(|t| run_task(cfg, t)).collect());
        let mut text = String::new();
        let mut errors = String::new();
        for (task, res) in chunk.iter().zip(results) {
            let (row, err) = res?;
            text.push_str(&row_line(&row)?);
            if let Some(msg) = err {
                failures += 1;
                errors.push_str(&format!("{},{}\n", error_key(task), msg.replace('\n', " ")));
            }
        }
        if !errors.is_empty() {
            let mut e = OpenOptions::new().create(true).append(true).open(&err_path)?;
            e.write_all(errors.as_bytes())?;
        }
        file.write_all(text.as_bytes())?;
        file.flush()?;
    }
    file.sync_all()?;
    Ok(SweepSummary { rows_written: tasks.len() - start, rows_resumed: start, failures })
}

/// Runs the sweep in memory.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let tasks = lattice(cfg);
    let pool = worker_pool(cfg.workers)?;
    let rows: Result<Vec<(SweepRow, Option<String>)>> =
        pool.install(|| tasks.par_iter().map(|t| run_task(cfg, t)).collect());
    Ok(rows?.into_iter().map(|(r, _)| r).collect())
}

pub fn write_rows(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut text = format!("{CSV_HEADER}\n");
    for r in rows {
        text.push_str(&row_line(r)?);
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Config(format!("{} does not have the sweep header", path.display())));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
