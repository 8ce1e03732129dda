//! Summaries, plot data and slope fits from sweep rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::stats::{self, LineFit};
use super::sweep::SweepRow;
use crate::error::{Error, Result};
use crate::estimate::Estimator;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub m: u64,
    pub count: usize,
    pub failed: usize,
    pub mean: f64,
    pub rms: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

/// Finite errors grouped by estimator then m, plus the count of failed rows.
fn group(rows: &[SweepRow]) -> BTreeMap<(Estimator, u64), (Vec<f64>, usize)> {
    let mut g: BTreeMap<(Estimator, u64), (Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        let entry = g.entry((r.estimator, r.m)).or_default();
        if r.error.is_finite() {
            entry.0.push(r.error);
        } else {
            entry.1 += 1;
        }
    }
    g
}

/// Per (estimator, m) statistics. Groups whose runs all failed are omitted.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    group(rows)
        .into_iter()
        .filter(|(_, (errs, _))| !errs.is_empty())
        .map(|((estimator, m), (errs, failed))| SummaryRow {
            estimator,
            m,
            count: errs.len(),
            failed,
            mean: stats::mean(&errs),
            rms: stats::rms(&errs),
            median: stats::median(&errs),
            p10: stats::quantile(&errs, 0.1),
            p90: stats::quantile(&errs, 0.9),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
}

/// Least squares slope of `log₂(mean error)` against `log₂ m`.
pub fn fit_slope(rows: &[SweepRow], estimator: Estimator) -> Result<SlopeFit> {
    let summary: Vec<SummaryRow> = summarize(rows).into_iter().filter(|s| s.estimator == estimator).collect();
    if summary.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "slope fit for {estimator} needs at least 3 distinct m values, have {}",
            summary.len()
        )));
    }
    let ms: Vec<f64> = summary.iter().map(|s| s.m as f64).collect();
    let means: Vec<f64> = summary.iter().map(|s| s.mean).collect();
    let LineFit { slope, stderr, .. } = stats::log_log_fit(&ms, &means)?;
    Ok(SlopeFit { slope, stderr })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
    pub slopes: PathBuf,
}

/// Writes `summary.csv`, `slopes.csv` and one `plot_<estimator>.dat` per
/// estimator into `dir`.
pub fn emit_report(rows: &[SweepRow], dir: &Path) -> Result<ReportFiles> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no rows to report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let summary = summarize(rows);

    let summary_path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary_path)?;
    for s in &summary {
        w.serialize(s)?;
    }
    w.flush()?;

    let mut plots = Vec::new();
    let estimators: Vec<Estimator> = {
        let mut e: Vec<Estimator> = summary.iter().map(|s| s.estimator).collect();
        e.dedup();
        e
    };
    for est in &estimators {
        let mut text = String::from("# m log2_m mean log2_mean median p10 p90\n");
        for s in summary.iter().filter(|s| s.estimator == *est) {
            writeln!(
                text,
                "{} {} {} {} {} {} {}",
                s.m,
                (s.m as f64).log2(),
                s.mean,
                s.mean.log2(),
                s.median,
                s.p10,
                s.p90
            )
            .expect("writing to a String");
        }
        let path = dir.join(format!("plot_{est}.dat"));
        std::fs::write(&path, text)?;
        plots.push(path);
    }

    let slopes_path = dir.join("slopes.csv");
    let mut text = String::from("estimator,slope,stderr\n");
    for est in &estimators {
        if let Ok(fit) = fit_slope(rows, *est) {
            writeln!(text, "{est},{},{}", fit.slope, fit.stderr).expect("writing to a String");
        }
    }
    std::fs::write(&slopes_path, text)?;
    Ok(ReportFiles { summary: summary_path, plots, slopes: slopes_path })
}
