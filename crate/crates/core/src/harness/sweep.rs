//! Sweep orchestration and CSV output.
//!
//! CSV columns: one per sweep-axis value (`alpha`, `theta`, `osnr_db`,
//! `cspr_db`, `dgd_symbols`, `xi`, `taps`, `pols`, in axis order), then
//! `trial`, `seed`, `ber`, `evm_db`, `q_db`, `converged` and
//! `branch_cspr_db` (semicolon-separated, one value per detected branch).

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::dsp::Metrics;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::pipeline::run_trial;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: Vec<f64>,
    pub trial: usize,
    pub seed: u64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub columns: Vec<&'static str>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Mean BER per sweep point, in point order.
    pub fn mean_ber(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out: Vec<(Vec<f64>, f64, usize)> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some((p, sum, n)) if *p == r.point => {
                    *sum += r.metrics.ber;
                    *n += 1;
                }
                _ => out.push((r.point.clone(), r.metrics.ber, 1)),
            }
        }
        out.into_iter().map(|(p, s, n)| (p, s / n as f64)).collect()
    }
}

/// Seed of trial `t` at point `index`.
pub fn trial_seed(cfg: &ExperimentConfig, index: usize, t: usize) -> u64 {
    derive_seed(cfg.seed, "trial", (index * cfg.trials_per_point + t) as u64)
}

/// Every (point, trial) pair, run on `workers` threads (all cores when `None`).
/// Rows come back in point-major order whatever the thread count.
pub fn sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepResult> {
    cfg.validate()?;
    let points = cfg.points();
    let jobs: Vec<(usize, usize)> =
        (0..points.len()).flat_map(|i| (0..cfg.trials_per_point).map(move |t| (i, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, t)| {
                let seed = trial_seed(cfg, i, t);
                let metrics = run_trial(cfg, &points[i], seed)?;
                Ok(SweepRow { point: points[i].clone(), trial: t, seed, metrics })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepResult { columns: cfg.axis_columns(), rows })
}

/// Write the result as CSV. Numbers use Rust's shortest round-trip formatting,
/// which does not depend on the locale.
pub fn emit_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = result.columns.clone();
    header.extend(["trial", "seed", "ber", "evm_db", "q_db", "converged", "branch_cspr_db"]);
    w.write_record(&header)?;
    for r in &result.rows {
        let m = &r.metrics;
        let mut rec: Vec<String> = r.point.iter().map(|v| v.to_string()).collect();
        rec.push(r.trial.to_string());
        rec.push(r.seed.to_string());
        rec.push(m.ber.to_string());
        rec.push(m.evm_db.to_string());
        rec.push(m.q_db.to_string());
        rec.push(m.converged.to_string());
        rec.push(m.per_branch_cspr.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    emit_csv(result, std::io::BufWriter::new(file))
}
