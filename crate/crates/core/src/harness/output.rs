//! Run directories: `trace.csv`, `episodes.csv`, `meta.json`, and the
//! optional `steps.csv` and `confidence.csv`. Sweeps add `summary.csv`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::diagnostics::{check_schedule, EpisodeBoundCheck};
use super::{BayesRegretSummary, Checkpoint, RunMeta, RunTrace};
use crate::error::{Error, Result};
use crate::psrl::{EpisodeSchedule, EpisodeTrigger};

/// Absolute tolerance of the identity `cum_regret = t * J_star - cum_reward`.
pub const ACCOUNTING_TOL: f64 = 1e-9;

/// One row of `episodes.csv`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub k: usize,
    pub t_k: u64,
    pub T_k: u64,
    pub trigger: EpisodeTrigger,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::parse(path, e)
    }
}

fn episode_rows(schedule: &EpisodeSchedule) -> Vec<EpisodeRow> {
    schedule
        .starts
        .iter()
        .zip(&schedule.lengths)
        .zip(&schedule.triggers)
        .enumerate()
        .map(|(i, ((&t_k, &len), &trigger))| EpisodeRow {
            k: i + 1,
            t_k,
            T_k: len,
            trigger,
        })
        .collect()
}

/// Writes all files of `trace` into `dir`, creating it if needed.
pub fn write_run(trace: &RunTrace, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join("trace.csv"), &trace.checkpoints)?;
    write_csv(&dir.join("episodes.csv"), &episode_rows(&trace.schedule))?;
    let meta_path = dir.join("meta.json");
    let mut json = serde_json::to_string_pretty(&trace.meta).expect("meta serializes");
    json.push('\n');
    std::fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))?;
    if let Some(steps) = &trace.steps {
        write_csv(&dir.join("steps.csv"), steps)?;
    }
    if let Some(diag) = &trace.diagnostics {
        write_csv(&dir.join("confidence.csv"), &diag.episodes)?;
    }
    Ok(())
}

pub fn write_summary(summary: &BayesRegretSummary, path: &Path) -> Result<()> {
    write_csv(path, &summary.rows)
}

pub fn read_trace(dir: &Path) -> Result<Vec<Checkpoint>> {
    read_csv(&dir.join("trace.csv"))
}

pub fn read_episodes(dir: &Path) -> Result<Vec<EpisodeRow>> {
    read_csv(&dir.join("episodes.csv"))
}

pub fn read_meta(dir: &Path) -> Result<RunMeta> {
    let path = dir.join("meta.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, e))
}

/// Result of `check-bounds` on a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub episodes: EpisodeBoundCheck,
    /// Largest `|cum_regret - (t J_star - cum_reward)|` over checkpoints.
    pub accounting_error: f64,
    pub accounting_ok: bool,
    /// `K_T` in `meta.json` matches the row count of `episodes.csv`.
    pub meta_consistent: bool,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.episodes.passed() && self.accounting_ok && self.meta_consistent
    }
}

/// Re-checks a written run: growth rule, episode bound and regret accounting.
pub fn check_bounds_dir(dir: &Path) -> Result<BoundsReport> {
    let meta = read_meta(dir)?;
    let rows = read_episodes(dir)?;
    let checkpoints = read_trace(dir)?;

    let mut schedule = EpisodeSchedule::default();
    for row in &rows {
        schedule.starts.push(row.t_k);
        schedule.lengths.push(row.T_k);
        schedule.triggers.push(row.trigger);
    }
    let ordered = rows.iter().enumerate().all(|(i, r)| r.k == i + 1);
    let covers_horizon = match rows.last() {
        Some(last) => rows[0].t_k == 1 && last.t_k + last.T_k == meta.T + 1,
        None => false,
    };
    let mut episodes = check_schedule(&schedule, meta.S, meta.A, meta.T);
    episodes.growth_rule &= ordered && covers_horizon;

    let accounting_error = checkpoints
        .iter()
        .map(|c| (c.cum_regret - (c.t as f64 * meta.J_star - c.cum_reward)).abs())
        .fold(0.0, f64::max);
    Ok(BoundsReport {
        episodes,
        accounting_error,
        accounting_ok: accounting_error <= ACCOUNTING_TOL,
        meta_consistent: meta.K_T == rows.len(),
    })
}
