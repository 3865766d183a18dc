use serde::{Deserialize, Serialize};

use super::RunTrace;
use crate::error::{Error, Result};

/// One row of `summary.csv`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t: u64,
    pub mean_regret: f64,
    /// Standard error of the mean; zero for a single run.
    pub se_regret: f64,
    pub min_regret: f64,
    pub max_regret: f64,
    pub mean_K_t: f64,
    pub n_runs: usize,
}

/// Monte Carlo estimate of Bayesian regret over independent runs.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesRegretSummary {
    pub n_runs: usize,
    pub horizon: u64,
    pub rows: Vec<SummaryRow>,
    pub mean_K_T: f64,
}

impl BayesRegretSummary {
    pub fn final_row(&self) -> &SummaryRow {
        self.rows.last().expect("at least one checkpoint")
    }

    pub fn row_at(&self, t: u64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.t == t)
    }
}

/// Per-checkpoint mean, standard error, min and max of cumulative regret.
pub fn aggregate_runs(traces: &[RunTrace]) -> Result<BayesRegretSummary> {
    let Some(first) = traces.first() else {
        return Err(Error::InvalidParameter("no runs to aggregate".into()));
    };
    let times: Vec<u64> = first.checkpoints.iter().map(|c| c.t).collect();
    for trace in &traces[1..] {
        let same = trace.meta.T == first.meta.T
            && trace.checkpoints.len() == times.len()
            && trace.checkpoints.iter().zip(&times).all(|(c, &t)| c.t == t);
        if !same {
            return Err(Error::MismatchedHorizon(format!(
                "seed {} (T = {}, {} checkpoints) vs seed {} (T = {}, {} checkpoints)",
                trace.meta.seed,
                trace.meta.T,
                trace.checkpoints.len(),
                first.meta.seed,
                first.meta.T,
                times.len()
            )));
        }
    }

    let n = traces.len();
    let nf = n as f64;
    let rows = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let regrets: Vec<f64> = traces.iter().map(|tr| tr.checkpoints[i].cum_regret).collect();
            let mean = regrets.iter().sum::<f64>() / nf;
            let se = if n > 1 {
                let var = regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (nf - 1.0);
                (var / nf).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                t,
                mean_regret: mean,
                se_regret: se,
                min_regret: regrets.iter().copied().fold(f64::INFINITY, f64::min),
                max_regret: regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_K_t: traces.iter().map(|tr| tr.checkpoints[i].episodes as f64).sum::<f64>() / nf,
                n_runs: n,
            }
        })
        .collect();
    Ok(BayesRegretSummary {
        n_runs: n,
        horizon: first.meta.T,
        rows,
        mean_K_T: traces.iter().map(|tr| tr.meta.K_T as f64).sum::<f64>() / nf,
    })
}

/// Largest mean regret across opponents at each checkpoint. Every finite zoo
/// gives a lower bound on the supremum over all opponent policies.
pub fn max_over_opponents(summaries: &[BayesRegretSummary]) -> Result<Vec<(u64, f64)>> {
    let Some(first) = summaries.first() else {
        return Err(Error::InvalidParameter("no summaries".into()));
    };
    for s in &summaries[1..] {
        if s.rows.len() != first.rows.len() || s.rows.iter().zip(&first.rows).any(|(a, b)| a.t != b.t) {
            return Err(Error::MismatchedHorizon("opponent summaries use different checkpoints".into()));
        }
    }
    Ok(first
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let worst = summaries.iter().map(|s| s.rows[i].mean_regret).fold(f64::NEG_INFINITY, f64::max);
            (row.t, worst)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::{Checkpoint, RunMeta};
    use super::*;
    use crate::psrl::EpisodeSchedule;

    fn trace(seed: u64, horizon: u64, finals: &[f64]) -> RunTrace {
        let checkpoints = finals
            .iter()
            .enumerate()
            .map(|(i, &r)| Checkpoint {
                t: (i as u64 + 1) * 10,
                cum_reward: 0.0,
                cum_regret: r,
                episodes: i + 1,
            })
            .collect();
        RunTrace {
            meta: RunMeta {
                J_star: 0.0,
                H_star: 0.0,
                K_T: finals.len(),
                seed,
                config_digest: String::new(),
                wall_time_s: 0.0,
                S: 1,
                A1: 1,
                A2: 1,
                A: 1,
                T: horizon,
                opponent: "uniform".into(),
            },
            checkpoints,
            schedule: EpisodeSchedule::default(),
            steps: None,
            diagnostics: None,
        }
    }

    #[test]
    fn two_runs() {
        let s = aggregate_runs(&[trace(0, 20, &[1.0, 10.0]), trace(1, 20, &[3.0, 20.0])]).unwrap();
        let last = s.final_row();
        assert_eq!((last.mean_regret, last.min_regret, last.max_regret), (15.0, 10.0, 20.0));
        assert!((last.se_regret - 5.0).abs() < 1e-12);
        assert_eq!(s.n_runs, 2);
        assert_eq!(s.mean_K_T, 2.0);
    }

    #[test]
    fn single_run_has_zero_error() {
        let s = aggregate_runs(&[trace(0, 20, &[1.0, 10.0])]).unwrap();
        assert_eq!(s.final_row().mean_regret, 10.0);
        assert_eq!(s.final_row().se_regret, 0.0);
    }

    #[test]
    fn mismatched_horizons() {
        let err = aggregate_runs(&[trace(0, 20, &[1.0, 2.0]), trace(1, 30, &[1.0, 2.0, 3.0])]).unwrap_err();
        assert!(matches!(err, Error::MismatchedHorizon(_)));
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn zoo_max() {
        let a = aggregate_runs(&[trace(0, 20, &[1.0, 5.0])]).unwrap();
        let b = aggregate_runs(&[trace(0, 20, &[2.0, 4.0])]).unwrap();
        assert_eq!(max_over_opponents(&[a, b]).unwrap(), vec![(10, 2.0), (20, 5.0)]);
    }
}
