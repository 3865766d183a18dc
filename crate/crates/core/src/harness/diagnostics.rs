//! Regret arithmetic, confidence sets and episode-count checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psrl::{episode_bound, EpisodeSchedule};
use crate::sg_model::GameShape;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `R(t) = sum_{i<=t} (J* - r_i)` for every prefix of `rewards`.
pub fn compute_regret_curve(rewards: &[f64], j_star: f64) -> Vec<f64> {
    let mut acc = CompensatedSum::default();
    rewards
        .iter()
        .map(|r| {
            acc.add(j_star - r);
            acc.value()
        })
        .collect()
}

/// `sqrt(14 S ln(2 A t_k T) / max(1, N))`, with `A` the number of joint actions.
pub fn confidence_radius(n_states: usize, n_joint_actions: usize, t_k: u64, horizon: u64, visits: u64) -> Result<f64> {
    let arg = 2.0 * n_joint_actions as f64 * t_k as f64 * horizon as f64;
    if arg <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "confidence radius needs 2 A t_k T > 1, got {arg}"
        )));
    }
    Ok((14.0 * n_states as f64 * arg.ln() / visits.max(1) as f64).sqrt())
}

/// Maximum-likelihood kernel from transition counts laid out like a kernel.
/// Rows with no visits are uniform.
pub fn empirical_kernel(shape: GameShape, transitions: &[u64]) -> Vec<f64> {
    let s = shape.n_states;
    transitions
        .chunks(s)
        .flat_map(|row| {
            let n: u64 = row.iter().sum();
            row.iter().map(move |&c| if n == 0 { 1.0 / s as f64 } else { c as f64 / n as f64 })
        })
        .collect()
}

/// Whether every row of `kernel` is within L1 distance `radii[pair]` of the
/// matching row of `center`.
pub fn check_confidence_membership(shape: GameShape, kernel: &[f64], center: &[f64], radii: &[f64]) -> Result<bool> {
    let n = shape.n_pairs() * shape.n_states;
    for (len, expected) in [(kernel.len(), n), (center.len(), n), (radii.len(), shape.n_pairs())] {
        if len != expected {
            return Err(Error::DimensionMismatch { expected, actual: len });
        }
    }
    Ok(kernel
        .chunks(shape.n_states)
        .zip(center.chunks(shape.n_states))
        .zip(radii)
        .all(|((p, q), &b)| p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>() <= b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeBoundCheck {
    pub episodes: usize,
    pub bound: f64,
    pub growth_rule: bool,
    pub within_bound: bool,
}

impl EpisodeBoundCheck {
    pub fn passed(&self) -> bool {
        self.growth_rule && self.within_bound
    }
}

/// `K_T <= sqrt(2 S A T ln T)`.
pub fn check_episode_bound(episodes: usize, n_states: usize, n_joint_actions: usize, horizon: u64) -> bool {
    episodes as f64 <= episode_bound(n_states, n_joint_actions, horizon)
}

/// Checks a closed schedule against the growth rule and the episode bound.
pub fn check_schedule(schedule: &EpisodeSchedule, n_states: usize, n_joint_actions: usize, horizon: u64) -> EpisodeBoundCheck {
    let episodes = schedule.count();
    EpisodeBoundCheck {
        episodes,
        bound: episode_bound(n_states, n_joint_actions, horizon),
        growth_rule: schedule.satisfies_growth_rule(),
        within_bound: check_episode_bound(episodes, n_states, n_joint_actions, horizon),
    }
}

/// One row of `confidence.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfidence {
    pub k: usize,
    pub t_k: u64,
    /// Smallest radius over state-action pairs.
    pub min_radius: f64,
    /// Largest L1 distance between the true and empirical rows.
    pub max_l1: f64,
    pub contains_true: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceDiagnostics {
    pub episodes: Vec<EpisodeConfidence>,
}

impl ConfidenceDiagnostics {
    /// Fraction of episodes whose confidence set contains the true kernel.
    pub fn coverage(&self) -> f64 {
        if self.episodes.is_empty() {
            return 1.0;
        }
        let hit = self.episodes.iter().filter(|e| e.contains_true).count();
        hit as f64 / self.episodes.len() as f64
    }
}

/// Confidence-set record for the episode starting at `t_k` given the
/// transition counts accumulated before `t_k`.
pub fn episode_confidence(
    shape: GameShape,
    true_kernel: &[f64],
    transitions: &[u64],
    k: usize,
    t_k: u64,
    horizon: u64,
) -> Result<EpisodeConfidence> {
    let center = empirical_kernel(shape, transitions);
    let radii = transitions
        .chunks(shape.n_states)
        .map(|row| confidence_radius(shape.n_states, shape.n_joint_actions(), t_k, horizon, row.iter().sum()))
        .collect::<Result<Vec<_>>>()?;
    let max_l1 = true_kernel
        .chunks(shape.n_states)
        .zip(center.chunks(shape.n_states))
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(EpisodeConfidence {
        k,
        t_k,
        min_radius: radii.iter().copied().fold(f64::INFINITY, f64::min),
        max_l1,
        contains_true: check_confidence_membership(shape, true_kernel, &center, &radii)?,
    })
}

/// Least-squares slope of `ln y` against `ln x`. Points with non-positive
/// coordinates are an error.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter("need at least two points".into()));
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::InvalidParameter("log-log fit needs positive values".into()));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psrl::EpisodeTrigger;

    #[test]
    fn radius_example() {
        let b = confidence_radius(2, 4, 10, 100, 0).unwrap();
        assert!((b - (28.0 * 8000f64.ln()).sqrt()).abs() < 1e-12);
        assert!((b - 15.8632).abs() < 1e-4);
        assert!(confidence_radius(1, 1, 1, 0, 3).is_err());
    }

    #[test]
    fn compensated_regret_matches_closed_form() {
        let rewards = vec![-0.1; 100_000];
        let curve = compute_regret_curve(&rewards, -0.1);
        assert!(curve.iter().all(|&r| r == 0.0));
        let curve = compute_regret_curve(&rewards, 0.0);
        assert!((curve[99_999] - 10_000.0).abs() < 1e-9);
    }

    #[test]
    fn empirical_rows_default_to_uniform() {
        let shape = GameShape::new(2, 1, 1).unwrap();
        assert_eq!(empirical_kernel(shape, &[3, 1, 0, 0]), vec![0.75, 0.25, 0.5, 0.5]);
    }

    #[test]
    fn membership_is_per_row() {
        let shape = GameShape::new(2, 1, 1).unwrap();
        let p = [0.5, 0.5, 1.0, 0.0];
        let q = [0.6, 0.4, 0.5, 0.5];
        assert!(check_confidence_membership(shape, &p, &q, &[0.2, 1.0]).unwrap());
        assert!(!check_confidence_membership(shape, &p, &q, &[0.2, 0.9]).unwrap());
        assert!(check_confidence_membership(shape, &p, &q, &[0.2]).is_err());
    }

    #[test]
    fn bound_examples() {
        assert!(check_episode_bound(300, 3, 4, 100_000));
        assert!(!check_episode_bound(6000, 3, 4, 100_000));
        assert!(check_episode_bound(1, 1, 1, 2));
    }

    #[test]
    fn bound_check_flags_violations() {
        let mut sched = EpisodeSchedule::default();
        for t in [1, 2, 4, 7] {
            sched.record_start(t, EpisodeTrigger::Length);
        }
        let check = check_schedule(&sched.close(10), 1, 1, 10);
        assert!(check.passed());
        assert_eq!(check.episodes, 4);

        let mut bad = EpisodeSchedule::default();
        bad.record_start(1, EpisodeTrigger::Length);
        bad.record_start(5, EpisodeTrigger::Length);
        assert!(!check_schedule(&bad.close(10), 1, 1, 10).growth_rule);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<_> = (1..=20).map(|i| (i as f64, 3.0 * (i as f64).powf(0.5))).collect();
        assert!((loglog_slope(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_err());
    }
}
