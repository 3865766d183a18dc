//! Posterior-sampling agent for zero-sum stochastic games.
//!
//! The agent keeps an independent Dirichlet posterior over every transition
//! row `theta(. | s, a1, a2)`. Time runs `t = 1, 2, ...`; the episode state
//! starts at `t_1 = 0` so that the first call produces `T_0 = 1`. At the start
//! of every episode it samples a kernel from the posterior, solves the
//! maximin Bellman equation for that sample and plays the agent side of the
//! solution until either
//!
//! - `t > t_k + T_{k-1}` (the episode grew one step longer than the previous
//!   one), or
//! - some `(s, a)` has `N_t(s, a) > 2 N_{t_k}(s, a)` (its visit count doubled),
//!
//! where `N_t` counts visits strictly before `t`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{solve_sg, PlannerConfig};
use crate::sg_model::{check_index, GameShape, RewardTable, StationaryPolicy, StochasticGame};

/// Dirichlet pseudo-counts per `(s, a1, a2)` row: prior plus observed transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletCounts {
    shape: GameShape,
    prior: Vec<f64>,
    observed: Vec<u64>,
}

impl DirichletCounts {
    /// Symmetric prior with the same pseudo-count for every next state.
    pub fn symmetric(shape: GameShape, pseudo_count: f64) -> Result<Self> {
        Self::with_prior(shape, vec![pseudo_count; shape.n_pairs() * shape.n_states])
    }

    /// Arbitrary positive prior in `(s, a1, a2, s')` order.
    pub fn with_prior(shape: GameShape, prior: Vec<f64>) -> Result<Self> {
        let expected = shape.n_pairs() * shape.n_states;
        if prior.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: prior.len(),
            });
        }
        if let Some(bad) = prior.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet pseudo-counts must be positive, got {bad}"
            )));
        }
        Ok(Self {
            shape,
            prior,
            observed: vec![0; expected],
        })
    }

    pub fn shape(&self) -> GameShape {
        self.shape
    }

    fn row_range(&self, s: usize, a1: usize, a2: usize) -> std::ops::Range<usize> {
        let start = self.shape.pair_index(s, a1, a2) * self.shape.n_states;
        start..start + self.shape.n_states
    }

    pub fn alpha_row(&self, s: usize, a1: usize, a2: usize) -> Vec<f64> {
        let range = self.row_range(s, a1, a2);
        self.prior[range.clone()]
            .iter()
            .zip(&self.observed[range])
            .map(|(p, n)| p + *n as f64)
            .collect()
    }

    pub fn prior_row(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        &self.prior[self.row_range(s, a1, a2)]
    }

    /// Observed transition counts `N(s' | s, a1, a2)`.
    pub fn observed_row(&self, s: usize, a1: usize, a2: usize) -> &[u64] {
        &self.observed[self.row_range(s, a1, a2)]
    }

    /// Observed counts for the whole table, `(s, a1, a2, s')` order.
    pub fn observed(&self) -> &[u64] {
        &self.observed
    }

    /// Conjugate update for one observed transition `s --(a1, a2)--> next`.
    pub fn posterior_update(&mut self, s: usize, a1: usize, a2: usize, next: usize) -> Result<()> {
        self.shape.check_pair(s, a1, a2)?;
        check_index("next state", next, self.shape.n_states)?;
        let idx = self.row_range(s, a1, a2).start + next;
        self.observed[idx] += 1;
        Ok(())
    }

    /// Posterior mean `alpha / sum(alpha)` of one row.
    pub fn posterior_mean_row(&self, s: usize, a1: usize, a2: usize) -> Vec<f64> {
        let alpha = self.alpha_row(s, a1, a2);
        let total: f64 = alpha.iter().sum();
        alpha.into_iter().map(|a| a / total).collect()
    }

    /// Draws every row independently from its Dirichlet posterior. The result
    /// is a flat kernel in `(s, a1, a2, s')` order.
    pub fn sample_kernel<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.shape.n_states;
        let mut kernel = Vec::with_capacity(self.prior.len());
        let mut row = vec![0.0; n];
        for pair in 0..self.shape.n_pairs() {
            let (s, a1, a2) = self.shape.pair_of(pair);
            let alpha = self.alpha_row(s, a1, a2);
            for (x, a) in row.iter_mut().zip(&alpha) {
                *x = Gamma::new(*a, 1.0).expect("positive shape").sample(rng);
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                kernel.extend(row.iter().map(|x| x / total));
            } else {
                // Every gamma draw underflowed (tiny shapes only): use the mean.
                let a_total: f64 = alpha.iter().sum();
                kernel.extend(alpha.iter().map(|a| a / a_total));
            }
        }
        kernel
    }
}

/// Visit counts `N_t(s, a)` and their snapshot `N_{t_k}(s, a)` at the current episode start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounts {
    live: Vec<u64>,
    snapshot: Vec<u64>,
}

impl VisitCounts {
    pub fn new(shape: GameShape) -> Self {
        Self {
            live: vec![0; shape.n_pairs()],
            snapshot: vec![0; shape.n_pairs()],
        }
    }

    /// Builds counts directly from tables indexed by `GameShape::pair_index`.
    pub fn from_tables(live: Vec<u64>, snapshot: Vec<u64>) -> Result<Self> {
        if live.len() != snapshot.len() {
            return Err(Error::DimensionMismatch {
                expected: live.len(),
                actual: snapshot.len(),
            });
        }
        Ok(Self { live, snapshot })
    }

    pub fn record(&mut self, pair_index: usize) {
        self.live[pair_index] += 1;
    }

    /// Copies live counts into the snapshot.
    pub fn freeze(&mut self) {
        self.snapshot.copy_from_slice(&self.live);
    }

    pub fn live(&self) -> &[u64] {
        &self.live
    }

    pub fn snapshot(&self) -> &[u64] {
        &self.snapshot
    }

    pub fn total(&self) -> u64 {
        self.live.iter().sum()
    }

    pub fn any_doubled(&self) -> bool {
        self.live.iter().zip(&self.snapshot).any(|(l, s)| *l > 2 * *s)
    }
}

/// Which stopping criterion started an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeTrigger {
    Length,
    Doubling,
}

impl EpisodeTrigger {
    pub fn as_str(&self) -> &'static str {
        match self {
            EpisodeTrigger::Length => "length",
            EpisodeTrigger::Doubling => "doubling",
        }
    }
}

/// The criterion that ends the current episode at time `t`, if any. Doubling
/// takes precedence when both fire.
pub fn episode_trigger(visits: &VisitCounts, t: u64, episode_start: u64, prev_length: u64) -> Option<EpisodeTrigger> {
    if visits.any_doubled() {
        Some(EpisodeTrigger::Doubling)
    } else if t > episode_start + prev_length {
        Some(EpisodeTrigger::Length)
    } else {
        None
    }
}

/// `t > t_k + T_{k-1}` or `N_t(s, a) > 2 N_{t_k}(s, a)` for some `(s, a)`.
pub fn should_start_new_episode(visits: &VisitCounts, t: u64, episode_start: u64, prev_length: u64) -> bool {
    episode_trigger(visits, t, episode_start, prev_length).is_some()
}

/// Episode start times, lengths and start triggers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSchedule {
    pub starts: Vec<u64>,
    /// Lengths of completed episodes; the open episode has no entry until
    /// [`EpisodeSchedule::close`] is called.
    pub lengths: Vec<u64>,
    pub triggers: Vec<EpisodeTrigger>,
}

impl EpisodeSchedule {
    pub fn record_start(&mut self, t: u64, trigger: EpisodeTrigger) {
        if let Some(&prev) = self.starts.last() {
            self.lengths.push(t - prev);
        }
        self.starts.push(t);
        self.triggers.push(trigger);
    }

    /// `K_t`: number of episodes started so far.
    pub fn count(&self) -> usize {
        self.starts.len()
    }

    /// Schedule truncated at `horizon`: episodes starting after it are dropped
    /// and the last one ends at `horizon + 1`.
    pub fn close(&self, horizon: u64) -> EpisodeSchedule {
        let k = self.starts.iter().take_while(|&&t| t <= horizon).count();
        let starts = self.starts[..k].to_vec();
        let triggers = self.triggers[..k].to_vec();
        let mut lengths: Vec<u64> = starts.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(&last) = starts.last() {
            lengths.push(horizon + 1 - last);
        }
        EpisodeSchedule {
            starts,
            lengths,
            triggers,
        }
    }

    /// `t_{k+1} = t_k + T_k` and `T_k <= T_{k-1} + 1` with `T_0 = 1`.
    pub fn satisfies_growth_rule(&self) -> bool {
        let consistent = self
            .starts
            .windows(2)
            .zip(&self.lengths)
            .all(|(w, len)| w[1] == w[0] + len);
        let mut prev = 1;
        let growth = self.lengths.iter().all(|&len| {
            let ok = len <= prev + 1;
            prev = len;
            ok
        });
        consistent && growth
    }
}

/// `sqrt(2 S A T ln T)`, the bound on the number of episodes by time `T`.
pub fn episode_bound(n_states: usize, n_joint_actions: usize, horizon: u64) -> f64 {
    let t = horizon as f64;
    (2.0 * n_states as f64 * n_joint_actions as f64 * t * t.ln()).sqrt()
}

/// Draws `a1 ~ policy(. | s)`.
pub fn select_action<R: Rng + ?Sized>(policy: &StationaryPolicy, s: usize, rng: &mut R) -> Result<usize> {
    check_index("state", s, policy.n_states())?;
    Ok(policy.at(s).sample(rng))
}

/// Agent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsrlConfig {
    /// Symmetric Dirichlet pseudo-count per next state.
    pub prior_pseudo_count: f64,
    pub planner_tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    /// When set, posterior samples whose bias span exceeds this value are
    /// redrawn (up to [`MAX_SPAN_REDRAWS`] times).
    pub max_sample_span: Option<f64>,
}

pub const MAX_SPAN_REDRAWS: usize = 100;

impl Default for PsrlConfig {
    fn default() -> Self {
        let planner = PlannerConfig::default();
        Self {
            prior_pseudo_count: 1.0,
            planner_tol: planner.tol,
            damping: planner.damping,
            max_iter: planner.max_iter,
            max_sample_span: None,
        }
    }
}

impl PsrlConfig {
    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            tol: self.planner_tol,
            damping: self.damping,
            max_iter: self.max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prior_pseudo_count > 0.0 && self.prior_pseudo_count.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior_pseudo_count must be positive, got {}",
                self.prior_pseudo_count
            )));
        }
        self.planner().validate()
    }
}

/// PSRL agent state. Holds only the reward table; the true kernel is never
/// visible to it.
#[derive(Debug, Clone)]
pub struct PsrlAgent {
    rewards: RewardTable,
    config: PsrlConfig,
    counts: DirichletCounts,
    visits: VisitCounts,
    schedule: EpisodeSchedule,
    /// Time of the next action, starting at 1.
    t: u64,
    episode_start: u64,
    prev_length: u64,
    policy: Option<StationaryPolicy>,
    sample: Option<StochasticGame>,
    sample_gain: f64,
    pending: Option<(usize, usize)>,
    rng: ChaCha8Rng,
}

impl PsrlAgent {
    pub fn new(rewards: RewardTable, config: PsrlConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let shape = rewards.shape();
        Ok(Self {
            counts: DirichletCounts::symmetric(shape, config.prior_pseudo_count)?,
            visits: VisitCounts::new(shape),
            schedule: EpisodeSchedule::default(),
            t: 1,
            episode_start: 0,
            prev_length: 0,
            policy: None,
            sample: None,
            sample_gain: f64::NAN,
            pending: None,
            rewards,
            config,
            rng,
        })
    }

    pub fn shape(&self) -> GameShape {
        self.rewards.shape()
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &DirichletCounts {
        &self.counts
    }

    pub fn visits(&self) -> &VisitCounts {
        &self.visits
    }

    pub fn schedule(&self) -> &EpisodeSchedule {
        &self.schedule
    }

    pub fn current_policy(&self) -> Option<&StationaryPolicy> {
        self.policy.as_ref()
    }

    /// Game with the kernel sampled at the current episode start.
    pub fn current_sample(&self) -> Option<&StochasticGame> {
        self.sample.as_ref()
    }

    /// Gain of the current sampled game.
    pub fn current_sample_gain(&self) -> f64 {
        self.sample_gain
    }

    /// Starts an episode at the current time: records `T_{k-1} = t - t_k`,
    /// sets `t_k = t`, freezes the visit snapshot, samples a kernel and plans.
    pub fn begin_episode(&mut self, trigger: EpisodeTrigger) -> Result<()> {
        let t = self.t;
        self.prev_length = t - self.episode_start;
        self.episode_start = t;
        self.visits.freeze();
        self.schedule.record_start(t, trigger);

        let planner = self.config.planner();
        let mut attempts = 0;
        loop {
            let kernel = self.counts.sample_kernel(&mut self.rng);
            let game = StochasticGame::from_parts_unchecked(self.rewards.clone(), kernel)?;
            let solution = solve_sg(&game, &planner)?;
            attempts += 1;
            let accept = match self.config.max_sample_span {
                Some(limit) => solution.span <= limit || attempts >= MAX_SPAN_REDRAWS,
                None => true,
            };
            if accept {
                self.sample_gain = solution.gain;
                self.policy = solution.agent_policy;
                self.sample = Some(game);
                return Ok(());
            }
        }
    }

    /// Commits `a1_t` for the current state. Checks the stopping criteria
    /// first and starts a new episode when one fires.
    pub fn act(&mut self, s: usize) -> Result<usize> {
        self.shape().check_state(s)?;
        if self.pending.is_some() {
            return Err(Error::InvalidParameter("act called twice without observe".into()));
        }
        if self.policy.is_none() {
            self.begin_episode(EpisodeTrigger::Length)?;
        } else if let Some(trigger) = episode_trigger(&self.visits, self.t, self.episode_start, self.prev_length) {
            self.begin_episode(trigger)?;
        }
        let policy = self.policy.as_ref().expect("episode started");
        let a1 = select_action(policy, s, &mut self.rng)?;
        self.pending = Some((s, a1));
        Ok(a1)
    }

    /// Reveals the opponent action and the next state for the pending step.
    pub fn observe(&mut self, a2: usize, next: usize) -> Result<()> {
        let Some((s, a1)) = self.pending else {
            return Err(Error::InvalidParameter("observe called before act".into()));
        };
        self.counts.posterior_update(s, a1, a2, next)?;
        self.pending = None;
        self.visits.record(self.shape().pair_index(s, a1, a2));
        self.t += 1;
        Ok(())
    }
}
