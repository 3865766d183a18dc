//! Experiment driver: builds the true game, runs the agent against an
//! opponent, records regret and episode data, and aggregates seeds.

mod aggregate;
mod config;
mod diagnostics;
mod output;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate_runs, max_over_opponents, BayesRegretSummary, SummaryRow};
pub use config::{stream_rng, GameSource, RunConfig, RunSettings, Stream};
pub use diagnostics::{
    check_confidence_membership, check_episode_bound, check_schedule, compute_regret_curve,
    confidence_radius, empirical_kernel, episode_confidence, loglog_slope, CompensatedSum, ConfidenceDiagnostics,
    EpisodeBoundCheck, EpisodeConfidence,
};
pub use output::{
    check_bounds_dir, read_episodes, read_meta, read_trace, write_run, write_summary, BoundsReport, EpisodeRow,
    ACCOUNTING_TOL,
};

use crate::error::{Error, Result};
use crate::opponents::{build_opponent, History};
use crate::planner::solve_sg;
use crate::psrl::{DirichletCounts, EpisodeSchedule, PsrlAgent};
use crate::sg_model::{gen_chain_game, gen_random_game, validate_game, GameShape, StochasticGame};

/// Cumulative totals after step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub cum_reward: f64,
    pub cum_regret: f64,
    #[serde(rename = "K_t")]
    pub episodes: usize,
}

/// One row of `steps.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub s: usize,
    pub a1: usize,
    pub a2: usize,
    pub reward: f64,
    pub next: usize,
}

/// Contents of `meta.json`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub J_star: f64,
    pub H_star: f64,
    pub K_T: usize,
    pub seed: u64,
    pub config_digest: String,
    pub wall_time_s: f64,
    pub S: usize,
    pub A1: usize,
    pub A2: usize,
    /// Joint actions `A1 * A2`.
    pub A: usize,
    pub T: u64,
    pub opponent: String,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub meta: RunMeta,
    pub checkpoints: Vec<Checkpoint>,
    /// Closed at the horizon.
    pub schedule: EpisodeSchedule,
    pub steps: Option<Vec<StepRecord>>,
    pub diagnostics: Option<ConfidenceDiagnostics>,
}

impl RunTrace {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("horizon is at least 1")
    }

    /// Regret at the recorded checkpoint `t`.
    pub fn regret_at(&self, t: u64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.t == t).map(|c| c.cum_regret)
    }
}

/// Builds the true game described by `config.game`.
pub fn resolve_game(config: &RunConfig) -> Result<StochasticGame> {
    let mut rng = stream_rng(config.run.seed, Stream::Game);
    let game = match &config.game {
        GameSource::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            StochasticGame::from_json(&text).map_err(|e| Error::parse(path, e))?
        }
        GameSource::Random {
            n_states,
            n_actions_1,
            n_actions_2,
            mixing,
            seed,
        } => {
            let seed = seed.unwrap_or_else(|| rng.random());
            gen_random_game(*n_states, *n_actions_1, *n_actions_2, *mixing, seed)?
        }
        GameSource::Chain { n_states, slip, seed } => {
            let seed = seed.unwrap_or_else(|| rng.random());
            gen_chain_game(*n_states, *slip, seed)?
        }
        GameSource::Prior {
            n_states,
            n_actions_1,
            n_actions_2,
        } => {
            let shape = GameShape::new(*n_states, *n_actions_1, *n_actions_2)?;
            let prior = DirichletCounts::symmetric(shape, config.agent.prior_pseudo_count)?;
            let kernel = prior.sample_kernel(&mut rng);
            let reward = (0..shape.n_pairs()).map(|_| -rng.random::<f64>()).collect();
            StochasticGame::new(shape, reward, kernel)?
        }
    };
    let report = validate_game(&game);
    if !report.is_valid() {
        return Err(Error::InvalidGame(report.to_string()));
    }
    Ok(game)
}

/// Resolves the game from `config` and runs it.
pub fn run_experiment(config: &RunConfig) -> Result<RunTrace> {
    let game = resolve_game(config)?;
    run_on_game(&game, config)
}

/// Runs the agent for `config.run.horizon` steps on `game`.
///
/// Each step the agent commits `a1` before the opponent is queried, and the
/// opponent only sees the history up to `s_t`. The agent is handed the reward
/// table alone.
pub fn run_on_game(game: &StochasticGame, config: &RunConfig) -> Result<RunTrace> {
    config.validate()?;
    let started = Instant::now();
    let shape = game.shape();
    let run = &config.run;
    shape.check_state(run.initial_state)?;

    let equilibrium = solve_sg(game, &config.agent.planner())?;
    let j_star = equilibrium.gain;

    let mut agent = PsrlAgent::new(
        game.rewards().clone(),
        config.agent,
        stream_rng(run.seed, Stream::Agent),
    )?;
    let mut opponent_rng = match config.opponent.seed {
        Some(seed) => stream_rng(seed, Stream::Opponent),
        None => stream_rng(run.seed, Stream::Opponent),
    };
    let mut opponent = build_opponent(&config.opponent, game, &mut opponent_rng)?;
    let mut env_rng = stream_rng(run.seed, Stream::Environment);

    let mut history = History::new(run.initial_state);
    let mut reward_sum = CompensatedSum::default();
    let mut regret_sum = CompensatedSum::default();
    let mut checkpoints = Vec::with_capacity((run.horizon / run.checkpoint_stride) as usize + 1);
    let mut steps = run.per_step_log.then(|| Vec::with_capacity(run.horizon as usize));
    let mut diagnostics = run.diagnostics.then(ConfidenceDiagnostics::default);
    let mut transitions = vec![0u64; game.kernel().len()];

    for t in 1..=run.horizon {
        let s = history.current_state();
        let episodes_before = agent.schedule().count();
        let a1 = agent.act(s)?;
        let a2 = opponent.act(&history, &mut opponent_rng)?;
        shape.check_pair(s, a1, a2)?;

        if let Some(diag) = diagnostics.as_mut() {
            let k = agent.schedule().count();
            if k > episodes_before {
                diag.episodes
                    .push(episode_confidence(shape, game.kernel(), &transitions, k, t, run.horizon)?);
            }
        }

        let r = game.reward(s, a1, a2);
        let next = game.sample_next(s, a1, a2, &mut env_rng);
        agent.observe(a2, next)?;
        history.push(a1, a2, next);
        transitions[shape.pair_index(s, a1, a2) * shape.n_states + next] += 1;
        reward_sum.add(r);
        regret_sum.add(j_star - r);

        if let Some(log) = steps.as_mut() {
            log.push(StepRecord {
                t,
                s,
                a1,
                a2,
                reward: r,
                next,
            });
        }
        if t % run.checkpoint_stride == 0 || t == run.horizon {
            checkpoints.push(Checkpoint {
                t,
                cum_reward: reward_sum.value(),
                cum_regret: regret_sum.value(),
                episodes: agent.schedule().count(),
            });
        }
    }

    let schedule = agent.schedule().close(run.horizon);
    let meta = RunMeta {
        J_star: j_star,
        H_star: equilibrium.span,
        K_T: schedule.count(),
        seed: run.seed,
        config_digest: config.digest(),
        wall_time_s: started.elapsed().as_secs_f64(),
        S: shape.n_states,
        A1: shape.n_actions_1,
        A2: shape.n_actions_2,
        A: shape.n_joint_actions(),
        T: run.horizon,
        opponent: config.opponent.kind.name().to_string(),
    };
    Ok(RunTrace {
        meta,
        checkpoints,
        schedule,
        steps,
        diagnostics,
    })
}

/// Runs seeds `base, base + 1, ..., base + n - 1` on a pool of `threads`
/// workers. Results are in seed order.
pub fn run_sweep(config: &RunConfig, n_seeds: usize, threads: usize) -> Result<Vec<RunTrace>> {
    use rayon::prelude::*;

    if n_seeds == 0 {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let base = config.run.seed;
    pool.install(|| {
        (0..n_seeds as u64)
            .into_par_iter()
            .map(|i| run_experiment(&config.with_seed(base + i)))
            .collect()
    })
}
