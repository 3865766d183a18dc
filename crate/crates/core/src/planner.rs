//! Average-reward planning for a known kernel.
//!
//! [`solve_sg`] solves the maximin Bellman equation
//!
//! ```text
//! J + v(s) = val{ r(s,.,.) + sum_{s'} theta(s'|s,.,.) v(s') }
//! ```
//!
//! by relative value iteration on the damped kernel
//! `tau * I + (1 - tau) * theta`. The damped chain is aperiodic and has the
//! same gain; its bias is the original bias divided by `1 - tau`. The
//! iteration below runs directly in the rescaled coordinates
//! `x = (1 - tau) * w`, where one step reads
//! `x <- tau * x + (1 - tau) * T(x)` and `T` is the undamped Bellman operator,
//! so the returned bias needs no further scaling.
//!
//! [`solve_mdp`] is the same iteration after one player's stationary policy
//! has been folded into rewards and transitions. [`evaluate_policy_pair`]
//! computes the exact gain of a fixed stationary pair from the stationary
//! distribution of the induced chain.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_game::solve_matrix_game;
use crate::sg_model::{MixedStrategy, StationaryPolicy, StochasticGame};

/// Duality-gap tolerance for the per-state matrix games.
pub const MATRIX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub tol: f64,
    /// Aperiodicity damping `tau` in `(0, 1)`.
    pub damping: f64,
    pub max_iter: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            damping: 0.2,
            max_iter: 1_000_000,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("planner tol must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1), got {}",
                self.damping
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Gain, bias and equilibrium policies of an average-reward game or MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningSolution {
    pub gain: f64,
    /// Normalized so that `min_s bias(s) = 0`.
    pub bias: Vec<f64>,
    pub agent_policy: Option<StationaryPolicy>,
    pub opponent_policy: Option<StationaryPolicy>,
    /// `max_s bias(s) - min_s bias(s)`.
    pub span: f64,
    /// `max_s |gain + bias(s) - (T bias)(s)|` on the undamped kernel.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PlanningSolution {
    pub fn agent_policy(&self) -> &StationaryPolicy {
        self.agent_policy.as_ref().expect("solution carries an agent policy")
    }

    pub fn opponent_policy(&self) -> &StationaryPolicy {
        self.opponent_policy.as_ref().expect("solution carries an opponent policy")
    }
}

struct RviOutcome {
    x: Vec<f64>,
    gain: f64,
    increment_span: f64,
    iterations: usize,
    converged: bool,
}

/// Damped relative value iteration; `backup(x, out)` must write `T(x)` into `out`.
fn damped_rvi<F>(n_states: usize, cfg: &PlannerConfig, mut backup: F) -> Result<RviOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    cfg.validate()?;
    let tau = cfg.damping;
    let threshold = cfg.tol * (1.0 - tau);
    let mut x = vec![0.0; n_states];
    let mut tx = vec![0.0; n_states];
    let mut last = (f64::NAN, f64::INFINITY);

    for iter in 1..=cfg.max_iter {
        backup(&x, &mut tx)?;
        let (lo, hi) = x
            .iter()
            .zip(&tx)
            .map(|(a, b)| b - a)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let gain = 0.5 * (lo + hi);
        last = (gain, hi - lo);
        if hi - lo <= threshold {
            return Ok(RviOutcome {
                x,
                gain,
                increment_span: hi - lo,
                iterations: iter,
                converged: true,
            });
        }
        for (xi, ti) in x.iter_mut().zip(&tx) {
            *xi = tau * *xi + (1.0 - tau) * ti;
        }
        let anchor = x.iter().copied().fold(f64::INFINITY, f64::min);
        x.iter_mut().for_each(|xi| *xi -= anchor);
    }
    Ok(RviOutcome {
        x,
        gain: last.0,
        increment_span: last.1,
        iterations: cfg.max_iter,
        converged: false,
    })
}

fn normalize_bias(x: &[f64]) -> (Vec<f64>, f64) {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let bias: Vec<f64> = x.iter().map(|v| v - lo).collect();
    let span = bias.iter().copied().fold(0.0, f64::max);
    (bias, span)
}

fn finish(solution: PlanningSolution, increment_span: f64) -> Result<PlanningSolution> {
    if solution.converged {
        Ok(solution)
    } else {
        Err(Error::NoConvergence {
            best: Box::new(solution),
            span: increment_span,
        })
    }
}

/// Solves the maximin Bellman equation of `game`.
pub fn solve_sg(game: &StochasticGame, cfg: &PlannerConfig) -> Result<PlanningSolution> {
    let n = game.n_states();
    let outcome = damped_rvi(n, cfg, |x, out| {
        for (s, o) in out.iter_mut().enumerate() {
            *o = solve_matrix_game(&game.stage_matrix(s, x), MATRIX_TOL)?.value;
        }
        Ok(())
    })?;

    let (bias, span) = normalize_bias(&outcome.x);
    let mut residual: f64 = 0.0;
    let mut agent = Vec::with_capacity(n);
    let mut opponent = Vec::with_capacity(n);
    for s in 0..n {
        let sol = solve_matrix_game(&game.stage_matrix(s, &bias), MATRIX_TOL)?;
        residual = residual.max((outcome.gain + bias[s] - sol.value).abs());
        agent.push(sol.row_strategy);
        opponent.push(sol.col_strategy);
    }
    finish(
        PlanningSolution {
            gain: outcome.gain,
            bias,
            agent_policy: Some(StationaryPolicy::new(agent)?),
            opponent_policy: Some(StationaryPolicy::new(opponent)?),
            span,
            residual,
            iterations: outcome.iterations,
            converged: outcome.converged,
        },
        outcome.increment_span,
    )
}

/// `max_s |gain + bias(s) - val_s(r + theta bias)|`.
pub fn bellman_residual(game: &StochasticGame, gain: f64, bias: &[f64]) -> Result<f64> {
    if bias.len() != game.n_states() {
        return Err(Error::DimensionMismatch {
            expected: game.n_states(),
            actual: bias.len(),
        });
    }
    let mut residual: f64 = 0.0;
    for (s, b) in bias.iter().enumerate() {
        let value = solve_matrix_game(&game.stage_matrix(s, bias), MATRIX_TOL)?.value;
        residual = residual.max((gain + b - value).abs());
    }
    Ok(residual)
}

/// Which player's policy is held fixed in [`solve_mdp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerSide {
    Agent,
    Opponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Max,
    Min,
}

/// Single-player MDP left after one side of a game is fixed.
struct InducedMdp {
    n_states: usize,
    n_actions: usize,
    reward: Vec<f64>,
    kernel: Vec<f64>,
}

impl InducedMdp {
    fn new(game: &StochasticGame, fixed: &StationaryPolicy, fixed_side: PlayerSide) -> Result<Self> {
        let (n, a1n, a2n) = (game.n_states(), game.n_actions_1(), game.n_actions_2());
        let (fixed_actions, free_actions) = match fixed_side {
            PlayerSide::Agent => (a1n, a2n),
            PlayerSide::Opponent => (a2n, a1n),
        };
        fixed.check_dims(n, fixed_actions)?;
        let mut reward = vec![0.0; n * free_actions];
        let mut kernel = vec![0.0; n * free_actions * n];
        for s in 0..n {
            let probs = fixed.at(s).probs();
            for free in 0..free_actions {
                let idx = s * free_actions + free;
                for (f, &p) in probs.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let (a1, a2) = match fixed_side {
                        PlayerSide::Agent => (f, free),
                        PlayerSide::Opponent => (free, f),
                    };
                    reward[idx] += p * game.reward(s, a1, a2);
                    for (k, q) in game.kernel_row(s, a1, a2).iter().enumerate() {
                        kernel[idx * n + k] += p * q;
                    }
                }
            }
        }
        Ok(Self {
            n_states: n,
            n_actions: free_actions,
            reward,
            kernel,
        })
    }

    fn q_value(&self, s: usize, a: usize, x: &[f64]) -> f64 {
        let idx = s * self.n_actions + a;
        let row = &self.kernel[idx * self.n_states..(idx + 1) * self.n_states];
        self.reward[idx] + row.iter().zip(x).map(|(p, v)| p * v).sum::<f64>()
    }

    /// Optimal value and the lowest-index optimal action at `s`.
    fn best(&self, s: usize, x: &[f64], objective: Objective) -> (f64, usize) {
        let sign = match objective {
            Objective::Max => 1.0,
            Objective::Min => -1.0,
        };
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..self.n_actions {
            let v = sign * self.q_value(s, a, x);
            if v > best.0 + 1e-12 {
                best = (v, a);
            }
        }
        (sign * best.0, best.1)
    }
}

/// Best response of the free player against a fixed stationary policy.
///
/// Only the free player's policy is filled in the returned solution.
pub fn solve_mdp(
    game: &StochasticGame,
    fixed_policy: &StationaryPolicy,
    fixed_side: PlayerSide,
    objective: Objective,
    cfg: &PlannerConfig,
) -> Result<PlanningSolution> {
    let mdp = InducedMdp::new(game, fixed_policy, fixed_side)?;
    let outcome = damped_rvi(mdp.n_states, cfg, |x, out| {
        for (s, o) in out.iter_mut().enumerate() {
            *o = mdp.best(s, x, objective).0;
        }
        Ok(())
    })?;

    let (bias, span) = normalize_bias(&outcome.x);
    let mut residual: f64 = 0.0;
    let mut actions = Vec::with_capacity(mdp.n_states);
    for (s, b) in bias.iter().enumerate() {
        let (value, action) = mdp.best(s, &bias, objective);
        residual = residual.max((outcome.gain + b - value).abs());
        actions.push(action);
    }
    let policy = StationaryPolicy::pure(mdp.n_actions, &actions);
    let (agent_policy, opponent_policy) = match fixed_side {
        PlayerSide::Agent => (None, Some(policy)),
        PlayerSide::Opponent => (Some(policy), None),
    };
    finish(
        PlanningSolution {
            gain: outcome.gain,
            bias,
            agent_policy,
            opponent_policy,
            span,
            residual,
            iterations: outcome.iterations,
            converged: outcome.converged,
        },
        outcome.increment_span,
    )
}

/// Transition matrix and per-state reward of the chain induced by a stationary pair.
pub fn induced_chain(
    game: &StochasticGame,
    agent: &StationaryPolicy,
    opponent: &StationaryPolicy,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = game.n_states();
    agent.check_dims(n, game.n_actions_1())?;
    opponent.check_dims(n, game.n_actions_2())?;
    let mut p = DMatrix::zeros(n, n);
    let mut r = vec![0.0; n];
    for s in 0..n {
        for (a1, &p1) in agent.at(s).probs().iter().enumerate() {
            for (a2, &p2) in opponent.at(s).probs().iter().enumerate() {
                let w = p1 * p2;
                if w == 0.0 {
                    continue;
                }
                r[s] += w * game.reward(s, a1, a2);
                for (k, q) in game.kernel_row(s, a1, a2).iter().enumerate() {
                    p[(s, k)] += w * q;
                }
            }
        }
    }
    Ok((p, r))
}

/// Stationary distribution of a unichain transition matrix.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    let rank = a.clone().svd(false, false).rank(1e-10);
    if rank + 1 < n {
        return Err(Error::SingularChain { rank, expected: n - 1 });
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let mu = a.lu().solve(&b).ok_or(Error::SingularChain { rank, expected: n - 1 })?;
    Ok(mu.iter().copied().collect())
}

/// Exact long-run average reward of a fixed stationary pair.
pub fn evaluate_policy_pair(
    game: &StochasticGame,
    agent: &StationaryPolicy,
    opponent: &StationaryPolicy,
) -> Result<f64> {
    let (p, r) = induced_chain(game, agent, opponent)?;
    let mu = stationary_distribution(&p)?;
    Ok(mu.iter().zip(&r).map(|(m, x)| m * x).sum())
}

/// Convenience: equilibrium strategy pair of the one-shot game at `s` for a given bias.
pub fn stage_equilibrium(game: &StochasticGame, s: usize, bias: &[f64]) -> Result<(MixedStrategy, MixedStrategy)> {
    let sol = solve_matrix_game(&game.stage_matrix(s, bias), MATRIX_TOL)?;
    Ok((sol.row_strategy, sol.col_strategy))
}
