//! Opponents that act on the public history.
//!
//! An opponent sees the history `h_t = (s_1, a_1, ..., s_t)` and chooses
//! `a2_t` before the agent's current action is revealed. Some opponents are
//! also handed the true game (an informed adversary); the agent never is.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{solve_mdp, solve_sg, Objective, PlannerConfig, PlayerSide};
use crate::psrl::{PsrlAgent, PsrlConfig};
use crate::sg_model::{GameShape, MixedStrategy, RewardTable, StationaryPolicy, StochasticGame};

/// One completed step of play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub agent_action: usize,
    pub opponent_action: usize,
}

/// Completed steps `(s_tau, a1_tau, a2_tau)` for `tau < t` plus the current state `s_t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    steps: Vec<Step>,
    current: usize,
}

impl History {
    pub fn new(initial_state: usize) -> Self {
        Self {
            steps: Vec::new(),
            current: initial_state,
        }
    }

    /// Appends the step taken in the current state and moves to `next`.
    pub fn push(&mut self, agent_action: usize, opponent_action: usize, next: usize) {
        self.steps.push(Step {
            state: self.current,
            agent_action,
            opponent_action,
        });
        self.current = next;
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn current_state(&self) -> usize {
        self.current
    }

    /// The time index `t` of the current state.
    pub fn time(&self) -> u64 {
        self.steps.len() as u64 + 1
    }

    /// State reached after step `i`.
    pub fn next_state(&self, i: usize) -> usize {
        self.steps.get(i + 1).map_or(self.current, |s| s.state)
    }
}

fn default_window() -> usize {
    500
}

fn default_informed() -> bool {
    true
}

fn default_period() -> usize {
    1000
}

fn default_components() -> Vec<OpponentKind> {
    vec![OpponentKind::OracleMaximin, OpponentKind::Uniform]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpponentKind {
    /// Plays the opponent side of the true game's maximin solution.
    OracleMaximin,
    /// Best response to the agent's empirical policy over the last `window`
    /// steps, recomputed every `window` steps.
    BestResponder {
        #[serde(default = "default_window")]
        window: usize,
        /// Plan on the true kernel (`true`) or on a kernel estimated from the history.
        #[serde(default = "default_informed")]
        informed: bool,
    },
    /// Cycles through `components`, switching every `period` steps.
    Switcher {
        #[serde(default = "default_period")]
        period: usize,
        #[serde(default = "default_components")]
        components: Vec<OpponentKind>,
    },
    Uniform,
    /// A second posterior-sampling learner playing the mirrored game.
    SelfplayPsrl {
        #[serde(default)]
        agent: PsrlConfig,
    },
}

impl Default for OpponentKind {
    fn default() -> Self {
        OpponentKind::OracleMaximin
    }
}

impl OpponentKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpponentKind::OracleMaximin => "oracle_maximin",
            OpponentKind::BestResponder { .. } => "best_responder",
            OpponentKind::Switcher { .. } => "switcher",
            OpponentKind::Uniform => "uniform",
            OpponentKind::SelfplayPsrl { .. } => "selfplay_psrl",
        }
    }

    fn validate(&self, nested: bool) -> Result<()> {
        match self {
            OpponentKind::BestResponder { window, .. } if *window == 0 => {
                Err(Error::InvalidSpec("best_responder window must be at least 1".into()))
            }
            OpponentKind::Switcher { period, components } => {
                if *period == 0 {
                    return Err(Error::InvalidSpec("switcher period must be at least 1".into()));
                }
                if components.is_empty() {
                    return Err(Error::InvalidSpec("switcher needs at least one component".into()));
                }
                components.iter().try_for_each(|c| c.validate(true))
            }
            OpponentKind::SelfplayPsrl { .. } if nested => Err(Error::InvalidSpec(
                "selfplay_psrl must observe every step and cannot be a switcher component".into(),
            )),
            OpponentKind::SelfplayPsrl { agent } => {
                agent.validate().map_err(|e| Error::InvalidSpec(e.to_string()))
            }
            _ => Ok(()),
        }
    }
}

/// Opponent description as it appears in the `[opponent]` config block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OpponentSpec {
    #[serde(flatten)]
    pub kind: OpponentKind,
    /// Overrides the opponent random stream derived from the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub planner: PlannerConfig,
}

impl OpponentSpec {
    pub fn new(kind: OpponentKind) -> Self {
        Self {
            kind,
            seed: None,
            planner: PlannerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate(false)?;
        self.planner.validate().map_err(|e| Error::InvalidSpec(e.to_string()))
    }
}

pub trait Opponent: Send {
    /// Chooses `a2_t` from the history up to `s_t`.
    fn act(&mut self, history: &History, rng: &mut dyn RngCore) -> Result<usize>;
}

/// Builds an opponent for `game`. `rng` seeds any internal learner.
pub fn build_opponent(spec: &OpponentSpec, game: &StochasticGame, rng: &mut ChaCha8Rng) -> Result<Box<dyn Opponent>> {
    spec.validate()?;
    build_kind(&spec.kind, &spec.planner, game, rng)
}

fn build_kind(
    kind: &OpponentKind,
    planner: &PlannerConfig,
    game: &StochasticGame,
    rng: &mut ChaCha8Rng,
) -> Result<Box<dyn Opponent>> {
    Ok(match kind {
        OpponentKind::OracleMaximin => Box::new(OracleMaximin {
            policy: solve_sg(game, planner)?.opponent_policy().clone(),
        }),
        OpponentKind::Uniform => Box::new(UniformOpponent {
            strategy: MixedStrategy::uniform(game.n_actions_2()),
        }),
        OpponentKind::BestResponder { window, informed } => Box::new(BestResponder {
            game: game.clone(),
            window: *window,
            informed: *informed,
            planner: *planner,
            policy: None,
        }),
        OpponentKind::Switcher { period, components } => Box::new(Switcher {
            period: *period,
            components: components
                .iter()
                .map(|c| build_kind(c, planner, game, rng))
                .collect::<Result<_>>()?,
        }),
        OpponentKind::SelfplayPsrl { agent } => {
            let inner_rng = ChaCha8Rng::seed_from_u64(rng.random());
            Box::new(SelfplayPsrl {
                agent: PsrlAgent::new(mirrored_rewards(game.rewards()), *agent, inner_rng)?,
                synced: 0,
            })
        }
    })
}

struct OracleMaximin {
    policy: StationaryPolicy,
}

impl Opponent for OracleMaximin {
    fn act(&mut self, history: &History, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.policy.at(history.current_state()).sample(rng))
    }
}

struct UniformOpponent {
    strategy: MixedStrategy,
}

impl Opponent for UniformOpponent {
    fn act(&mut self, _history: &History, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.strategy.sample(rng))
    }
}

struct Switcher {
    period: usize,
    components: Vec<Box<dyn Opponent>>,
}

impl Opponent for Switcher {
    fn act(&mut self, history: &History, rng: &mut dyn RngCore) -> Result<usize> {
        let phase = (history.steps().len() / self.period) % self.components.len();
        self.components[phase].act(history, rng)
    }
}

struct BestResponder {
    game: StochasticGame,
    window: usize,
    informed: bool,
    planner: PlannerConfig,
    /// Cached response and the history length it was computed at.
    policy: Option<(StationaryPolicy, usize)>,
}

impl Opponent for BestResponder {
    fn act(&mut self, history: &History, rng: &mut dyn RngCore) -> Result<usize> {
        let now = history.steps().len();
        if self.policy.as_ref().is_none_or(|(_, at)| now >= at + self.window) {
            let shape = self.game.shape();
            let estimate = fit_empirical_policy(history, self.window, shape.n_states, shape.n_actions_1)?;
            let response = if self.informed {
                refresh_best_response(&self.game, &estimate, &self.planner)?
            } else {
                let model = empirical_game(self.game.rewards(), history)?;
                refresh_best_response(&model, &estimate, &self.planner)?
            };
            self.policy = Some((response.policy, now));
        }
        let (policy, _) = self.policy.as_ref().expect("refreshed above");
        Ok(policy.at(history.current_state()).sample(rng))
    }
}

/// Self-play learner. It sees the game with roles swapped and the reward
/// `-1 - r(s, a1, a2)`, which orders outcomes exactly like `-r` while staying
/// in `[-1, 0]`.
struct SelfplayPsrl {
    agent: PsrlAgent,
    synced: usize,
}

impl Opponent for SelfplayPsrl {
    fn act(&mut self, history: &History, _rng: &mut dyn RngCore) -> Result<usize> {
        let steps = history.steps();
        while self.synced < steps.len() {
            let step = steps[self.synced];
            self.agent.observe(step.agent_action, history.next_state(self.synced))?;
            self.synced += 1;
        }
        self.agent.act(history.current_state())
    }
}

/// Reward table of the game seen from the opponent's seat.
pub fn mirrored_rewards(rewards: &RewardTable) -> RewardTable {
    let sh = rewards.shape();
    let mirrored_shape = GameShape {
        n_states: sh.n_states,
        n_actions_1: sh.n_actions_2,
        n_actions_2: sh.n_actions_1,
    };
    let mut table = vec![0.0; sh.n_pairs()];
    for s in 0..sh.n_states {
        for b in 0..sh.n_actions_2 {
            for a in 0..sh.n_actions_1 {
                table[mirrored_shape.pair_index(s, b, a)] = -1.0 - rewards.reward(s, a, b);
            }
        }
    }
    RewardTable::new(mirrored_shape, table).expect("sizes match")
}

/// Per-state frequency of agent actions over the last `window` steps; states
/// not visited in the window get the uniform strategy.
pub fn fit_empirical_policy(history: &History, window: usize, n_states: usize, n_actions: usize) -> Result<StationaryPolicy> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be at least 1".into()));
    }
    let steps = history.steps();
    let recent = &steps[steps.len().saturating_sub(window)..];
    let mut counts = vec![vec![0.0; n_actions]; n_states];
    for step in recent {
        if step.state >= n_states || step.agent_action >= n_actions {
            return Err(Error::IndexOutOfRange {
                what: "history entry",
                index: step.state.max(step.agent_action),
                limit: n_states.min(n_actions),
            });
        }
        counts[step.state][step.agent_action] += 1.0;
    }
    let strategies = counts
        .iter()
        .map(|c| {
            if c.iter().sum::<f64>() > 0.0 {
                MixedStrategy::from_weights(c)
            } else {
                Ok(MixedStrategy::uniform(n_actions))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    StationaryPolicy::new(strategies)
}

/// Posterior-mean kernel (one pseudo-count per next state) from the transitions in `history`.
pub fn empirical_game(rewards: &RewardTable, history: &History) -> Result<StochasticGame> {
    let sh = rewards.shape();
    let n = sh.n_states;
    let mut counts = vec![1.0; sh.n_pairs() * n];
    for (i, step) in history.steps().iter().enumerate() {
        sh.check_pair(step.state, step.agent_action, step.opponent_action)?;
        let row = sh.pair_index(step.state, step.agent_action, step.opponent_action);
        counts[row * n + history.next_state(i)] += 1.0;
    }
    for row in counts.chunks_mut(n) {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|c| *c /= total);
    }
    StochasticGame::from_parts_unchecked(rewards.clone(), counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub policy: StationaryPolicy,
    /// Gain the agent's estimated policy obtains against `policy`.
    pub value: f64,
}

/// Minimizing stationary response to a fixed agent policy.
pub fn refresh_best_response(
    game: &StochasticGame,
    agent_policy: &StationaryPolicy,
    planner: &PlannerConfig,
) -> Result<BestResponse> {
    let sol = solve_mdp(game, agent_policy, PlayerSide::Agent, Objective::Min, planner)?;
    Ok(BestResponse {
        value: sol.gain,
        policy: sol.opponent_policy.expect("free side is the opponent"),
    })
}
