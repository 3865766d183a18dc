//! Two-player zero-sum stochastic game model.
//!
//! A game has `S` states, `A1` agent actions and `A2` opponent actions. The
//! reward `r(s, a1, a2)` lies in `[-1, 0]` and is paid by the opponent
//! (minimizer) to the agent (maximizer). Transition rows
//! `theta(. | s, a1, a2)` are stored densely in row-major `(s, a1, a2, s')`
//! order.
//!
//! The generators build instances where every kernel entry is bounded away
//! from zero, so every stationary policy pair induces an irreducible chain and
//! the finite-diameter condition holds by construction.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability-vector sums.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Sizes of the state and action sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameShape {
    pub n_states: usize,
    pub n_actions_1: usize,
    pub n_actions_2: usize,
}

impl GameShape {
    pub fn new(n_states: usize, n_actions_1: usize, n_actions_2: usize) -> Result<Self> {
        if n_states == 0 || n_actions_1 == 0 || n_actions_2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "game sizes must be positive, got S={n_states}, A1={n_actions_1}, A2={n_actions_2}"
            )));
        }
        Ok(Self {
            n_states,
            n_actions_1,
            n_actions_2,
        })
    }

    /// Number of joint actions `A = A1 * A2`.
    pub fn n_joint_actions(&self) -> usize {
        self.n_actions_1 * self.n_actions_2
    }

    /// Number of `(s, a1, a2)` triples.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_joint_actions()
    }

    /// Flat index of the `(s, a1, a2)` triple.
    #[inline]
    pub fn pair_index(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.n_actions_1 + a1) * self.n_actions_2 + a2
    }

    /// Inverse of [`GameShape::pair_index`].
    pub fn pair_of(&self, idx: usize) -> (usize, usize, usize) {
        let a2 = idx % self.n_actions_2;
        let rest = idx / self.n_actions_2;
        (rest / self.n_actions_1, rest % self.n_actions_1, a2)
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        check_index("state", s, self.n_states)
    }

    pub fn check_pair(&self, s: usize, a1: usize, a2: usize) -> Result<()> {
        check_index("state", s, self.n_states)?;
        check_index("agent action", a1, self.n_actions_1)?;
        check_index("opponent action", a2, self.n_actions_2)
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index < limit {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, limit })
    }
}

/// The part of a game that is known to the learning agent: sizes and rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    shape: GameShape,
    reward: Vec<f64>,
}

impl RewardTable {
    pub fn new(shape: GameShape, reward: Vec<f64>) -> Result<Self> {
        if reward.len() != shape.n_pairs() {
            return Err(Error::DimensionMismatch {
                expected: shape.n_pairs(),
                actual: reward.len(),
            });
        }
        Ok(Self { shape, reward })
    }

    pub fn shape(&self) -> GameShape {
        self.shape
    }

    #[inline]
    pub fn reward(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.reward[self.shape.pair_index(s, a1, a2)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.reward
    }
}

/// A finite two-player zero-sum stochastic game `(S, A, r, theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticGame {
    rewards: RewardTable,
    kernel: Vec<f64>,
}

impl StochasticGame {
    /// Builds a game and rejects it if any model invariant fails.
    pub fn new(shape: GameShape, reward: Vec<f64>, kernel: Vec<f64>) -> Result<Self> {
        let game = Self::from_parts_unchecked(RewardTable::new(shape, reward)?, kernel)?;
        let report = validate_game(&game);
        if report.is_valid() {
            Ok(game)
        } else {
            Err(Error::InvalidGame(report.to_string()))
        }
    }

    /// Checks dimensions only; use [`validate_game`] for the value constraints.
    pub fn from_parts_unchecked(rewards: RewardTable, kernel: Vec<f64>) -> Result<Self> {
        let expected = rewards.shape.n_pairs() * rewards.shape.n_states;
        if kernel.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: kernel.len(),
            });
        }
        Ok(Self { rewards, kernel })
    }

    /// Same rewards, different transition kernel.
    pub fn with_kernel(&self, kernel: Vec<f64>) -> Result<Self> {
        Self::from_parts_unchecked(self.rewards.clone(), kernel)
    }

    pub fn shape(&self) -> GameShape {
        self.rewards.shape
    }

    pub fn n_states(&self) -> usize {
        self.rewards.shape.n_states
    }

    pub fn n_actions_1(&self) -> usize {
        self.rewards.shape.n_actions_1
    }

    pub fn n_actions_2(&self) -> usize {
        self.rewards.shape.n_actions_2
    }

    pub fn rewards(&self) -> &RewardTable {
        &self.rewards
    }

    #[inline]
    pub fn reward(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.rewards.reward(s, a1, a2)
    }

    #[inline]
    pub fn kernel_row(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        let n = self.n_states();
        let start = self.rewards.shape.pair_index(s, a1, a2) * n;
        &self.kernel[start..start + n]
    }

    /// Flat kernel in `(s, a1, a2, s')` order.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Expected `sum_{s'} theta(s'|s,a1,a2) * values[s']`.
    #[inline]
    pub fn expected_next(&self, s: usize, a1: usize, a2: usize, values: &[f64]) -> f64 {
        self.kernel_row(s, a1, a2)
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .sum()
    }

    /// Draws the next state from `theta(. | s, a1, a2)`.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a1: usize, a2: usize, rng: &mut R) -> usize {
        sample_index(self.kernel_row(s, a1, a2), rng)
    }

    /// The one-shot matrix `r(s,.,.) + sum_{s'} theta(s'|s,.,.) values[s']`.
    pub fn stage_matrix(&self, s: usize, values: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_actions_1())
            .map(|a1| {
                (0..self.n_actions_2())
                    .map(|a2| self.reward(s, a1, a2) + self.expected_next(s, a1, a2, values))
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GameJson::from(self)).expect("game serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One violated model constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RewardOutOfRange { s: usize, a1: usize, a2: usize, value: f64 },
    NegativeProbability { s: usize, a1: usize, a2: usize, next: usize, value: f64 },
    RowSum { s: usize, a1: usize, a2: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RewardOutOfRange { s, a1, a2, value } => {
                write!(f, "reward ({s},{a1},{a2}) = {value} not in [-1, 0]")
            }
            Violation::NegativeProbability { s, a1, a2, next, value } => write!(
                f,
                "kernel ({s},{a1},{a2}) -> {next} = {value} is negative or not finite"
            ),
            Violation::RowSum { s, a1, a2, sum } => {
                write!(f, "kernel row ({s},{a1},{a2}) sums to {sum}, not 1")
            }
        }
    }
}

/// Result of [`validate_game`]; empty when the game is well formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Lists every reward outside `[-1, 0]`, every negative kernel entry and every
/// row whose sum is off by more than `1e-12`.
pub fn validate_game(game: &StochasticGame) -> ValidationReport {
    let shape = game.shape();
    let mut violations = Vec::new();
    for idx in 0..shape.n_pairs() {
        let (s, a1, a2) = shape.pair_of(idx);
        let r = game.reward(s, a1, a2);
        if !(-1.0..=0.0).contains(&r) {
            violations.push(Violation::RewardOutOfRange { s, a1, a2, value: r });
        }
        let row = game.kernel_row(s, a1, a2);
        for (next, &p) in row.iter().enumerate() {
            if !(p >= 0.0 && p.is_finite()) {
                violations.push(Violation::NegativeProbability { s, a1, a2, next, value: p });
            }
        }
        let sum: f64 = row.iter().sum();
        if !((sum - 1.0).abs() <= SIMPLEX_TOL) {
            violations.push(Violation::RowSum { s, a1, a2, sum });
        }
    }
    ValidationReport { violations }
}

/// A probability vector over a finite action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty mixed strategy".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "mixed strategy has a negative entry: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParameter(format!(
                "mixed strategy sums to {sum}: {probs:?}"
            )));
        }
        Ok(Self(probs))
    }

    /// Normalizes non-negative weights; entries below zero (LP round-off) are
    /// clamped first.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let clamped: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weights cannot be normalized: {weights:?}"
            )));
        }
        Self::new(clamped.iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform strategy over an empty set");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn pure(n: usize, action: usize) -> Self {
        assert!(action < n, "pure action {action} out of range {n}");
        let mut probs = vec![0.0; n];
        probs[action] = 1.0;
        Self(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.0, rng)
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(value: MixedStrategy) -> Self {
        value.0
    }
}

/// One mixed strategy per state for a single player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationaryPolicy(Vec<MixedStrategy>);

impl StationaryPolicy {
    pub fn new(per_state: Vec<MixedStrategy>) -> Result<Self> {
        if per_state.is_empty() {
            return Err(Error::InvalidParameter("policy over zero states".into()));
        }
        let n = per_state[0].len();
        if let Some(bad) = per_state.iter().find(|m| m.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        Ok(Self(per_state))
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self(vec![MixedStrategy::uniform(n_actions); n_states])
    }

    /// Deterministic policy from one action per state.
    pub fn pure(n_actions: usize, actions: &[usize]) -> Self {
        Self(actions.iter().map(|&a| MixedStrategy::pure(n_actions, a)).collect())
    }

    pub fn n_states(&self) -> usize {
        self.0.len()
    }

    pub fn n_actions(&self) -> usize {
        self.0[0].len()
    }

    pub fn at(&self, s: usize) -> &MixedStrategy {
        &self.0[s]
    }

    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.0
    }

    /// Errors unless the policy covers `n_states` states and `n_actions` actions.
    pub fn check_dims(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states() != n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states,
                actual: self.n_states(),
            });
        }
        if self.n_actions() != n_actions {
            return Err(Error::DimensionMismatch {
                expected: n_actions,
                actual: self.n_actions(),
            });
        }
        Ok(())
    }
}

/// Inverse-CDF draw from a probability vector. Falls back to the last index
/// with positive mass if round-off leaves the cumulative sum short of `u`.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Symmetric Dirichlet(1) point, drawn as normalized unit exponentials.
fn uniform_simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Random game with `epsilon`-mixed kernel rows:
/// `(1 - epsilon) * Dirichlet(1) + epsilon * uniform`, so every entry is at
/// least `epsilon / S`. Rewards are uniform on `[-1, 0]`.
pub fn gen_random_game(
    n_states: usize,
    n_actions_1: usize,
    n_actions_2: usize,
    epsilon: f64,
    seed: u64,
) -> Result<StochasticGame> {
    let shape = GameShape::new(n_states, n_actions_1, n_actions_2)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mixing epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floor = epsilon / n_states as f64;
    let mut reward = Vec::with_capacity(shape.n_pairs());
    let mut kernel = Vec::with_capacity(shape.n_pairs() * n_states);
    for _ in 0..shape.n_pairs() {
        reward.push(-rng.random::<f64>());
        let point = uniform_simplex_point(n_states, &mut rng);
        kernel.extend(point.into_iter().map(|p| (1.0 - epsilon) * p + floor));
    }
    StochasticGame::new(shape, reward, kernel)
}

/// Competitive chain. Agent actions are `left = 0`, `right = 1`; opponent
/// actions are `block = 0`, `free = 1`. `right` advances with probability 0.7
/// (free) or 0.3 (blocked); the remaining mass is split between staying and
/// falling back one state by a seeded fraction. `left` always falls back. Rows
/// are smoothed as `(1 - slip) * row + slip * uniform`. Rewards are `-1`
/// except `-0.1` at the top state.
pub fn gen_chain_game(n_states: usize, slip: f64, seed: u64) -> Result<StochasticGame> {
    if n_states < 2 {
        return Err(Error::InvalidParameter(format!(
            "chain needs at least 2 states, got {n_states}"
        )));
    }
    if !(slip > 0.0 && slip < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "slip must lie in (0, 0.5), got {slip}"
        )));
    }
    let shape = GameShape::new(n_states, 2, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = n_states - 1;
    let floor = slip / n_states as f64;
    let mut reward = Vec::with_capacity(shape.n_pairs());
    let mut kernel = Vec::with_capacity(shape.n_pairs() * n_states);
    for s in 0..n_states {
        let up = (s + 1).min(top);
        let down = s.saturating_sub(1);
        for a1 in 0..2 {
            for a2 in 0..2 {
                reward.push(if s == top { -0.1 } else { -1.0 });
                let mut base = vec![0.0; n_states];
                if a1 == 1 {
                    let advance = if a2 == 1 { 0.7 } else { 0.3 };
                    let stay_share: f64 = rng.random_range(0.25..0.75);
                    let rest = 1.0 - advance;
                    base[up] += advance;
                    base[s] += rest * stay_share;
                    base[down] += rest * (1.0 - stay_share);
                } else {
                    base[down] += 1.0;
                }
                kernel.extend(base.into_iter().map(|p| (1.0 - slip) * p + floor));
            }
        }
    }
    StochasticGame::new(shape, reward, kernel)
}

/// Nested JSON layout: `{"S", "A1", "A2", "reward": [s][a1][a2], "kernel": [s][a1][a2][s']}`.
#[derive(Serialize, Deserialize)]
struct GameJson {
    #[serde(rename = "S")]
    n_states: usize,
    #[serde(rename = "A1")]
    n_actions_1: usize,
    #[serde(rename = "A2")]
    n_actions_2: usize,
    reward: Vec<Vec<Vec<f64>>>,
    kernel: Vec<Vec<Vec<Vec<f64>>>>,
}

impl From<&StochasticGame> for GameJson {
    fn from(game: &StochasticGame) -> Self {
        let sh = game.shape();
        let reward = (0..sh.n_states)
            .map(|s| {
                (0..sh.n_actions_1)
                    .map(|a1| (0..sh.n_actions_2).map(|a2| game.reward(s, a1, a2)).collect())
                    .collect()
            })
            .collect();
        let kernel = (0..sh.n_states)
            .map(|s| {
                (0..sh.n_actions_1)
                    .map(|a1| {
                        (0..sh.n_actions_2)
                            .map(|a2| game.kernel_row(s, a1, a2).to_vec())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        GameJson {
            n_states: sh.n_states,
            n_actions_1: sh.n_actions_1,
            n_actions_2: sh.n_actions_2,
            reward,
            kernel,
        }
    }
}

impl TryFrom<GameJson> for StochasticGame {
    type Error = Error;

    fn try_from(j: GameJson) -> Result<Self> {
        let shape = GameShape::new(j.n_states, j.n_actions_1, j.n_actions_2)?;
        let ragged = |what: &str| Error::InvalidGame(format!("{what} does not match S/A1/A2"));
        if j.reward.len() != shape.n_states
            || j.reward.iter().any(|r| {
                r.len() != shape.n_actions_1 || r.iter().any(|c| c.len() != shape.n_actions_2)
            })
        {
            return Err(ragged("reward nesting"));
        }
        if j.kernel.len() != shape.n_states
            || j.kernel.iter().any(|r| {
                r.len() != shape.n_actions_1
                    || r.iter().any(|c| {
                        c.len() != shape.n_actions_2 || c.iter().any(|row| row.len() != shape.n_states)
                    })
            })
        {
            return Err(ragged("kernel nesting"));
        }
        let reward: Vec<f64> = j.reward.into_iter().flatten().flatten().collect();
        let kernel: Vec<f64> = j.kernel.into_iter().flatten().flatten().flatten().collect();
        StochasticGame::from_parts_unchecked(RewardTable::new(shape, reward)?, kernel)
    }
}

impl Serialize for StochasticGame {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GameJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StochasticGame {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let j = GameJson::deserialize(deserializer)?;
        StochasticGame::try_from(j).map_err(serde::de::Error::custom)
    }
}
