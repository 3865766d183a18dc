//! Oracles shared by the integration tests. Nothing here calls the planner or
//! the matrix solver.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psrl_zsg::sg_model::{GameShape, StochasticGame};

/// Every assignment of one of `n_actions` to each of `n_states` states.
pub fn pure_policies(n_states: usize, n_actions: usize) -> Vec<Vec<usize>> {
    let total = n_actions.pow(n_states as u32);
    (0..total)
        .map(|mut code| {
            (0..n_states)
                .map(|_| {
                    let a = code % n_actions;
                    code /= n_actions;
                    a
                })
                .collect()
        })
        .collect()
}

/// Long-run average reward of a pure policy pair from power iteration on the
/// lazy chain `(I + P) / 2`, started from the uniform distribution. Assumes a
/// single recurrent class.
pub fn pure_pair_gain(game: &StochasticGame, agent: &[usize], opponent: &[usize]) -> f64 {
    let s = game.n_states();
    let rows: Vec<&[f64]> = (0..s).map(|i| game.kernel_row(i, agent[i], opponent[i])).collect();
    let mut mu = vec![1.0 / s as f64; s];
    for _ in 0..10_000_000 {
        let mut next: Vec<f64> = mu.iter().map(|m| 0.5 * m).collect();
        for i in 0..s {
            for j in 0..s {
                next[j] += 0.5 * mu[i] * rows[i][j];
            }
        }
        let change: f64 = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
        mu = next;
        if change < 1e-15 {
            break;
        }
    }
    (0..s).map(|i| mu[i] * game.reward(i, agent[i], opponent[i])).sum()
}

/// `max_{pure agent} min_{pure opponent}` gain.
pub fn brute_force_pure_maximin(game: &StochasticGame) -> f64 {
    let agents = pure_policies(game.n_states(), game.n_actions_1());
    let opponents = pure_policies(game.n_states(), game.n_actions_2());
    agents
        .iter()
        .map(|a| {
            opponents
                .iter()
                .map(|o| pure_pair_gain(game, a, o))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Two-state game whose transitions ignore the actions and whose per-state
/// reward matrices each have a pure saddle point.
pub fn pure_saddle_game(seed: u64, n_actions_1: usize, n_actions_2: usize) -> StochasticGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = GameShape::new(2, n_actions_1, n_actions_2).unwrap();
    let mut reward = vec![0.0; shape.n_pairs()];
    let mut kernel = vec![0.0; shape.n_pairs() * 2];
    for s in 0..2 {
        let p_stay: f64 = rng.random_range(0.1..0.9);
        let row = if s == 0 { [p_stay, 1.0 - p_stay] } else { [1.0 - p_stay, p_stay] };
        let i_star = rng.random_range(0..n_actions_1);
        let j_star = rng.random_range(0..n_actions_2);
        let v: f64 = rng.random_range(-0.9..-0.1);
        for a1 in 0..n_actions_1 {
            for a2 in 0..n_actions_2 {
                let idx = shape.pair_index(s, a1, a2);
                reward[idx] = match (a1 == i_star, a2 == j_star) {
                    (true, true) => v,
                    // row i* pays at least v, column j* at most v
                    (true, false) => rng.random_range(v..0.0),
                    (false, true) => rng.random_range(-1.0..v),
                    (false, false) => -rng.random::<f64>(),
                };
                kernel[idx * 2..idx * 2 + 2].copy_from_slice(&row);
            }
        }
    }
    StochasticGame::new(shape, reward, kernel).unwrap()
}

/// Stationary distribution of an action-independent two-state kernel.
pub fn two_state_stationary(game: &StochasticGame) -> [f64; 2] {
    let p01 = game.kernel_row(0, 0, 0)[1];
    let p10 = game.kernel_row(1, 0, 0)[0];
    [p10 / (p01 + p10), p01 / (p01 + p10)]
}

/// Value of a matrix with a pure saddle point, by scanning pure strategies.
pub fn pure_saddle_value(g: &[Vec<f64>]) -> f64 {
    g.iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Matrix with entries in `[-1, 0]`.
pub fn random_matrix(rng: &mut impl Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..n).map(|_| -rng.random::<f64>()).collect()).collect()
}
