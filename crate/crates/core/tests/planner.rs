mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psrl_zsg::matrix_game::solve_matrix_game;
use psrl_zsg::planner::{
    bellman_residual, evaluate_policy_pair, solve_mdp, solve_sg, Objective, PlannerConfig, PlayerSide,
};
use psrl_zsg::sg_model::{gen_random_game, GameShape, MixedStrategy, StationaryPolicy, StochasticGame};

use common::{brute_force_pure_maximin, pure_policies, pure_saddle_game, pure_saddle_value, two_state_stationary};

#[test]
fn pure_saddle_games_match_brute_force() {
    let cfg = PlannerConfig::default();
    for seed in 0..5 {
        let game = pure_saddle_game(seed, 2, 3);
        let sol = solve_sg(&game, &cfg).unwrap();
        let brute = brute_force_pure_maximin(&game);
        assert!((sol.gain - brute).abs() <= 1e-6, "seed {seed}: {} vs {brute}", sol.gain);

        let mu = two_state_stationary(&game);
        let closed: f64 = (0..2)
            .map(|s| {
                let g: Vec<Vec<f64>> = (0..2).map(|a| (0..3).map(|b| game.reward(s, a, b)).collect()).collect();
                mu[s] * pure_saddle_value(&g)
            })
            .sum();
        assert!((brute - closed).abs() <= 1e-9);
    }
}

#[test]
fn residual_is_small_on_mixed_games() {
    let cfg = PlannerConfig::default();
    for seed in 0..10 {
        let game = gen_random_game(5, 3, 3, 0.1, seed).unwrap();
        let sol = solve_sg(&game, &cfg).unwrap();
        assert!(sol.residual <= 1e-6);
        assert!((bellman_residual(&game, sol.gain, &sol.bias).unwrap() - sol.residual).abs() < 1e-12);
        assert!((-1.0..=0.0).contains(&sol.gain));
    }
}

#[test]
fn damping_does_not_change_the_solution() {
    let game = gen_random_game(4, 2, 3, 0.2, 11).unwrap();
    let base = solve_sg(&game, &PlannerConfig::default()).unwrap();
    for damping in [0.05, 0.5, 0.9] {
        let cfg = PlannerConfig {
            damping,
            ..PlannerConfig::default()
        };
        let sol = solve_sg(&game, &cfg).unwrap();
        assert!((sol.gain - base.gain).abs() <= 1e-7, "damping {damping}");
        for (a, b) in sol.bias.iter().zip(&base.bias) {
            assert!((a - b).abs() <= 1e-5);
        }
    }
}

#[test]
fn maximin_sandwich_against_pure_deviations() {
    let cfg = PlannerConfig::default();
    for seed in 0..10 {
        let game = gen_random_game(3, 2, 2, 0.1, 100 + seed).unwrap();
        let sol = solve_sg(&game, &cfg).unwrap();
        for pure in pure_policies(3, 2) {
            let p = StationaryPolicy::pure(2, &pure);
            let vs_agent = evaluate_policy_pair(&game, sol.agent_policy(), &p).unwrap();
            let vs_opponent = evaluate_policy_pair(&game, &p, sol.opponent_policy()).unwrap();
            assert!(vs_agent >= sol.gain - 1e-5, "seed {seed}: {vs_agent} < {}", sol.gain);
            assert!(vs_opponent <= sol.gain + 1e-5, "seed {seed}: {vs_opponent} > {}", sol.gain);
        }
    }
}

#[test]
fn single_opponent_action_reduces_to_an_mdp() {
    let cfg = PlannerConfig::default();
    let game = gen_random_game(4, 3, 1, 0.1, 5).unwrap();
    let sg = solve_sg(&game, &cfg).unwrap();
    let mdp = solve_mdp(&game, &StationaryPolicy::uniform(4, 1), PlayerSide::Opponent, Objective::Max, &cfg).unwrap();
    assert!((sg.gain - mdp.gain).abs() <= 1e-7);
}

#[test]
fn single_state_game_is_a_matrix_game() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = PlannerConfig::default();
    for _ in 0..10 {
        let g = common::random_matrix(&mut rng, 3, 4);
        let shape = GameShape::new(1, 3, 4).unwrap();
        let game = StochasticGame::new(shape, g.concat(), vec![1.0; 12]).unwrap();
        let sol = solve_sg(&game, &cfg).unwrap();
        let v = solve_matrix_game(&g, 1e-9).unwrap().value;
        assert!((sol.gain - v).abs() <= 1e-9);
    }
}

/// Simulated average reward with a batch-means standard error.
fn simulate(game: &StochasticGame, agent: &StationaryPolicy, opponent: &StationaryPolicy, steps: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batches = 100;
    let per_batch = steps / batches;
    let mut s = 0;
    let burn_in = 1000;
    for _ in 0..burn_in {
        let (a, b) = (agent.at(s).sample(&mut rng), opponent.at(s).sample(&mut rng));
        s = game.sample_next(s, a, b, &mut rng);
    }
    let means: Vec<f64> = (0..batches)
        .map(|_| {
            let mut total = 0.0;
            for _ in 0..per_batch {
                let (a, b) = (agent.at(s).sample(&mut rng), opponent.at(s).sample(&mut rng));
                total += game.reward(s, a, b);
                s = game.sample_next(s, a, b, &mut rng);
            }
            total / per_batch as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

#[test]
fn evaluation_matches_simulation() {
    let game = gen_random_game(4, 2, 3, 0.1, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut random_policy = |n_actions: usize| {
        let per_state = (0..4)
            .map(|_| {
                let w: Vec<f64> = (0..n_actions).map(|_| rng.random::<f64>()).collect();
                MixedStrategy::from_weights(&w).unwrap()
            })
            .collect();
        StationaryPolicy::new(per_state).unwrap()
    };
    let agent = random_policy(2);
    let opponent = random_policy(3);
    let exact = evaluate_policy_pair(&game, &agent, &opponent).unwrap();
    let (mean, se) = simulate(&game, &agent, &opponent, 1_000_000, 77);
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
}
