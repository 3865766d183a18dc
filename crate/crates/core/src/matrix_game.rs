//! Exact solution of finite zero-sum matrix games.
//!
//! The row player maximizes `p^T G q`, the column player minimizes it. The game
//! is shifted to strictly positive entries and solved as the linear program
//!
//! ```text
//! maximize 1^T y   subject to  G' y <= 1,  y >= 0
//! ```
//!
//! with a dense tableau simplex using Bland's lowest-index rule. The column
//! strategy is `y / 1^T y`; the row strategy comes from the slack reduced
//! costs (the dual solution).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sg_model::MixedStrategy;

const PIVOT_EPS: f64 = 1e-12;

/// Value and one equilibrium of a matrix game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub row_strategy: MixedStrategy,
    pub col_strategy: MixedStrategy,
    /// `max_i (G q)_i - min_j (p^T G)_j`, non-negative up to round-off.
    #[serde(rename = "gap")]
    pub duality_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Row,
    Column,
}

fn check_matrix(g: &[Vec<f64>]) -> Result<(usize, usize)> {
    let m = g.len();
    if m == 0 || g[0].is_empty() {
        return Err(Error::InvalidParameter("matrix game needs at least one row and column".into()));
    }
    let n = g[0].len();
    for row in g {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("matrix has a non-finite entry: {row:?}")));
        }
    }
    Ok((m, n))
}

/// `min_j (p^T G)_j` for a row strategy, `max_i (G q)_i` for a column strategy.
pub fn best_response_value(g: &[Vec<f64>], strategy: &MixedStrategy, side: Side) -> Result<f64> {
    let (m, n) = check_matrix(g)?;
    let p = strategy.probs();
    match side {
        Side::Row => {
            if p.len() != m {
                return Err(Error::DimensionMismatch { expected: m, actual: p.len() });
            }
            Ok((0..n)
                .map(|j| (0..m).map(|i| p[i] * g[i][j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min))
        }
        Side::Column => {
            if p.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: p.len() });
            }
            Ok(g.iter()
                .map(|row| row.iter().zip(p).map(|(x, q)| x * q).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

/// Solves `max_p min_q p^T G q`.
///
/// Fails with [`Error::NumericFailure`] if the pivot cap is hit, or with
/// [`Error::InaccurateEquilibrium`] if the recovered equilibrium has a
/// duality gap above `tol`.
pub fn solve_matrix_game(g: &[Vec<f64>], tol: f64) -> Result<MatrixGameSolution> {
    let (m, n) = check_matrix(g)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }

    let (row_strategy, col_strategy) = if n == 1 {
        let best = argmax_lowest(g.iter().map(|r| r[0]));
        (MixedStrategy::pure(m, best), MixedStrategy::pure(1, 0))
    } else if m == 1 {
        let best = argmax_lowest(g[0].iter().map(|x| -x));
        (MixedStrategy::pure(1, 0), MixedStrategy::pure(n, best))
    } else {
        simplex_equilibrium(g, m, n)?
    };

    let lower = best_response_value(g, &row_strategy, Side::Row)?;
    let upper = best_response_value(g, &col_strategy, Side::Column)?;
    let duality_gap = (upper - lower).max(0.0);
    if duality_gap > tol {
        return Err(Error::InaccurateEquilibrium { gap: duality_gap, tol });
    }
    Ok(MatrixGameSolution {
        value: 0.5 * (upper + lower),
        row_strategy,
        col_strategy,
        duality_gap,
    })
}

/// Value only; convenience for Bellman backups.
pub fn game_value(g: &[Vec<f64>], tol: f64) -> Result<f64> {
    solve_matrix_game(g, tol).map(|s| s.value)
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

fn simplex_equilibrium(g: &[Vec<f64>], m: usize, n: usize) -> Result<(MixedStrategy, MixedStrategy)> {
    let max_abs = g.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let shift = 1.0 + max_abs;

    // Columns: y_0..y_{n-1}, slack_0..slack_{m-1}, rhs. Row m is the objective.
    let width = n + m + 1;
    let rhs = n + m;
    let mut tab = vec![0.0; (m + 1) * width];
    for i in 0..m {
        for j in 0..n {
            tab[i * width + j] = g[i][j] + shift;
        }
        tab[i * width + n + i] = 1.0;
        tab[i * width + rhs] = 1.0;
    }
    for j in 0..n {
        tab[m * width + j] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let cap = 50 * (m + n) + 1000;
    let mut pivots = 0;
    loop {
        let entering = (0..n + m).find(|&j| tab[m * width + j] < -PIVOT_EPS);
        let Some(col) = entering else { break };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tab[i * width + col];
            if a > PIVOT_EPS {
                let ratio = tab[i * width + rhs] / a;
                let better = match leave {
                    None => true,
                    Some((r, best)) => {
                        ratio < best - PIVOT_EPS
                            || (ratio <= best + PIVOT_EPS && basis[i] < basis[r])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Bounded: every entry of G' is positive, so some row always qualifies.
        let Some((row, _)) = leave else {
            return Err(numeric_failure(g, cap));
        };

        pivot(&mut tab, width, m, row, col);
        basis[row] = col;
        pivots += 1;
        if pivots > cap {
            return Err(numeric_failure(g, cap));
        }
    }

    let mut y = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            y[b] = tab[i * width + rhs];
        }
    }
    let x: Vec<f64> = (0..m).map(|i| tab[m * width + n + i]).collect();
    let row = MixedStrategy::from_weights(&x).map_err(|_| numeric_failure(g, cap))?;
    let col = MixedStrategy::from_weights(&y).map_err(|_| numeric_failure(g, cap))?;
    Ok((row, col))
}

fn pivot(tab: &mut [f64], width: usize, m: usize, row: usize, col: usize) {
    let inv = 1.0 / tab[row * width + col];
    for k in 0..width {
        tab[row * width + k] *= inv;
    }
    tab[row * width + col] = 1.0;
    for i in 0..=m {
        if i == row {
            continue;
        }
        let factor = tab[i * width + col];
        if factor != 0.0 {
            for k in 0..width {
                tab[i * width + k] -= factor * tab[row * width + k];
            }
            tab[i * width + col] = 0.0;
        }
    }
}

fn numeric_failure(g: &[Vec<f64>], cap: usize) -> Error {
    Error::NumericFailure {
        rows: g.len(),
        cols: g[0].len(),
        cap,
        matrix: g.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn one_by_one() {
        let sol = solve_matrix_game(&[vec![0.0]], TOL).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.row_strategy.probs(), &[1.0]);
        assert_eq!(sol.col_strategy.probs(), &[1.0]);
    }

    #[test]
    fn matching_pennies() {
        let g = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let sol = solve_matrix_game(&g, TOL).unwrap();
        assert!(sol.value.abs() < 1e-12);
        for p in sol.row_strategy.probs().iter().chain(sol.col_strategy.probs()) {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    /// Closed form for a 2x2 game without a saddle point.
    fn closed_form_2x2(a: f64, b: f64, c: f64, d: f64) -> (f64, f64, f64) {
        let den = a - b - c + d;
        let value = (a * d - b * c) / den;
        let p = (d - c) / den;
        let q = (d - b) / den;
        (value, p, q)
    }

    #[test]
    fn mixed_two_by_two_matches_closed_form() {
        let g = vec![vec![-0.2, -0.8], vec![-0.6, -0.4]];
        let (v, p, q) = closed_form_2x2(-0.2, -0.8, -0.6, -0.4);
        assert!((v - -0.5).abs() < 1e-15);
        assert!((p - 0.25).abs() < 1e-15 && (q - 0.5).abs() < 1e-15);

        let sol = solve_matrix_game(&g, TOL).unwrap();
        assert!((sol.value - -0.5).abs() < 1e-12);
        assert!((sol.row_strategy.probs()[0] - 0.25).abs() < 1e-12);
        assert!((sol.col_strategy.probs()[0] - 0.5).abs() < 1e-12);
        assert!(sol.duality_gap < 1e-12);
    }

    #[test]
    fn best_response_examples() {
        let pennies = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let half = MixedStrategy::uniform(2);
        assert_eq!(best_response_value(&pennies, &half, Side::Row).unwrap(), 0.0);
        let pure = MixedStrategy::pure(2, 0);
        assert_eq!(best_response_value(&pennies, &pure, Side::Row).unwrap(), -1.0);

        let g = vec![vec![-0.2, -0.8], vec![-0.6, -0.4]];
        let row = MixedStrategy::new(vec![0.25, 0.75]).unwrap();
        assert!((best_response_value(&g, &row, Side::Row).unwrap() + 0.5).abs() < 1e-15);

        let three = MixedStrategy::uniform(3);
        assert!(matches!(
            best_response_value(&pennies, &three, Side::Column),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pure_saddle_is_found() {
        // Row 1 dominates; column 0 is the column player's best reply.
        let g = vec![vec![-0.9, -0.5], vec![-0.3, -0.1]];
        let sol = solve_matrix_game(&g, TOL).unwrap();
        assert!((sol.value - -0.3).abs() < 1e-12);
        assert_eq!(sol.row_strategy.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn degenerate_constant_matrix() {
        let g = vec![vec![-0.5; 3]; 3];
        let sol = solve_matrix_game(&g, TOL).unwrap();
        assert!((sol.value + 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_row_and_column_vectors() {
        let sol = solve_matrix_game(&[vec![-0.3, -0.7, -0.7]], TOL).unwrap();
        assert_eq!(sol.value, -0.7);
        assert_eq!(sol.col_strategy.probs(), &[0.0, 1.0, 0.0]);
        let sol = solve_matrix_game(&[vec![-0.3], vec![-0.1], vec![-0.1]], TOL).unwrap();
        assert_eq!(sol.value, -0.1);
        assert_eq!(sol.row_strategy.probs(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_matrix_game(&[], TOL).is_err());
        assert!(solve_matrix_game(&[vec![1.0], vec![1.0, 2.0]], TOL).is_err());
        assert!(solve_matrix_game(&[vec![f64::NAN]], TOL).is_err());
    }
}
