//! Zero-sum matrix games and the Nash-value recursions built on them.
//!
//! The LP engine is a dense tableau simplex with Bland's rule. Matrices
//! here are small (actions × distinct logged policies), so the tableau is
//! rebuilt per solve.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::game::{MarkovGame, MaxPolicy, MinPolicy, ValueTable};

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;
/// Logged policies closer than this (entrywise) are treated as one column.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Optimal, but some basic variable sits at zero in the final tableau.
    DegenerateOptimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameSolution {
    /// Value for the row (maximizing) player.
    pub value: f64,
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    pub status: SolveStatus,
    /// `max_i (M q)_i − min_j (pᵀ M)_j` for the returned strategies.
    pub duality_gap: f64,
}

/// Guaranteed payoff of a row strategy: `min_j (pᵀ M)_j`.
pub fn row_guarantee(m: &[Vec<f64>], p: &[f64]) -> f64 {
    (0..m[0].len())
        .map(|j| m.iter().zip(p).map(|(row, pi)| pi * row[j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Guaranteed cap of a column strategy: `max_i (M q)_i`.
pub fn col_guarantee(m: &[Vec<f64>], q: &[f64]) -> f64 {
    m.iter()
        .map(|row| row.iter().zip(q).map(|(v, qj)| v * qj).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn clean_distribution(mut p: Vec<f64>) -> Vec<f64> {
    p.iter_mut().for_each(|x| *x = x.max(0.0));
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

/// Solves `max_p min_q pᵀ M q` for the row player.
///
/// The matrix is shifted so every entry is at least 1; the column player's
/// LP `max 1ᵀy s.t. (M + shift) y ≤ 1, y ≥ 0` is then feasible at the
/// origin with a slack basis. The row strategy is read off the slack
/// reduced costs (the dual solution).
pub fn solve_zero_sum(m: &[Vec<f64>]) -> Result<MatrixGameSolution> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(Error::Shape(format!(
            "payoff matrix must be non-empty and rectangular, got {rows} rows"
        )));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(precondition("payoff matrix has non-finite entries"));
    }
    let min = m.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;

    // tableau: rows x (cols structural + rows slack + rhs)
    let width = cols + rows + 1;
    let mut t = vec![vec![0.0; width]; rows];
    for i in 0..rows {
        for j in 0..cols {
            t[i][j] = m[i][j] + shift;
        }
        t[i][cols + i] = 1.0;
        t[i][width - 1] = 1.0;
    }
    let mut obj = vec![0.0; width];
    obj[..cols].iter_mut().for_each(|x| *x = -1.0);
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let solver_err = |reason: &str| Error::Solver {
        reason: reason.to_string(),
        matrix: m.to_vec(),
    };

    let mut pivots = 0;
    loop {
        let Some(enter) = (0..width - 1).find(|&j| obj[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..rows {
            let coef = t[i][enter];
            if coef > PIVOT_EPS {
                let ratio = t[i][width - 1] / coef;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - 1e-14
                            || (ratio <= best_ratio + 1e-14 && basis[i] < basis[l])
                    }
                };
                if better {
                    best_ratio = ratio.min(best_ratio);
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Err(solver_err("unbounded"));
        };
        let piv = t[r][enter];
        t[r].iter_mut().for_each(|x| *x /= piv);
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r {
                let f = row[enter];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
                }
            }
        }
        let f = obj[enter];
        obj.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
        basis[r] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(solver_err("pivot limit exceeded"));
        }
    }

    let total = obj[width - 1];
    if !(total > 0.0) || !total.is_finite() {
        return Err(solver_err("degenerate optimum with zero objective"));
    }
    let mut y = vec![0.0; cols];
    let mut degenerate = false;
    for (i, &bv) in basis.iter().enumerate() {
        let rhs = t[i][width - 1];
        if rhs.abs() <= 1e-12 {
            degenerate = true;
        }
        if bv < cols {
            y[bv] = rhs;
        }
    }
    let x: Vec<f64> = (0..rows).map(|i| obj[cols + i]).collect();
    let col_strategy = clean_distribution(y.iter().map(|v| v / total).collect());
    let row_strategy = clean_distribution(x.iter().map(|v| v / total).collect());
    let value = 1.0 / total - shift;
    let duality_gap = col_guarantee(m, &col_strategy) - row_guarantee(m, &row_strategy);
    Ok(MatrixGameSolution {
        value,
        row_strategy,
        col_strategy,
        status: if degenerate {
            SolveStatus::DegenerateOptimal
        } else {
            SolveStatus::Optimal
        },
        duality_gap,
    })
}

/// Result of maximizing against a finite set of opponent distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedSolution {
    pub value: f64,
    pub mu: Vec<f64>,
    /// Minimizing mixture weights over the opponent set.
    pub weights: Vec<f64>,
}

/// `max_{μ ∈ Δ(A)} min_j μᵀ Q opp_set[j]`.
pub fn restricted_maxmin(q: &[Vec<f64>], opp_set: &[&[f64]]) -> Result<RestrictedSolution> {
    if opp_set.is_empty() {
        return Err(precondition("restricted_maxmin needs a non-empty opponent set"));
    }
    let nb = q.first().map_or(0, Vec::len);
    for (j, nu) in opp_set.iter().enumerate() {
        if nu.len() != nb {
            return Err(Error::Shape(format!(
                "opponent distribution {j} has {} entries, expected {nb}",
                nu.len()
            )));
        }
        let sum: f64 = nu.iter().sum();
        if nu.iter().any(|x| *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(precondition(format!(
                "opponent distribution {j} is not a probability vector"
            )));
        }
    }
    let m: Vec<Vec<f64>> = q
        .iter()
        .map(|row| {
            opp_set
                .iter()
                .map(|nu| row.iter().zip(nu.iter()).map(|(v, p)| v * p).sum())
                .collect()
        })
        .collect();
    let sol = solve_zero_sum(&m)?;
    Ok(RestrictedSolution {
        value: sol.value,
        mu: sol.row_strategy,
        weights: sol.col_strategy,
    })
}

/// Nash values of the game with the min-player restricted, per state, to
/// mixtures of the policies it actually played.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalNashTable {
    pub values: ValueTable,
    /// Per-state maximin strategy of the max-player.
    pub maximin: MaxPolicy,
    /// Per-state minimizing mixture of the logged policies.
    pub minimax: MinPolicy,
    /// Number of distinct logged distributions per `(h, s)`.
    pub distinct: Vec<Vec<usize>>,
}

/// Distinct rows of `dists`, merging entries equal within [`DEDUP_TOL`].
fn dedup_distributions<'a>(dists: impl Iterator<Item = &'a [f64]>) -> Vec<&'a [f64]> {
    let mut exact: HashMap<Vec<u64>, ()> = HashMap::new();
    let mut out: Vec<&[f64]> = Vec::new();
    for d in dists {
        let key: Vec<u64> = d.iter().map(|x| x.to_bits()).collect();
        if exact.contains_key(&key) {
            continue;
        }
        let dup = out.iter().rev().any(|e| {
            e.iter()
                .zip(d)
                .all(|(x, y)| (x - y).abs() <= DEDUP_TOL)
        });
        if !dup {
            out.push(d);
        }
        exact.insert(key, ());
    }
    out
}

pub fn empirical_nash_values<'a>(
    game: &MarkovGame,
    opp_log: impl IntoIterator<Item = &'a MinPolicy>,
) -> Result<EmpiricalNashTable> {
    let log: Vec<&MinPolicy> = opp_log.into_iter().collect();
    if log.is_empty() {
        return Err(precondition("opponent log is empty"));
    }
    let mut values = ValueTable::zeros(game);
    let mut maximin = MaxPolicy::uniform(game);
    let mut minimax = MinPolicy::uniform(game);
    let mut distinct = Vec::with_capacity(game.horizon());
    for h in (0..game.horizon()).rev() {
        let mut layer_counts = vec![0; game.states(h)];
        for s in 0..game.states(h) {
            let q = game.q_matrix(h, s, values.layer(h + 1));
            let cols = dedup_distributions(log.iter().map(|p| p.dist(h, s)));
            layer_counts[s] = cols.len();
            let sol = restricted_maxmin(&q, &cols)?;
            let mut mix = vec![0.0; game.actions_b(h)];
            for (w, col) in sol.weights.iter().zip(&cols) {
                mix.iter_mut().zip(col.iter()).for_each(|(m, p)| *m += w * p);
            }
            values.set(h, s, sol.value);
            *maximin.dist_mut(h, s) = sol.mu;
            *minimax.dist_mut(h, s) = clean_distribution(mix);
        }
        distinct.push(layer_counts);
    }
    distinct.reverse();
    Ok(EmpiricalNashTable {
        values,
        maximin,
        minimax,
        distinct,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NashTable {
    pub values: ValueTable,
    pub max_policy: MaxPolicy,
    pub min_policy: MinPolicy,
}

/// Nash values of the full game (min over the whole simplex at each state).
pub fn exact_nash_values(game: &MarkovGame) -> Result<NashTable> {
    let mut values = ValueTable::zeros(game);
    let mut max_policy = MaxPolicy::uniform(game);
    let mut min_policy = MinPolicy::uniform(game);
    for h in (0..game.horizon()).rev() {
        for s in 0..game.states(h) {
            let q = game.q_matrix(h, s, values.layer(h + 1));
            let sol = solve_zero_sum(&q)?;
            values.set(h, s, sol.value);
            *max_policy.dist_mut(h, s) = sol.row_strategy;
            *min_policy.dist_mut(h, s) = sol.col_strategy;
        }
    }
    Ok(NashTable {
        values,
        max_policy,
        min_policy,
    })
}
