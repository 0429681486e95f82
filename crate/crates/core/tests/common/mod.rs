#![allow(dead_code)]

use mglab::game::{MarkovGame, MinPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// H=3, two states per step, two actions per player.
pub fn reference_game() -> MarkovGame {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    MarkovGame::random(3, 2, 2, 2, &mut rng).unwrap()
}

/// Least-squares slope of `ln y` against `ln x`; `None` if any `y ≤ 0`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if y.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Some(cov / var)
}

/// Simultaneous fictitious play for `iters` rounds. Returns the bracket
/// `(min_b (x̄ᵀM)_b, max_a (M ȳ)_a)`, which always contains the game value.
pub fn fictitious_play(m: &[Vec<f64>], iters: usize) -> (f64, f64) {
    let (na, nb) = (m.len(), m[0].len());
    let mut row_counts = vec![0.0; na];
    let mut col_counts = vec![0.0; nb];
    // payoff of each row against the column history, and vice versa
    let mut row_payoff = vec![0.0; na];
    let mut col_payoff = vec![0.0; nb];
    let (mut a, mut b) = (0, 0);
    for _ in 0..iters {
        row_counts[a] += 1.0;
        col_counts[b] += 1.0;
        for i in 0..na {
            row_payoff[i] += m[i][b];
        }
        for j in 0..nb {
            col_payoff[j] += m[a][j];
        }
        a = argmax(&row_payoff);
        b = argmin(&col_payoff);
    }
    let t = iters as f64;
    let lower = col_payoff.iter().cloned().fold(f64::INFINITY, f64::min) / t;
    let upper = row_payoff.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / t;
    (lower, upper)
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] < v[best] { i } else { best })
}

/// All points of the probability simplex in `n` dimensions on a `1/steps` mesh.
pub fn simplex_mesh(n: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == n {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(n, left - c, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, steps, steps, &mut Vec::new(), &mut out);
    out
}

/// Empirical Nash values by backward recursion where each state's
/// restricted max-min is maximized over a simplex mesh instead of by LP.
/// Returns the layer-0 values.
pub fn grid_empirical_values(game: &MarkovGame, log: &[MinPolicy], steps: usize) -> Vec<f64> {
    let mut next = vec![0.0; 1];
    for h in (0..game.horizon()).rev() {
        let mesh = simplex_mesh(game.actions_a(h), steps);
        next = (0..game.states(h))
            .map(|s| {
                let q = game.q_matrix(h, s, &next);
                mesh.iter()
                    .map(|mu| {
                        log.iter()
                            .map(|nu| {
                                let d = nu.dist(h, s);
                                (0..mu.len())
                                    .map(|a| mu[a] * (0..d.len()).map(|b| q[a][b] * d[b]).sum::<f64>())
                                    .sum::<f64>()
                            })
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    next
}

/// Upper counterpart of [`grid_empirical_values`]: the opponent picks a
/// mixture of the logged distributions on a mesh and the max-player best
/// responds, so each state's value is over- rather than under-estimated.
/// Only meant for logs of two policies.
pub fn grid_empirical_upper(game: &MarkovGame, log: &[MinPolicy], steps: usize) -> Vec<f64> {
    assert_eq!(log.len(), 2);
    let mut next = vec![0.0; 1];
    for h in (0..game.horizon()).rev() {
        next = (0..game.states(h))
            .map(|s| {
                let q = game.q_matrix(h, s, &next);
                let (d0, d1) = (log[0].dist(h, s), log[1].dist(h, s));
                (0..=steps)
                    .map(|i| {
                        let w = i as f64 / steps as f64;
                        q.iter()
                            .map(|row| {
                                row.iter()
                                    .enumerate()
                                    .map(|(b, x)| x * (w * d0[b] + (1.0 - w) * d1[b]))
                                    .sum::<f64>()
                            })
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
    }
    next
}
