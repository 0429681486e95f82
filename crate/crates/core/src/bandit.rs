//! Adversarial bandit: FTRL with 1/2-Tsallis entropy and implicit-exploration
//! (IX) loss estimates.
//!
//! After `t` updates the distribution is the FTRL fixed point
//! `p_i = (η_t (L̂_i − x))^{-2}` with `η_t = 1/√t`, where `x < min_i L̂_i`
//! normalizes the vector. The IX estimate of the played arm's loss is
//! `ℓ / (p_arm + γ_t)` with `γ_t = η_t / 2`.
//!
//! Rewards in `[0, 1]` cross the API; losses are `1 − reward`.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};

const NEWTON_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 100;
/// Arms this far above the leader get probability zero.
const CLAMP_GAP: f64 = 1e9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BanditConfig {
    /// Restart the loss estimates whenever the update counter reaches a
    /// power of two, holding `η` fixed within each segment.
    pub doubling: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    num_arms: usize,
    config: BanditConfig,
    /// Updates since creation or the last reset.
    t: u64,
    cum_loss_est: Vec<f64>,
    current_dist: Vec<f64>,
    /// First update index of the current doubling segment.
    segment_start: u64,
}

impl BanditState {
    pub fn new(num_arms: usize) -> Result<Self> {
        Self::with_config(num_arms, BanditConfig::default())
    }

    pub fn with_config(num_arms: usize, config: BanditConfig) -> Result<Self> {
        if num_arms == 0 {
            return Err(precondition("a bandit needs at least one arm"));
        }
        Ok(BanditState {
            num_arms,
            config,
            t: 0,
            cum_loss_est: vec![0.0; num_arms],
            current_dist: vec![1.0 / num_arms as f64; num_arms],
            segment_start: 1,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn visits(&self) -> u64 {
        self.t
    }

    pub fn dist(&self) -> &[f64] {
        &self.current_dist
    }

    pub fn cum_loss_estimates(&self) -> &[f64] {
        &self.cum_loss_est
    }

    pub fn reset(&mut self) {
        *self = BanditState {
            num_arms: self.num_arms,
            config: self.config,
            t: 0,
            cum_loss_est: vec![0.0; self.num_arms],
            current_dist: vec![1.0 / self.num_arms as f64; self.num_arms],
            segment_start: 1,
        };
    }

    /// Learning rate for the update that just advanced the counter to `t`.
    fn learning_rate(&self) -> f64 {
        if self.config.doubling {
            1.0 / (self.segment_start as f64).sqrt()
        } else {
            1.0 / (self.t as f64).sqrt()
        }
    }

    /// Feeds the reward observed for `arm` and returns the next distribution.
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<&[f64]> {
        if arm >= self.num_arms {
            return Err(Error::IndexOutOfRange {
                what: "arm",
                index: arm,
                len: self.num_arms,
            });
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(precondition(format!(
                "bandit reward {reward} outside [0, 1]"
            )));
        }
        let played_prob = self.current_dist[arm];
        if played_prob <= 0.0 {
            return Err(precondition(format!("arm {arm} has zero probability")));
        }
        self.t += 1;
        if self.config.doubling && self.t.is_power_of_two() && self.t > 1 {
            self.segment_start = self.t;
            self.cum_loss_est.iter_mut().for_each(|x| *x = 0.0);
        }
        let eta = self.learning_rate();
        let gamma = eta / 2.0;
        let loss = 1.0 - reward;
        self.cum_loss_est[arm] += loss / (played_prob + gamma);
        self.current_dist = tsallis_distribution(&self.cum_loss_est, eta);
        Ok(&self.current_dist)
    }
}

/// Solves `Σ_i (η (L_i − x))^{-2} = 1` for `x < min L`.
///
/// The left side is increasing and convex in `x`, so Newton started where
/// the sum is at least 1 (at `x = min L − 1/η` the leader alone has mass 1)
/// decreases monotonically onto the root without overshooting.
/// Bisection takes over if Newton stalls.
pub fn tsallis_distribution(cum_loss: &[f64], eta: f64) -> Vec<f64> {
    let n = cum_loss.len();
    let min = cum_loss.iter().copied().fold(f64::INFINITY, f64::min);
    let active: Vec<bool> = cum_loss.iter().map(|l| l - min <= CLAMP_GAP).collect();
    let mass = |x: f64| -> (f64, f64) {
        let mut s = 0.0;
        let mut ds = 0.0;
        for (l, on) in cum_loss.iter().zip(&active) {
            if *on {
                let w = 1.0 / (eta * (l - x));
                let p = w * w;
                s += p;
                ds += 2.0 * eta * p * w;
            }
        }
        (s, ds)
    };

    let mut x = min - 1.0 / eta;
    let mut converged = false;
    for _ in 0..MAX_ITERS {
        let (s, ds) = mass(x);
        let f = s - 1.0;
        if f.abs() <= NEWTON_TOL {
            converged = true;
            break;
        }
        let next = x - f / ds;
        if !next.is_finite() || next >= min {
            break;
        }
        x = next;
    }
    if !converged {
        let (mut lo, mut hi) = (min - 1e6, min - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid).0 > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= NEWTON_TOL * (1.0 + mid.abs()) {
                break;
            }
        }
        x = 0.5 * (lo + hi);
    }

    let mut p: Vec<f64> = cum_loss
        .iter()
        .zip(&active)
        .map(|(l, on)| {
            if *on {
                let w = 1.0 / (eta * (l - x));
                w * w
            } else {
                0.0
            }
        })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    debug_assert_eq!(p.len(), n);
    p
}
