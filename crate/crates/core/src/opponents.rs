//! Opponent policy generators.
//!
//! The opponent is environment-side: its policies reach the learner only
//! through sampled transitions. `ν^k` is a pure function of the spec, the
//! episode index and (for the adaptive kind) the learner's committed policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{precondition, Error, Result};
use crate::game::{best_response_min, splitmix64, MarkovGame, MaxPolicy, MinPolicy, Policy, Side};

#[derive(Clone, Debug, PartialEq)]
pub enum OpponentSpec {
    Fixed(MinPolicy),
    /// Segment `i` (episodes from `switches[i-1]` up to `switches[i] - 1`)
    /// plays `pool[i mod pool.len()]`.
    Switching {
        pool: Vec<MinPolicy>,
        switches: Vec<u64>,
    },
    /// `(1 − w_k) ν_start + w_k ν_end` with `w_k = (k − 1)/(K − 1)`.
    Drifting {
        start: MinPolicy,
        end: MinPolicy,
        episodes: u64,
    },
    /// A fresh random policy per segment, drawn from `seed` and the segment index.
    RandomEachSwitch { switches: Vec<u64>, seed: u64 },
    /// Best response to the learner's committed policy for the episode.
    BestResponse,
}

/// Dirichlet(1) action distributions at every `(h, s)`, drawn from `seed`.
pub fn random_policy<S: Side>(game: &MarkovGame, seed: u64) -> Policy<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| {
        let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect::<Vec<f64>>()
    };
    let probs = (0..game.horizon())
        .map(|h| {
            (0..game.states(h))
                .map(|_| draw(S::actions(game, h)))
                .collect()
        })
        .collect();
    Policy::from_raw(probs)
}

fn segment_of(switches: &[u64], k: u64) -> usize {
    switches.partition_point(|&start| start <= k)
}

fn check_switches(switches: &[u64], episodes: u64) -> Result<()> {
    if switches.windows(2).any(|w| w[0] >= w[1]) {
        return Err(precondition("switch indices must be strictly increasing"));
    }
    if let Some(bad) = switches.iter().find(|&&k| k < 1 || k > episodes) {
        return Err(precondition(format!(
            "switch index {bad} outside [1, {episodes}]"
        )));
    }
    Ok(())
}

impl OpponentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            OpponentSpec::Fixed(_) => "fixed",
            OpponentSpec::Switching { .. } => "switching",
            OpponentSpec::Drifting { .. } => "drifting",
            OpponentSpec::RandomEachSwitch { .. } => "random_each_switch",
            OpponentSpec::BestResponse => "best_response",
        }
    }

    /// Checks schedules and pool policies against the game and budget.
    pub fn validate(&self, game: &MarkovGame, episodes: u64) -> Result<()> {
        match self {
            OpponentSpec::Fixed(p) => {
                p.clone().validated(game)?;
            }
            OpponentSpec::Switching { pool, switches } => {
                if pool.is_empty() {
                    return Err(precondition("switching opponent needs a non-empty pool"));
                }
                for p in pool {
                    p.clone().validated(game)?;
                }
                check_switches(switches, episodes)?;
            }
            OpponentSpec::Drifting { start, end, .. } => {
                start.clone().validated(game)?;
                end.clone().validated(game)?;
            }
            OpponentSpec::RandomEachSwitch { switches, .. } => check_switches(switches, episodes)?,
            OpponentSpec::BestResponse => {}
        }
        Ok(())
    }

    /// `ν^k` for the 1-based episode `k`.
    pub fn policy(
        &self,
        game: &MarkovGame,
        k: u64,
        learner: Option<&MaxPolicy>,
    ) -> Result<MinPolicy> {
        match self {
            OpponentSpec::Fixed(p) => Ok(p.clone()),
            OpponentSpec::Switching { pool, switches } => {
                Ok(pool[segment_of(switches, k) % pool.len()].clone())
            }
            OpponentSpec::Drifting {
                start,
                end,
                episodes,
            } => {
                let w = if *episodes <= 1 {
                    0.0
                } else {
                    (k.saturating_sub(1)) as f64 / (*episodes - 1) as f64
                };
                let w = w.clamp(0.0, 1.0);
                if w == 0.0 {
                    return Ok(start.clone());
                }
                if w == 1.0 {
                    return Ok(end.clone());
                }
                Ok(MinPolicy::from_fn(game, |h, s, _| {
                    start
                        .dist(h, s)
                        .iter()
                        .zip(end.dist(h, s))
                        .map(|(x, y)| (1.0 - w) * x + w * y)
                        .collect()
                }))
            }
            OpponentSpec::RandomEachSwitch { switches, seed } => {
                let segment = segment_of(switches, k) as u64;
                Ok(random_policy(game, splitmix64(seed ^ splitmix64(segment))))
            }
            OpponentSpec::BestResponse => {
                let mu = learner.ok_or_else(|| {
                    Error::Precondition(
                        "best-response opponent needs the learner's policy snapshot".into(),
                    )
                })?;
                Ok(best_response_min(game, mu)?.0)
            }
        }
    }
}
