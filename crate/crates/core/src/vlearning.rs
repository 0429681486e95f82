//! Epoch V-learning.
//!
//! Every `(h, s)` cell partitions its visits into epochs whose lengths grow
//! geometrically by `1 + η`. Within an epoch a fresh Tsallis-IX bandit picks
//! the action distribution; when an epoch closes, the optimistic value
//! `V_h(s)` is refreshed from the epoch's average of `r + V_{h+1}(s')` plus
//! the bonus `β_n = √(ι/n)`, truncated at `H − h`.
//!
//! Steps are 0-based, so the truncation level of step `h` is `H − h`.
//! The learner only sees its own actions, rewards and states.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{BanditConfig, BanditState};
use crate::error::{precondition, Error, Result};
use crate::eval::{Algorithm, EpisodeRecord, InstanceStart, RunConfigEcho, RunLog};
use crate::game::{sample_episode, GameDims, InitialStates, MarkovGame, MaxPolicy, MinPolicy};
use crate::opponents::OpponentSpec;

/// Default for the unspecified constant of the bandit's regret bound.
pub const DEFAULT_BANDIT_CONSTANT: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Episode budget `K`.
    pub episodes: u64,
    pub delta: f64,
    /// Epoch incremental factor.
    pub eta: f64,
    pub iota_scale: f64,
    pub bandit_constant: f64,
    pub bandit: BanditConfig,
}

impl LearnerConfig {
    pub fn new(episodes: u64, delta: f64, eta: f64) -> Self {
        LearnerConfig {
            episodes,
            delta,
            eta,
            iota_scale: 1.0,
            bandit_constant: DEFAULT_BANDIT_CONSTANT,
            bandit: BanditConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(precondition("episode budget K must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(precondition(format!("delta {} outside (0, 1)", self.delta)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(precondition(format!("eta {} outside (0, 1]", self.eta)));
        }
        if !(self.iota_scale > 0.0 && self.iota_scale.is_finite()) {
            return Err(precondition("iota_scale must be positive"));
        }
        if !(self.bandit_constant > 0.0 && self.bandit_constant.is_finite()) {
            return Err(precondition("bandit constant must be positive"));
        }
        Ok(())
    }

    /// Whether `η ∈ [|S|/K, 1/H]`, the range the regret guarantee covers.
    pub fn eta_in_theory_range(&self, dims: &GameDims) -> bool {
        let lo = dims.total_states() as f64 / self.episodes as f64;
        let hi = 1.0 / dims.horizon as f64;
        self.eta >= lo - 1e-15 && self.eta <= hi + 1e-15
    }
}

/// Upper bound on the number of epochs any cell can open within `K`
/// episodes: `⌈(1 + η) ln K / η⌉`, at least 1.
pub fn epoch_bound(episodes: u64, eta: f64) -> u64 {
    let m = ((1.0 + eta) * (episodes as f64).ln() / eta).ceil();
    (m as u64).max(1)
}

/// `ι = scale · max{4c², 8} · H² · |A| · ln(8 H K M |A| |S| / δ)`.
pub fn compute_iota(config: &LearnerConfig, dims: &GameDims) -> Result<f64> {
    config.validate()?;
    let c = config.bandit_constant;
    let h = dims.horizon as f64;
    let a = dims.max_actions() as f64;
    let s = dims.total_states() as f64;
    let k = config.episodes as f64;
    let m = epoch_bound(config.episodes, config.eta) as f64;
    let lead = (4.0 * c * c).max(8.0);
    Ok(config.iota_scale * lead * h * h * a * (8.0 * h * k * m * a * s / config.delta).ln())
}

/// Confidence width `β_n = √(ι / n)`.
pub fn bonus(iota: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(precondition("bonus needs at least one sample"));
    }
    Ok((iota / n as f64).sqrt())
}

/// Visit count that closes an epoch whose predecessor had `prev` visits.
pub fn epoch_target(prev: u64, eta: f64) -> u64 {
    // the small slack absorbs rounding in products such as (4/3)·3
    let t = ((1.0 + eta) * prev as f64 - 1e-9).ceil() as u64;
    t.max(prev + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Cell {
    /// 1-based index of the running epoch.
    epoch: u64,
    prev_count: u64,
    cur_count: u64,
    epoch_sum: f64,
    value: f64,
    bandit: BanditState,
    policy: Vec<f64>,
}

/// Optimistic-value update `V^{k+1}_h(s) = value`, made at the end of episode `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VChange {
    pub episode: u64,
    pub step: usize,
    pub state: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordOutcome {
    Continued,
    EpochRolled,
}

#[derive(Clone, Debug)]
pub struct EpochVLearner {
    dims: GameDims,
    config: LearnerConfig,
    iota: f64,
    cells: Vec<Vec<Cell>>,
    episode: u64,
    changes: Vec<VChange>,
}

impl EpochVLearner {
    pub fn new(dims: GameDims, config: LearnerConfig) -> Result<Self> {
        let iota = compute_iota(&config, &dims)?;
        let horizon = dims.horizon;
        let cells = (0..horizon)
            .map(|h| {
                let arms = dims.actions_a[h];
                let bandit = BanditState::with_config(arms, config.bandit)?;
                Ok((0..dims.states[h])
                    .map(|_| Cell {
                        epoch: 1,
                        prev_count: 1,
                        cur_count: 0,
                        epoch_sum: 0.0,
                        value: (horizon - h) as f64,
                        bandit: bandit.clone(),
                        policy: vec![1.0 / arms as f64; arms],
                    })
                    .collect())
            })
            .collect::<Result<Vec<Vec<Cell>>>>()?;
        Ok(EpochVLearner {
            dims,
            config,
            iota,
            cells,
            episode: 0,
            changes: Vec::new(),
        })
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn dims(&self) -> &GameDims {
        &self.dims
    }

    /// Marks the start of (global, 1-based) episode `k`.
    pub fn begin_episode(&mut self, k: u64) {
        self.episode = k;
    }

    pub fn act(&self, h: usize, s: usize) -> &[f64] {
        &self.cells[h][s].policy
    }

    pub fn optimistic_value(&self, h: usize, s: usize) -> f64 {
        if h == self.dims.horizon {
            0.0
        } else {
            self.cells[h][s].value
        }
    }

    pub fn optimistic_v1(&self, s1: usize) -> f64 {
        self.optimistic_value(0, s1)
    }

    /// Epoch index of every cell.
    pub fn epoch_counts(&self) -> Vec<Vec<u64>> {
        self.cells
            .iter()
            .map(|layer| layer.iter().map(|c| c.epoch).collect())
            .collect()
    }

    pub fn max_epoch_count(&self) -> u64 {
        self.cells.iter().flatten().map(|c| c.epoch).max().unwrap_or(1)
    }

    pub fn changes(&self) -> &[VChange] {
        &self.changes
    }

    pub fn take_changes(&mut self) -> Vec<VChange> {
        std::mem::take(&mut self.changes)
    }

    pub fn snapshot_policy(&self) -> MaxPolicy {
        MaxPolicy::from_raw(
            self.cells
                .iter()
                .map(|layer| layer.iter().map(|c| c.policy.clone()).collect())
                .collect(),
        )
    }

    /// Processes the transition `(s, a, r, s_next)` observed at step `h`.
    pub fn record(
        &mut self,
        h: usize,
        s: usize,
        a: usize,
        r: f64,
        s_next: usize,
    ) -> Result<RecordOutcome> {
        let horizon = self.dims.horizon;
        if h >= horizon {
            return Err(Error::IndexOutOfRange {
                what: "step",
                index: h,
                len: horizon,
            });
        }
        for (what, index, len) in [
            ("state", s, self.dims.states[h]),
            ("action", a, self.dims.actions_a[h]),
            ("next state", s_next, self.dims.states[h + 1]),
        ] {
            if index >= len {
                return Err(Error::IndexOutOfRange { what, index, len });
            }
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(precondition(format!("reward {r} outside [0, 1]")));
        }
        // V_{h+1} has not been touched yet in this episode
        let next_value = self.optimistic_value(h + 1, s_next);
        let target = r + next_value;
        let cap = (horizon - h) as f64;
        let (iota, eta, episode) = (self.iota, self.config.eta, self.episode);
        let cell = &mut self.cells[h][s];
        cell.cur_count += 1;
        cell.epoch_sum += target;

        if cell.cur_count == epoch_target(cell.prev_count, eta) {
            let n = cell.cur_count;
            let value = cap.min(cell.epoch_sum / n as f64 + bonus(iota, n)?);
            cell.value = value;
            cell.epoch += 1;
            cell.prev_count = n;
            cell.cur_count = 0;
            cell.epoch_sum = 0.0;
            cell.bandit.reset();
            let arms = cell.policy.len();
            cell.policy = vec![1.0 / arms as f64; arms];
            self.changes.push(VChange {
                episode,
                step: h,
                state: s,
                value,
            });
            Ok(RecordOutcome::EpochRolled)
        } else {
            let feed = target / horizon as f64;
            if !(0.0..=1.0 + 1e-12).contains(&feed) {
                return Err(Error::Invariant(format!(
                    "normalized bandit feed {feed} outside [0, 1]"
                )));
            }
            let dist = cell.bandit.update(a, feed.min(1.0))?;
            cell.policy.clear();
            cell.policy.extend_from_slice(dist);
            Ok(RecordOutcome::Continued)
        }
    }
}

/// What one episode produced, from the evaluator's point of view.
pub(crate) struct PlayedEpisode {
    pub record: EpisodeRecord,
}

/// Runs episode `k`: the learner commits to its policy, the opponent picks
/// `ν^k` (possibly reacting to that commitment), the environment samples a
/// trajectory, and the learner is fed its own observations step by step.
pub(crate) fn play_episode<R: Rng + ?Sized>(
    game: &MarkovGame,
    learner: &mut EpochVLearner,
    opponent: &OpponentSpec,
    s1: usize,
    k: u64,
    rng: &mut R,
) -> Result<PlayedEpisode> {
    learner.begin_episode(k);
    let mu = learner.snapshot_policy();
    let nu: MinPolicy = opponent.policy(game, k, Some(&mu))?;
    let v1 = learner.optimistic_v1(s1);
    let traj = sample_episode(game, &mu, &nu, rng, s1)?;
    for h in 0..game.horizon() {
        learner.record(
            h,
            traj.states[h],
            traj.actions_a[h],
            traj.rewards[h],
            traj.states[h + 1],
        )?;
    }
    Ok(PlayedEpisode {
        record: EpisodeRecord {
            initial_state: s1,
            trajectory: traj,
            learner: mu,
            opponent: nu,
            optimistic_v1: v1,
            block: 1,
            sub_block: 1,
        },
    })
}

/// Runs epoch V-learning for `config.episodes` episodes.
pub fn run_epoch_v<R: Rng + ?Sized>(
    game: &MarkovGame,
    opponent: &OpponentSpec,
    initial: &InitialStates,
    config: &LearnerConfig,
    seed: u64,
    rng: &mut R,
) -> Result<RunLog> {
    opponent.validate(game, config.episodes)?;
    let mut learner = EpochVLearner::new(game.dims(), config.clone())?;
    let mut episodes = Vec::with_capacity(config.episodes as usize);
    for k in 1..=config.episodes {
        let s1 = initial.state(k, game.states(0))?;
        episodes.push(play_episode(game, &mut learner, opponent, s1, k, rng)?.record);
    }
    Ok(RunLog {
        game: game.clone(),
        algorithm: Algorithm::EpochV,
        config: RunConfigEcho {
            seed,
            episodes: config.episodes,
            delta: config.delta,
            eta: config.eta,
            iota: learner.iota(),
            iota_scale: config.iota_scale,
            bandit_constant: config.bandit_constant,
            doubling: config.bandit.doubling,
            c0: None,
            schedule_mode: None,
            opponent_kind: opponent.kind().to_string(),
        },
        instances: vec![InstanceStart {
            episode: 1,
            block: 1,
            sub_block: 1,
            eta: config.eta,
            delta: config.delta,
            iota: learner.iota(),
        }],
        v_changes: learner.take_changes(),
        restarts: Vec::new(),
        partial_final_sub_block: false,
        episodes,
    })
}
