//! Adaptive epoch V-learning: restarts of the base learner driven by a
//! regret-proxy test.
//!
//! Block `b` holds `4^b + 1` sub-blocks, each a fresh [`EpochVLearner`] with
//! confidence `δ / (2K⁶)` and a scheduled `η`. During a sub-block with
//! episode set `T`,
//!
//! ```text
//! Φ = Σ_{k∈T} (V^k_1(s_1^k) − Σ_h r_h^k) + √(ι |T|)
//! D = 3 c0 H √(ι |S| |T| ln K / η)     for the first 4^b sub-blocks
//! D = 4 c0 H √(ι |S| K ln K / η)       for the last one
//! ```
//!
//! and the sub-block ends as soon as `Φ > D`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::BanditConfig;
use crate::error::{precondition, Result};
use crate::eval::{Algorithm, InstanceStart, RestartEvent, RunConfigEcho, RunLog};
use crate::game::{GameDims, InitialStates, MarkovGame};
use crate::opponents::OpponentSpec;
use crate::vlearning::{play_episode, EpochVLearner, LearnerConfig, DEFAULT_BANDIT_CONSTANT};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// `η = 1/H`, and `max{4^{-b}/H, |S|/K}` in the last sub-block.
    #[default]
    Oblivious,
    /// `η = 1/(H√|S|)`, and `max{4^{-b}/(H√|S|), |S|/K}` in the last sub-block.
    Adaptive,
}

impl ScheduleMode {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleMode::Oblivious => "oblivious",
            ScheduleMode::Adaptive => "adaptive",
        }
    }
}

/// Number of sub-blocks in block `b`: `2^{2b} + 1`.
pub fn sub_block_count(block: u32) -> u64 {
    4u64.saturating_pow(block).saturating_add(1)
}

pub fn eta_schedule(
    mode: ScheduleMode,
    block: u32,
    sub_block: u64,
    horizon: usize,
    total_states: usize,
    episodes: u64,
) -> Result<f64> {
    if block == 0 {
        return Err(precondition("blocks are numbered from 1"));
    }
    let last = sub_block_count(block);
    if sub_block == 0 || sub_block > last {
        return Err(precondition(format!(
            "sub-block {sub_block} outside [1, {last}] for block {block}"
        )));
    }
    let scale = match mode {
        ScheduleMode::Oblivious => horizon as f64,
        ScheduleMode::Adaptive => horizon as f64 * (total_states as f64).sqrt(),
    };
    if sub_block < last {
        Ok(1.0 / scale)
    } else {
        let guess = 4f64.powi(-(block as i32)) / scale;
        Ok(guess.max(total_states as f64 / episodes as f64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub episodes: u64,
    pub delta: f64,
    pub c0: f64,
    pub mode: ScheduleMode,
    pub iota_scale: f64,
    pub bandit_constant: f64,
    pub bandit: BanditConfig,
}

impl MetaConfig {
    pub fn new(episodes: u64, delta: f64) -> Self {
        MetaConfig {
            episodes,
            delta,
            c0: 2.0,
            mode: ScheduleMode::Oblivious,
            iota_scale: 1.0,
            bandit_constant: DEFAULT_BANDIT_CONSTANT,
            bandit: BanditConfig::default(),
        }
    }

    /// Confidence handed to every base instance: `δ / (2K⁶)`.
    pub fn base_delta(&self) -> f64 {
        self.delta / (2.0 * (self.episodes as f64).powi(6))
    }

    fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(precondition("episode budget K must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(precondition(format!("delta {} outside (0, 1)", self.delta)));
        }
        if !(self.c0 >= 2.0) {
            return Err(precondition(format!("c0 = {} must be at least 2", self.c0)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetaTransition {
    ContinueSubBlock,
    AdvanceSubBlock,
    AdvanceBlock,
}

/// Statistic values at the end of a meta step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetaStep {
    pub transition: MetaTransition,
    pub phi: f64,
    pub threshold: f64,
    /// `|T|` of the sub-block the episode belonged to.
    pub sub_block_episodes: u64,
}

#[derive(Clone, Debug)]
pub struct MetaState {
    config: MetaConfig,
    dims: GameDims,
    block: u32,
    sub_block: u64,
    learner: EpochVLearner,
    eta: f64,
    sub_block_episodes: u64,
    deficit_sum: f64,
    phi: f64,
    threshold: f64,
}

impl MetaState {
    pub fn new(dims: GameDims, config: MetaConfig) -> Result<Self> {
        config.validate()?;
        let eta = eta_schedule(
            config.mode,
            1,
            1,
            dims.horizon,
            dims.total_states(),
            config.episodes,
        )?;
        let learner = EpochVLearner::new(dims.clone(), Self::base_config(&config, eta))?;
        Ok(MetaState {
            config,
            dims,
            block: 1,
            sub_block: 1,
            learner,
            eta,
            sub_block_episodes: 0,
            deficit_sum: 0.0,
            phi: 0.0,
            threshold: 0.0,
        })
    }

    fn base_config(config: &MetaConfig, eta: f64) -> LearnerConfig {
        LearnerConfig {
            episodes: config.episodes,
            delta: config.base_delta(),
            eta,
            iota_scale: config.iota_scale,
            bandit_constant: config.bandit_constant,
            bandit: config.bandit,
        }
    }

    pub fn block(&self) -> u32 {
        self.block
    }

    pub fn sub_block(&self) -> u64 {
        self.sub_block
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// ι of the running base instance, which is also the ι used in Φ and D.
    pub fn iota(&self) -> f64 {
        self.learner.iota()
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn deficit_sum(&self) -> f64 {
        self.deficit_sum
    }

    pub fn sub_block_episodes(&self) -> u64 {
        self.sub_block_episodes
    }

    pub fn learner(&self) -> &EpochVLearner {
        &self.learner
    }

    pub fn learner_mut(&mut self) -> &mut EpochVLearner {
        &mut self.learner
    }

    fn compute_threshold(&self) -> f64 {
        let c0 = self.config.c0;
        let h = self.dims.horizon as f64;
        let s = self.dims.total_states() as f64;
        let ln_k = (self.config.episodes as f64).ln();
        let iota = self.iota();
        if self.sub_block < sub_block_count(self.block) {
            3.0 * c0 * h * (iota * s * self.sub_block_episodes as f64 * ln_k / self.eta).sqrt()
        } else {
            4.0 * c0 * h * (iota * s * self.config.episodes as f64 * ln_k / self.eta).sqrt()
        }
    }

    /// Folds one finished episode into Φ and D; restarts the base learner
    /// when `Φ > D`.
    pub fn step(&mut self, v1_opt: f64, total_reward: f64) -> Result<MetaStep> {
        self.sub_block_episodes += 1;
        self.deficit_sum += v1_opt - total_reward;
        self.phi = self.deficit_sum + (self.iota() * self.sub_block_episodes as f64).sqrt();
        self.threshold = self.compute_threshold();
        let out = MetaStep {
            transition: MetaTransition::ContinueSubBlock,
            phi: self.phi,
            threshold: self.threshold,
            sub_block_episodes: self.sub_block_episodes,
        };
        if self.phi <= self.threshold {
            return Ok(out);
        }
        let transition = if self.sub_block < sub_block_count(self.block) {
            self.sub_block += 1;
            MetaTransition::AdvanceSubBlock
        } else {
            self.block += 1;
            self.sub_block = 1;
            MetaTransition::AdvanceBlock
        };
        self.eta = eta_schedule(
            self.config.mode,
            self.block,
            self.sub_block,
            self.dims.horizon,
            self.dims.total_states(),
            self.config.episodes,
        )?;
        self.learner = EpochVLearner::new(
            self.dims.clone(),
            Self::base_config(&self.config, self.eta),
        )?;
        self.sub_block_episodes = 0;
        self.deficit_sum = 0.0;
        self.phi = 0.0;
        self.threshold = 0.0;
        Ok(MetaStep { transition, ..out })
    }
}

/// Runs adaptive epoch V-learning for exactly `config.episodes` episodes.
pub fn meta_run<R: Rng + ?Sized>(
    game: &MarkovGame,
    opponent: &OpponentSpec,
    initial: &InitialStates,
    config: &MetaConfig,
    seed: u64,
    rng: &mut R,
) -> Result<RunLog> {
    opponent.validate(game, config.episodes)?;
    let mut state = MetaState::new(game.dims(), config.clone())?;
    let first_iota = state.iota();
    let mut instances = vec![InstanceStart {
        episode: 1,
        block: 1,
        sub_block: 1,
        eta: state.eta(),
        delta: config.base_delta(),
        iota: first_iota,
    }];
    let mut episodes = Vec::with_capacity(config.episodes as usize);
    let mut v_changes = Vec::new();
    let mut restarts = Vec::new();
    let mut last = MetaTransition::ContinueSubBlock;
    for k in 1..=config.episodes {
        let s1 = initial.state(k, game.states(0))?;
        let (block, sub_block) = (state.block(), state.sub_block());
        let mut played = play_episode(game, state.learner_mut(), opponent, s1, k, rng)?;
        played.record.block = block;
        played.record.sub_block = sub_block;
        v_changes.extend(state.learner_mut().take_changes());
        let step = state.step(
            played.record.optimistic_v1,
            played.record.trajectory.total_reward(),
        )?;
        last = step.transition;
        if step.transition != MetaTransition::ContinueSubBlock {
            restarts.push(RestartEvent {
                episode: k,
                block,
                sub_block,
                sub_block_episodes: step.sub_block_episodes,
                phi: step.phi,
                threshold: step.threshold,
            });
            if k < config.episodes {
                instances.push(InstanceStart {
                    episode: k + 1,
                    block: state.block(),
                    sub_block: state.sub_block(),
                    eta: state.eta(),
                    delta: config.base_delta(),
                    iota: state.iota(),
                });
            }
        }
        episodes.push(played.record);
    }
    Ok(RunLog {
        game: game.clone(),
        algorithm: Algorithm::AdaptiveMeta,
        config: RunConfigEcho {
            seed,
            episodes: config.episodes,
            delta: config.delta,
            eta: instances[0].eta,
            iota: first_iota,
            iota_scale: config.iota_scale,
            bandit_constant: config.bandit_constant,
            doubling: config.bandit.doubling,
            c0: Some(config.c0),
            schedule_mode: Some(config.mode),
            opponent_kind: opponent.kind().to_string(),
        },
        instances,
        v_changes,
        restarts,
        partial_final_sub_block: last == MetaTransition::ContinueSubBlock,
        episodes,
    })
}
