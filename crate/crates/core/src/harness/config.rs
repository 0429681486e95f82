//! Experiment configuration.
//!
//! ```text
//! game.source = random            # or `file`, with game.path
//! game.horizon = 3
//! game.states = 2
//! game.actions_a = 2
//! game.actions_b = 2
//! game.seed = 1
//! algorithm = epoch_v             # or adaptive_meta
//! learner.K = 16384
//! learner.delta = 0.05
//! learner.eta = 1/H               # number in (0, 1] or 1/H; epoch_v only
//! learner.schedule_mode = oblivious
//! learner.c0 = 2
//! learner.iota_scale = 1
//! learner.c = 2
//! bandit.doubling = false
//! opponent.kind = switching       # fixed | switching | drifting | random_each_switch | best_response
//! opponent.policy = uniform       # fixed: uniform | pure:<b> | random:<seed>
//! opponent.pool = pure:0, pure:1  # switching
//! opponent.switches = 5462, 10923 # switching, random_each_switch
//! opponent.start = pure:0         # drifting
//! opponent.end = pure:1           # drifting
//! opponent.seed = 3               # random_each_switch
//! initial_state.schedule = round_robin   # fixed | round_robin | random
//! initial_state.state = 0         # fixed
//! initial_state.seed = 0          # random
//! experiment.seeds = 1, 2, 3
//! experiment.master_seed = 0
//! experiment.checkpoints = 1024, 2048, 4096, 8192, 16384
//! experiment.timing = false
//! ```

use std::path::{Path, PathBuf};

use super::game_file::parse_game;
use super::kv::{config_err, split_list, KvFile};
use crate::error::Result;
use crate::eval::Algorithm;
use crate::game::{InitialStates, MarkovGame, Min, MinPolicy};
use crate::meta::ScheduleMode;
use crate::opponents::{random_policy, OpponentSpec};

const KNOWN_KEYS: &[&str] = &[
    "game.source",
    "game.path",
    "game.horizon",
    "game.states",
    "game.actions_a",
    "game.actions_b",
    "game.seed",
    "algorithm",
    "learner.K",
    "learner.delta",
    "learner.eta",
    "learner.schedule_mode",
    "learner.c0",
    "learner.iota_scale",
    "learner.c",
    "bandit.doubling",
    "opponent.kind",
    "opponent.policy",
    "opponent.pool",
    "opponent.switches",
    "opponent.start",
    "opponent.end",
    "opponent.seed",
    "initial_state.schedule",
    "initial_state.state",
    "initial_state.seed",
    "experiment.seeds",
    "experiment.master_seed",
    "experiment.checkpoints",
    "experiment.timing",
];

#[derive(Clone, Debug, PartialEq)]
pub enum GameSource {
    Random {
        horizon: usize,
        states: usize,
        actions_a: usize,
        actions_b: usize,
        seed: u64,
    },
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EtaSpec {
    Value(f64),
    InverseHorizon,
}

impl EtaSpec {
    pub fn resolve(self, horizon: usize) -> f64 {
        match self {
            EtaSpec::Value(x) => x,
            EtaSpec::InverseHorizon => 1.0 / horizon as f64,
        }
    }
}

/// An opponent policy named in the config, built once the game is known.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyDesc {
    Uniform,
    /// Action `b` everywhere (taken modulo `|B_h|`).
    Pure(usize),
    Random(u64),
}

impl PolicyDesc {
    fn parse(s: &str) -> Option<Self> {
        match s.split_once(':') {
            None if s == "uniform" => Some(PolicyDesc::Uniform),
            Some(("pure", b)) => b.parse().ok().map(PolicyDesc::Pure),
            Some(("random", seed)) => seed.parse().ok().map(PolicyDesc::Random),
            _ => None,
        }
    }

    pub fn build(&self, game: &MarkovGame) -> MinPolicy {
        match *self {
            PolicyDesc::Uniform => MinPolicy::uniform(game),
            PolicyDesc::Pure(b) => MinPolicy::deterministic(game, |_, _| b),
            PolicyDesc::Random(seed) => random_policy::<Min>(game, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OpponentConfig {
    Fixed(PolicyDesc),
    Switching {
        pool: Vec<PolicyDesc>,
        switches: Vec<u64>,
    },
    Drifting {
        start: PolicyDesc,
        end: PolicyDesc,
    },
    RandomEachSwitch {
        switches: Vec<u64>,
        seed: u64,
    },
    BestResponse,
}

impl OpponentConfig {
    pub fn build(&self, game: &MarkovGame, episodes: u64) -> OpponentSpec {
        match self {
            OpponentConfig::Fixed(p) => OpponentSpec::Fixed(p.build(game)),
            OpponentConfig::Switching { pool, switches } => OpponentSpec::Switching {
                pool: pool.iter().map(|p| p.build(game)).collect(),
                switches: switches.clone(),
            },
            OpponentConfig::Drifting { start, end } => OpponentSpec::Drifting {
                start: start.build(game),
                end: end.build(game),
                episodes,
            },
            OpponentConfig::RandomEachSwitch { switches, seed } => OpponentSpec::RandomEachSwitch {
                switches: switches.clone(),
                seed: *seed,
            },
            OpponentConfig::BestResponse => OpponentSpec::BestResponse,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub algorithm: Algorithm,
    pub episodes: u64,
    pub delta: f64,
    pub eta: EtaSpec,
    pub schedule_mode: ScheduleMode,
    pub c0: f64,
    pub iota_scale: f64,
    pub bandit_constant: f64,
    pub doubling: bool,
    pub opponent: OpponentConfig,
    pub initial: InitialStates,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    /// Sorted, deduplicated, each in `[1, K]`; defaults to `[K]`.
    pub checkpoints: Vec<u64>,
    /// Record real wall-clock time in the summary; off by default because it
    /// breaks byte-identical reruns.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&path.display().to_string(), &text)?;
        if let GameSource::File(p) = &mut cfg.game {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let kv = KvFile::parse(file, text)?;
        for (key, line) in kv.keys() {
            if !KNOWN_KEYS.contains(&key) {
                return Err(config_err(file, line, format!("unknown key `{key}`")));
            }
        }

        let game = match kv.get("game.source").map_or("random", |e| e.value.as_str()) {
            "random" => {
                let dim = |key: &str, default: usize| -> Result<usize> {
                    let n = kv.or(key, default)?;
                    if n == 0 {
                        return Err(kv.err(key, format!("`{key}` must be at least 1")));
                    }
                    Ok(n)
                };
                GameSource::Random {
                    horizon: dim("game.horizon", 3)?,
                    states: dim("game.states", 2)?,
                    actions_a: dim("game.actions_a", 2)?,
                    actions_b: dim("game.actions_b", 2)?,
                    seed: kv.or("game.seed", 0)?,
                }
            }
            "file" => GameSource::File(PathBuf::from(kv.str("game.path")?)),
            other => {
                return Err(kv.err("game.source", format!("`game.source`: expected random|file, got `{other}`")))
            }
        };

        let algorithm = match kv.get("algorithm").map_or("epoch_v", |e| e.value.as_str()) {
            "epoch_v" => Algorithm::EpochV,
            "adaptive_meta" => Algorithm::AdaptiveMeta,
            other => {
                return Err(kv.err(
                    "algorithm",
                    format!("`algorithm`: expected epoch_v|adaptive_meta, got `{other}`"),
                ))
            }
        };

        let episodes: u64 = kv.required("learner.K")?;
        if episodes == 0 {
            return Err(kv.err("learner.K", "`learner.K` must be at least 1"));
        }
        let delta: f64 = kv.or("learner.delta", 0.05)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(kv.err("learner.delta", "`learner.delta` must lie in (0, 1)"));
        }
        let eta = match kv.get("learner.eta").map(|e| e.value.as_str()) {
            None | Some("1/H") => EtaSpec::InverseHorizon,
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x > 0.0 && x <= 1.0 => EtaSpec::Value(x),
                _ => return Err(kv.err("learner.eta", format!("`learner.eta`: expected 1/H or a number in (0, 1], got `{v}`"))),
            },
        };
        let schedule_mode = match kv.get("learner.schedule_mode").map_or("oblivious", |e| e.value.as_str()) {
            "oblivious" => ScheduleMode::Oblivious,
            "adaptive" => ScheduleMode::Adaptive,
            other => {
                return Err(kv.err(
                    "learner.schedule_mode",
                    format!("`learner.schedule_mode`: expected oblivious|adaptive, got `{other}`"),
                ))
            }
        };
        let c0: f64 = kv.or("learner.c0", 2.0)?;
        if !(c0 >= 2.0) {
            return Err(kv.err("learner.c0", "`learner.c0` must be at least 2"));
        }
        let positive = |key: &str, default: f64| -> Result<f64> {
            let x: f64 = kv.or(key, default)?;
            if !(x > 0.0 && x.is_finite()) {
                return Err(kv.err(key, format!("`{key}` must be positive")));
            }
            Ok(x)
        };
        let iota_scale = positive("learner.iota_scale", 1.0)?;
        let bandit_constant = positive("learner.c", crate::vlearning::DEFAULT_BANDIT_CONSTANT)?;
        let doubling = kv.or("bandit.doubling", false)?;

        let policy = |key: &str| -> Result<PolicyDesc> {
            let v = kv.str(key)?;
            PolicyDesc::parse(v)
                .ok_or_else(|| kv.err(key, format!("`{key}`: expected uniform|pure:<b>|random:<seed>, got `{v}`")))
        };
        let switches = || -> Result<Vec<u64>> {
            let s: Vec<u64> = kv.list("opponent.switches")?.unwrap_or_default();
            if s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(kv.err("opponent.switches", "`opponent.switches` must be strictly increasing"));
            }
            if let Some(bad) = s.iter().find(|&&k| k < 1 || k > episodes) {
                return Err(kv.err(
                    "opponent.switches",
                    format!("`opponent.switches`: episode {bad} outside [1, {episodes}]"),
                ));
            }
            Ok(s)
        };
        let opponent = match kv.str("opponent.kind")? {
            "fixed" => OpponentConfig::Fixed(if kv.get("opponent.policy").is_some() {
                policy("opponent.policy")?
            } else {
                PolicyDesc::Uniform
            }),
            "switching" => {
                let raw = kv.str("opponent.pool")?;
                let pool = split_list(raw)
                    .map(|item| {
                        PolicyDesc::parse(item).ok_or_else(|| {
                            kv.err("opponent.pool", format!("`opponent.pool`: bad policy `{item}`"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if pool.is_empty() {
                    return Err(kv.err("opponent.pool", "`opponent.pool` must not be empty"));
                }
                OpponentConfig::Switching {
                    pool,
                    switches: switches()?,
                }
            }
            "drifting" => OpponentConfig::Drifting {
                start: policy("opponent.start")?,
                end: policy("opponent.end")?,
            },
            "random_each_switch" => OpponentConfig::RandomEachSwitch {
                switches: switches()?,
                seed: kv.or("opponent.seed", 0)?,
            },
            "best_response" => OpponentConfig::BestResponse,
            other => {
                return Err(kv.err(
                    "opponent.kind",
                    format!("`opponent.kind`: unknown kind `{other}`"),
                ))
            }
        };

        let initial = match kv.get("initial_state.schedule").map_or("round_robin", |e| e.value.as_str()) {
            "fixed" => InitialStates::Fixed(kv.or("initial_state.state", 0)?),
            "round_robin" => InitialStates::RoundRobin,
            "random" => InitialStates::Random {
                seed: kv.or("initial_state.seed", 0)?,
            },
            other => {
                return Err(kv.err(
                    "initial_state.schedule",
                    format!("`initial_state.schedule`: expected fixed|round_robin|random, got `{other}`"),
                ))
            }
        };

        let seeds = kv.list("experiment.seeds")?.unwrap_or_else(|| vec![1]);
        if seeds.is_empty() {
            return Err(kv.err("experiment.seeds", "`experiment.seeds` must not be empty"));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(kv.err("experiment.seeds", "`experiment.seeds` contains duplicates"));
        }
        let mut checkpoints: Vec<u64> = kv.list("experiment.checkpoints")?.unwrap_or_else(|| vec![episodes]);
        checkpoints.sort_unstable();
        checkpoints.dedup();
        if let Some(bad) = checkpoints.iter().find(|&&c| c < 1 || c > episodes) {
            return Err(kv.err(
                "experiment.checkpoints",
                format!("`experiment.checkpoints`: {bad} outside [1, {episodes}]"),
            ));
        }
        if checkpoints.is_empty() {
            return Err(kv.err("experiment.checkpoints", "`experiment.checkpoints` must not be empty"));
        }

        Ok(ExperimentConfig {
            game,
            algorithm,
            episodes,
            delta,
            eta,
            schedule_mode,
            c0,
            iota_scale,
            bandit_constant,
            doubling,
            opponent,
            initial,
            seeds,
            master_seed: kv.or("experiment.master_seed", 0)?,
            checkpoints,
            timing: kv.or("experiment.timing", false)?,
        })
    }

    pub fn load_game(&self) -> Result<MarkovGame> {
        match &self.game {
            GameSource::Random {
                horizon,
                states,
                actions_a,
                actions_b,
                seed,
            } => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                MarkovGame::random(*horizon, *states, *actions_a, *actions_b, &mut rng)
            }
            GameSource::File(path) => {
                let text = std::fs::read_to_string(path)?;
                parse_game(&path.display().to_string(), &text)
            }
        }
    }
}
