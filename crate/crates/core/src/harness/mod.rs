//! Experiment execution and CSV emission.
//!
//! Run `seed` draws its randomness from
//! `ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(seed)))`, so
//! each run is independent of the others and of the thread that executes it.

pub mod config;
pub mod game_file;
pub mod kv;
pub mod selftest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::ExperimentConfig;

use crate::error::{precondition, Error, Result};
use crate::eval::{evaluate_checkpoints, Algorithm, RegretReport, RunLog};
use crate::game::{splitmix64, MarkovGame};
use crate::meta::{meta_run, MetaConfig};
use crate::vlearning::{run_epoch_v, LearnerConfig};

pub const SUMMARY_HEADER: &str = "seed,K,algorithm,opponent.kind,eta,iota,iota_scale,ENR,NR,ExtR_or_NA,C,L,optimistic_gap,optimism_violations,max_epoch_count,restarts,wall_ms";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const THREADS_ENV: &str = "MG_LAB_THREADS";

pub fn run_file_name(seed: u64) -> String {
    format!("run_seed{seed}.json")
}

pub fn run_rng(master_seed: u64, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(seed)))
}

/// Simulates one seed of the experiment on an already-loaded game.
pub fn run_seed(cfg: &ExperimentConfig, game: &MarkovGame, seed: u64) -> Result<RunLog> {
    let opponent = cfg.opponent.build(game, cfg.episodes);
    let mut rng = run_rng(cfg.master_seed, seed);
    match cfg.algorithm {
        Algorithm::EpochV => {
            let mut lc = LearnerConfig::new(cfg.episodes, cfg.delta, cfg.eta.resolve(game.horizon()));
            lc.iota_scale = cfg.iota_scale;
            lc.bandit_constant = cfg.bandit_constant;
            lc.bandit.doubling = cfg.doubling;
            run_epoch_v(game, &opponent, &cfg.initial, &lc, seed, &mut rng)
        }
        Algorithm::AdaptiveMeta => {
            let mut mc = MetaConfig::new(cfg.episodes, cfg.delta);
            mc.c0 = cfg.c0;
            mc.mode = cfg.schedule_mode;
            mc.iota_scale = cfg.iota_scale;
            mc.bandit_constant = cfg.bandit_constant;
            mc.bandit.doubling = cfg.doubling;
            meta_run(game, &opponent, &cfg.initial, &mc, seed, &mut rng)
        }
    }
}

fn fmt_row(out: &mut String, log: &RunLog, r: &RegretReport, wall_ms: u128) {
    let extr = r.extr.as_ref().map_or("NA".to_string(), |c| c.total.to_string());
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        log.config.seed,
        r.episodes,
        log.algorithm.name(),
        log.config.opponent_kind,
        r.eta,
        r.iota,
        log.config.iota_scale,
        r.enr.total,
        r.nr.total,
        extr,
        r.c.total,
        r.l,
        r.optimistic_gap.total,
        r.optimism_violations,
        r.max_epoch_count,
        r.restarts,
        wall_ms,
    );
}

/// Summary rows for one run, one per checkpoint.
pub fn summary_rows(log: &RunLog, checkpoints: &[u64], wall_ms: u128) -> Result<String> {
    let upto: Vec<usize> = checkpoints.iter().map(|&c| c as usize).collect();
    let mut out = String::new();
    for r in evaluate_checkpoints(log, &upto)? {
        fmt_row(&mut out, log, &r, wall_ms);
    }
    Ok(out)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| precondition(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))
}

#[derive(Debug)]
pub struct SimulateOutput {
    pub runs: Vec<PathBuf>,
    pub summary: PathBuf,
}

/// Runs every seed, writes `run_seed<N>.json` per seed and `summary.csv`.
///
/// Refuses to touch a directory that already holds a summary or run logs
/// unless `force` is set.
pub fn simulate(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<SimulateOutput> {
    let game = cfg.load_game()?;
    let summary = out.join(SUMMARY_FILE);
    if out.exists() && !force {
        let collides = summary.exists()
            || cfg.seeds.iter().any(|&s| out.join(run_file_name(s)).exists());
        if collides {
            return Err(precondition(format!(
                "output directory {} already holds results; pass --force to overwrite",
                out.display()
            )));
        }
    }
    std::fs::create_dir_all(out)?;

    let pool = thread_pool()?;
    let results: Vec<Result<(PathBuf, String)>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let start = Instant::now();
                let log = run_seed(cfg, &game, seed)?;
                let path = out.join(run_file_name(seed));
                log.write_json(&path)?;
                let wall = if cfg.timing { start.elapsed().as_millis() } else { 0 };
                Ok((path, summary_rows(&log, &cfg.checkpoints, wall)?))
            })
            .collect()
    });

    let mut text = format!("{SUMMARY_HEADER}\n");
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        let (path, rows) = r?;
        runs.push(path);
        text.push_str(&rows);
    }
    std::fs::write(&summary, text)?;
    Ok(SimulateOutput { runs, summary })
}

/// Run logs in `dir`, ordered by seed.
pub fn list_runs(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut runs = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let seed = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("run_seed"))
            .and_then(|n| n.strip_suffix(".json"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(seed) = seed {
            runs.push((seed, path));
        }
    }
    runs.sort();
    Ok(runs)
}

/// Re-evaluates every run log in `run_dir` over its full length; one CSV row
/// per run, written to `out`.
pub fn evaluate_dir(run_dir: &Path, out: &Path) -> Result<usize> {
    let runs = list_runs(run_dir)?;
    if runs.is_empty() {
        return Err(precondition(format!("no run_seed*.json files in {}", run_dir.display())));
    }
    let pool = thread_pool()?;
    let rows: Vec<Result<String>> = pool.install(|| {
        runs.par_iter()
            .map(|(_, path)| {
                let log = RunLog::read_json(path)?;
                summary_rows(&log, &[log.len() as u64], 0)
            })
            .collect()
    });
    let mut text = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        text.push_str(&r?);
    }
    std::fs::write(out, text)?;
    Ok(runs.len())
}
