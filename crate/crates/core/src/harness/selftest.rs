//! Invariant checks on a built-in tiny game, run by `mglab selftest`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::game_file::{parse_game, write_game};
use crate::error::Result;
use crate::eval::evaluate;
use crate::game::{InitialStates, MarkovGame, MinPolicy};
use crate::matrix_game::{exact_nash_values, solve_zero_sum};
use crate::meta::{meta_run, MetaConfig};
use crate::opponents::OpponentSpec;
use crate::vlearning::{epoch_bound, run_epoch_v, LearnerConfig};

const TOL: f64 = 1e-6;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

pub fn tiny_game() -> MarkovGame {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    MarkovGame::random(2, 2, 2, 2, &mut rng).expect("fixed dimensions are valid")
}

pub fn run_selftest() -> Result<Vec<Check>> {
    let game = tiny_game();
    let mut checks = Vec::new();

    let mp = solve_zero_sum(&[vec![1.0, 0.0], vec![0.0, 1.0]])?;
    checks.push(check(
        "matching_pennies_value",
        (mp.value - 0.5).abs() < 1e-9,
        format!("value {}", mp.value),
    ));

    checks.push(check(
        "game_file_round_trip",
        parse_game("selftest", &write_game(&game))? == game,
        String::new(),
    ));

    let k = 512;
    let mut cfg = LearnerConfig::new(k, 0.05, 1.0 / game.horizon() as f64);
    cfg.iota_scale = 1.0;
    let fixed = OpponentSpec::Fixed(MinPolicy::deterministic(&game, |_, _| 1));
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        run_epoch_v(&game, &fixed, &InitialStates::RoundRobin, &cfg, seed, &mut rng)
    };
    let log = run(7)?;
    let report = evaluate(&log)?;
    let bound = epoch_bound(k, cfg.eta);
    checks.push(check(
        "epoch_count_bound",
        report.max_epoch_count <= bound,
        format!("max {} bound {bound}", report.max_epoch_count),
    ));
    checks.push(check(
        "enr_dominates_nr",
        report.enr.total >= report.nr.total - TOL,
        format!("ENR {} NR {}", report.enr.total, report.nr.total),
    ));
    let extr = report.extr.as_ref().map(|c| c.total);
    checks.push(check(
        "enr_equals_extr_fixed_opponent",
        extr.is_some_and(|x| (x - report.enr.total).abs() <= TOL),
        format!("ENR {} ExtR {extr:?}", report.enr.total),
    ));
    checks.push(check(
        "optimism_theory_iota",
        report.optimism_violations == 0 && report.replay_mismatches == 0,
        format!(
            "violations {} mismatches {}",
            report.optimism_violations, report.replay_mismatches
        ),
    ));
    checks.push(check(
        "enr_below_optimistic_gap",
        report.enr.total <= report.optimistic_gap.total + TOL,
        format!("ENR {} gap {}", report.enr.total, report.optimistic_gap.total),
    ));
    let nash = exact_nash_values(&game)?;
    let v = nash.values.get(0, 0);
    checks.push(check(
        "nash_value_in_range",
        (0.0..=game.horizon() as f64).contains(&v),
        format!("V*(s=0) {v}"),
    ));
    let again = run(7)?;
    checks.push(check(
        "deterministic_replay",
        serde_json::to_string(&again)? == serde_json::to_string(&log)?,
        String::new(),
    ));

    let mut mc = MetaConfig::new(k, 0.05);
    mc.iota_scale = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let meta = meta_run(&game, &fixed, &InitialStates::RoundRobin, &mc, 7, &mut rng)?;
    let mreport = evaluate(&meta)?;
    checks.push(check(
        "meta_runs_full_budget",
        meta.len() as u64 == k && mreport.enr.total >= mreport.nr.total - TOL,
        format!("episodes {} restarts {}", meta.len(), mreport.restarts),
    ));
    Ok(checks)
}
