//! Run logs and exact post-hoc regret evaluation.
//!
//! A [`RunLog`] is an omniscient record: it holds both players' policies for
//! every episode, which only the evaluator reads. All metrics are computed
//! exactly from it by dynamic programming and small LPs.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{best_response_max, policy_value, MarkovGame, MaxPolicy, MinPolicy, Trajectory};
use crate::matrix_game::{empirical_nash_values, exact_nash_values, EmpiricalNashTable};
use crate::meta::ScheduleMode;
use crate::vlearning::VChange;

/// Entrywise tolerance for "the opponent played the same policy".
pub const POLICY_EQ_TOL: f64 = 1e-12;
/// Slack in the optimism check `V* ≤ V^k`.
pub const OPTIMISM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    EpochV,
    AdaptiveMeta,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::EpochV => "epoch_v",
            Algorithm::AdaptiveMeta => "adaptive_meta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub initial_state: usize,
    pub trajectory: Trajectory,
    pub learner: MaxPolicy,
    pub opponent: MinPolicy,
    /// `V^k_1(s_1^k)` at the start of the episode.
    pub optimistic_v1: f64,
    pub block: u32,
    pub sub_block: u64,
}

/// A base-learner instance that began at `episode` (1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceStart {
    pub episode: u64,
    pub block: u32,
    pub sub_block: u64,
    pub eta: f64,
    pub delta: f64,
    pub iota: f64,
}

/// A sub-block that ended after `episode` because `phi > threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartEvent {
    pub episode: u64,
    pub block: u32,
    pub sub_block: u64,
    pub sub_block_episodes: u64,
    pub phi: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfigEcho {
    pub seed: u64,
    pub episodes: u64,
    pub delta: f64,
    pub eta: f64,
    pub iota: f64,
    pub iota_scale: f64,
    pub bandit_constant: f64,
    pub doubling: bool,
    pub c0: Option<f64>,
    pub schedule_mode: Option<ScheduleMode>,
    pub opponent_kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub game: MarkovGame,
    pub algorithm: Algorithm,
    pub config: RunConfigEcho,
    pub instances: Vec<InstanceStart>,
    pub v_changes: Vec<VChange>,
    pub restarts: Vec<RestartEvent>,
    /// The budget ran out before the last sub-block's test fired.
    pub partial_final_sub_block: bool,
    pub episodes: Vec<EpisodeRecord>,
}

impl RunLog {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    /// Reads and checks a log; anything short of a complete run is corrupt.
    pub fn read_json(path: &Path) -> Result<Self> {
        let corrupt = |reason: String| Error::Corrupt {
            path: path.display().to_string(),
            reason,
        };
        let file = fs::File::open(path)?;
        let log: RunLog = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| corrupt(format!("unreadable: {e}")))?;
        log.check().map_err(|e| corrupt(e.to_string()))?;
        Ok(log)
    }

    /// Structural consistency of a (possibly deserialized) log.
    pub fn check(&self) -> Result<()> {
        if self.episodes.len() as u64 != self.config.episodes {
            return Err(Error::Shape(format!(
                "expected {} episodes, found {}",
                self.config.episodes,
                self.episodes.len()
            )));
        }
        if self.instances.first().map(|i| i.episode) != Some(1) {
            return Err(Error::Shape("first learner instance must start at episode 1".into()));
        }
        let h = self.game.horizon();
        for (k, ep) in self.episodes.iter().enumerate() {
            let t = &ep.trajectory;
            if t.states.len() != h + 1 || t.rewards.len() != h || t.actions_a.len() != h {
                return Err(Error::Shape(format!("episode {} has a truncated trajectory", k + 1)));
            }
            if t.states[0] != ep.initial_state {
                return Err(Error::Shape(format!("episode {} initial state mismatch", k + 1)));
            }
            ep.learner.clone().validated(&self.game)?;
            ep.opponent.clone().validated(&self.game)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    fn opponent_log(&self, upto: usize) -> impl Iterator<Item = &MinPolicy> {
        self.episodes[..upto].iter().map(|e| &e.opponent)
    }
}

/// A metric's total and its per-episode running sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub total: f64,
    pub cumulative: Vec<f64>,
}

impl Curve {
    fn from_terms(terms: impl Iterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = terms
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Curve {
            total: acc,
            cumulative,
        }
    }
}

/// Exact `V^{μ^k,ν^k}_1(s_1^k)` for every episode.
pub fn episode_values(log: &RunLog) -> Result<Vec<f64>> {
    log.episodes
        .iter()
        .map(|e| Ok(policy_value(&log.game, &e.learner, &e.opponent)?.get(0, e.initial_state)))
        .collect()
}

fn check_upto(log: &RunLog, upto: usize) -> Result<()> {
    if upto == 0 || upto > log.len() {
        return Err(Error::Precondition(format!(
            "prefix {upto} outside [1, {}]",
            log.len()
        )));
    }
    Ok(())
}

fn enr_with(log: &RunLog, upto: usize, table: &EmpiricalNashTable, values: &[f64]) -> Curve {
    Curve::from_terms(
        log.episodes[..upto]
            .iter()
            .zip(values)
            .map(|(e, v)| table.values.get(0, e.initial_state) - v),
    )
}

/// Empirical Nash-value regret over the first `upto` episodes.
pub fn eval_enr(log: &RunLog, upto: usize) -> Result<Curve> {
    check_upto(log, upto)?;
    let table = empirical_nash_values(&log.game, log.opponent_log(upto))?;
    let values = episode_values(log)?;
    Ok(enr_with(log, upto, &table, &values))
}

fn nr_with(log: &RunLog, upto: usize, nash: &crate::game::ValueTable, values: &[f64]) -> Curve {
    Curve::from_terms(
        log.episodes[..upto]
            .iter()
            .zip(values)
            .map(|(e, v)| nash.get(0, e.initial_state) - v),
    )
}

/// Nash-value regret over the first `upto` episodes.
pub fn eval_nr(log: &RunLog, upto: usize) -> Result<Curve> {
    check_upto(log, upto)?;
    let nash = exact_nash_values(&log.game)?;
    let values = episode_values(log)?;
    Ok(nr_with(log, upto, &nash.values, &values))
}

/// The opponent's single policy, if it never changed within `upto` episodes.
pub fn constant_opponent(log: &RunLog, upto: usize) -> Option<&MinPolicy> {
    let first = &log.episodes.first()?.opponent;
    log.episodes[..upto]
        .iter()
        .all(|e| e.opponent.approx_eq(first, POLICY_EQ_TOL))
        .then_some(first)
}

fn extr_with(log: &RunLog, upto: usize, values: &[f64]) -> Result<Option<Curve>> {
    let Some(nu) = constant_opponent(log, upto) else {
        return Ok(None);
    };
    let (_, best) = best_response_max(&log.game, nu)?;
    Ok(Some(Curve::from_terms(
        log.episodes[..upto]
            .iter()
            .zip(values)
            .map(|(e, v)| best.get(0, e.initial_state) - v),
    )))
}

/// External regret; `None` (not computable) unless the opponent was fixed.
pub fn eval_extr(log: &RunLog, upto: usize) -> Result<Option<Curve>> {
    check_upto(log, upto)?;
    let values = episode_values(log)?;
    extr_with(log, upto, &values)
}

/// Total variation distance between two discrete distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn c_with(log: &RunLog, upto: usize, table: &EmpiricalNashTable) -> Curve {
    let h = log.game.horizon();
    Curve::from_terms(log.episodes[..upto].iter().map(|e| {
        (0..h)
            .map(|step| {
                let s = e.trajectory.states[step];
                total_variation(e.opponent.dist(step, s), table.minimax.dist(step, s))
            })
            .sum()
    }))
}

/// Non-stationarity `C` over the visited `(h, s_h^k)` pairs.
pub fn eval_c(log: &RunLog, upto: usize) -> Result<Curve> {
    check_upto(log, upto)?;
    let table = empirical_nash_values(&log.game, log.opponent_log(upto))?;
    Ok(c_with(log, upto, &table))
}

/// Switch count `L = 1 + #{k : ν^k ≠ ν^{k+1}}` and its running value.
pub fn eval_l(log: &RunLog, upto: usize) -> Result<(u64, Vec<u64>)> {
    check_upto(log, upto)?;
    let mut l = 1;
    let mut curve = Vec::with_capacity(upto);
    curve.push(1);
    for w in log.episodes[..upto].windows(2) {
        if !w[0].opponent.approx_eq(&w[1].opponent, POLICY_EQ_TOL) {
            l += 1;
        }
        curve.push(l);
    }
    Ok((l, curve))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimismReport {
    /// Number of `(k, h, s)` with `V*_h(s) > V^k_h(s) + 1e-9`.
    pub violations: u64,
    /// `Σ_k (V^k_1(s_1^k) − V^{μ^k,ν^k}_1(s_1^k))`.
    pub optimistic_gap: Curve,
    /// Largest epoch index reached by any cell of any learner instance.
    pub max_epoch_count: u64,
    /// Reconstructed `V^k_1(s_1^k)` disagreed with the logged value.
    pub replay_mismatches: u64,
}

fn optimism_with(
    log: &RunLog,
    upto: usize,
    vstar: &crate::game::ValueTable,
    values: &[f64],
) -> OptimismReport {
    let game = &log.game;
    let h = game.horizon();
    let fresh = |step: usize| (h - step) as f64;
    let mut table: Vec<Vec<f64>> = (0..h).map(|step| vec![fresh(step); game.states(step)]).collect();
    let mut epochs: Vec<Vec<u64>> = (0..h).map(|step| vec![1; game.states(step)]).collect();
    let mut max_epoch = 1;
    let mut violations = 0;
    let mut mismatches = 0;
    let mut next_instance = 1;
    let mut change_idx = 0;
    let changes = &log.v_changes;
    for k in 1..=upto as u64 {
        if log.instances.get(next_instance).map(|i| i.episode) == Some(k) {
            next_instance += 1;
            for (step, layer) in table.iter_mut().enumerate() {
                layer.iter_mut().for_each(|v| *v = fresh(step));
            }
            epochs.iter_mut().flatten().for_each(|e| *e = 1);
        }
        for (step, layer) in table.iter().enumerate() {
            for (s, v) in layer.iter().enumerate() {
                if vstar.get(step, s) > v + OPTIMISM_TOL {
                    violations += 1;
                }
            }
        }
        let e = &log.episodes[k as usize - 1];
        if (table[0][e.initial_state] - e.optimistic_v1).abs() > 1e-12 {
            mismatches += 1;
        }
        while change_idx < changes.len() && changes[change_idx].episode == k {
            let c = changes[change_idx];
            table[c.step][c.state] = c.value;
            epochs[c.step][c.state] += 1;
            max_epoch = max_epoch.max(epochs[c.step][c.state]);
            change_idx += 1;
        }
    }
    let gap = Curve::from_terms(
        log.episodes[..upto]
            .iter()
            .zip(values)
            .map(|(e, v)| e.optimistic_v1 - v),
    );
    OptimismReport {
        violations,
        optimistic_gap: gap,
        max_epoch_count: max_epoch,
        replay_mismatches: mismatches,
    }
}

/// Replays the V-change log and checks `V*_h(s) ≤ V^k_h(s)` everywhere.
pub fn eval_optimism(log: &RunLog, upto: usize) -> Result<OptimismReport> {
    check_upto(log, upto)?;
    let table = empirical_nash_values(&log.game, log.opponent_log(upto))?;
    let values = episode_values(log)?;
    Ok(optimism_with(log, upto, &table.values, &values))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub episodes: u64,
    pub enr: Curve,
    pub nr: Curve,
    pub extr: Option<Curve>,
    pub c: Curve,
    pub l: u64,
    pub l_curve: Vec<u64>,
    pub optimistic_gap: Curve,
    pub optimism_violations: u64,
    pub replay_mismatches: u64,
    pub max_epoch_count: u64,
    pub restarts: u64,
    /// `η` and `ι` of the learner instance running at the last episode.
    pub eta: f64,
    pub iota: f64,
}

/// Full report over each requested prefix length, sharing the per-episode work.
pub fn evaluate_checkpoints(log: &RunLog, checkpoints: &[usize]) -> Result<Vec<RegretReport>> {
    let values = episode_values(log)?;
    let nash = exact_nash_values(&log.game)?;
    checkpoints
        .iter()
        .map(|&upto| {
            check_upto(log, upto)?;
            let table = empirical_nash_values(&log.game, log.opponent_log(upto))?;
            let optimism = optimism_with(log, upto, &table.values, &values);
            let (l, l_curve) = eval_l(log, upto)?;
            let instance = log
                .instances
                .iter()
                .take_while(|i| i.episode <= upto as u64)
                .last()
                .expect("checked: first instance starts at episode 1");
            Ok(RegretReport {
                episodes: upto as u64,
                enr: enr_with(log, upto, &table, &values),
                nr: nr_with(log, upto, &nash.values, &values),
                extr: extr_with(log, upto, &values)?,
                c: c_with(log, upto, &table),
                l,
                l_curve,
                optimistic_gap: optimism.optimistic_gap,
                optimism_violations: optimism.violations,
                replay_mismatches: optimism.replay_mismatches,
                max_epoch_count: optimism.max_epoch_count,
                restarts: log
                    .restarts
                    .iter()
                    .filter(|r| r.episode <= upto as u64)
                    .count() as u64,
                eta: instance.eta,
                iota: instance.iota,
            })
        })
        .collect()
}

pub fn evaluate(log: &RunLog) -> Result<RegretReport> {
    Ok(evaluate_checkpoints(log, &[log.len()])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{InitialStates, StepSpec};
    use crate::opponents::OpponentSpec;
    use crate::vlearning::{run_epoch_v, LearnerConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_game(seed: u64) -> MarkovGame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MarkovGame::random(2, 2, 2, 2, &mut rng).unwrap()
    }

    fn run(game: &MarkovGame, opp: &OpponentSpec, k: u64, seed: u64) -> RunLog {
        let mut cfg = LearnerConfig::new(k, 0.1, 0.5);
        cfg.iota_scale = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        run_epoch_v(game, opp, &InitialStates::RoundRobin, &cfg, seed, &mut rng).unwrap()
    }

    #[test]
    fn zero_reward_game_has_zero_regret() {
        let step = |next: usize| StepSpec {
            states: 2,
            actions_a: 2,
            actions_b: 2,
            rewards: vec![0.0; 8],
            transitions: vec![1.0 / next as f64; 8 * next],
        };
        let game = MarkovGame::new(vec![step(2), step(1)]).unwrap();
        let log = run(&game, &OpponentSpec::Fixed(MinPolicy::uniform(&game)), 50, 1);
        let r = evaluate(&log).unwrap();
        assert_eq!(r.enr.total, 0.0);
        assert_eq!(r.nr.total, 0.0);
        assert_eq!(r.extr.unwrap().total, 0.0);
    }

    #[test]
    fn fixed_opponent_identities() {
        let game = small_game(3);
        let log = run(&game, &OpponentSpec::Fixed(MinPolicy::uniform(&game)), 200, 2);
        let r = evaluate(&log).unwrap();
        let extr = r.extr.clone().unwrap();
        assert!((r.enr.total - extr.total).abs() <= 1e-6);
        assert!(r.enr.total >= r.nr.total - 1e-6);
        assert!(extr.total >= -1e-9);
        assert_eq!(r.l, 1);
        assert_eq!(r.c.total, 0.0);
        assert_eq!(r.replay_mismatches, 0);
        assert_eq!(r.enr.cumulative.len(), 200);
    }

    #[test]
    fn extr_not_computable_for_switching_opponent() {
        let game = small_game(4);
        let opp = OpponentSpec::Switching {
            pool: vec![
                MinPolicy::deterministic(&game, |_, _| 0),
                MinPolicy::deterministic(&game, |_, _| 1),
            ],
            switches: vec![50],
        };
        let log = run(&game, &opp, 100, 5);
        assert!(eval_extr(&log, 100).unwrap().is_none());
        assert!(eval_extr(&log, 49).unwrap().is_some());
        assert_eq!(eval_l(&log, 100).unwrap().0, 2);
        assert_eq!(eval_l(&log, 49).unwrap().0, 1);
    }

    #[test]
    fn best_fixed_play_has_zero_extr() {
        let game = small_game(6);
        let nu = MinPolicy::uniform(&game);
        let (mu, _) = best_response_max(&game, &nu).unwrap();
        let mut log = run(&game, &OpponentSpec::Fixed(nu), 20, 1);
        for e in &mut log.episodes {
            e.learner = mu.clone();
        }
        assert!(eval_extr(&log, 20).unwrap().unwrap().total.abs() < 1e-12);
    }

    #[test]
    fn alternating_opponent_switch_count() {
        let game = small_game(7);
        let opp_a = MinPolicy::deterministic(&game, |_, _| 0);
        let opp_b = MinPolicy::deterministic(&game, |_, _| 1);
        let opp = OpponentSpec::Switching {
            pool: vec![opp_a, opp_b],
            switches: vec![2, 3, 4],
        };
        let log = run(&game, &opp, 4, 1);
        let (l, curve) = eval_l(&log, 4).unwrap();
        assert_eq!(l, 4);
        assert_eq!(curve, vec![1, 2, 3, 4]);
    }

    #[test]
    fn disjoint_support_tv_is_one() {
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn first_episode_never_violates_optimism() {
        let game = small_game(8);
        let log = run(&game, &OpponentSpec::BestResponse, 1, 3);
        let o = eval_optimism(&log, 1).unwrap();
        assert_eq!(o.violations, 0);
    }

    #[test]
    fn prefix_rejects_bad_lengths() {
        let game = small_game(9);
        let log = run(&game, &OpponentSpec::Fixed(MinPolicy::uniform(&game)), 5, 3);
        assert!(eval_enr(&log, 0).is_err());
        assert!(eval_enr(&log, 6).is_err());
    }

    #[test]
    fn json_round_trip_and_truncation() {
        let game = small_game(10);
        let log = run(&game, &OpponentSpec::Fixed(MinPolicy::uniform(&game)), 30, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        log.write_json(&path).unwrap();
        assert_eq!(RunLog::read_json(&path).unwrap(), log);

        let mut short = log.clone();
        short.episodes.pop();
        short.write_json(&path).unwrap();
        assert!(matches!(RunLog::read_json(&path), Err(Error::Corrupt { .. })));

        let text = fs::read_to_string(dir.path().join("run.json")).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(RunLog::read_json(&path), Err(Error::Corrupt { .. })));
    }
}
