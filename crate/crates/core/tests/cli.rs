//! End-to-end tests of the `mglab` binary.

use std::path::Path;
use std::process::{Command, Output};

use mglab::game::MarkovGame;
use mglab::harness::game_file::write_game;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mglab"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn rows(csv: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(!text.contains('\r'));
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(table: &[Vec<String>], name: &str) -> usize {
    table[0].iter().position(|c| c == name).unwrap()
}

#[test]
fn fixed_opponent_single_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.cfg",
        "learner.K = 64\nopponent.kind = fixed\nopponent.policy = random:2\nexperiment.seeds = 7\n",
    );
    let out = dir.path().join("out");
    ok(mglab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]));
    assert!(out.join("run_seed7.json").exists());
    let t = rows(&out.join("summary.csv"));
    assert_eq!(t.len(), 2);
    assert_eq!(t[1][column(&t, "seed")], "7");
    assert_eq!(t[1][column(&t, "opponent.kind")], "fixed");
    let enr: f64 = t[1][column(&t, "ENR")].parse().unwrap();
    let extr: f64 = t[1][column(&t, "ExtR_or_NA")].parse().unwrap();
    assert!((enr - extr).abs() < 1e-9);
}

#[test]
fn header_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "learner.K = 5\nopponent.kind = best_response\n");
    let out = dir.path().join("out");
    ok(mglab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]));
    let text = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "seed,K,algorithm,opponent.kind,eta,iota,iota_scale,ENR,NR,ExtR_or_NA,C,L,optimistic_gap,optimism_violations,max_epoch_count,restarts,wall_ms"
    );
    assert!(text.ends_with('\n'));
}

#[test]
fn single_episode_run_and_idempotent_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.cfg",
        "learner.K = 1\nalgorithm = adaptive_meta\nopponent.kind = fixed\nexperiment.seeds = 1, 2\n",
    );
    let out = dir.path().join("out");
    ok(mglab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]));
    let e1 = dir.path().join("e1.csv");
    let e2 = dir.path().join("e2.csv");
    ok(mglab(&["evaluate", "--run", out.to_str().unwrap(), "--out", e1.to_str().unwrap()]));
    ok(mglab(&["evaluate", "--run", out.to_str().unwrap(), "--out", e2.to_str().unwrap()]));
    assert_eq!(std::fs::read(&e1).unwrap(), std::fs::read(&e2).unwrap());
    let t = rows(&e1);
    assert_eq!(t.len(), 3);
    assert!(t[1..].iter().all(|r| r[column(&t, "K")] == "1" && r[column(&t, "L")] == "1"));
    assert_eq!(t[1][column(&t, "algorithm")], "adaptive_meta");
}

#[test]
fn checkpoint_rows_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.cfg",
        "learner.K = 320\nlearner.iota_scale = 0.05\nopponent.kind = switching\nopponent.pool = pure:0, pure:1\n\
         opponent.switches = 100, 200\nexperiment.checkpoints = 20, 40, 80, 160, 320\nexperiment.seeds = 4, 5\n",
    );
    let out = dir.path().join("out");
    ok(mglab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]));
    let t = rows(&out.join("summary.csv"));
    assert_eq!(t.len(), 11);
    let (ks, kk) = (column(&t, "seed"), column(&t, "K"));
    for seed in ["4", "5"] {
        let k: Vec<u64> = t[1..]
            .iter()
            .filter(|r| r[ks] == seed)
            .map(|r| r[kk].parse().unwrap())
            .collect();
        assert_eq!(k, vec![20, 40, 80, 160, 320]);
    }
    let l = column(&t, "L");
    assert_eq!(t[5][l], "3");
    // before the first switch the opponent is still constant
    assert!(t[1][column(&t, "ExtR_or_NA")].parse::<f64>().is_ok());
    assert_eq!(t[5][column(&t, "ExtR_or_NA")], "NA");
}

#[test]
fn zero_reward_game_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let template = MarkovGame::random(2, 2, 2, 2, &mut rng).unwrap();
    let steps = template
        .to_steps()
        .into_iter()
        .map(|mut s| {
            s.rewards.iter_mut().for_each(|r| *r = 0.0);
            s
        })
        .collect();
    std::fs::write(dir.path().join("zero.game"), write_game(&MarkovGame::new(steps).unwrap())).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.cfg",
        "game.source = file\ngame.path = zero.game\nlearner.K = 40\nopponent.kind = drifting\n\
         opponent.start = pure:0\nopponent.end = random:4\n",
    );
    let out = dir.path().join("out");
    ok(mglab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seeds", "3"]));
    let eval = dir.path().join("eval.csv");
    ok(mglab(&["evaluate", "--run", out.to_str().unwrap(), "--out", eval.to_str().unwrap()]));
    let t = rows(&eval);
    assert_eq!(t.len(), 4);
    let (enr, nr) = (column(&t, "ENR"), column(&t, "NR"));
    assert!(t[1..].iter().all(|r| r[enr] == "0" && r[nr] == "0"));
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "learner.K = 4\nopponent.kind = fixed\n");
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    ok(mglab(&["simulate", "--config", &cfg, "--out", out]));
    let again = mglab(&["simulate", "--config", &cfg, "--out", out]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(mglab(&["simulate", "--config", &cfg, "--out", out, "--force"]));
}

#[test]
fn config_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "learner.K = 4\n# note\nopponent.kind = fixed\nlearner.delta = 2\n");
    let out = mglab(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.cfg:4: `learner.delta` must lie in (0, 1)"), "{err}");
}

#[test]
fn truncated_run_log_is_reported_as_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "learner.K = 8\nopponent.kind = fixed\n");
    let out = dir.path().join("out");
    ok(mglab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]));
    let log = out.join("run_seed1.json");
    let bytes = std::fs::read(&log).unwrap();
    std::fs::write(&log, &bytes[..bytes.len() / 2]).unwrap();
    let res = mglab(&["evaluate", "--run", out.to_str().unwrap(), "--out", dir.path().join("e.csv").to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("corrupt run log"));
}

#[test]
fn selftest_passes() {
    let out = ok(mglab(&["selftest"]));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(!text.contains("FAIL"));
    assert!(text.contains("checks passed"));
}
