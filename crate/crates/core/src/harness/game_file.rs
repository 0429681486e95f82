//! Game text format, one key per line:
//!
//! ```text
//! horizon = 2
//! step.0.states = 1
//! step.0.actions_a = 2
//! step.0.actions_b = 2
//! step.0.rewards = 1 0 0 1            # index (s*A + a)*B + b
//! step.0.transitions = 0.5 0.5 ...    # index ((s*A + a)*B + b)*S' + s'
//! ```
//!
//! `S'` is `step.{h+1}.states`, or 1 for the last step.

use std::fmt::Write;

use super::kv::{split_list, KvFile};
use crate::error::Result;
use crate::game::{MarkovGame, StepSpec};

pub fn parse_game(file: &str, text: &str) -> Result<MarkovGame> {
    let kv = KvFile::parse(file, text)?;
    let horizon: usize = kv.required("horizon")?;
    if horizon == 0 {
        return Err(kv.err("horizon", "horizon must be at least 1"));
    }
    for (key, line) in kv.keys() {
        let known = key == "horizon"
            || key.strip_prefix("step.").is_some_and(|rest| {
                rest.split_once('.').is_some_and(|(h, field)| {
                    h.parse::<usize>().is_ok_and(|h| h < horizon)
                        && ["states", "actions_a", "actions_b", "rewards", "transitions"].contains(&field)
                })
            });
        if !known {
            return Err(super::kv::config_err(file, line, format!("unknown key `{key}`")));
        }
    }
    let mut steps = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let numbers = |field: &str| -> Result<Vec<f64>> {
            let key = format!("step.{h}.{field}");
            let text = kv.str(&key)?;
            split_list(text)
                .map(|t| t.parse().map_err(|_| kv.err(&key, format!("`{key}`: bad number `{t}`"))))
                .collect()
        };
        let dim = |field: &str| -> Result<usize> {
            let key = format!("step.{h}.{field}");
            let n: usize = kv.required(&key)?;
            if n == 0 {
                return Err(kv.err(&key, format!("`{key}` must be at least 1")));
            }
            Ok(n)
        };
        let (states, actions_a, actions_b) = (dim("states")?, dim("actions_a")?, dim("actions_b")?);
        let next = if h + 1 < horizon { dim_of(&kv, h + 1)? } else { 1 };
        let rewards = numbers("rewards")?;
        let transitions = numbers("transitions")?;
        let cells = states * actions_a * actions_b;
        if rewards.len() != cells {
            return Err(kv.err(
                &format!("step.{h}.rewards"),
                format!("expected {cells} rewards, got {}", rewards.len()),
            ));
        }
        if transitions.len() != cells * next {
            return Err(kv.err(
                &format!("step.{h}.transitions"),
                format!("expected {} transition entries, got {}", cells * next, transitions.len()),
            ));
        }
        steps.push(StepSpec {
            states,
            actions_a,
            actions_b,
            rewards,
            transitions,
        });
    }
    MarkovGame::new(steps).map_err(|e| kv.err("horizon", e.to_string()))
}

fn dim_of(kv: &KvFile, h: usize) -> Result<usize> {
    kv.required(&format!("step.{h}.states"))
}

/// Inverse of [`parse_game`]; floats use shortest round-trip formatting.
pub fn write_game(game: &MarkovGame) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "horizon = {}", game.horizon());
    for (h, step) in game.to_steps().iter().enumerate() {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "step.{h}.states = {}", step.states);
        let _ = writeln!(out, "step.{h}.actions_a = {}", step.actions_a);
        let _ = writeln!(out, "step.{h}.actions_b = {}", step.actions_b);
        let _ = writeln!(out, "step.{h}.rewards = {}", join(&step.rewards));
        let _ = writeln!(out, "step.{h}.transitions = {}", join(&step.transitions));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = MarkovGame::random(3, 2, 3, 2, &mut rng).unwrap();
        let back = parse_game("g", &write_game(&g)).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn matching_pennies_file() {
        let text = "horizon = 1\nstep.0.states = 1\nstep.0.actions_a = 2\nstep.0.actions_b = 2\n\
                    step.0.rewards = 1 0 0 1\nstep.0.transitions = 1 1 1 1\n";
        let g = parse_game("mp", text).unwrap();
        assert_eq!(g.reward(0, 0, 1, 1), 1.0);
    }

    #[test]
    fn errors_name_the_field() {
        let text = "horizon = 1\nstep.0.states = 1\nstep.0.actions_a = 2\nstep.0.actions_b = 2\n\
                    step.0.rewards = 1 0 0\nstep.0.transitions = 1 1 1 1\n";
        let err = parse_game("g", text).unwrap_err().to_string();
        assert_eq!(err, "g:5: expected 4 rewards, got 3");
        let err = parse_game("g", "horizon = 1\nstep.3.states = 1\n").unwrap_err().to_string();
        assert_eq!(err, "g:2: unknown key `step.3.states`");
        let bad = "horizon = 1\nstep.0.states = 1\nstep.0.actions_a = 1\nstep.0.actions_b = 1\n\
                   step.0.rewards = 0.5\nstep.0.transitions = 0.9\n";
        let err = parse_game("g", bad).unwrap_err().to_string();
        assert!(err.starts_with("g:1: ") && err.contains("sums to 0.9"), "{err}");
    }
}
