//! Layered two-player episodic Markov games.
//!
//! Steps are indexed `0..H`; step `h` has `states(h)` states and the
//! terminal layer `H` holds a single state. States and actions are dense
//! per-step indices. The max-player ("learner") picks `a`, the min-player
//! ("opponent") picks `b`, both simultaneously.

use std::fmt;
use std::marker::PhantomData;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sums within this distance of 1 are accepted as-is.
pub const PROB_TOL: f64 = 1e-12;
/// Sums within this distance of 1 are renormalized; beyond it they are rejected.
pub const RENORM_TOL: f64 = 1e-9;

/// Raw per-step tables used to build a [`MarkovGame`].
///
/// `rewards[(s * A + a) * B + b]` and
/// `transitions[((s * A + a) * B + b) * S_next + s_next]`, where `S_next`
/// is the state count of the following step (1 for the last step).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub states: usize,
    pub actions_a: usize,
    pub actions_b: usize,
    pub rewards: Vec<f64>,
    pub transitions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovGame {
    horizon: usize,
    /// Length `H + 1`; the last entry is always 1.
    states: Vec<usize>,
    actions_a: Vec<usize>,
    actions_b: Vec<usize>,
    rewards: Vec<Vec<f64>>,
    transitions: Vec<Vec<f64>>,
}

/// Shape-only view of a game, which is all the learner is allowed to see.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameDims {
    pub horizon: usize,
    pub states: Vec<usize>,
    pub actions_a: Vec<usize>,
}

impl GameDims {
    /// `Σ_h |S_h|` over the non-terminal steps.
    pub fn total_states(&self) -> usize {
        self.states[..self.horizon].iter().sum()
    }

    pub fn max_actions(&self) -> usize {
        self.actions_a.iter().copied().max().unwrap_or(1)
    }
}

/// Checks a probability vector; renormalizes small deviations in place.
pub(crate) fn check_distribution(p: &mut [f64], context: impl Fn() -> String) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution {
            context: context(),
            reason: "empty vector".into(),
        });
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidDistribution {
            context: context(),
            reason: format!("entry {x} is negative or not finite"),
        });
    }
    let sum: f64 = p.iter().sum();
    let dev = (sum - 1.0).abs();
    if dev > RENORM_TOL {
        return Err(Error::InvalidDistribution {
            context: context(),
            reason: format!("sums to {sum}"),
        });
    }
    if dev > PROB_TOL {
        p.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(())
}

impl MarkovGame {
    pub fn new(steps: Vec<StepSpec>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidGame("horizon must be at least 1".into()));
        }
        let horizon = steps.len();
        let mut states: Vec<usize> = steps.iter().map(|s| s.states).collect();
        states.push(1);
        let mut game = MarkovGame {
            horizon,
            states,
            actions_a: steps.iter().map(|s| s.actions_a).collect(),
            actions_b: steps.iter().map(|s| s.actions_b).collect(),
            rewards: Vec::with_capacity(horizon),
            transitions: Vec::with_capacity(horizon),
        };
        for (h, step) in steps.into_iter().enumerate() {
            let (ns, na, nb) = (step.states, step.actions_a, step.actions_b);
            if ns == 0 || na == 0 || nb == 0 {
                return Err(Error::InvalidGame(format!(
                    "step {h}: state and action counts must be positive"
                )));
            }
            let next = game.states[h + 1];
            if step.rewards.len() != ns * na * nb {
                return Err(Error::InvalidGame(format!(
                    "step {h}: expected {} rewards, got {}",
                    ns * na * nb,
                    step.rewards.len()
                )));
            }
            if let Some(r) = step
                .rewards
                .iter()
                .find(|r| !(0.0..=1.0).contains(*r))
            {
                return Err(Error::InvalidGame(format!(
                    "step {h}: reward {r} outside [0, 1]"
                )));
            }
            let mut transitions = step.transitions;
            if transitions.len() != ns * na * nb * next {
                return Err(Error::InvalidGame(format!(
                    "step {h}: expected {} transition entries, got {}",
                    ns * na * nb * next,
                    transitions.len()
                )));
            }
            for (idx, chunk) in transitions.chunks_mut(next).enumerate() {
                let (s, a, b) = (idx / (na * nb), (idx / nb) % na, idx % nb);
                check_distribution(chunk, || format!("P[h={h}, s={s}, a={a}, b={b}]"))?;
            }
            game.rewards.push(step.rewards);
            game.transitions.push(transitions);
        }
        Ok(game)
    }

    /// Uniform rewards on `[0, 1]`, Dirichlet(1) transitions.
    pub fn random<R: Rng + ?Sized>(
        horizon: usize,
        states: usize,
        actions_a: usize,
        actions_b: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let steps = (0..horizon)
            .map(|h| {
                let next = if h + 1 == horizon { 1 } else { states };
                let cells = states * actions_a * actions_b;
                let rewards = (0..cells).map(|_| rng.gen::<f64>()).collect();
                let mut transitions = Vec::with_capacity(cells * next);
                for _ in 0..cells {
                    let w: Vec<f64> = (0..next)
                        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                        .collect();
                    let z: f64 = w.iter().sum();
                    transitions.extend(w.iter().map(|x| x / z));
                }
                StepSpec {
                    states,
                    actions_a,
                    actions_b,
                    rewards,
                    transitions,
                }
            })
            .collect();
        MarkovGame::new(steps)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// State count of layer `h` (`h == H` is the terminal layer).
    pub fn states(&self, h: usize) -> usize {
        self.states[h]
    }

    pub fn actions_a(&self, h: usize) -> usize {
        self.actions_a[h]
    }

    pub fn actions_b(&self, h: usize) -> usize {
        self.actions_b[h]
    }

    pub fn dims(&self) -> GameDims {
        GameDims {
            horizon: self.horizon,
            states: self.states.clone(),
            actions_a: self.actions_a.clone(),
        }
    }

    pub fn max_actions_a(&self) -> usize {
        self.actions_a.iter().copied().max().unwrap_or(1)
    }

    pub fn max_actions_b(&self) -> usize {
        self.actions_b.iter().copied().max().unwrap_or(1)
    }

    pub fn reward(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        let (na, nb) = (self.actions_a[h], self.actions_b[h]);
        self.rewards[h][(s * na + a) * nb + b]
    }

    pub fn transition(&self, h: usize, s: usize, a: usize, b: usize) -> &[f64] {
        let (na, nb, next) = (self.actions_a[h], self.actions_b[h], self.states[h + 1]);
        let start = ((s * na + a) * nb + b) * next;
        &self.transitions[h][start..start + next]
    }

    /// Recovers the construction tables.
    pub fn to_steps(&self) -> Vec<StepSpec> {
        (0..self.horizon)
            .map(|h| StepSpec {
                states: self.states[h],
                actions_a: self.actions_a[h],
                actions_b: self.actions_b[h],
                rewards: self.rewards[h].clone(),
                transitions: self.transitions[h].clone(),
            })
            .collect()
    }

    /// `Q[a][b] = r_h(s, a, b) + Σ_{s'} P_h(s' | s, a, b) · next[s']`.
    pub fn q_matrix(&self, h: usize, s: usize, next: &[f64]) -> Vec<Vec<f64>> {
        (0..self.actions_a[h])
            .map(|a| {
                (0..self.actions_b[h])
                    .map(|b| {
                        let p = self.transition(h, s, a, b);
                        self.reward(h, s, a, b)
                            + p.iter().zip(next).map(|(p, v)| p * v).sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    pub(crate) fn check_state(&self, h: usize, s: usize) -> Result<()> {
        if h > self.horizon {
            return Err(Error::IndexOutOfRange {
                what: "step",
                index: h,
                len: self.horizon + 1,
            });
        }
        if s >= self.states[h] {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                len: self.states[h],
            });
        }
        Ok(())
    }
}

pub trait Side: Clone + fmt::Debug + PartialEq + Default + Send + Sync + 'static {
    const NAME: &'static str;
    fn actions(game: &MarkovGame, h: usize) -> usize;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Max;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Min;

impl Side for Max {
    const NAME: &'static str = "max";
    fn actions(game: &MarkovGame, h: usize) -> usize {
        game.actions_a(h)
    }
}

impl Side for Min {
    const NAME: &'static str = "min";
    fn actions(game: &MarkovGame, h: usize) -> usize {
        game.actions_b(h)
    }
}

/// Per-(step, state) action distributions for one player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy<S: Side> {
    probs: Vec<Vec<Vec<f64>>>,
    #[serde(skip)]
    side: PhantomData<S>,
}

pub type MaxPolicy = Policy<Max>;
pub type MinPolicy = Policy<Min>;

impl<S: Side> Policy<S> {
    pub fn uniform(game: &MarkovGame) -> Self {
        Self::from_fn(game, |_, _, n| vec![1.0 / n as f64; n])
    }

    /// Point mass on `choice(h, s)`; out-of-range choices wrap modulo the action count.
    pub fn deterministic(game: &MarkovGame, choice: impl Fn(usize, usize) -> usize) -> Self {
        Self::from_fn(game, |h, s, n| {
            let mut p = vec![0.0; n];
            p[choice(h, s) % n] = 1.0;
            p
        })
    }

    /// Builds a policy from `f(h, s, num_actions)` without validation.
    pub(crate) fn from_fn(game: &MarkovGame, f: impl Fn(usize, usize, usize) -> Vec<f64>) -> Self {
        let probs = (0..game.horizon())
            .map(|h| {
                (0..game.states(h))
                    .map(|s| f(h, s, S::actions(game, h)))
                    .collect()
            })
            .collect();
        Policy {
            probs,
            side: PhantomData,
        }
    }

    pub fn from_probs(game: &MarkovGame, probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let policy = Policy {
            probs,
            side: PhantomData,
        };
        policy.validated(game)
    }

    /// Built from raw per-step tables, without a game for validation.
    pub(crate) fn from_raw(probs: Vec<Vec<Vec<f64>>>) -> Self {
        Policy {
            probs,
            side: PhantomData,
        }
    }

    /// Checks shape and every distribution against `game`.
    pub fn validated(mut self, game: &MarkovGame) -> Result<Self> {
        if self.probs.len() != game.horizon() {
            return Err(Error::Shape(format!(
                "{} policy has {} steps, game has {}",
                S::NAME,
                self.probs.len(),
                game.horizon()
            )));
        }
        for (h, layer) in self.probs.iter_mut().enumerate() {
            if layer.len() != game.states(h) {
                return Err(Error::Shape(format!(
                    "{} policy step {h} has {} states, game has {}",
                    S::NAME,
                    layer.len(),
                    game.states(h)
                )));
            }
            for (s, p) in layer.iter_mut().enumerate() {
                if p.len() != S::actions(game, h) {
                    return Err(Error::Shape(format!(
                        "{} policy at (h={h}, s={s}) has {} actions, game has {}",
                        S::NAME,
                        p.len(),
                        S::actions(game, h)
                    )));
                }
                check_distribution(p, || format!("{} policy (h={h}, s={s})", S::NAME))?;
            }
        }
        Ok(self)
    }

    pub fn dist(&self, h: usize, s: usize) -> &[f64] {
        &self.probs[h][s]
    }

    pub(crate) fn dist_mut(&mut self, h: usize, s: usize) -> &mut Vec<f64> {
        &mut self.probs[h][s]
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn states(&self, h: usize) -> usize {
        self.probs[h].len()
    }

    /// Entrywise equality within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.probs.len() == other.probs.len()
            && self.probs.iter().zip(&other.probs).all(|(x, y)| {
                x.len() == y.len()
                    && x.iter().zip(y).all(|(p, q)| {
                        p.len() == q.len() && p.iter().zip(q).all(|(u, v)| (u - v).abs() <= tol)
                    })
            })
    }
}

/// State values for layers `0..=H`; layer `H` is the terminal zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn zeros(game: &MarkovGame) -> Self {
        ValueTable {
            values: (0..=game.horizon())
                .map(|h| vec![0.0; game.states(h)])
                .collect(),
        }
    }

    pub fn get(&self, h: usize, s: usize) -> f64 {
        self.values[h][s]
    }

    pub fn set(&mut self, h: usize, s: usize, v: f64) {
        self.values[h][s] = v;
    }

    pub fn layer(&self, h: usize) -> &[f64] {
        &self.values[h]
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// Applies `f` to each pair of matching entries.
    pub fn all_pairs(&self, other: &ValueTable, f: impl Fn(f64, f64) -> bool) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(x, y)| x.iter().zip(y).all(|(u, v)| f(*u, *v)))
    }
}

/// SplitMix64 finalizer; used to derive independent seeds deterministically.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How the initial state `s_1^k` of each episode is chosen.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialStates {
    Fixed(usize),
    /// Episode `k` (1-based) starts in state `(k - 1) mod |S_1|`.
    RoundRobin,
    /// `splitmix64(seed ^ splitmix64(k)) mod |S_1|`.
    Random { seed: u64 },
}

impl InitialStates {
    pub fn state(&self, k: u64, num_states: usize) -> Result<usize> {
        let s = match self {
            InitialStates::Fixed(s) => *s,
            InitialStates::RoundRobin => ((k.max(1) - 1) % num_states as u64) as usize,
            InitialStates::Random { seed } => {
                (splitmix64(seed ^ splitmix64(k)) % num_states as u64) as usize
            }
        };
        if s >= num_states {
            return Err(Error::IndexOutOfRange {
                what: "initial state",
                index: s,
                len: num_states,
            });
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions_a: Vec<usize>,
    pub actions_b: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left `acc` just below 1
    dist.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// One episode with both players committed to fixed policies.
pub fn sample_episode<R: Rng + ?Sized>(
    game: &MarkovGame,
    mu: &MaxPolicy,
    nu: &MinPolicy,
    rng: &mut R,
    s1: usize,
) -> Result<Trajectory> {
    game.check_state(0, s1)?;
    let horizon = game.horizon();
    if mu.horizon() != horizon || nu.horizon() != horizon {
        return Err(Error::Shape("policy horizon does not match game".into()));
    }
    let mut traj = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        actions_a: Vec::with_capacity(horizon),
        actions_b: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
    };
    let mut s = s1;
    traj.states.push(s);
    for h in 0..horizon {
        let a = sample_index(mu.dist(h, s), rng);
        let b = sample_index(nu.dist(h, s), rng);
        if a >= game.actions_a(h) {
            return Err(Error::IndexOutOfRange {
                what: "max-player action",
                index: a,
                len: game.actions_a(h),
            });
        }
        if b >= game.actions_b(h) {
            return Err(Error::IndexOutOfRange {
                what: "min-player action",
                index: b,
                len: game.actions_b(h),
            });
        }
        traj.rewards.push(game.reward(h, s, a, b));
        traj.actions_a.push(a);
        traj.actions_b.push(b);
        s = sample_index(game.transition(h, s, a, b), rng);
        traj.states.push(s);
    }
    Ok(traj)
}

fn check_policy_shape<S: Side>(game: &MarkovGame, p: &Policy<S>) -> Result<()> {
    if p.horizon() != game.horizon() {
        return Err(Error::Shape(format!("{} policy horizon mismatch", S::NAME)));
    }
    for h in 0..game.horizon() {
        if p.states(h) != game.states(h)
            || (0..game.states(h)).any(|s| p.dist(h, s).len() != S::actions(game, h))
        {
            return Err(Error::Shape(format!(
                "{} policy shape mismatch at step {h}",
                S::NAME
            )));
        }
    }
    Ok(())
}

fn bilinear(q: &[Vec<f64>], x: &[f64], y: &[f64]) -> f64 {
    q.iter()
        .zip(x)
        .map(|(row, xa)| xa * row.iter().zip(y).map(|(v, yb)| v * yb).sum::<f64>())
        .sum()
}

/// Exact `V^{μ,ν}` by backward induction.
pub fn policy_value(game: &MarkovGame, mu: &MaxPolicy, nu: &MinPolicy) -> Result<ValueTable> {
    check_policy_shape(game, mu)?;
    check_policy_shape(game, nu)?;
    let mut v = ValueTable::zeros(game);
    for h in (0..game.horizon()).rev() {
        for s in 0..game.states(h) {
            let q = game.q_matrix(h, s, v.layer(h + 1));
            let val = bilinear(&q, mu.dist(h, s), nu.dist(h, s));
            v.set(h, s, val);
        }
    }
    Ok(v)
}

/// Index of the best entry; ties within 1e-12 go to the lowest index.
fn arg_best(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if better(*v, values[best]) {
            best = i;
        }
    }
    best
}

/// Deterministic best response of the max-player to a fixed `nu`.
pub fn best_response_max(game: &MarkovGame, nu: &MinPolicy) -> Result<(MaxPolicy, ValueTable)> {
    check_policy_shape(game, nu)?;
    let mut v = ValueTable::zeros(game);
    let mut mu = MaxPolicy::from_fn(game, |_, _, n| vec![0.0; n]);
    for h in (0..game.horizon()).rev() {
        for s in 0..game.states(h) {
            let q = game.q_matrix(h, s, v.layer(h + 1));
            let y = nu.dist(h, s);
            let row_vals: Vec<f64> = q
                .iter()
                .map(|row| row.iter().zip(y).map(|(v, p)| v * p).sum())
                .collect();
            let a = arg_best(&row_vals, |x, best| x > best + 1e-12);
            mu.dist_mut(h, s)[a] = 1.0;
            v.set(h, s, row_vals[a]);
        }
    }
    Ok((mu, v))
}

/// Deterministic best response of the min-player to a fixed `mu`.
pub fn best_response_min(game: &MarkovGame, mu: &MaxPolicy) -> Result<(MinPolicy, ValueTable)> {
    check_policy_shape(game, mu)?;
    let mut v = ValueTable::zeros(game);
    let mut nu = MinPolicy::from_fn(game, |_, _, n| vec![0.0; n]);
    for h in (0..game.horizon()).rev() {
        for s in 0..game.states(h) {
            let q = game.q_matrix(h, s, v.layer(h + 1));
            let x = mu.dist(h, s);
            let col_vals: Vec<f64> = (0..game.actions_b(h))
                .map(|b| q.iter().zip(x).map(|(row, p)| row[b] * p).sum())
                .collect();
            let b = arg_best(&col_vals, |x, best| x < best - 1e-12);
            nu.dist_mut(h, s)[b] = 1.0;
            v.set(h, s, col_vals[b]);
        }
    }
    Ok((nu, v))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// H=1, one state, reward matrix `r` (rows a, columns b).
    pub(crate) fn one_shot(r: &[Vec<f64>]) -> MarkovGame {
        let (na, nb) = (r.len(), r[0].len());
        MarkovGame::new(vec![StepSpec {
            states: 1,
            actions_a: na,
            actions_b: nb,
            rewards: r.iter().flatten().copied().collect(),
            transitions: vec![1.0; na * nb],
        }])
        .unwrap()
    }

    fn constant_game(h: usize, states: usize, na: usize, nb: usize, r: f64) -> MarkovGame {
        let steps = (0..h)
            .map(|step| {
                let next = if step + 1 == h { 1 } else { states };
                let cells = states * na * nb;
                StepSpec {
                    states,
                    actions_a: na,
                    actions_b: nb,
                    rewards: vec![r; cells],
                    transitions: vec![1.0 / next as f64; cells * next],
                }
            })
            .collect();
        MarkovGame::new(steps).unwrap()
    }

    #[test]
    fn rejects_bad_transitions_and_rewards() {
        let mut step = StepSpec {
            states: 1,
            actions_a: 1,
            actions_b: 1,
            rewards: vec![0.5],
            transitions: vec![1.0 + 1e-6],
        };
        assert!(matches!(
            MarkovGame::new(vec![step.clone()]),
            Err(Error::InvalidDistribution { .. })
        ));
        step.transitions = vec![1.0 + 1e-10];
        let g = MarkovGame::new(vec![step.clone()]).unwrap();
        assert_eq!(g.transition(0, 0, 0, 0), &[1.0]);
        step.rewards = vec![1.5];
        assert!(matches!(
            MarkovGame::new(vec![step]),
            Err(Error::InvalidGame(_))
        ));
    }

    #[test]
    fn deterministic_episode() {
        // two steps, one state, point-mass everything, r = 0.3
        let g = constant_game(2, 1, 2, 2, 0.3);
        let mu = MaxPolicy::deterministic(&g, |_, _| 1);
        let nu = MinPolicy::deterministic(&g, |_, _| 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = sample_episode(&g, &mu, &nu, &mut rng, 0).unwrap();
        assert_eq!(t.rewards, vec![0.3, 0.3]);
        assert_eq!(t.actions_a, vec![1, 1]);
        assert_eq!(t.actions_b, vec![0, 0]);
        assert_eq!(t.states, vec![0, 0, 0]);
    }

    #[test]
    fn same_seed_same_episode() {
        let mut grng = ChaCha8Rng::seed_from_u64(3);
        let g = MarkovGame::random(3, 2, 2, 2, &mut grng).unwrap();
        let mu = MaxPolicy::uniform(&g);
        let nu = MinPolicy::uniform(&g);
        let t1 = sample_episode(&g, &mu, &nu, &mut ChaCha8Rng::seed_from_u64(9), 1).unwrap();
        let t2 = sample_episode(&g, &mu, &nu, &mut ChaCha8Rng::seed_from_u64(9), 1).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn bad_initial_state_is_index_error() {
        let g = constant_game(1, 2, 1, 1, 0.0);
        let mu = MaxPolicy::uniform(&g);
        let nu = MinPolicy::uniform(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_episode(&g, &mu, &nu, &mut rng, 2),
            Err(Error::IndexOutOfRange { what: "state", .. })
        ));
    }

    #[test]
    fn zero_rewards_zero_value() {
        let g = constant_game(3, 2, 2, 2, 0.0);
        let v = policy_value(&g, &MaxPolicy::uniform(&g), &MinPolicy::uniform(&g)).unwrap();
        for h in 0..=3 {
            assert!(v.layer(h).iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn one_step_deterministic_value() {
        let g = one_shot(&[vec![0.1, 0.2], vec![0.3, 0.4]]);
        let mu = MaxPolicy::deterministic(&g, |_, _| 1);
        let nu = MinPolicy::deterministic(&g, |_, _| 0);
        assert_eq!(policy_value(&g, &mu, &nu).unwrap().get(0, 0), 0.3);
    }

    #[test]
    fn best_response_max_averages_rows() {
        let g = one_shot(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let (mu, v) = best_response_max(&g, &MinPolicy::uniform(&g)).unwrap();
        assert_eq!(v.get(0, 0), 0.5);
        assert_eq!(mu.dist(0, 0), &[1.0, 0.0]);
    }

    #[test]
    fn best_response_min_constant_reward() {
        let g = constant_game(3, 2, 2, 3, 0.25);
        let (nu, v) = best_response_min(&g, &MaxPolicy::uniform(&g)).unwrap();
        assert!((v.get(0, 0) - 0.75).abs() < 1e-12);
        for h in 0..3 {
            for s in 0..2 {
                assert_eq!(nu.dist(h, s), &[1.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn best_response_min_symmetric() {
        let g = one_shot(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (nu, v) = best_response_min(&g, &MaxPolicy::uniform(&g)).unwrap();
        assert_eq!(v.get(0, 0), 0.5);
        assert_eq!(nu.dist(0, 0), &[1.0, 0.0]);
    }

    #[test]
    fn best_response_against_point_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = MarkovGame::random(2, 2, 2, 2, &mut rng).unwrap();
        let nu = MinPolicy::deterministic(&g, |h, s| h + s);
        let (_, v) = best_response_max(&g, &nu).unwrap();
        let best = enumerate_deterministic::<Max>(&g)
            .iter()
            .map(|mu| policy_value(&g, mu, &nu).unwrap().get(0, 0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((v.get(0, 0) - best).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g1 = constant_game(2, 2, 2, 2, 0.1);
        let g2 = constant_game(3, 2, 2, 2, 0.1);
        assert!(matches!(
            policy_value(&g1, &MaxPolicy::uniform(&g2), &MinPolicy::uniform(&g1)),
            Err(Error::Shape(_))
        ));
    }

    /// Every deterministic policy of one side; the oracle for best responses.
    pub(crate) fn enumerate_deterministic<S: Side>(game: &MarkovGame) -> Vec<Policy<S>> {
        let cells: Vec<(usize, usize, usize)> = (0..game.horizon())
            .flat_map(|h| (0..game.states(h)).map(move |s| (h, s)))
            .map(|(h, s)| (h, s, S::actions(game, h)))
            .collect();
        let total: usize = cells.iter().map(|c| c.2).product();
        (0..total)
            .map(|mut code| {
                let mut choice = std::collections::HashMap::new();
                for &(h, s, n) in &cells {
                    choice.insert((h, s), code % n);
                    code /= n;
                }
                Policy::<S>::deterministic(game, |h, s| choice[&(h, s)])
            })
            .collect()
    }
}
