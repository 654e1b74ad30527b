//! Benchmark MDP generators. Every generated MDP carries a uniform reset
//! distribution unless stated otherwise.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, TabularPolicy};
use crate::rng::seeded;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Gridworld action order.
pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// `n`-state chain. `LEFT` moves one step left; `RIGHT` moves right with
/// probability `1 − slip` and left otherwise. Moves are clamped at the ends.
/// Reward 1 for any action in the last state; the episode starts in state 0.
pub fn make_chain(n: usize, slip: f64, gamma: f64) -> Result<TabularMdp> {
    if n < 2 {
        return Err(Error::Config("chain needs at least 2 states".into()));
    }
    if !(0.0..0.5).contains(&slip) {
        return Err(Error::Config(format!("slip {slip} not in [0, 0.5)")));
    }
    let mut transition = vec![0.0; n * 2 * n];
    let mut reward = vec![0.0; n * 2];
    for s in 0..n {
        let left = s.saturating_sub(1);
        let right = (s + 1).min(n - 1);
        transition[(s * 2 + LEFT) * n + left] += 1.0;
        transition[(s * 2 + RIGHT) * n + right] += 1.0 - slip;
        transition[(s * 2 + RIGHT) * n + left] += slip;
    }
    reward[(n - 1) * 2 + LEFT] = 1.0;
    reward[(n - 1) * 2 + RIGHT] = 1.0;
    let mut d0 = vec![0.0; n];
    d0[0] = 1.0;
    TabularMdp::new(n, 2, transition, reward, gamma, d0, Some(uniform(n)))
}

/// `w × h` grid with cell `(x, y)` at state `y·w + x`, `y = 0` the top row.
///
/// Moves into a wall or an obstacle leave the agent in place. The goal is
/// absorbing and pays 1 per step. Episodes start uniformly on free non-goal
/// cells; the reset distribution is uniform over all free cells.
pub fn make_gridworld(
    w: usize,
    h: usize,
    goal: (usize, usize),
    obstacles: &[(usize, usize)],
    gamma: f64,
) -> Result<TabularMdp> {
    if w == 0 || h == 0 {
        return Err(Error::Config("gridworld needs positive width and height".into()));
    }
    let inside = |(x, y): (usize, usize)| x < w && y < h;
    if !inside(goal) {
        return Err(Error::Config(format!("goal {goal:?} outside the grid")));
    }
    if let Some(o) = obstacles.iter().find(|&&o| !inside(o)) {
        return Err(Error::Config(format!("obstacle {o:?} outside the grid")));
    }
    if obstacles.contains(&goal) {
        return Err(Error::Config(format!("goal {goal:?} is an obstacle")));
    }
    let n = w * h;
    let idx = |(x, y): (usize, usize)| y * w + x;
    let mut blocked = vec![false; n];
    for &o in obstacles {
        blocked[idx(o)] = true;
    }
    let goal_s = idx(goal);

    let mut transition = vec![0.0; n * 4 * n];
    let mut reward = vec![0.0; n * 4];
    for y in 0..h {
        for x in 0..w {
            let s = idx((x, y));
            for a in 0..4 {
                let target = match a {
                    NORTH if y > 0 => Some((x, y - 1)),
                    SOUTH if y + 1 < h => Some((x, y + 1)),
                    EAST if x + 1 < w => Some((x + 1, y)),
                    WEST if x > 0 => Some((x - 1, y)),
                    _ => None,
                };
                let next = match target.map(idx) {
                    Some(t) if s != goal_s && !blocked[s] && !blocked[t] => t,
                    _ => s,
                };
                transition[(s * 4 + a) * n + next] = 1.0;
            }
        }
    }
    for a in 0..4 {
        reward[goal_s * 4 + a] = 1.0;
    }

    let free: Vec<usize> = (0..n).filter(|&s| !blocked[s]).collect();
    let starts: Vec<usize> = free.iter().copied().filter(|&s| s != goal_s).collect();
    let spread = |cells: &[usize]| {
        let mut d = vec![0.0; n];
        for &s in cells {
            d[s] = 1.0 / cells.len() as f64;
        }
        d
    };
    let d0 = if starts.is_empty() {
        spread(&[goal_s])
    } else {
        spread(&starts)
    };
    TabularMdp::new(n, 4, transition, reward, gamma, d0, Some(spread(&free)))
}

fn dirichlet_ones<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Random MDP: every `(s, a)` row is a flat Dirichlet draw over `branching`
/// distinct, uniformly chosen successors; rewards are `U[0, 1]`; start and
/// reset distributions are uniform.
pub fn make_random_mdp(
    n_states: usize,
    n_actions: usize,
    branching: usize,
    seed: u64,
    gamma: f64,
) -> Result<TabularMdp> {
    if n_states == 0 || n_actions == 0 || branching == 0 || branching > n_states {
        return Err(Error::Config(format!(
            "random MDP needs 1 ≤ branching ≤ n_states (got {branching}, {n_states})"
        )));
    }
    let mut rng = seeded(seed);
    let mut transition = vec![0.0; n_states * n_actions * n_states];
    for row in transition.chunks_mut(n_states) {
        let support = sample(&mut rng, n_states, branching);
        for (s, p) in support.iter().zip(dirichlet_ones(branching, &mut rng)) {
            row[s] = p;
        }
    }
    let reward = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    TabularMdp::new(
        n_states,
        n_actions,
        transition,
        reward,
        gamma,
        uniform(n_states),
        Some(uniform(n_states)),
    )
}

/// A stochastic policy with flat-Dirichlet rows.
pub fn random_policy(n_states: usize, n_actions: usize, seed: u64) -> TabularPolicy {
    let mut rng = seeded(seed);
    let probs = (0..n_states).flat_map(|_| dirichlet_ones(n_actions, &mut rng)).collect();
    TabularPolicy::from_rows_unchecked(n_states, n_actions, probs)
}

/// Named generator with parameters, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Chain {
        n: usize,
        slip: f64,
        gamma: f64,
    },
    Gridworld {
        w: usize,
        h: usize,
        goal: (usize, usize),
        #[serde(default)]
        obstacles: Vec<(usize, usize)>,
        gamma: f64,
    },
    RandomMdp {
        n_states: usize,
        n_actions: usize,
        branching: usize,
        seed: u64,
        gamma: f64,
    },
}

impl EnvSpec {
    pub fn build(&self) -> Result<TabularMdp> {
        match self {
            EnvSpec::Chain { n, slip, gamma } => make_chain(*n, *slip, *gamma),
            EnvSpec::Gridworld {
                w,
                h,
                goal,
                obstacles,
                gamma,
            } => make_gridworld(*w, *h, *goal, obstacles, *gamma),
            EnvSpec::RandomMdp {
                n_states,
                n_actions,
                branching,
                seed,
                gamma,
            } => make_random_mdp(*n_states, *n_actions, *branching, *seed, *gamma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exact_q, exact_value, state_values};

    #[test]
    fn chain_closed_forms() {
        let gamma = 0.9;
        let mdp = make_chain(5, 0.0, gamma).unwrap();
        let right = TabularPolicy::deterministic(&[RIGHT; 5], 2).unwrap();
        let v = state_values(&mdp, &right).unwrap();
        assert!((v[0] - gamma.powi(4) / (1.0 - gamma)).abs() < 1e-9);
        let slippy = make_chain(5, 0.3, gamma).unwrap();
        let left = TabularPolicy::deterministic(&[LEFT; 5], 2).unwrap();
        assert_eq!(exact_value(&slippy, &left, slippy.start_dist()).unwrap(), 0.0);
        assert!(make_chain(1, 0.0, gamma).is_err());
        assert!(make_chain(3, 0.5, gamma).is_err());
    }

    #[test]
    fn gridworld_examples() {
        let gamma = 0.8;
        let mdp = make_gridworld(2, 1, (1, 0), &[], gamma).unwrap();
        let east = TabularPolicy::deterministic(&[EAST, EAST], 4).unwrap();
        let q = exact_q(&mdp, &east).unwrap();
        assert!((q.get(0, EAST) - gamma / (1.0 - gamma)).abs() < 1e-9);
        let v = state_values(&mdp, &TabularPolicy::uniform(2, 4)).unwrap();
        assert!((v[1] - 1.0 / (1.0 - gamma)).abs() < 1e-9);
        assert!(make_gridworld(3, 3, (1, 1), &[(1, 1)], gamma).is_err());
        assert!(make_gridworld(3, 3, (3, 1), &[], gamma).is_err());
    }

    #[test]
    fn gridworld_obstacles_block_moves() {
        let mdp = make_gridworld(3, 1, (2, 0), &[(1, 0)], 0.9).unwrap();
        assert_eq!(mdp.transition_row(0, EAST), &[1.0, 0.0, 0.0]);
        assert_eq!(mdp.start_dist(), &[1.0, 0.0, 0.0]);
        assert_eq!(mdp.reset_dist().unwrap(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn random_mdp_is_seeded() {
        let a = make_random_mdp(6, 2, 3, 11, 0.9).unwrap();
        let b = make_random_mdp(6, 2, 3, 11, 0.9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_random_mdp(6, 2, 3, 12, 0.9).unwrap());
        for s in 0..6 {
            for act in 0..2 {
                let row = a.transition_row(s, act);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().filter(|&&p| p > 0.0).count() <= 3);
            }
        }
        assert!(make_random_mdp(3, 2, 4, 0, 0.9).is_err());
    }

    #[test]
    fn env_spec_round_trip() {
        let spec = EnvSpec::Chain {
            n: 5,
            slip: 0.1,
            gamma: 0.9,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"name":"chain","n":5,"slip":0.1,"gamma":0.9}"#);
        assert_eq!(serde_json::from_str::<EnvSpec>(&text).unwrap(), spec);
        assert_eq!(spec.build().unwrap().n_states(), 5);
    }
}
