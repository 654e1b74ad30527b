//! Finite MDPs, the policy interface and episodic rollouts.
//!
//! Rollouts terminate geometrically: after every recorded step an explicit
//! Bernoulli(1 − γ) coin decides whether the episode stops, so undiscounted
//! sums over a rollout are unbiased for discounted values. A hard
//! `horizon_cap` bounds the worst case; hitting it is reported on the
//! trajectory and logged.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sample_categorical;

/// Tolerance for "sums to one" checks on stored distributions.
pub const PROB_TOL: f64 = 1e-9;

/// A finite discounted MDP with dense transition and reward tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Row-major `(s, a, s')`.
    transition: Vec<f64>,
    /// Row-major `(s, a)`.
    reward: Vec<f64>,
    gamma: f64,
    start_dist: Vec<f64>,
    reset_dist: Option<Vec<f64>>,
}

/// Wire format of [`TabularMdp`]: nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MdpDocument {
    n_states: usize,
    n_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    gamma: f64,
    start_dist: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reset_dist: Option<Vec<f64>>,
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let (ns, na) = (doc.n_states, doc.n_actions);
        if doc.transition.len() != ns || doc.reward.len() != ns {
            return Err(Error::InvalidMdp(format!(
                "expected {ns} transition/reward rows, got {}/{}",
                doc.transition.len(),
                doc.reward.len()
            )));
        }
        let mut transition = Vec::with_capacity(ns * na * ns);
        for (s, rows) in doc.transition.iter().enumerate() {
            if rows.len() != na {
                return Err(Error::InvalidMdp(format!("state {s}: expected {na} action rows")));
            }
            for row in rows {
                if row.len() != ns {
                    return Err(Error::InvalidMdp(format!("state {s}: expected rows of length {ns}")));
                }
                transition.extend_from_slice(row);
            }
        }
        let mut reward = Vec::with_capacity(ns * na);
        for (s, row) in doc.reward.iter().enumerate() {
            if row.len() != na {
                return Err(Error::InvalidMdp(format!("state {s}: expected {na} rewards")));
            }
            reward.extend_from_slice(row);
        }
        TabularMdp::new(ns, na, transition, reward, doc.gamma, doc.start_dist, doc.reset_dist)
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(m: TabularMdp) -> Self {
        let transition = (0..m.n_states)
            .map(|s| (0..m.n_actions).map(|a| m.transition_row(s, a).to_vec()).collect())
            .collect();
        let reward = (0..m.n_states)
            .map(|s| m.reward[s * m.n_actions..(s + 1) * m.n_actions].to_vec())
            .collect();
        MdpDocument {
            n_states: m.n_states,
            n_actions: m.n_actions,
            transition,
            reward,
            gamma: m.gamma,
            start_dist: m.start_dist,
            reset_dist: m.reset_dist,
        }
    }
}

pub(crate) fn check_distribution(what: &str, p: &[f64], len: usize) -> Result<()> {
    if p.len() != len {
        return Err(Error::InvalidMdp(format!("{what}: length {} != {len}", p.len())));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidMdp(format!("{what}: negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidMdp(format!("{what}: sums to {total}")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        start_dist: Vec<f64>,
        reset_dist: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidMdp("transition tensor has the wrong size".into()));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::InvalidMdp("reward matrix has the wrong size".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("gamma {gamma} not in [0, 1)")));
        }
        for (i, row) in transition.chunks(n_states).enumerate() {
            let (s, a) = (i / n_actions, i % n_actions);
            check_distribution(&format!("transition({s}, {a})"), row, n_states)?;
        }
        if let Some(r) = reward.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidMdp(format!("reward {r} outside [0, 1]")));
        }
        check_distribution("start_dist", &start_dist, n_states)?;
        if let Some(nu) = &reset_dist {
            check_distribution("reset_dist", nu, n_states)?;
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            start_dist,
            reset_dist,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn start_dist(&self) -> &[f64] {
        &self.start_dist
    }

    pub fn reset_dist(&self) -> Option<&[f64]> {
        self.reset_dist.as_deref()
    }

    /// Replaces the reset distribution (ν).
    pub fn with_reset_dist(mut self, nu: Option<Vec<f64>>) -> Result<Self> {
        if let Some(nu) = &nu {
            check_distribution("reset_dist", nu, self.n_states)?;
        }
        self.reset_dist = nu;
        Ok(self)
    }

    /// `P(· | s, a)`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transition[base..base + self.n_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::OutOfRange {
                what: "state",
                index: s,
                bound: self.n_states,
            });
        }
        Ok(())
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.n_actions {
            return Err(Error::OutOfRange {
                what: "action",
                index: a,
                bound: self.n_actions,
            });
        }
        Ok(())
    }

    /// Draws `s' ~ P(· | s, a)`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<usize> {
        self.check_state(s)?;
        self.check_action(a)?;
        Ok(self.step(s, a, rng))
    }

    /// Unchecked variant of [`sample_transition`](Self::sample_transition) for hot loops.
    #[inline]
    pub(crate) fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_categorical(self.transition_row(s, a), rng)
    }

    /// Checks that `policy` is defined on this MDP's action set.
    pub fn check_policy<P: Policy + ?Sized>(&self, policy: &P) -> Result<()> {
        if policy.n_actions() != self.n_actions {
            return Err(Error::InvalidPolicy(format!(
                "policy has {} actions, MDP has {}",
                policy.n_actions(),
                self.n_actions
            )));
        }
        Ok(())
    }
}

/// `ceil(ln(10⁶) / (1 − γ))`: the default per-phase episode length cap.
pub fn default_horizon_cap(gamma: f64) -> usize {
    ((1e6f64).ln() / (1.0 - gamma)).ceil().max(1.0) as usize
}

/// A stochastic stationary policy `S → Δ_A`.
pub trait Policy: Send + Sync {
    fn n_actions(&self) -> usize;

    /// Writes `π(· | state)` into `out` (length `n_actions`).
    fn write_distribution(&self, state: usize, out: &mut [f64]);

    fn action_distribution(&self, state: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions()];
        self.write_distribution(state, &mut out);
        out
    }
}

impl<P: Policy + ?Sized> Policy for std::sync::Arc<P> {
    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }

    fn write_distribution(&self, state: usize, out: &mut [f64]) {
        (**self).write_distribution(state, out)
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }

    fn write_distribution(&self, state: usize, out: &mut [f64]) {
        (**self).write_distribution(state, out)
    }
}

/// A policy stored as an explicit `|S| × |A|` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for TabularPolicy {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::InvalidPolicy("ragged policy table".into()));
        }
        TabularPolicy::new(rows.len(), n_actions, rows.concat())
    }
}

impl From<TabularPolicy> for Vec<Vec<f64>> {
    fn from(p: TabularPolicy) -> Self {
        p.probs.chunks(p.n_actions).map(<[f64]>::to_vec).collect()
    }
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(Error::InvalidPolicy("table shape does not match |S| x |A|".into()));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) || (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidPolicy(format!("row {s} is not a distribution")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Point mass on `actions[s]` in every state.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::OutOfRange {
                    what: "action",
                    index: a,
                    bound: n_actions,
                });
            }
            probs[s * n_actions + a] = 1.0;
        }
        Self::new(actions.len(), n_actions, probs)
    }

    /// Evaluates `policy` on every state.
    pub fn tabulate<P: Policy + ?Sized>(policy: &P, n_states: usize) -> Self {
        let n_actions = policy.n_actions();
        let mut probs = vec![0.0; n_states * n_actions];
        for (s, row) in probs.chunks_mut(n_actions).enumerate() {
            policy.write_distribution(s, row);
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    /// Builds a table from rows assumed to be distributions already (e.g. projections).
    pub(crate) fn from_rows_unchecked(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), n_states * n_actions);
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Row-major `(s, a)` probabilities.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// `(1 − w)·self + w·other`, row by row.
    pub fn mix(&self, other: &TabularPolicy, w: f64) -> TabularPolicy {
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        Self::from_rows_unchecked(self.n_states, self.n_actions, probs)
    }
}

impl Policy for TabularPolicy {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    fn write_distribution(&self, state: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(state));
    }
}

/// The uniformly random policy `π_r`, defined on every state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformPolicy {
    pub n_actions: usize,
}

impl Policy for UniformPolicy {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn write_distribution(&self, _state: usize, out: &mut [f64]) {
        out.fill(1.0 / self.n_actions as f64);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// `true` when the geometric termination coin stopped the episode,
    /// `false` when the horizon cap was hit first.
    pub terminated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Runs `policy` from `s₀ ~ init_dist`, stopping with probability `1 − γ`
/// after every step or after `horizon_cap` steps.
pub fn rollout_episode<P, R>(
    mdp: &TabularMdp,
    policy: &P,
    init_dist: &[f64],
    rng: &mut R,
    horizon_cap: usize,
) -> Result<Trajectory>
where
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    mdp.check_policy(policy)?;
    check_distribution("init_dist", init_dist, mdp.n_states)?;
    if horizon_cap == 0 {
        return Err(Error::Config("horizon_cap must be at least 1".into()));
    }
    let mut dist = vec![0.0; mdp.n_actions];
    let mut s = sample_categorical(init_dist, rng);
    let mut steps = Vec::new();
    loop {
        policy.write_distribution(s, &mut dist);
        let a = sample_categorical(&dist, rng);
        steps.push(Step {
            state: s,
            action: a,
            reward: mdp.reward(s, a),
        });
        if rng.random::<f64>() >= mdp.gamma {
            return Ok(Trajectory {
                steps,
                terminated: true,
            });
        }
        if steps.len() >= horizon_cap {
            log::debug!("rollout hit horizon cap {horizon_cap}");
            return Ok(Trajectory {
                steps,
                terminated: false,
            });
        }
        s = mdp.step(s, a, rng);
    }
}

/// `Σ_t γᵗ r_t` over the recorded steps.
pub fn discounted_return(traj: &Trajectory, gamma: f64) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for step in &traj.steps {
        total += discount * step.reward;
        discount *= gamma;
    }
    total
}
