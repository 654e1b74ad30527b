//! Weak learners over a finite base policy class.
//!
//! A weak learner sees a dataset of `(state, gain vector)` pairs and returns
//! a base policy whose empirical gain is competitive with the best in the
//! class. Three instantiations are provided: exact ERM, ERM degraded by
//! mixing with the uniform policy (an `α`-weak learner by construction), and
//! Hedge as an online learner.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularPolicy, UniformPolicy};
use crate::oracle::SaMatrix;
use crate::rng::{sample_categorical, seeded};
use crate::tree::{BaseRef, BaseResolver};

/// Identifier of the uniform policy `π_r`; always resolvable.
pub const UNIFORM_ID: &str = "uniform";

/// `(state, gain)` pairs handed to a weak learner.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GainDataset {
    pub items: Vec<(usize, Vec<f64>)>,
}

impl GainDataset {
    pub fn new(items: Vec<(usize, Vec<f64>)>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Per-state sums of the gain vectors.
    pub fn aggregate(&self, n_states: usize, n_actions: usize) -> Result<SaMatrix> {
        let mut rows = vec![vec![0.0; n_actions]; n_states];
        for (s, g) in &self.items {
            let row = rows.get_mut(*s).ok_or(Error::OutOfRange {
                what: "state",
                index: *s,
                bound: n_states,
            })?;
            if g.len() != n_actions {
                return Err(Error::Config(format!("gain of length {} for |A| = {n_actions}", g.len())));
            }
            for (r, v) in row.iter_mut().zip(g) {
                *r += v;
            }
        }
        Ok(SaMatrix::from(rows))
    }

    /// `Σ_i gain_iᵀ π(· | s_i)`.
    pub fn objective<P: Policy + ?Sized>(&self, policy: &P) -> f64 {
        let mut dist = vec![0.0; policy.n_actions()];
        self.items
            .iter()
            .map(|(s, g)| {
                policy.write_distribution(*s, &mut dist);
                g.iter().zip(&dist).map(|(g, p)| g * p).sum::<f64>()
            })
            .sum()
    }
}

/// A finite, nonempty class of tabular base policies with stable identifiers.
#[derive(Clone)]
pub struct BasePolicyClass {
    members: Vec<BaseRef>,
    tables: Vec<Arc<TabularPolicy>>,
    n_states: usize,
    n_actions: usize,
}

impl fmt::Debug for BasePolicyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasePolicyClass")
            .field("len", &self.members.len())
            .field("n_states", &self.n_states)
            .field("n_actions", &self.n_actions)
            .finish()
    }
}

fn deterministic_id(actions: &[usize]) -> String {
    let body: Vec<String> = actions.iter().map(usize::to_string).collect();
    format!("det:{}", body.join("."))
}

impl BasePolicyClass {
    pub fn new(named: Vec<(String, TabularPolicy)>) -> Result<Self> {
        let first = named
            .first()
            .ok_or_else(|| Error::Config("base policy class is empty".into()))?;
        let (n_states, n_actions) = (first.1.n_states(), first.1.n_actions());
        let mut seen = BTreeSet::new();
        let mut members = Vec::with_capacity(named.len());
        let mut tables = Vec::with_capacity(named.len());
        for (id, table) in named {
            if table.n_states() != n_states || table.n_actions() != n_actions {
                return Err(Error::Config(format!("base policy `{id}` has a different shape")));
            }
            if id == UNIFORM_ID || !seen.insert(id.clone()) {
                return Err(Error::Config(format!("duplicate or reserved base policy id `{id}`")));
            }
            let table = Arc::new(table);
            members.push(BaseRef::new(id, table.clone()));
            tables.push(table);
        }
        Ok(Self {
            members,
            tables,
            n_states,
            n_actions,
        })
    }

    /// Every deterministic policy, in lexicographic order of the action
    /// vector. Refuses classes larger than `limit`.
    pub fn all_deterministic(n_states: usize, n_actions: usize, limit: usize) -> Result<Self> {
        let size = (n_actions as f64).powi(n_states as i32);
        if size > limit as f64 {
            return Err(Error::Config(format!(
                "{n_actions}^{n_states} deterministic policies exceed the limit of {limit}"
            )));
        }
        let mut named = Vec::with_capacity(size as usize);
        let mut actions = vec![0usize; n_states];
        loop {
            named.push((deterministic_id(&actions), TabularPolicy::deterministic(&actions, n_actions)?));
            // Odometer increment, last state fastest.
            let mut i = n_states;
            loop {
                if i == 0 {
                    return Self::new(named);
                }
                i -= 1;
                actions[i] += 1;
                if actions[i] < n_actions {
                    break;
                }
                actions[i] = 0;
            }
        }
    }

    /// `count` distinct deterministic policies drawn uniformly at random.
    pub fn random_deterministic(n_states: usize, n_actions: usize, count: usize, seed: u64) -> Result<Self> {
        let size = (n_actions as f64).powi(n_states as i32);
        if count == 0 || count as f64 > size {
            return Err(Error::Config(format!("cannot draw {count} distinct deterministic policies")));
        }
        let mut rng = seeded(seed);
        let mut seen = BTreeSet::new();
        let mut named = Vec::with_capacity(count);
        while named.len() < count {
            let actions: Vec<usize> = (0..n_states).map(|_| rng.random_range(0..n_actions)).collect();
            if seen.insert(actions.clone()) {
                named.push((deterministic_id(&actions), TabularPolicy::deterministic(&actions, n_actions)?));
            }
        }
        Self::new(named)
    }

    /// Policies `s ↦ if feature(s) ≤ θ { low } else { high }` for every
    /// threshold `θ` among the feature values and every ordered action pair
    /// `low ≠ high`, plus the constant policies.
    pub fn threshold(features: &[f64], n_actions: usize) -> Result<Self> {
        if features.is_empty() || features.iter().any(|f| !f.is_finite()) {
            return Err(Error::Config("threshold class needs finite state features".into()));
        }
        let mut thresholds: Vec<f64> = features.to_vec();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        // The largest value would give a constant policy.
        thresholds.pop();
        let mut named = Vec::new();
        for a in 0..n_actions {
            let actions = vec![a; features.len()];
            named.push((format!("const:{a}"), TabularPolicy::deterministic(&actions, n_actions)?));
        }
        for (i, &theta) in thresholds.iter().enumerate() {
            for low in 0..n_actions {
                for high in (0..n_actions).filter(|&h| h != low) {
                    let actions: Vec<usize> = features.iter().map(|&f| if f <= theta { low } else { high }).collect();
                    named.push((format!("thr:{i}:{low}:{high}"), TabularPolicy::deterministic(&actions, n_actions)?));
                }
            }
        }
        Self::new(named)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn members(&self) -> &[BaseRef] {
        &self.members
    }

    pub fn get(&self, index: usize) -> &BaseRef {
        &self.members[index]
    }

    pub fn table(&self, index: usize) -> &TabularPolicy {
        &self.tables[index]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.members.iter().position(|m| m.id == id)
    }

    /// `π_r` as a base reference.
    pub fn uniform(&self) -> BaseRef {
        BaseRef::new(
            UNIFORM_ID,
            Arc::new(UniformPolicy {
                n_actions: self.n_actions,
            }),
        )
    }

    /// Empirical objective of every member, `Σ_s Σ_a G(s,a) π_k(a|s)` for aggregated gains `G`.
    fn scores(&self, gains: &SaMatrix) -> Vec<f64> {
        self.tables
            .iter()
            .map(|t| {
                (0..self.n_states)
                    .map(|s| gains.row(s).iter().zip(t.row(s)).map(|(g, p)| g * p).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    /// `gᵀ π_k(· | s)` for every member.
    pub(crate) fn pointwise_gains(&self, s: usize, gain: &[f64]) -> Vec<f64> {
        self.tables
            .iter()
            .map(|t| gain.iter().zip(t.row(s)).map(|(g, p)| g * p).sum())
            .collect()
    }
}

fn parse_mixture(id: &str) -> Option<(f64, &str)> {
    let rest = id.strip_prefix("mix(")?;
    let (alpha, rest) = rest.split_once(")[")?;
    let inner = rest.strip_suffix(']')?;
    Some((alpha.parse().ok()?, inner))
}

impl BaseResolver for BasePolicyClass {
    fn resolve(&self, id: &str) -> Option<Arc<dyn Policy>> {
        if id == UNIFORM_ID {
            return Some(self.uniform().policy);
        }
        if let Some(i) = self.position(id) {
            return Some(self.members[i].policy.clone());
        }
        let (alpha, inner) = parse_mixture(id)?;
        let inner = self.resolve(inner)?;
        Some(Arc::new(AlphaMixture::new(inner, alpha).ok()?))
    }
}

/// `α·inner + (1 − α)·uniform`.
pub struct AlphaMixture {
    inner: Arc<dyn Policy>,
    alpha: f64,
}

impl AlphaMixture {
    pub fn new(inner: Arc<dyn Policy>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {alpha} not in (0, 1]")));
        }
        Ok(Self { inner, alpha })
    }
}

impl Policy for AlphaMixture {
    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    fn write_distribution(&self, state: usize, out: &mut [f64]) {
        self.inner.write_distribution(state, out);
        let floor = (1.0 - self.alpha) / out.len() as f64;
        for p in out.iter_mut() {
            *p = self.alpha * *p + floor;
        }
    }
}

/// Wraps a learner output in the `α`-mixture with the uniform policy.
pub fn alpha_mixture(inner: &BaseRef, alpha: f64) -> Result<BaseRef> {
    if alpha == 1.0 {
        return Ok(inner.clone());
    }
    let policy = AlphaMixture::new(inner.policy.clone(), alpha)?;
    Ok(BaseRef::new(format!("mix({alpha})[{}]", inner.id), Arc::new(policy)))
}

/// Empirical risk maximizer over the class; ties go to the lowest index.
pub fn erm_weak_learner(data: &GainDataset, base: &BasePolicyClass) -> Result<(usize, BaseRef)> {
    if data.is_empty() {
        return Err(Error::Config("weak learner called on an empty dataset".into()));
    }
    let gains = data.aggregate(base.n_states, base.n_actions)?;
    let scores = base.scores(&gains);
    let mut best = 0;
    for (k, &score) in scores.iter().enumerate().skip(1) {
        if score > scores[best] {
            best = k;
        }
    }
    Ok((best, base.members[best].clone()))
}

/// A supervised weak learner.
pub trait WeakLearner: Send + Sync {
    fn learn(&self, data: &GainDataset, base: &BasePolicyClass) -> Result<BaseRef>;

    /// The `α` this learner guarantees.
    fn alpha(&self) -> f64;
}

/// Exact ERM (`α = 1` against the class itself).
#[derive(Debug, Clone, Copy, Default)]
pub struct Erm;

impl WeakLearner for Erm {
    fn learn(&self, data: &GainDataset, base: &BasePolicyClass) -> Result<BaseRef> {
        Ok(erm_weak_learner(data, base)?.1)
    }

    fn alpha(&self) -> f64 {
        1.0
    }
}

/// ERM followed by [`alpha_mixture`].
#[derive(Debug, Clone, Copy)]
pub struct ErmAlphaMix {
    pub alpha: f64,
}

impl WeakLearner for ErmAlphaMix {
    fn learn(&self, data: &GainDataset, base: &BasePolicyClass) -> Result<BaseRef> {
        alpha_mixture(&erm_weak_learner(data, base)?.1, self.alpha)
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Exponential weights over the members of a base class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeState {
    pub log_weights: Vec<f64>,
    pub learning_rate: f64,
    pub round: usize,
}

impl HedgeState {
    /// Learning rate `sqrt(8 ln K / M) / range` for `M` rounds of gains
    /// spanning an interval of width `range`.
    pub fn new(n_experts: usize, horizon: usize, gain_range: f64) -> Result<Self> {
        if n_experts == 0 || horizon == 0 || !(gain_range > 0.0) {
            return Err(Error::Config("hedge needs experts, a horizon and a positive gain range".into()));
        }
        let rate = (8.0 * (n_experts as f64).ln() / horizon as f64).sqrt() / gain_range;
        Ok(Self::with_learning_rate(n_experts, rate))
    }

    pub fn with_learning_rate(n_experts: usize, learning_rate: f64) -> Self {
        Self {
            log_weights: vec![0.0; n_experts],
            learning_rate,
            round: 0,
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// Adds `learning_rate · gains[k]` to every log weight.
    pub fn update_gains(&self, gains: &[f64]) -> Result<HedgeState> {
        if gains.len() != self.log_weights.len() || gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("hedge gains must be finite, one per expert".into()));
        }
        Ok(HedgeState {
            log_weights: self
                .log_weights
                .iter()
                .zip(gains)
                .map(|(l, g)| l + self.learning_rate * g)
                .collect(),
            learning_rate: self.learning_rate,
            round: self.round + 1,
        })
    }
}

/// Samples a member with probability `∝ exp(log_weights)`.
pub fn hedge_predict<R: Rng + ?Sized>(state: &HedgeState, base: &BasePolicyClass, rng: &mut R) -> (BaseRef, usize) {
    let k = sample_categorical(&state.probabilities(), rng);
    (base.members[k].clone(), k)
}

/// Credits every member with `gainᵀ π_k(· | s)`.
pub fn hedge_update(state: &HedgeState, base: &BasePolicyClass, s: usize, gain: &[f64]) -> Result<HedgeState> {
    if s >= base.n_states {
        return Err(Error::OutOfRange {
            what: "state",
            index: s,
            bound: base.n_states,
        });
    }
    if gain.len() != base.n_actions {
        return Err(Error::Config("gain length differs from |A|".into()));
    }
    state.update_gains(&base.pointwise_gains(s, gain))
}

/// `sqrt(M/2 · ln K) · range`, the expected-regret guarantee of Hedge at the
/// learning rate chosen by [`HedgeState::new`].
pub fn hedge_regret_bound(horizon: usize, n_experts: usize, gain_range: f64) -> f64 {
    (horizon as f64 / 2.0 * (n_experts as f64).ln()).sqrt() * gain_range
}
