//! Shrubs and policy trees: the depth-2 circuit the boosting loops output.
//!
//! A [`Shrub`] is an affine (possibly negative) combination of base
//! policies, so its value at a state is an arbitrary vector in `ℝ^|A|`. A
//! [`PolicyTree`] mixes the simplex projections of its shrubs with convex
//! top-level weights, and is therefore always a valid policy.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::project_simplex_in_place;
use crate::mdp::{Policy, PROB_TOL};

/// A named base policy as stored in a shrub.
#[derive(Clone)]
pub struct BaseRef {
    pub id: String,
    pub policy: Arc<dyn Policy>,
}

impl BaseRef {
    pub fn new(id: impl Into<String>, policy: Arc<dyn Policy>) -> Self {
        Self {
            id: id.into(),
            policy,
        }
    }
}

impl fmt::Debug for BaseRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("BaseRef").field(&self.id).finish()
    }
}

/// Looks up base policies by identifier when loading a serialized tree.
pub trait BaseResolver {
    fn resolve(&self, id: &str) -> Option<Arc<dyn Policy>>;
}

/// `λ = Σ_n w_n π_n` with real weights.
#[derive(Debug, Clone)]
pub struct Shrub {
    weights: Vec<f64>,
    bases: Vec<BaseRef>,
    n_actions: usize,
}

impl Shrub {
    pub fn new(weights: Vec<f64>, bases: Vec<BaseRef>) -> Result<Self> {
        if weights.is_empty() || weights.len() != bases.len() {
            return Err(Error::InvalidPolicy(format!(
                "shrub needs matching nonempty weights and bases ({} vs {})",
                weights.len(),
                bases.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidPolicy("non-finite shrub weight".into()));
        }
        let n_actions = bases[0].policy.n_actions();
        if bases.iter().any(|b| b.policy.n_actions() != n_actions) {
            return Err(Error::InvalidPolicy("shrub bases disagree on |A|".into()));
        }
        Ok(Self {
            weights,
            bases,
            n_actions,
        })
    }

    pub fn single(base: BaseRef) -> Self {
        let n_actions = base.policy.n_actions();
        Self {
            weights: vec![1.0],
            bases: vec![base],
            n_actions,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bases(&self) -> &[BaseRef] {
        &self.bases
    }

    /// `N₀`, the number of base policies in the shrub.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Writes `λ(s)` into `out`, using `scratch` for base evaluations.
    pub fn write_eval(&self, s: usize, out: &mut [f64], scratch: &mut [f64]) {
        out.fill(0.0);
        for (w, base) in self.weights.iter().zip(&self.bases) {
            base.policy.write_distribution(s, scratch);
            for (o, p) in out.iter_mut().zip(scratch.iter()) {
                *o += w * p;
            }
        }
    }

    /// `λ(s)`; not necessarily a distribution.
    pub fn eval(&self, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions];
        let mut scratch = vec![0.0; self.n_actions];
        self.write_eval(s, &mut out, &mut scratch);
        out
    }
}

/// `λ(s)` for a shrub.
pub fn shrub_eval(shrub: &Shrub, s: usize) -> Vec<f64> {
    shrub.eval(s)
}

/// `π = Σ_t w_t Γ[λ_t]` with `w ∈ Δ_{T₀}`.
#[derive(Debug, Clone)]
pub struct PolicyTree {
    top_weights: Vec<f64>,
    shrubs: Vec<Shrub>,
    n_actions: usize,
}

impl PolicyTree {
    pub fn new(top_weights: Vec<f64>, shrubs: Vec<Shrub>) -> Result<Self> {
        if shrubs.is_empty() || top_weights.len() != shrubs.len() {
            return Err(Error::InvalidPolicy("tree needs one top weight per shrub".into()));
        }
        let total: f64 = top_weights.iter().sum();
        if top_weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidPolicy(format!("top weights sum to {total}, not 1")));
        }
        let n_actions = shrubs[0].n_actions;
        if shrubs.iter().any(|s| s.n_actions != n_actions) {
            return Err(Error::InvalidPolicy("shrubs disagree on |A|".into()));
        }
        Ok(Self {
            top_weights,
            shrubs,
            n_actions,
        })
    }

    pub fn from_shrub(shrub: Shrub) -> Self {
        let n_actions = shrub.n_actions;
        Self {
            top_weights: vec![1.0],
            shrubs: vec![shrub],
            n_actions,
        }
    }

    pub fn top_weights(&self) -> &[f64] {
        &self.top_weights
    }

    pub fn shrubs(&self) -> &[Shrub] {
        &self.shrubs
    }

    /// Base-policy evaluations per [`action_dist`](Self::action_dist) call: `Σ_t N₀(t)`.
    pub fn base_evaluations_per_query(&self) -> usize {
        self.shrubs.iter().map(Shrub::len).sum()
    }

    /// `(1 − η)·self + η·Γ[new_shrub]`.
    pub fn mix(&self, new_shrub: Shrub, eta: f64) -> Result<PolicyTree> {
        self.mix_many(vec![new_shrub], eta)
    }

    /// `(1 − η)·self + η·(1/k) Σ_j Γ[new_j]`: each new shrub gets top weight `η/k`.
    ///
    /// `η = 0` returns the tree unchanged and `η = 1` drops the old shrubs.
    pub fn mix_many(&self, new_shrubs: Vec<Shrub>, eta: f64) -> Result<PolicyTree> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Config(format!("mixing weight {eta} not in [0, 1]")));
        }
        if new_shrubs.is_empty() {
            return Err(Error::Config("nothing to mix in".into()));
        }
        if new_shrubs.iter().any(|s| s.n_actions != self.n_actions) {
            return Err(Error::InvalidPolicy("new shrub has a different |A|".into()));
        }
        if eta == 0.0 {
            return Ok(self.clone());
        }
        let share = eta / new_shrubs.len() as f64;
        let (mut top_weights, mut shrubs) = if eta == 1.0 {
            (Vec::new(), Vec::new())
        } else {
            (
                self.top_weights.iter().map(|w| w * (1.0 - eta)).collect(),
                self.shrubs.clone(),
            )
        };
        for shrub in new_shrubs {
            top_weights.push(share);
            shrubs.push(shrub);
        }
        Ok(PolicyTree {
            top_weights,
            shrubs,
            n_actions: self.n_actions,
        })
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            n_actions: self.n_actions,
            top_weights: self.top_weights.clone(),
            shrubs: self
                .shrubs
                .iter()
                .map(|s| ShrubDocument {
                    weights: s.weights.clone(),
                    bases: s.bases.iter().map(|b| b.id.clone()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &TreeDocument, resolver: &dyn BaseResolver) -> Result<Self> {
        let shrubs = doc
            .shrubs
            .iter()
            .map(|sd| {
                let bases = sd
                    .bases
                    .iter()
                    .map(|id| {
                        resolver
                            .resolve(id)
                            .map(|p| BaseRef::new(id.clone(), p))
                            .ok_or_else(|| Error::InvalidPolicy(format!("unknown base policy `{id}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Shrub::new(sd.weights.clone(), bases)
            })
            .collect::<Result<Vec<_>>>()?;
        let tree = PolicyTree::new(doc.top_weights.clone(), shrubs)?;
        if tree.n_actions != doc.n_actions {
            return Err(Error::InvalidPolicy("document |A| does not match its bases".into()));
        }
        Ok(tree)
    }
}

impl Policy for PolicyTree {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn write_distribution(&self, state: usize, out: &mut [f64]) {
        let na = self.n_actions;
        let mut lambda = vec![0.0; na];
        let mut scratch = vec![0.0; na];
        out.fill(0.0);
        for (w, shrub) in self.top_weights.iter().zip(&self.shrubs) {
            shrub.write_eval(state, &mut lambda, &mut scratch);
            project_simplex_in_place(&mut lambda);
            for (o, p) in out.iter_mut().zip(&lambda) {
                *o += w * p;
            }
        }
    }
}

/// `π(· | s)` for a tree.
pub fn tree_action_dist(tree: &PolicyTree, s: usize) -> Vec<f64> {
    tree.action_distribution(s)
}

/// `(1 − η)·tree + η·Γ[new_shrub]`.
pub fn mix_tree(tree: &PolicyTree, new_shrub: Shrub, eta: f64) -> Result<PolicyTree> {
    tree.mix(new_shrub, eta)
}

/// Serialized form of a [`PolicyTree`]: weights plus base-policy identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub n_actions: usize,
    pub top_weights: Vec<f64>,
    pub shrubs: Vec<ShrubDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrubDocument {
    pub weights: Vec<f64>,
    pub bases: Vec<String>,
}

/// Wraps a policy and counts how often it is evaluated.
#[derive(Debug)]
pub struct CountingPolicy<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P> CountingPolicy<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl<P: Policy> Policy for CountingPolicy<P> {
    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    fn write_distribution(&self, state: usize, out: &mut [f64]) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.write_distribution(state, out)
    }
}
