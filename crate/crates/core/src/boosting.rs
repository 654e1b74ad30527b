//! The boosting loops.
//!
//! Both loops run Frank-Wolfe on the value `V^π_{d₀}` over policy trees. Each
//! outer round builds a new direction `π'_t` from sampled Q estimates, then
//! mixes it in with weight `η_{1,t}`:
//!
//! * episodic mode (`μ = d₀`): `η_{1,t} = min{1, 2C∞/t}`, output `π_T`;
//! * ν-reset mode (`μ = ν`): `η_{1,t}` from [`step_chooser`], output the
//!   iterate preceding the smallest step.
//!
//! The supervised inner loop runs `N` rounds of smoothed online boosting,
//! each calling the weak learner on `M` fresh samples. The online inner loop
//! draws `M` samples once and feeds them through `N` Hedge learners.
//!
//! Inner iterates `ρ` start from `π_r` and follow
//! `ρ_n = (1 − η_n)ρ_{n−1} + (η_n/α)𝒜_n − η_n(1/α − 1)π_r` with
//! `η_n = min{2/n, 1}`. The gain handed to learner `n` is evaluated at
//! `ρ_{n−1}`, the point the learner is asked to improve.

use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frank_wolfe::argmin_earliest;
use crate::mdp::{check_distribution, default_horizon_cap, Policy, TabularMdp, TabularPolicy};
use crate::oracle::{exact_value, exact_visitation, optimal_policy, sup_ratio};
use crate::rng::{seeded, SimRng};
use crate::sampler::batch_sample;
use crate::smoothing::{extension_gradient, LinearLoss, SmoothingParams};
use crate::tree::{BaseRef, BaseResolver, PolicyTree, Shrub};
use crate::weak::{alpha_mixture, hedge_predict, hedge_regret_bound, BasePolicyClass, GainDataset, HedgeState, WeakLearner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Samples start from `d₀`.
    Episodic,
    /// Samples start from the MDP's reset distribution `ν`.
    NuReset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Supervised,
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostConfig {
    /// Outer rounds `T`.
    pub t_rounds: usize,
    /// Inner rounds (or online learners) `N`.
    pub n_inner: usize,
    /// Episodes per inner round (supervised) or per outer round (online), `M`.
    pub m_episodes: usize,
    /// Step-chooser episodes `P`; only sampled in ν-reset mode.
    pub p_episodes: usize,
    /// Weak-learning edge `α ∈ (0, 1]`.
    pub alpha: f64,
    pub mode: Mode,
    /// `C∞` for the episodic step schedule. When absent, the running
    /// maximum of `‖d^{π*}/d^{π_k}‖_∞` over the iterates so far is used.
    #[serde(default)]
    pub c_inf_hint: Option<f64>,
    /// Smoothing parameter for `G`-normalized losses; defaults to `sqrt(1/(αN))`.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Lipschitz constant of the loss extension; defaults to `|A|/(1 − γ)`.
    #[serde(default)]
    pub g_lip: Option<f64>,
    /// Per-phase episode length cap; defaults to `ceil(ln(10⁶)/(1 − γ))`.
    #[serde(default)]
    pub horizon_cap: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("t_rounds", self.t_rounds),
            ("n_inner", self.n_inner),
            ("m_episodes", self.m_episodes),
            ("p_episodes", self.p_episodes),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if let Some(c) = self.c_inf_hint {
            if !(c > 0.0) {
                return Err(Error::Config(format!("c_inf_hint {c} must be positive")));
            }
        }
        if self.horizon_cap == Some(0) {
            return Err(Error::Config("horizon_cap must be at least 1".into()));
        }
        Ok(())
    }

    /// Smoothing applied to the raw `−Q̂` losses. `β` is stated for losses
    /// normalized by `G`; on the raw scale the prox parameter is `β/G`, which
    /// makes the smoothed loss exactly `G` times its normalized counterpart.
    pub fn smoothing(&self, mdp: &TabularMdp) -> Result<SmoothingParams> {
        let beta = self.beta.unwrap_or_else(|| SmoothingParams::default_beta(self.alpha, self.n_inner));
        let g = self.g_lip.unwrap_or_else(|| SmoothingParams::default_g(mdp.n_actions(), mdp.gamma()));
        SmoothingParams::new(beta / g, g)
    }

    pub fn cap(&self, mdp: &TabularMdp) -> usize {
        self.horizon_cap.unwrap_or_else(|| default_horizon_cap(mdp.gamma()))
    }

    /// Episodes a run samples: `TMN` / `T(MN + P)` supervised, `TM` /
    /// `T(M + P)` online, in episodic / ν-reset mode.
    pub fn expected_episodes(&self, algorithm: Algorithm) -> usize {
        let per_round = match algorithm {
            Algorithm::Supervised => self.m_episodes * self.n_inner,
            Algorithm::Online => self.m_episodes,
        };
        let p = match self.mode {
            Mode::Episodic => 0,
            Mode::NuReset => self.p_episodes,
        };
        self.t_rounds * (per_round + p)
    }

    fn start_distribution(&self, mdp: &TabularMdp) -> Result<Vec<f64>> {
        match self.mode {
            Mode::Episodic => Ok(mdp.start_dist().to_vec()),
            Mode::NuReset => mdp
                .reset_dist()
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::Config("nu_reset mode needs an MDP with a reset distribution".into())),
        }
    }
}

/// Monte Carlo step size `clip((1 − γ)²/2 · (Ĝ^{π'} − Ĝ^{π}))` from `P`
/// samples drawn under `pi_prev`.
pub fn step_chooser<A, B>(
    mdp: &TabularMdp,
    pi_prev: &A,
    pi_new: &B,
    mu: &[f64],
    p_episodes: usize,
    rng: &mut SimRng,
    horizon_cap: usize,
) -> Result<f64>
where
    A: Policy + ?Sized,
    B: Policy + ?Sized,
{
    mdp.check_policy(pi_new)?;
    let samples = batch_sample(mdp, pi_prev, mu, rng, p_episodes, horizon_cap)?;
    let na = mdp.n_actions();
    let (mut old, mut new) = (vec![0.0; na], vec![0.0; na]);
    let mut diff = 0.0;
    for q in &samples {
        pi_prev.write_distribution(q.state, &mut old);
        pi_new.write_distribution(q.state, &mut new);
        let a = q.probe_action;
        diff += q.q_hat[a] * (new[a] - old[a]);
    }
    let gamma = mdp.gamma();
    Ok(((1.0 - gamma).powi(2) / 2.0 * diff / p_episodes as f64).clamp(0.0, 1.0))
}

/// `ρ` as merged affine weights over base policies plus a `π_r` coefficient.
struct ShrubBuilder {
    bases: Vec<BaseRef>,
    weights: Vec<f64>,
    uniform: BaseRef,
    uniform_coef: f64,
}

impl ShrubBuilder {
    fn new(uniform: BaseRef) -> Self {
        Self {
            bases: Vec::new(),
            weights: Vec::new(),
            uniform,
            uniform_coef: 1.0,
        }
    }

    fn push(&mut self, learner_output: &BaseRef, eta: f64, alpha: f64) {
        for w in &mut self.weights {
            *w *= 1.0 - eta;
        }
        self.uniform_coef = (1.0 - eta) * self.uniform_coef - eta * (1.0 / alpha - 1.0);
        match self.bases.iter().position(|b| b.id == learner_output.id) {
            Some(i) => self.weights[i] += eta / alpha,
            None => {
                self.bases.push(learner_output.clone());
                self.weights.push(eta / alpha);
            }
        }
    }

    fn build(&self) -> Result<Shrub> {
        let mut weights = Vec::new();
        let mut bases = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bases) {
            if *w != 0.0 {
                weights.push(*w);
                bases.push(b.clone());
            }
        }
        if self.uniform_coef != 0.0 {
            weights.push(self.uniform_coef);
            bases.push(self.uniform.clone());
        }
        Shrub::new(weights, bases)
    }
}

/// `η_{2,n} = min{2/n, 1}`.
pub fn inner_step(n: usize) -> f64 {
    (2.0 / n as f64).min(1.0)
}

/// `ρ ← (1 − η)ρ + (η/α)·a − η(1/α − 1)·uniform`, on one row.
fn affine_row_update(rho: &mut [f64], a: &[f64], eta: f64, alpha: f64) {
    let floor = eta * (1.0 / alpha - 1.0) / rho.len() as f64;
    for (r, p) in rho.iter_mut().zip(a) {
        *r = (1.0 - eta) * *r + eta / alpha * p - floor;
    }
}

fn negated(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

fn project_shrubs(shrubs: &[Shrub], n_states: usize) -> TabularPolicy {
    let tree = PolicyTree::new(vec![1.0 / shrubs.len() as f64; shrubs.len()], shrubs.to_vec())
        .expect("uniform top weights over nonempty shrubs");
    TabularPolicy::tabulate(&tree, n_states)
}

fn check_membership(base: &BasePolicyClass, out: &BaseRef) -> Result<()> {
    if base.resolve(&out.id).is_none() {
        return Err(Error::Contract(format!("weak learner returned `{}`, which is not in the base class", out.id)));
    }
    Ok(())
}

/// One supervised inner loop: returns `π'_t = Γ[ρ_{t,N}]` (tabulated) and
/// the shrub `ρ_{t,N}`.
#[allow(clippy::too_many_arguments)]
pub fn inner_boost_supervised<P: Policy + ?Sized>(
    mdp: &TabularMdp,
    pi_outer: &P,
    base: &BasePolicyClass,
    learner: &dyn WeakLearner,
    cfg: &BoostConfig,
    mu: &[f64],
    rng: &mut SimRng,
) -> Result<(TabularPolicy, Shrub)> {
    cfg.validate()?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let params = cfg.smoothing(mdp)?;
    let cap = cfg.cap(mdp);
    let mut builder = ShrubBuilder::new(base.uniform());
    let mut rho = TabularPolicy::uniform(ns, na).as_slice().to_vec();
    for n in 1..=cfg.n_inner {
        let samples = batch_sample(mdp, pi_outer, mu, rng, cfg.m_episodes, cap)?;
        let items = samples
            .iter()
            .map(|q| {
                let x = &rho[q.state * na..(q.state + 1) * na];
                let grad = extension_gradient(&LinearLoss::new(negated(&q.q_hat)), params, x);
                (q.state, negated(&grad))
            })
            .collect();
        let out = learner.learn(&GainDataset::new(items), base)?;
        check_membership(base, &out)?;
        let table = TabularPolicy::tabulate(&*out.policy, ns);
        let eta = inner_step(n);
        for s in 0..ns {
            affine_row_update(&mut rho[s * na..(s + 1) * na], table.row(s), eta, cfg.alpha);
        }
        builder.push(&out, eta, cfg.alpha);
    }
    let shrub = builder.build()?;
    Ok((project_shrubs(std::slice::from_ref(&shrub), ns), shrub))
}

/// Output of one online inner loop.
pub struct OnlineRound {
    /// `(1/M) Σ_m Γ[ρ_{t,m,N}]`, tabulated.
    pub projected: TabularPolicy,
    /// `ρ_{t,m,N}` for every episode.
    pub shrubs: Vec<Shrub>,
    /// Largest realized expected regret among the `N` learners.
    pub max_regret: f64,
}

/// Gain range used to tune Hedge: twice the bound `|A|/(1 − γ) + G` on the
/// magnitude of a smoothed gain paired with a distribution, at the nominal
/// scale of `Q̂`.
pub fn hedge_gain_range(mdp: &TabularMdp, params: SmoothingParams) -> f64 {
    2.0 * (mdp.n_actions() as f64 / (1.0 - mdp.gamma()) + params.g_lip)
}

/// One online inner loop with `N` Hedge learners over the base class.
pub fn inner_boost_online<P: Policy + ?Sized>(
    mdp: &TabularMdp,
    pi_outer: &P,
    base: &BasePolicyClass,
    cfg: &BoostConfig,
    mu: &[f64],
    rng: &mut SimRng,
) -> Result<OnlineRound> {
    cfg.validate()?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let params = cfg.smoothing(mdp)?;
    let k = base.len();
    let samples = batch_sample(mdp, pi_outer, mu, rng, cfg.m_episodes, cfg.cap(mdp))?;
    let mut learner_rng = seeded(rng.next_u64());
    let mut hedges = vec![HedgeState::new(k, cfg.m_episodes, hedge_gain_range(mdp, params))?; cfg.n_inner];
    let mut expert_totals = vec![vec![0.0; k]; cfg.n_inner];
    let mut learner_totals = vec![0.0; cfg.n_inner];
    let mut shrubs = Vec::with_capacity(cfg.m_episodes);
    let mut pred_row = vec![0.0; na];

    for q in &samples {
        let s = q.state;
        let loss = LinearLoss::new(negated(&q.q_hat));
        let mut builder = ShrubBuilder::new(base.uniform());
        let mut rho = vec![1.0 / na as f64; na];
        for n in 0..cfg.n_inner {
            let (choice, idx) = hedge_predict(&hedges[n], base, &mut learner_rng);
            let gain = negated(&extension_gradient(&loss, params, &rho));
            let expert_gains = base.pointwise_gains(s, &gain);
            let probs = hedges[n].probabilities();
            learner_totals[n] += probs.iter().zip(&expert_gains).map(|(p, g)| p * g).sum::<f64>();
            for (tot, g) in expert_totals[n].iter_mut().zip(&expert_gains) {
                *tot += g;
            }
            hedges[n] = hedges[n].update_gains(&expert_gains)?;

            let prediction = alpha_mixture(&choice, cfg.alpha)?;
            prediction.policy.write_distribution(s, &mut pred_row);
            let eta = inner_step(n + 1);
            affine_row_update(&mut rho, &pred_row, eta, cfg.alpha);
            builder.push(&prediction, eta, cfg.alpha);
            debug_assert_eq!(base.get(idx).id, choice.id);
        }
        shrubs.push(builder.build()?);
    }

    let max_regret = expert_totals
        .iter()
        .zip(&learner_totals)
        .map(|(experts, learner)| experts.iter().copied().fold(f64::NEG_INFINITY, f64::max) - learner)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(OnlineRound {
        projected: project_shrubs(&shrubs, ns),
        shrubs,
        max_regret,
    })
}

/// One row of the per-round curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub eta: f64,
    /// `V^{π_t}_{d₀}`.
    pub exact_value: f64,
    pub episodes_cum: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub rounds: Vec<RoundRecord>,
    /// Index `k` of the returned iterate `π_k`.
    pub output_round: usize,
    /// `V^{π̄}_{d₀}` of the returned policy.
    pub final_value: f64,
    pub v_star: f64,
    /// `V* − V^{π̄}`.
    pub gap: f64,
    pub episodes_total: usize,
    /// `C∞` used by the episodic schedule in each round.
    pub c_inf_used: Vec<f64>,
    /// Base-policy evaluations per query of the returned tree.
    pub base_evaluations_per_query: usize,
    /// Online runs: largest realized Hedge regret over all rounds and learners.
    pub max_hedge_regret: Option<f64>,
    /// Online runs: the matching Hedge regret bound.
    pub hedge_regret_bound: Option<f64>,
}

impl RunReport {
    pub fn etas(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.eta).collect()
    }

    /// Writes `t,eta,exact_value,episodes_cum` rows.
    pub fn write_curve_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rounds {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct RoundOutput {
    projected: TabularPolicy,
    shrubs: Vec<Shrub>,
    episodes: usize,
    regret: Option<f64>,
}

fn outer_loop<F>(
    mdp: &TabularMdp,
    base: &BasePolicyClass,
    cfg: &BoostConfig,
    algorithm: Algorithm,
    rng: &mut SimRng,
    mut inner: F,
) -> Result<(PolicyTree, RunReport)>
where
    F: FnMut(&TabularPolicy, &[f64], &mut SimRng) -> Result<RoundOutput>,
{
    cfg.validate()?;
    let mu = cfg.start_distribution(mdp)?;
    check_distribution("mu", &mu, mdp.n_states())?;
    if base.n_states() != mdp.n_states() || base.n_actions() != mdp.n_actions() {
        return Err(Error::Config("base class shape does not match the MDP".into()));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let d0 = mdp.start_dist();
    let star = optimal_policy(mdp)?;
    let d_star = exact_visitation(mdp, &star.policy, d0)?;
    let cap = cfg.cap(mdp);

    let initial = PolicyTree::from_shrub(Shrub::single(base.uniform()));
    let mut tree = initial.clone();
    let mut current = TabularPolicy::uniform(ns, na);
    let mut history: Vec<(f64, Vec<Shrub>)> = Vec::with_capacity(cfg.t_rounds);
    let mut rounds = Vec::with_capacity(cfg.t_rounds);
    let mut c_inf_used = Vec::new();
    let mut c_running: f64 = 0.0;
    let mut episodes = 0;
    let mut max_regret: Option<f64> = None;

    for t in 1..=cfg.t_rounds {
        let round = inner(&current, &mu, rng)?;
        episodes += round.episodes;
        if let Some(r) = round.regret {
            max_regret = Some(max_regret.map_or(r, |m| m.max(r)));
        }
        let eta = match cfg.mode {
            Mode::Episodic => {
                let c = match cfg.c_inf_hint {
                    Some(c) => c,
                    None => {
                        let d = exact_visitation(mdp, &current, d0)?;
                        c_running = c_running.max(sup_ratio(&d_star, &d));
                        c_running
                    }
                };
                c_inf_used.push(c);
                (2.0 * c / t as f64).min(1.0)
            }
            Mode::NuReset => {
                episodes += cfg.p_episodes;
                step_chooser(mdp, &current, &round.projected, &mu, cfg.p_episodes, rng, cap)?
            }
        };
        tree = tree.mix_many(round.shrubs.clone(), eta)?;
        current = current.mix(&round.projected, eta);
        let value = exact_value(mdp, &current, d0)?;
        log::info!("round {t}: eta = {eta:.4}, V = {value:.6}");
        rounds.push(RoundRecord {
            t,
            eta,
            exact_value: value,
            episodes_cum: episodes,
        });
        history.push((eta, round.shrubs));
    }

    let (output, output_round) = match cfg.mode {
        Mode::Episodic => (tree, cfg.t_rounds),
        Mode::NuReset => {
            let etas: Vec<f64> = history.iter().map(|(e, _)| *e).collect();
            let k = argmin_earliest(&etas).expect("at least one round");
            let mut replay = initial;
            for (eta, shrubs) in &history[..k] {
                replay = replay.mix_many(shrubs.clone(), *eta)?;
            }
            (replay, k)
        }
    };
    let final_value = exact_value(mdp, &output, d0)?;
    let regret_bound = max_regret.map(|_| {
        let params = cfg.smoothing(mdp).expect("validated above");
        hedge_regret_bound(cfg.m_episodes, base.len(), hedge_gain_range(mdp, params))
    });
    let report = RunReport {
        algorithm,
        mode: cfg.mode,
        rounds,
        output_round,
        final_value,
        v_star: star.v_star,
        gap: star.v_star - final_value,
        episodes_total: episodes,
        c_inf_used,
        base_evaluations_per_query: output.base_evaluations_per_query(),
        max_hedge_regret: max_regret,
        hedge_regret_bound: regret_bound,
    };
    Ok((output, report))
}

/// Boosting with a supervised weak learner.
pub fn boost_supervised(
    mdp: &TabularMdp,
    base: &BasePolicyClass,
    learner: &dyn WeakLearner,
    cfg: &BoostConfig,
    rng: &mut SimRng,
) -> Result<(PolicyTree, RunReport)> {
    outer_loop(mdp, base, cfg, Algorithm::Supervised, rng, |pi, mu, rng| {
        let (projected, shrub) = inner_boost_supervised(mdp, pi, base, learner, cfg, mu, rng)?;
        Ok(RoundOutput {
            projected,
            shrubs: vec![shrub],
            episodes: cfg.m_episodes * cfg.n_inner,
            regret: None,
        })
    })
}

/// Boosting with `N` Hedge learners per round.
pub fn boost_online(
    mdp: &TabularMdp,
    base: &BasePolicyClass,
    cfg: &BoostConfig,
    rng: &mut SimRng,
) -> Result<(PolicyTree, RunReport)> {
    outer_loop(mdp, base, cfg, Algorithm::Online, rng, |pi, mu, rng| {
        let round = inner_boost_online(mdp, pi, base, cfg, mu, rng)?;
        Ok(RoundOutput {
            projected: round.projected,
            shrubs: round.shrubs,
            episodes: cfg.m_episodes,
            regret: Some(round.max_regret),
        })
    })
}

/// Loop sizes suggested by the sample-complexity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_rounds: usize,
    pub n_inner: usize,
    pub m_episodes: usize,
    /// Zero in episodic mode.
    pub p_episodes: usize,
}

/// Problem quantities the schedules depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInputs {
    pub eps: f64,
    pub delta: f64,
    /// `C∞` in episodic mode, `D∞` in ν-reset mode.
    pub mismatch: f64,
    pub n_actions: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// `log |𝒲|`, the weak learner's complexity.
    pub log_w: f64,
}

/// `m(ε, δ) = (log|𝒲| / ε²)·log(1/δ)`.
pub fn weak_sample_size(log_w: f64, eps: f64, delta: f64) -> f64 {
    log_w / (eps * eps) * (1.0 / delta).ln()
}

fn to_count(x: f64) -> usize {
    x.ceil().max(1.0) as usize
}

/// Schedule for the supervised algorithm.
pub fn supervised_schedule(mode: Mode, p: &ScheduleInputs) -> Schedule {
    let a = p.n_actions as f64;
    let h = 1.0 - p.gamma;
    let (c, e) = (p.mismatch, p.eps);
    match mode {
        Mode::Episodic => {
            let t = 16.0 * c * c / (h.powi(3) * e);
            let n = (16.0 * a * c / (h * h * p.alpha * e)).powi(2);
            let m = weak_sample_size(p.log_w, h * h * p.alpha * e / (8.0 * c * a), p.delta / (n * t));
            Schedule {
                t_rounds: to_count(t),
                n_inner: to_count(n),
                m_episodes: to_count(m),
                p_episodes: 0,
            }
        }
        Mode::NuReset => {
            let t = 8.0 * c * c / (h.powi(6) * e * e);
            let n = (16.0 * a * c / (h.powi(3) * p.alpha * e)).powi(2);
            let pp = 200.0 * a * a * c * c / (h.powi(6) * e * e) * (2.0 * t * n / p.delta).ln();
            let m = weak_sample_size(p.log_w, h.powi(3) * p.alpha * e / (8.0 * a * c), p.delta / (2.0 * n * t));
            Schedule {
                t_rounds: to_count(t),
                n_inner: to_count(n),
                m_episodes: to_count(m),
                p_episodes: to_count(pp),
            }
        }
    }
}

/// Schedule for the online algorithm with regret `R(M) = sqrt(M log|𝒲|)`;
/// `M ≥ k·R(M)` then reads `M ≥ k²·log|𝒲|`.
pub fn online_schedule(mode: Mode, p: &ScheduleInputs) -> Schedule {
    let a = p.n_actions as f64;
    let h = 1.0 - p.gamma;
    let (c, e) = (p.mismatch, p.eps);
    match mode {
        Mode::Episodic => {
            let t = 16.0 * c * c / (h.powi(3) * e);
            let n = (16.0 * a * c / (h * h * p.alpha * e)).powi(2);
            let log_term = (t / p.delta).ln().powi(2);
            let concentration = 1000.0 * a * a * c * c / (h.powi(4) * e * e * p.alpha * p.alpha) * log_term;
            let k = 8.0 * a * c / (h * h * p.alpha * e);
            Schedule {
                t_rounds: to_count(t),
                n_inner: to_count(n),
                m_episodes: to_count(concentration.max(k * k * p.log_w)),
                p_episodes: 0,
            }
        }
        Mode::NuReset => {
            let t = 100.0 * c * c / (h.powi(6) * e * e);
            let n = (20.0 * a * c / (h.powi(3) * p.alpha * e)).powi(2);
            let pp = 250.0 * c * c * a * a / (h.powi(6) * e * e) * (t / p.delta).ln().powi(2);
            let concentration = (40.0 * a * c / (h.powi(3) * p.alpha * e) * (t / p.delta).ln()).powi(2);
            let k = 10.0 * a * c / (h.powi(3) * p.alpha * e);
            Schedule {
                t_rounds: to_count(t),
                n_inner: to_count(n),
                m_episodes: to_count(concentration.max(k * k * p.log_w)),
                p_episodes: to_count(pp),
            }
        }
    }
}
