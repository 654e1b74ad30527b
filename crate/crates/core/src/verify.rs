//! Verification suites: property checks on freshly seeded random instances,
//! each compared with an exact or closed-form reference.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{make_random_mdp, random_policy};
use crate::error::{Error, Result};
use crate::frank_wolfe::{fwlr_bound_check, ncfw_run, ConcaveQuadratic, FwMode, FwProblem};
use crate::geometry::{norm_inf1, policy_difference, project_simplex};
use crate::mdp::{Policy, TabularMdp, TabularPolicy};
use crate::oracle::{exact_gradient, exact_value, exact_visitation, mismatch_coefficients, optimal_policy, policy_completeness, SaMatrix};
use crate::rng::{seeded, SimRng};
use crate::sampler::batch_sample;
use crate::smoothing::{envelope_value, extension_gradient, LinearLoss, SmoothingParams};
use crate::weak::BasePolicyClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    All,
    Sampler,
    Smoothing,
    Fw,
    Inequalities,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Scope::All),
            "sampler" => Ok(Scope::Sampler),
            "smoothing" => Ok(Scope::Smoothing),
            "fw" => Ok(Scope::Fw),
            "inequalities" => Ok(Scope::Inequalities),
            other => Err(Error::Config(format!(
                "unknown scope `{other}` (expected all, sampler, smoothing, fw or inequalities)"
            ))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Scope::All => "all",
            Scope::Sampler => "sampler",
            Scope::Smoothing => "smoothing",
            Scope::Fw => "fw",
            Scope::Inequalities => "inequalities",
        };
        f.write_str(name)
    }
}

/// One check: a measured quantity against its bound (`measured ≤ bound`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound,
            pass: measured <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scope: Scope,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// `Σ_{s,a} g(s,a)·δ(s,a)`.
pub fn inner(g: &SaMatrix, delta: &SaMatrix) -> f64 {
    g.as_slice().iter().zip(delta.as_slice()).map(|(a, b)| a * b).sum()
}

/// Both sides of the smoothness inequalities for one pair of policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessSides {
    /// `|V^{π'} − V^π − ∇V^πᵀ(π' − π)|`.
    pub value_residual: f64,
    /// `γ/(1 − γ)³ · ‖π' − π‖²_{∞,1}`.
    pub value_bound: f64,
    /// `‖d^{π'} − d^π‖₁`.
    pub visitation_shift: f64,
    /// `γ/(1 − γ) · ‖π' − π‖_{∞,1}`.
    pub visitation_bound: f64,
}

/// Smoothness of the value and visitation maps, from the start distribution.
pub fn smoothness_sides<A, B>(mdp: &TabularMdp, pi: &A, pi_new: &B) -> Result<SmoothnessSides>
where
    A: Policy + ?Sized,
    B: Policy + ?Sized,
{
    let d0 = mdp.start_dist();
    let gamma = mdp.gamma();
    let delta = policy_difference(pi_new, pi, mdp.n_states());
    let norm = norm_inf1(&delta);
    let grad = exact_gradient(mdp, pi, d0)?;
    let v = exact_value(mdp, pi, d0)?;
    let v_new = exact_value(mdp, pi_new, d0)?;
    let d = exact_visitation(mdp, pi, d0)?;
    let d_new = exact_visitation(mdp, pi_new, d0)?;
    Ok(SmoothnessSides {
        value_residual: (v_new - v - inner(&grad, &delta)).abs(),
        value_bound: gamma / (1.0 - gamma).powi(3) * norm * norm,
        visitation_shift: d.iter().zip(&d_new).map(|(a, b)| (a - b).abs()).sum(),
        visitation_bound: gamma / (1.0 - gamma) * norm,
    })
}

/// Both sides of the gradient-domination inequality for one policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationSides {
    /// `V* − V^π` (from `d₀`).
    pub gap: f64,
    /// Episodic form: `C∞·(E/(1 − γ) + max_{π'} ∇V^πᵀ(π' − π))`.
    pub episodic_bound: f64,
    /// ν-reset form: `D∞/(1 − γ)·(E_ν/(1 − γ) + max_{π'} ∇V^π_νᵀ(π' − π))`.
    pub nu_bound: f64,
}

/// Gradient domination with `C∞`, `E` and `E_ν` computed exactly over the
/// probe set `{π}` and the comparator class `class`.
pub fn domination_sides<P: Policy + ?Sized>(mdp: &TabularMdp, pi: &P, class: &BasePolicyClass) -> Result<DominationSides> {
    let d0 = mdp.start_dist();
    let nu = mdp
        .reset_dist()
        .ok_or_else(|| Error::Config("gradient domination check needs a reset distribution".into()))?;
    let gamma = mdp.gamma();
    let v_star = optimal_policy(mdp)?.v_star;
    let tab = TabularPolicy::tabulate(pi, mdp.n_states());
    let probes: [&dyn Policy; 1] = [&tab];
    let mismatch = mismatch_coefficients(mdp, &probes, nu)?;
    let members: Vec<&dyn Policy> = class.members().iter().map(|m| &*m.policy as &dyn Policy).collect();
    let e = policy_completeness(mdp, &probes, &members, d0)?;
    let e_nu = policy_completeness(mdp, &probes, &members, nu)?;
    let grad = exact_gradient(mdp, &tab, d0)?;
    let grad_nu = exact_gradient(mdp, &tab, nu)?;
    let (mut best, mut best_nu) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..class.len() {
        let delta = policy_difference(class.table(k), &tab, mdp.n_states());
        best = best.max(inner(&grad, &delta));
        best_nu = best_nu.max(inner(&grad_nu, &delta));
    }
    let h = 1.0 - gamma;
    Ok(DominationSides {
        gap: v_star - exact_value(mdp, &tab, d0)?,
        episodic_bound: mismatch.c_inf * (e / h + best),
        nu_bound: mismatch.d_inf / h * (e_nu / h + best_nu),
    })
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `(1/(1 − γ))·Q̂ᵀπ'` averaged over sampler draws under `pi`, with the
/// exact `∇V^πᵀπ'`. Returns `(mean, se, exact)`.
pub fn gradient_estimate<A, B>(
    mdp: &TabularMdp,
    pi: &A,
    probe: &B,
    episodes: usize,
    rng: &mut SimRng,
) -> Result<(f64, f64, f64)>
where
    A: Policy + ?Sized,
    B: Policy + ?Sized,
{
    let d0 = mdp.start_dist();
    let h = 1.0 - mdp.gamma();
    let samples = batch_sample(mdp, pi, d0, rng, episodes, crate::mdp::default_horizon_cap(mdp.gamma()))?;
    let values: Vec<f64> = samples.iter().map(|q| q.dot(probe) / h).collect();
    let (mean, se) = mean_and_se(&values);
    let grad = exact_gradient(mdp, pi, d0)?;
    let probe_tab = TabularPolicy::tabulate(probe, mdp.n_states());
    let exact = inner(&grad, &SaMatrix::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| probe_tab.row(s)[a]));
    Ok((mean, se, exact))
}

/// Total variation between accepted-state frequencies and `d^π_{d₀}`.
pub fn visitation_tv<P: Policy + ?Sized>(mdp: &TabularMdp, pi: &P, episodes: usize, rng: &mut SimRng) -> Result<f64> {
    let d0 = mdp.start_dist();
    let samples = batch_sample(mdp, pi, d0, rng, episodes, crate::mdp::default_horizon_cap(mdp.gamma()))?;
    let mut freq = vec![0.0; mdp.n_states()];
    for q in &samples {
        freq[q.state] += 1.0 / episodes as f64;
    }
    let exact = exact_visitation(mdp, pi, d0)?;
    Ok(0.5 * freq.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

fn sampler_checks(rng: &mut SimRng, out: &mut Vec<CheckResult>) -> Result<()> {
    let episodes = 100_000;
    let (mut worst_z, mut worst_tv) = (0.0f64, 0.0f64);
    for i in 0..3 {
        let mdp = make_random_mdp(6, 3, 3, rng.random(), 0.8)?;
        let pi = random_policy(6, 3, rng.random());
        for _ in 0..3 {
            let probe = random_policy(6, 3, rng.random());
            let (mean, se, exact) = gradient_estimate(&mdp, &pi, &probe, episodes, rng)?;
            worst_z = worst_z.max((mean - exact).abs() / se);
        }
        worst_tv = worst_tv.max(visitation_tv(&mdp, &pi, episodes, rng)?);
        log::debug!("sampler instance {i} done");
    }
    out.push(CheckResult::at_most("sampler gradient estimate, worst |z|", worst_z, 4.0));
    out.push(CheckResult::at_most("sampler visitation, worst total variation", worst_tv, 0.01));
    Ok(())
}

/// Central difference of [`envelope_value`] along every coordinate.
pub fn envelope_fd_gradient(c: &LinearLoss, params: SmoothingParams, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut up, mut down) = (x.to_vec(), x.to_vec());
            up[i] += h;
            down[i] -= h;
            (envelope_value(c, params, &up) - envelope_value(c, params, &down)) / (2.0 * h)
        })
        .collect()
}

fn smoothing_checks(rng: &mut SimRng, out: &mut Vec<CheckResult>) -> Result<()> {
    let (mut worst_rel, mut worst_norm, mut worst_lip) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..200 {
        let n = rng.random_range(2..6);
        let c = LinearLoss::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect());
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let params = SmoothingParams::new(rng.random_range(0.05..1.0), rng.random_range(0.5..5.0))?;
        let g = extension_gradient(&c, params, &x);
        let fd = envelope_fd_gradient(&c, params, &x, 1e-6);
        let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        worst_rel = worst_rel.max(err / scale);
        let c_norm = c.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_norm = worst_norm.max(scale - (c_norm + params.g_lip));
        let gy = extension_gradient(&c, params, &y);
        let dg = g.iter().zip(&gy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let dx = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_lip = worst_lip.max(dg - dx / params.beta);
    }
    out.push(CheckResult::at_most("extension gradient vs finite differences, worst relative error", worst_rel, 1e-2));
    out.push(CheckResult::at_most("gradient norm minus (|c| + G), worst", worst_norm, 1e-9));
    out.push(CheckResult::at_most("gradient change minus |x - y|/beta, worst", worst_lip, 1e-9));
    Ok(())
}

fn fw_checks(rng: &mut SimRng, out: &mut Vec<CheckResult>) -> Result<()> {
    let mut violations = 0;
    for _ in 0..20 {
        let c = rng.random_range(1.0..5.0);
        let d = rng.random_range(0.0..3.0);
        let e = rng.random_range(0.0..1.0);
        let h = rng.random_range(0.1..10.0);
        if !fwlr_bound_check(c, d, e, h, 10_000) {
            violations += 1;
        }
    }
    out.push(CheckResult::at_most("step-size recursion bound violations", violations as f64, 0.0));

    let center = project_simplex(&(0..5).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>());
    let problem = ConcaveQuadratic { center, curvature: 1.0 };
    let constants = problem.constants();
    let mut x0 = vec![0.0; 5];
    x0[0] = 1.0;
    for t in [10, 100, 1000] {
        let (x, _) = ncfw_run(&problem, &constants, t, FwMode::GradientDominated, &x0)?;
        let gap = -problem.objective(&x);
        out.push(CheckResult::at_most(
            format!("concave quadratic gap after {t} rounds"),
            gap,
            constants.gradient_dominated_bound(t),
        ));
    }
    Ok(())
}

fn inequality_checks(rng: &mut SimRng, out: &mut Vec<CheckResult>) -> Result<()> {
    let (mut worst_v, mut worst_d) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (ns, na) = (rng.random_range(2..7), rng.random_range(2..4));
        let gamma = rng.random_range(0.5..0.95);
        let mdp = make_random_mdp(ns, na, rng.random_range(1..=ns), rng.random(), gamma)?;
        let pi = random_policy(ns, na, rng.random());
        let pi_new = random_policy(ns, na, rng.random());
        let s = smoothness_sides(&mdp, &pi, &pi_new)?;
        worst_v = worst_v.max(s.value_residual / s.value_bound);
        worst_d = worst_d.max(s.visitation_shift / s.visitation_bound);
    }
    out.push(CheckResult::at_most("value smoothness, worst ratio to bound", worst_v, 1.0));
    out.push(CheckResult::at_most("visitation shift, worst ratio to bound", worst_d, 1.0));

    let (mut worst_ep, mut worst_nu) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..20 {
        let mdp = make_random_mdp(4, 2, 2, rng.random(), 0.9)?;
        let class = BasePolicyClass::all_deterministic(4, 2, 64)?;
        let pi = random_policy(4, 2, rng.random());
        let sides = domination_sides(&mdp, &pi, &class)?;
        worst_ep = worst_ep.max(sides.gap - sides.episodic_bound);
        worst_nu = worst_nu.max(sides.gap - sides.nu_bound);
    }
    out.push(CheckResult::at_most("gradient domination (episodic), worst gap minus bound", worst_ep, 1e-9));
    out.push(CheckResult::at_most("gradient domination (reset), worst gap minus bound", worst_nu, 1e-9));
    Ok(())
}

/// Runs the suites in `scope` on instances drawn from `seed`.
pub fn run_verification_suite(scope: Scope, seed: u64) -> Result<VerificationReport> {
    let mut rng = seeded(seed);
    let mut checks = Vec::new();
    let all = scope == Scope::All;
    if all || scope == Scope::Sampler {
        sampler_checks(&mut rng, &mut checks)?;
    }
    if all || scope == Scope::Smoothing {
        smoothing_checks(&mut rng, &mut checks)?;
    }
    if all || scope == Scope::Fw {
        fw_checks(&mut rng, &mut checks)?;
    }
    if all || scope == Scope::Inequalities {
        inequality_checks(&mut rng, &mut checks)?;
    }
    Ok(VerificationReport { scope, seed, checks })
}
