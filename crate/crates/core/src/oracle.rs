//! Exact policy evaluation on tabular MDPs.
//!
//! Everything here is dense linear algebra on `I − γ P_π`, which is
//! invertible for `γ < 1`. These are the ground-truth quantities the
//! sampling-based loops are checked against.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{check_distribution, Policy, TabularMdp, TabularPolicy};

/// Maximum tolerated residual of the linear solves.
pub const SOLVE_TOL: f64 = 1e-8;

/// A dense `|S| × |A|` matrix (Q-functions, gradients, gains).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SaMatrix {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl From<Vec<Vec<f64>>> for SaMatrix {
    fn from(rows: Vec<Vec<f64>>) -> Self {
        let n_actions = rows.first().map_or(0, Vec::len);
        Self {
            n_states: rows.len(),
            n_actions,
            values: rows.concat(),
        }
    }
}

impl From<SaMatrix> for Vec<Vec<f64>> {
    fn from(m: SaMatrix) -> Self {
        m.values.chunks(m.n_actions.max(1)).map(<[f64]>::to_vec).collect()
    }
}

impl SaMatrix {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_fn(n_states: usize, n_actions: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (0..n_states * n_actions)
            .map(|i| f(i / n_actions, i % n_actions))
            .collect();
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Frobenius inner product with a policy table, `Σ_{s,a} M(s,a) π(a|s)`.
    pub fn dot_policy<P: Policy + ?Sized>(&self, policy: &P) -> f64 {
        let mut dist = vec![0.0; self.n_actions];
        (0..self.n_states)
            .map(|s| {
                policy.write_distribution(s, &mut dist);
                self.row(s).iter().zip(&dist).map(|(m, p)| m * p).sum::<f64>()
            })
            .sum()
    }
}

/// Exact quantities for one `(policy, μ)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub v: Vec<f64>,
    pub q: SaMatrix,
    pub visitation: Vec<f64>,
    pub grad: SaMatrix,
}

/// `P_π(s' | s) = Σ_a π(a|s) P(s'|s,a)` and `r_π(s)`.
fn markov_chain(mdp: &TabularMdp, pi: &TabularPolicy) -> (DMatrix<f64>, DVector<f64>) {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut p = DMatrix::zeros(ns, ns);
    let mut r = DVector::zeros(ns);
    for s in 0..ns {
        let row = pi.row(s);
        for a in 0..na {
            let w = row[a];
            if w == 0.0 {
                continue;
            }
            r[s] += w * mdp.reward(s, a);
            for (sp, &prob) in mdp.transition_row(s, a).iter().enumerate() {
                p[(s, sp)] += w * prob;
            }
        }
    }
    (p, r)
}

fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::Solver("singular system".into()))?;
    let residual = (&a * &x - &b).amax();
    if !(residual <= SOLVE_TOL) {
        return Err(Error::Solver(format!("residual {residual:e} exceeds {SOLVE_TOL:e}")));
    }
    Ok(x)
}

fn tabulate_checked<P: Policy + ?Sized>(mdp: &TabularMdp, policy: &P) -> Result<TabularPolicy> {
    mdp.check_policy(policy)?;
    Ok(TabularPolicy::tabulate(policy, mdp.n_states()))
}

fn state_values_tab(mdp: &TabularMdp, pi: &TabularPolicy) -> Result<Vec<f64>> {
    let (p, r) = markov_chain(mdp, pi);
    let n = mdp.n_states();
    let a = DMatrix::identity(n, n) - p * mdp.gamma();
    Ok(solve(a, r)?.iter().copied().collect())
}

fn q_from_values(mdp: &TabularMdp, v: &[f64]) -> SaMatrix {
    SaMatrix::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        let next: f64 = mdp.transition_row(s, a).iter().zip(v).map(|(p, v)| p * v).sum();
        mdp.reward(s, a) + mdp.gamma() * next
    })
}

fn visitation_tab(mdp: &TabularMdp, pi: &TabularPolicy, init_dist: &[f64]) -> Result<Vec<f64>> {
    check_distribution("init_dist", init_dist, mdp.n_states())?;
    let (p, _) = markov_chain(mdp, pi);
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    // d = (1 − γ) μᵀ (I − γ P_π)⁻¹, i.e. (I − γ P_π)ᵀ d = (1 − γ) μ.
    let a = (DMatrix::identity(n, n) - p * gamma).transpose();
    let b = DVector::from_iterator(n, init_dist.iter().map(|m| (1.0 - gamma) * m));
    let d = solve(a, b)?;
    // Clamp round-off negatives; the true solution is nonnegative.
    Ok(d.iter().map(|x| x.max(0.0)).collect())
}

/// `V^π(s)` for every state.
pub fn state_values<P: Policy + ?Sized>(mdp: &TabularMdp, policy: &P) -> Result<Vec<f64>> {
    let pi = tabulate_checked(mdp, policy)?;
    state_values_tab(mdp, &pi)
}

/// `Q^π`, the solution of `Q = r + γ P Π Q`.
pub fn exact_q<P: Policy + ?Sized>(mdp: &TabularMdp, policy: &P) -> Result<SaMatrix> {
    let pi = tabulate_checked(mdp, policy)?;
    let v = state_values_tab(mdp, &pi)?;
    Ok(q_from_values(mdp, &v))
}

/// `V^π_d = Σ_s d(s) V^π(s)`.
pub fn exact_value<P: Policy + ?Sized>(mdp: &TabularMdp, policy: &P, init_dist: &[f64]) -> Result<f64> {
    check_distribution("init_dist", init_dist, mdp.n_states())?;
    let v = state_values(mdp, policy)?;
    Ok(v.iter().zip(init_dist).map(|(v, d)| v * d).sum())
}

/// Discounted state-visitation distribution `d^π_μ`.
pub fn exact_visitation<P: Policy + ?Sized>(mdp: &TabularMdp, policy: &P, init_dist: &[f64]) -> Result<Vec<f64>> {
    let pi = tabulate_checked(mdp, policy)?;
    visitation_tab(mdp, &pi, init_dist)
}

/// Functional gradient `∂V^π_μ / ∂π(a|s) = d^π_μ(s) Q^π(s,a) / (1 − γ)`.
pub fn exact_gradient<P: Policy + ?Sized>(mdp: &TabularMdp, policy: &P, init_dist: &[f64]) -> Result<SaMatrix> {
    Ok(oracle_report(mdp, policy, init_dist)?.grad)
}

/// All exact quantities for one policy and start distribution.
pub fn oracle_report<P: Policy + ?Sized>(mdp: &TabularMdp, policy: &P, init_dist: &[f64]) -> Result<OracleReport> {
    let pi = tabulate_checked(mdp, policy)?;
    let v = state_values_tab(mdp, &pi)?;
    let q = q_from_values(mdp, &v);
    let visitation = visitation_tab(mdp, &pi, init_dist)?;
    let scale = 1.0 / (1.0 - mdp.gamma());
    let grad = SaMatrix::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        scale * visitation[s] * q.get(s, a)
    });
    Ok(OracleReport {
        v,
        q,
        visitation,
        grad,
    })
}

/// `max_{s,a} |Q(s,a) − r(s,a) − γ Σ_{s'} P(s'|s,a) Σ_{a'} π(a'|s') Q(s',a')|`.
pub fn bellman_residual<P: Policy + ?Sized>(mdp: &TabularMdp, policy: &P, q: &SaMatrix) -> f64 {
    let pi = TabularPolicy::tabulate(policy, mdp.n_states());
    let v: Vec<f64> = (0..mdp.n_states())
        .map(|s| q.row(s).iter().zip(pi.row(s)).map(|(q, p)| q * p).sum())
        .collect();
    let target = q_from_values(mdp, &v);
    q.as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Result of value iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    /// Greedy deterministic policy (lowest action index on ties).
    pub policy: TabularPolicy,
    pub actions: Vec<usize>,
    /// Exact `V^{π*}(s)` of the greedy policy.
    pub values: Vec<f64>,
    /// `V^*_{d₀}`.
    pub v_star: f64,
}

/// Value iteration to `‖V_{k+1} − V_k‖_∞ ≤ 1e-10 (1 − γ)`, then exact
/// evaluation of the greedy policy.
pub fn optimal_policy(mdp: &TabularMdp) -> Result<OptimalSolution> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let gamma = mdp.gamma();
    let tol = 1e-10 * (1.0 - gamma);
    let mut v = vec![0.0; ns];
    loop {
        let q = q_from_values(mdp, &v);
        let next: Vec<f64> = (0..ns)
            .map(|s| q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta <= tol {
            break;
        }
    }
    let q = q_from_values(mdp, &v);
    let actions: Vec<usize> = (0..ns)
        .map(|s| {
            let row = q.row(s);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter().position(|&x| x == best).unwrap_or(0)
        })
        .collect();
    let policy = TabularPolicy::deterministic(&actions, na)?;
    let values = state_values_tab(mdp, &policy)?;
    let vi_gap = values.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if vi_gap > 1e-8 {
        log::warn!("greedy policy value differs from the value-iteration fixed point by {vi_gap:e}");
    }
    let v_star = values.iter().zip(mdp.start_dist()).map(|(v, d)| v * d).sum();
    Ok(OptimalSolution {
        policy,
        actions,
        values,
        v_star,
    })
}

/// Distribution mismatch coefficients. Infinite values mean some state the
/// optimal policy visits has zero mass under the denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchCoefficients {
    /// `max_π ‖d^{π*} / d^π‖_∞` over the supplied policies.
    pub c_inf: f64,
    /// `‖d^{π*} / ν‖_∞`.
    pub d_inf: f64,
}

/// `max_s num(s) / den(s)`, with `0/0 = 0` and `x/0 = ∞` for `x > 0`.
pub fn sup_ratio(num: &[f64], den: &[f64]) -> f64 {
    num.iter()
        .zip(den)
        .map(|(&n, &d)| {
            if n <= 0.0 {
                0.0
            } else if d <= 0.0 {
                f64::INFINITY
            } else {
                n / d
            }
        })
        .fold(0.0, f64::max)
}

/// `C∞` over `policies` and `D∞` against `nu`; visitations start from `d₀`.
pub fn mismatch_coefficients(
    mdp: &TabularMdp,
    policies: &[&dyn Policy],
    nu: &[f64],
) -> Result<MismatchCoefficients> {
    check_distribution("nu", nu, mdp.n_states())?;
    let star = optimal_policy(mdp)?;
    let d_star = visitation_tab(mdp, &star.policy, mdp.start_dist())?;
    let mut c_inf: f64 = 0.0;
    for pi in policies {
        let d = exact_visitation(mdp, *pi, mdp.start_dist())?;
        c_inf = c_inf.max(sup_ratio(&d_star, &d));
    }
    Ok(MismatchCoefficients {
        c_inf,
        d_inf: sup_ratio(&d_star, nu),
    })
}

/// `E_{s∼d^π_μ}[max_a Q^π(s,a) − Q^π(s,·)ᵀ π_b(·|s)]` for one probe `π` and one base policy `π_b`.
pub fn completeness_gap<P, B>(mdp: &TabularMdp, probe: &P, base: &B, mu: &[f64]) -> Result<f64>
where
    P: Policy + ?Sized,
    B: Policy + ?Sized,
{
    let report = oracle_report(mdp, probe, mu)?;
    completeness_gap_from(&report, base)
}

fn completeness_gap_from<B: Policy + ?Sized>(report: &OracleReport, base: &B) -> Result<f64> {
    let mut dist = vec![0.0; report.q.n_actions()];
    let mut total = 0.0;
    for (s, &d) in report.visitation.iter().enumerate() {
        let row = report.q.row(s);
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        base.write_distribution(s, &mut dist);
        let achieved: f64 = row.iter().zip(&dist).map(|(q, p)| q * p).sum();
        total += d * (best - achieved);
    }
    Ok(total)
}

/// Policy completeness `E_μ` evaluated over a finite probe set: the max over
/// probes of the min over the base class of [`completeness_gap`]. Since the
/// true quantity maximizes over the whole boosted class, this is a lower
/// bound on it.
pub fn policy_completeness(
    mdp: &TabularMdp,
    probes: &[&dyn Policy],
    base_class: &[&dyn Policy],
    mu: &[f64],
) -> Result<f64> {
    if probes.is_empty() || base_class.is_empty() {
        return Err(Error::Config("policy completeness needs probes and a base class".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    for probe in probes {
        let report = oracle_report(mdp, *probe, mu)?;
        let mut best = f64::INFINITY;
        for base in base_class {
            best = best.min(completeness_gap_from(&report, *base)?);
        }
        worst = worst.max(best);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_random_mdp;

    fn single_state(reward: f64, gamma: f64) -> TabularMdp {
        TabularMdp::new(1, 1, vec![1.0], vec![reward], gamma, vec![1.0], None).unwrap()
    }

    #[test]
    fn single_state_q_is_geometric_sum() {
        let mdp = single_state(1.0, 0.5);
        let q = exact_q(&mdp, &TabularPolicy::uniform(1, 1)).unwrap();
        assert!((q.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_gives_zero_everything() {
        let base = make_random_mdp(4, 3, 2, 9, 0.8).unwrap();
        let zero = TabularMdp::new(
            4,
            3,
            vec![0.25; 48],
            vec![0.0; 12],
            0.8,
            base.start_dist().to_vec(),
            None,
        )
        .unwrap();
        let pi = TabularPolicy::uniform(4, 3);
        let q = exact_q(&zero, &pi).unwrap();
        assert!(q.as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(exact_value(&zero, &pi, zero.start_dist()).unwrap(), 0.0);
        let g = exact_gradient(&zero, &pi, zero.start_dist()).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gamma_zero_visitation_is_init() {
        let mdp = make_random_mdp(5, 2, 3, 1, 0.0).unwrap();
        let mu = [0.1, 0.2, 0.3, 0.4, 0.0];
        let d = exact_visitation(&mdp, &TabularPolicy::uniform(5, 2), &mu).unwrap();
        for (a, b) in d.iter().zip(&mu) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn absorbing_state_visitation() {
        let mdp = single_state(0.3, 0.9);
        let d = exact_visitation(&mdp, &TabularPolicy::uniform(1, 1), &[1.0]).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_invariants_hold() {
        for seed in 0..20 {
            let mdp = make_random_mdp(6, 3, 3, seed, 0.9).unwrap();
            let pi = crate::envs::random_policy(6, 3, seed + 100);
            let r = oracle_report(&mdp, &pi, mdp.start_dist()).unwrap();
            for s in 0..6 {
                let v: f64 = r.q.row(s).iter().zip(pi.row(s)).map(|(q, p)| q * p).sum();
                assert!((v - r.v[s]).abs() < 1e-8);
            }
            assert!(r.visitation.iter().all(|&d| d >= 0.0));
            assert!((r.visitation.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            assert!(bellman_residual(&mdp, &pi, &r.q) < 1e-8);
        }
    }

    #[test]
    fn point_mass_value_consistency() {
        let mdp = make_random_mdp(5, 2, 2, 4, 0.7).unwrap();
        let pi = TabularPolicy::uniform(5, 2);
        let v = state_values(&mdp, &pi).unwrap();
        let mut e = vec![0.0; 5];
        e[3] = 1.0;
        assert!((exact_value(&mdp, &pi, &e).unwrap() - v[3]).abs() < 1e-12);
    }

    #[test]
    fn single_state_gradient_is_q_over_one_minus_gamma() {
        let mdp = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.2, 0.6], 0.5, vec![1.0], None).unwrap();
        let pi = TabularPolicy::uniform(1, 2);
        let q = exact_q(&mdp, &pi).unwrap();
        let g = exact_gradient(&mdp, &pi, &[1.0]).unwrap();
        for a in 0..2 {
            assert!((g.get(0, a) - q.get(0, a) / 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_policy_single_action_and_dominant() {
        let mdp = make_random_mdp(4, 1, 2, 5, 0.9).unwrap();
        let sol = optimal_policy(&mdp).unwrap();
        assert_eq!(sol.actions, vec![0; 4]);
        // Two states, action 1 always earns 1, action 0 earns 0; same dynamics.
        let mdp = TabularMdp::new(
            2,
            2,
            vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
            0.9,
            vec![1.0, 0.0],
            None,
        )
        .unwrap();
        assert_eq!(optimal_policy(&mdp).unwrap().actions, vec![1, 1]);
    }

    #[test]
    fn mismatch_identities() {
        let mdp = make_random_mdp(4, 2, 3, 12, 0.8).unwrap();
        let star = optimal_policy(&mdp).unwrap();
        let d_star = exact_visitation(&mdp, &star.policy, mdp.start_dist()).unwrap();
        let m = mismatch_coefficients(&mdp, &[&star.policy], &d_star).unwrap();
        assert!((m.c_inf - 1.0).abs() < 1e-9);
        assert!((m.d_inf - 1.0).abs() < 1e-9);
        let uniform = [0.25; 4];
        let m = mismatch_coefficients(&mdp, &[&star.policy], &uniform).unwrap();
        let direct = d_star.iter().copied().fold(0.0, f64::max) * 4.0;
        assert!((m.d_inf - direct).abs() < 1e-9);
    }

    #[test]
    fn zero_denominator_is_infinite() {
        assert_eq!(sup_ratio(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
        assert_eq!(sup_ratio(&[0.0, 1.0], &[0.0, 0.5]), 2.0);
    }

    #[test]
    fn completeness_zero_when_greedy_available() {
        let mdp = make_random_mdp(4, 3, 2, 2, 0.8).unwrap();
        let probe = crate::envs::random_policy(4, 3, 77);
        let q = exact_q(&mdp, &probe).unwrap();
        let greedy: Vec<usize> = (0..4)
            .map(|s| {
                let row = q.row(s);
                (0..3).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap()
            })
            .collect();
        let greedy = TabularPolicy::deterministic(&greedy, 3).unwrap();
        let other = TabularPolicy::uniform(4, 3);
        let e = policy_completeness(&mdp, &[&probe], &[&other, &greedy], mdp.start_dist()).unwrap();
        assert!(e.abs() < 1e-9);
        assert!(policy_completeness(&mdp, &[], &[&other], mdp.start_dist()).is_err());
    }
}
