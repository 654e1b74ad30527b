//! Non-convex Frank-Wolfe (maximization) with an approximate linear
//! optimization oracle.
//!
//! Two step-size modes: the deterministic `min{1, 2κ/t}` schedule for
//! gradient-dominated objectives, which returns the last iterate, and the
//! gap-matching rule `η_t = clip(gap_t / (LD²))` for local stationarity, which
//! returns the iterate preceding the smallest step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A maximization problem over a convex set.
pub trait FwProblem {
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Approximate `argmax_{z ∈ K} gradᵀz`.
    fn oracle(&self, grad: &[f64]) -> Vec<f64>;
    fn feasible(&self, x: &[f64]) -> bool;
}

/// Problem constants used by the step rules and the rate bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwConstants {
    /// Smoothness `L`.
    pub smoothness_l: f64,
    /// Diameter `D`.
    pub diameter_d: f64,
    /// Bound `H` on the objective range.
    pub bound_h: f64,
    /// Gradient-domination factor `κ`.
    pub kappa: f64,
    /// Gradient-domination slack `τ`.
    pub tau: f64,
    /// Tolerance `ε` of the gap-matching step rule.
    pub eps_match: f64,
    /// Oracle accuracy `ε₀`.
    pub eps0: f64,
}

impl FwConstants {
    /// `2κ²·max{LD², H}/T + τ + κε₀`.
    pub fn gradient_dominated_bound(&self, t_rounds: usize) -> f64 {
        let lds = self.smoothness_l * self.diameter_d.powi(2);
        2.0 * self.kappa.powi(2) * lds.max(self.bound_h) / t_rounds as f64 + self.tau + self.kappa * self.eps0
    }

    /// `sqrt(2HLD²/T) + 3ε + ε₀`.
    pub fn stationarity_bound(&self, t_rounds: usize) -> f64 {
        let lds = self.smoothness_l * self.diameter_d.powi(2);
        (2.0 * self.bound_h * lds / t_rounds as f64).sqrt() + 3.0 * self.eps_match + self.eps0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FwMode {
    GradientDominated,
    Stationarity,
}

/// Per-round record; entry `t − 1` describes round `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FwTrace {
    /// `x_t`.
    pub iterates: Vec<Vec<f64>>,
    pub etas: Vec<f64>,
    /// `∇f(x_{t−1})ᵀ(z_t − x_{t−1})`.
    pub gaps: Vec<f64>,
    /// `f(x_t)`.
    pub values: Vec<f64>,
    /// `|LD²η_t − gap_t|`; zero in gradient-dominated mode.
    pub match_residuals: Vec<f64>,
}

impl FwTrace {
    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    /// Writes `t,eta,gap,f` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "eta", "gap", "f"])?;
        for t in 0..self.len() {
            w.write_record([
                (t + 1).to_string(),
                self.etas[t].to_string(),
                self.gaps[t].to_string(),
                self.values[t].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `min{1, 2κ/t}`.
pub fn fw_step_gd(t: usize, kappa: f64) -> f64 {
    assert!(t >= 1, "round index starts at 1");
    (2.0 * kappa / t as f64).min(1.0)
}

/// Index of the smallest value; ties go to the earliest entry.
pub fn argmin_earliest(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v < values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Runs `T` rounds from `x0` and returns the selected iterate with the trace.
pub fn ncfw_run<F: FwProblem + ?Sized>(
    problem: &F,
    constants: &FwConstants,
    t_rounds: usize,
    mode: FwMode,
    x0: &[f64],
) -> Result<(Vec<f64>, FwTrace)> {
    if t_rounds == 0 {
        return Err(Error::Config("Frank-Wolfe needs at least one round".into()));
    }
    if !problem.feasible(x0) {
        return Err(Error::Config("starting point is infeasible".into()));
    }
    let lds = constants.smoothness_l * constants.diameter_d.powi(2);
    let mut trace = FwTrace::default();
    let mut x = x0.to_vec();
    for t in 1..=t_rounds {
        let grad = problem.gradient(&x);
        let z = problem.oracle(&grad);
        if z.len() != x.len() || !problem.feasible(&z) {
            return Err(Error::Contract(format!("oracle returned an infeasible point at round {t}")));
        }
        let gap: f64 = grad.iter().zip(z.iter().zip(&x)).map(|(g, (z, x))| g * (z - x)).sum();
        let (eta, residual) = match mode {
            FwMode::GradientDominated => (fw_step_gd(t, constants.kappa), 0.0),
            FwMode::Stationarity => {
                let eta = (gap / lds).clamp(0.0, 1.0);
                (eta, (lds * eta - gap).abs())
            }
        };
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = (1.0 - eta) * *xi + eta * zi;
        }
        trace.values.push(problem.objective(&x));
        trace.iterates.push(x.clone());
        trace.etas.push(eta);
        trace.gaps.push(gap);
        trace.match_residuals.push(residual);
    }
    let out = match mode {
        FwMode::GradientDominated => x,
        FwMode::Stationarity => match argmin_earliest(&trace.etas) {
            Some(0) | None => x0.to_vec(),
            Some(k) => trace.iterates[k - 1].clone(),
        },
    };
    Ok((out, trace))
}

/// Worst-case sequence `g_t = (1 − σ_t/C)g_{t−1} + σ_t²D + σ_tE` from
/// `g_0 = H`, with `σ_t = min{1, 2C/t}`. Entry `t − 1` holds `g_t`.
pub fn fwlr_sequence(c: f64, d: f64, e: f64, h: f64, t_max: usize) -> Vec<f64> {
    let mut g = h;
    (1..=t_max)
        .map(|t| {
            let sigma = (2.0 * c / t as f64).min(1.0);
            g = (1.0 - sigma / c) * g + sigma * sigma * d + sigma * e;
            g
        })
        .collect()
}

/// `2C²·max{2D, H}/t + CE`.
pub fn fwlr_bound(c: f64, d: f64, e: f64, h: f64, t: usize) -> f64 {
    2.0 * c * c * (2.0 * d).max(h) / t as f64 + c * e
}

/// Whether [`fwlr_sequence`] stays under [`fwlr_bound`] for every `t ≤ t_max`.
pub fn fwlr_bound_check(c: f64, d: f64, e: f64, h: f64, t_max: usize) -> bool {
    assert!(c >= 1.0, "C must be at least 1");
    fwlr_sequence(c, d, e, h, t_max)
        .iter()
        .enumerate()
        .all(|(i, &g)| g <= fwlr_bound(c, d, e, h, i + 1))
}

/// Linear maximization over the simplex: the vertex of the largest
/// coordinate, lowest index on ties.
pub fn simplex_vertex(grad: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for (i, &g) in grad.iter().enumerate() {
        if g > grad[best] {
            best = i;
        }
    }
    let mut z = vec![0.0; grad.len()];
    z[best] = 1.0;
    z
}

fn on_simplex(x: &[f64]) -> bool {
    x.iter().all(|&v| v >= -1e-12) && (x.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

/// `f(x) = −(λ/2)‖x − c‖²` over the simplex, with `c` in the simplex so that
/// `c` is the maximizer and `f* = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveQuadratic {
    pub center: Vec<f64>,
    pub curvature: f64,
}

impl ConcaveQuadratic {
    /// Constants for the `ℓ₂` geometry of the simplex: `L = λ`, `D = √2`,
    /// `H = max_{x ∈ Δ} |f(x)|`, `κ = 1`, `τ = 0` (concavity), exact oracle.
    pub fn constants(&self) -> FwConstants {
        let h = (0..self.center.len())
            .map(|i| {
                let mut v = vec![0.0; self.center.len()];
                v[i] = 1.0;
                -self.objective(&v)
            })
            .fold(0.0, f64::max);
        FwConstants {
            smoothness_l: self.curvature,
            diameter_d: 2f64.sqrt(),
            bound_h: h,
            kappa: 1.0,
            tau: 0.0,
            eps_match: 0.0,
            eps0: 0.0,
        }
    }
}

impl FwProblem for ConcaveQuadratic {
    fn objective(&self, x: &[f64]) -> f64 {
        -0.5 * self.curvature * x.iter().zip(&self.center).map(|(x, c)| (x - c).powi(2)).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(x, c)| -self.curvature * (x - c)).collect()
    }

    fn oracle(&self, grad: &[f64]) -> Vec<f64> {
        simplex_vertex(grad)
    }

    fn feasible(&self, x: &[f64]) -> bool {
        on_simplex(x)
    }
}
