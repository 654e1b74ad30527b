//! Moreau smoothing of a Lipschitz-extended linear loss.
//!
//! For a linear loss `f(y) = cᵀy` the extension adds `G·dist(y, Δ_A)`, and
//! the Moreau envelope with parameter `β` smooths the result:
//!
//! ```text
//! F(x) = min_y  cᵀy + G·dist(y, Δ) + ‖x − y‖² / (2β)
//! ∇F(x) = (x − prox(x)) / β
//! ```
//!
//! The prox of a linear term plus a scaled distance function has a closed
//! form: shift by `−βc`, then move at most `βG` toward the simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_to_simplex, project_simplex};

/// `f(y) = cᵀy`, defined on all of `ℝ^|A|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLoss {
    pub coeffs: Vec<f64>,
}

impl LinearLoss {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().zip(y).map(|(c, y)| c * y).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub beta: f64,
    pub g_lip: f64,
}

impl SmoothingParams {
    pub fn new(beta: f64, g_lip: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(g_lip > 0.0 && g_lip.is_finite()) {
            return Err(Error::Config(format!(
                "smoothing needs beta > 0 and G > 0 (got {beta}, {g_lip})"
            )));
        }
        Ok(Self { beta, g_lip })
    }

    /// `β = sqrt(1 / (αN))`.
    pub fn default_beta(alpha: f64, n_inner: usize) -> f64 {
        (1.0 / (alpha * n_inner as f64)).sqrt()
    }

    /// `G = |A| / (1 − γ)`, the scale of the sampler's Q estimates.
    pub fn default_g(n_actions: usize, gamma: f64) -> f64 {
        n_actions as f64 / (1.0 - gamma)
    }
}

/// Proximal point of `β·(cᵀ· + G·dist(·, Δ))` at `x`.
pub fn prox_step(c: &LinearLoss, params: SmoothingParams, x: &[f64]) -> Vec<f64> {
    let shifted: Vec<f64> = x
        .iter()
        .zip(&c.coeffs)
        .map(|(x, c)| x - params.beta * c)
        .collect();
    let proj = project_simplex(&shifted);
    let offset: Vec<f64> = shifted.iter().zip(&proj).map(|(s, p)| s - p).collect();
    let dist = offset.iter().map(|v| v * v).sum::<f64>().sqrt();
    let reach = params.beta * params.g_lip;
    if dist <= reach {
        proj
    } else {
        let scale = reach / dist;
        shifted.iter().zip(&offset).map(|(s, o)| s - scale * o).collect()
    }
}

/// `∇F(x) = (x − prox(x)) / β`.
pub fn extension_gradient(c: &LinearLoss, params: SmoothingParams, x: &[f64]) -> Vec<f64> {
    prox_step(c, params, x)
        .iter()
        .zip(x)
        .map(|(p, x)| (x - p) / params.beta)
        .collect()
}

/// `F(x)`, evaluated at the prox point.
pub fn envelope_value(c: &LinearLoss, params: SmoothingParams, x: &[f64]) -> f64 {
    let y = prox_step(c, params, x);
    let quad: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
    c.value(&y) + params.g_lip * dist_to_simplex(&y) + quad / (2.0 * params.beta)
}
