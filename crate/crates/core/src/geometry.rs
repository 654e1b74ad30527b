//! Euclidean projection onto the probability simplex and the `∞,1` policy norm.

use crate::mdp::Policy;
use crate::oracle::SaMatrix;

/// Slack under which a vector is treated as already lying in the simplex.
const IN_SIMPLEX_TOL: f64 = 1e-12;

fn in_simplex(x: &[f64]) -> bool {
    x.iter().all(|&v| v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= IN_SIMPLEX_TOL
}

/// `Γ[x] = argmin_{y ∈ Δ} ‖x − y‖₂` by sort-and-threshold (water filling).
///
/// Points already in the simplex are returned unchanged, which makes the
/// projection exactly idempotent.
pub fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    project_simplex_in_place(&mut out);
    out
}

pub fn project_simplex_in_place(x: &mut [f64]) {
    debug_assert!(!x.is_empty());
    if in_simplex(x) {
        return;
    }
    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

/// `‖x − Γ[x]‖₂`.
pub fn dist_to_simplex(x: &[f64]) -> f64 {
    let p = project_simplex(x);
    x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `max_s Σ_a |δ(s,a)|`.
pub fn norm_inf1(delta: &SaMatrix) -> f64 {
    (0..delta.n_states())
        .map(|s| delta.row(s).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `π' − π` as an `|S| × |A|` matrix.
pub fn policy_difference<P, Q>(new: &P, old: &Q, n_states: usize) -> SaMatrix
where
    P: Policy + ?Sized,
    Q: Policy + ?Sized,
{
    let na = new.n_actions();
    let (mut a, mut b) = (vec![0.0; na], vec![0.0; na]);
    let mut rows = Vec::with_capacity(n_states);
    for s in 0..n_states {
        new.write_distribution(s, &mut a);
        old.write_distribution(s, &mut b);
        rows.push(a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
    }
    SaMatrix::from(rows)
}

#[cfg(test)]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
