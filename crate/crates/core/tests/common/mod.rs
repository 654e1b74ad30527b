#![allow(dead_code)]

use rand::Rng;
use rlboost::{Policy, TabularMdp};

/// Samples an index from `probs` by inverse CDF.
pub fn draw<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap()
}

/// Discounted return of one fixed-horizon rollout from `s0`, optionally
/// forcing the first action.
pub fn discounted_rollout<P: Policy + ?Sized, R: Rng>(
    mdp: &TabularMdp,
    pi: &P,
    s0: usize,
    first_action: Option<usize>,
    horizon: usize,
    rng: &mut R,
) -> f64 {
    let (mut s, mut total, mut disc) = (s0, 0.0, 1.0);
    for t in 0..horizon {
        let a = match (t, first_action) {
            (0, Some(a)) => a,
            _ => draw(&pi.action_distribution(s), rng),
        };
        total += disc * mdp.reward(s, a);
        disc *= mdp.gamma();
        s = draw(mdp.transition_row(s, a), rng);
    }
    total
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Every deterministic action assignment, odometer order.
pub fn all_assignments(n_states: usize, n_actions: usize) -> Vec<Vec<usize>> {
    let total = n_actions.pow(n_states as u32);
    (0..total)
        .map(|mut k| {
            (0..n_states)
                .map(|_| {
                    let a = k % n_actions;
                    k /= n_actions;
                    a
                })
                .collect()
        })
        .collect()
}
