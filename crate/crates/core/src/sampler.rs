//! The trajectory sampler: one episode yields `s ~ d^π_μ` and an unbiased
//! estimate of `Q^π(s, ·)`.
//!
//! Phase one walks under `π` and stops at each step with probability `1 − γ`,
//! accepting the current state. Phase two plays a uniformly drawn probe
//! action there, continues under `π` with the same termination coin, and
//! records the undiscounted reward sum `R` (including the probe step). The
//! estimate is `|A|·R` on the probe action and zero elsewhere.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{check_distribution, Policy, TabularMdp};
use crate::rng::{sample_categorical, StreamSplitter};

/// One sampler output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSample {
    pub state: usize,
    /// `|A|·R` at `probe_action`, zero elsewhere.
    pub q_hat: Vec<f64>,
    pub probe_action: usize,
    /// Undiscounted reward sum `R` from the accepted step onwards.
    pub reward_sum: f64,
    /// Set when the horizon cap cut either phase short.
    pub truncated: bool,
}

impl QSample {
    /// `Q̂ᵀ π(· | state)`.
    pub fn dot<P: Policy + ?Sized>(&self, policy: &P) -> f64 {
        let dist = policy.action_distribution(self.state);
        self.q_hat[self.probe_action] * dist[self.probe_action]
    }
}

fn validate<P: Policy + ?Sized>(mdp: &TabularMdp, policy: &P, mu: &[f64], horizon_cap: usize) -> Result<()> {
    mdp.check_policy(policy)?;
    check_distribution("mu", mu, mdp.n_states())?;
    if horizon_cap == 0 {
        return Err(Error::Config("horizon_cap must be at least 1".into()));
    }
    Ok(())
}

fn draw<P, R>(mdp: &TabularMdp, policy: &P, mu: &[f64], rng: &mut R, horizon_cap: usize) -> QSample
where
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    let na = mdp.n_actions();
    let gamma = mdp.gamma();
    let mut dist = vec![0.0; na];
    let mut truncated = false;

    let mut s = sample_categorical(mu, rng);
    let probe_action = rng.random_range(0..na);

    let mut steps = 0;
    while rng.random::<f64>() < gamma {
        if steps >= horizon_cap {
            truncated = true;
            break;
        }
        policy.write_distribution(s, &mut dist);
        let a = sample_categorical(&dist, rng);
        s = mdp.step(s, a, rng);
        steps += 1;
    }
    let state = s;

    let mut a = probe_action;
    let mut reward_sum = mdp.reward(s, a);
    let mut steps = 1;
    while rng.random::<f64>() < gamma {
        if steps >= horizon_cap {
            truncated = true;
            break;
        }
        s = mdp.step(s, a, rng);
        policy.write_distribution(s, &mut dist);
        a = sample_categorical(&dist, rng);
        reward_sum += mdp.reward(s, a);
        steps += 1;
    }
    if truncated {
        log::debug!("sampler episode truncated at horizon cap {horizon_cap}");
    }

    let mut q_hat = vec![0.0; na];
    q_hat[probe_action] = na as f64 * reward_sum;
    QSample {
        state,
        q_hat,
        probe_action,
        reward_sum,
        truncated,
    }
}

/// Runs one sampler episode.
pub fn sample_q<P, R>(mdp: &TabularMdp, policy: &P, mu: &[f64], rng: &mut R, horizon_cap: usize) -> Result<QSample>
where
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    validate(mdp, policy, mu, horizon_cap)?;
    Ok(draw(mdp, policy, mu, rng, horizon_cap))
}

/// `count` independent sampler episodes. Episode `i` runs on stream `i` of a
/// splitter seeded from `rng`, so the output is the same however the
/// episodes are scheduled across threads.
pub fn batch_sample<P, R>(
    mdp: &TabularMdp,
    policy: &P,
    mu: &[f64],
    rng: &mut R,
    count: usize,
    horizon_cap: usize,
) -> Result<Vec<QSample>>
where
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    validate(mdp, policy, mu, horizon_cap)?;
    if count == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let split = StreamSplitter::from_rng(rng);
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| draw(mdp, policy, mu, &mut split.stream(i), horizon_cap))
        .collect())
}

/// Writes `state,probe_action,R` rows.
pub fn write_samples_csv<W: Write>(writer: W, samples: &[QSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["state", "probe_action", "R"])?;
    for q in samples {
        w.write_record([
            q.state.to_string(),
            q.probe_action.to_string(),
            q.reward_sum.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
