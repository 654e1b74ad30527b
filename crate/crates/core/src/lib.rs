//! Boosting for reinforcement learning on tabular MDPs.
//!
//! Weak policy learners (ERM over a finite policy class, its uniform-mixture
//! degradation, or Hedge as an online learner) are aggregated into a
//! two-layer [`PolicyTree`](tree::PolicyTree): an inner boosting loop builds
//! affine [`Shrub`](tree::Shrub)s over base policies from smoothed linear
//! gains, and an outer non-convex Frank-Wolfe loop mixes their simplex
//! projections. Every quantity the loops estimate by sampling can also be
//! computed exactly by [`oracle`], which is what the test suites and the
//! `verify` entry point lean on.
//!
//! Module map:
//!
//! * [`mdp`]: tabular MDPs, the [`Policy`](mdp::Policy) trait, rollouts.
//! * [`oracle`]: exact values, Q-functions, visitations, gradients, optimal policies.
//! * [`geometry`]: simplex projection and the `∞,1` policy norm.
//! * [`tree`]: shrubs and policy trees.
//! * [`sampler`]: the trajectory sampler producing `(s, Q̂)` pairs.
//! * [`smoothing`]: Moreau smoothing of the Lipschitz-extended linear loss.
//! * [`weak`]: weak learners.
//! * [`frank_wolfe`]: generic non-convex Frank-Wolfe.
//! * [`boosting`]: the supervised and online boosting loops and the step chooser.
//! * [`envs`]: benchmark MDP generators.
//! * [`experiment`], [`verify`]: the config-driven experiment runner and
//!   verification suites behind the CLI.

pub mod boosting;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod frank_wolfe;
pub mod geometry;
pub mod mdp;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod smoothing;
pub mod tree;
pub mod verify;
pub mod weak;

pub use error::{Error, Result};
pub use mdp::{Policy, TabularMdp, TabularPolicy};
pub use tree::{PolicyTree, Shrub};
