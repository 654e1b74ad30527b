//! Config-driven experiment runs.
//!
//! A run reads an [`ExperimentConfig`], boosts on the configured MDP, and
//! writes `run_report.json`, `curve.csv`, `policy_tree.json` and
//! `diagnostics.json` into the output directory.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boosting::{boost_online, boost_supervised, Algorithm, BoostConfig, RunReport};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp, TabularPolicy, UniformPolicy};
use crate::oracle::{optimal_policy, policy_completeness};
use crate::rng::{seeded, SimRng};
use crate::tree::{PolicyTree, TreeDocument};
use crate::verify::{domination_sides, gradient_estimate, smoothness_sides, DominationSides, SmoothnessSides};
use crate::weak::{BasePolicyClass, Erm, ErmAlphaMix, WeakLearner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseClassSpec {
    /// Every deterministic policy; fails if there are more than `limit`.
    AllDeterministic {
        #[serde(default = "default_limit")]
        limit: usize,
    },
    RandomDeterministic { count: usize, seed: u64 },
    /// Constant and threshold policies over a scalar state feature; the
    /// feature defaults to the state index.
    Threshold {
        #[serde(default)]
        features: Option<Vec<f64>>,
    },
}

fn default_limit() -> usize {
    4096
}

impl Default for BaseClassSpec {
    fn default() -> Self {
        BaseClassSpec::AllDeterministic { limit: default_limit() }
    }
}

impl BaseClassSpec {
    pub fn build(&self, mdp: &TabularMdp) -> Result<BasePolicyClass> {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        match self {
            BaseClassSpec::AllDeterministic { limit } => BasePolicyClass::all_deterministic(ns, na, *limit),
            BaseClassSpec::RandomDeterministic { count, seed } => {
                BasePolicyClass::random_deterministic(ns, na, *count, *seed)
            }
            BaseClassSpec::Threshold { features } => {
                let features = features.clone().unwrap_or_else(|| (0..ns).map(|s| s as f64).collect());
                if features.len() != ns {
                    return Err(Error::Config(format!(
                        "threshold features have length {}, MDP has {ns} states",
                        features.len()
                    )));
                }
                BasePolicyClass::threshold(&features, na)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeakLearnerSpec {
    Erm,
    /// ERM whose output is mixed with the uniform policy. `alpha` defaults
    /// to `boost.alpha` and must agree with it when given.
    ErmAlphaMix {
        #[serde(default)]
        alpha: Option<f64>,
    },
    /// `N` Hedge learners per round (the online algorithm).
    Hedge,
}

impl WeakLearnerSpec {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            WeakLearnerSpec::Hedge => Algorithm::Online,
            _ => Algorithm::Supervised,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsFlags {
    /// Smoothness inequalities between the output policy and each base policy.
    pub smoothness_check: bool,
    /// Gradient domination at the output policy.
    pub domination_check: bool,
    /// Sampled gradient estimate against the exact gradient at the output policy.
    pub unbiasedness_check: bool,
    /// Policy completeness `E` over the probes `{uniform, output}`.
    pub completeness_probes: bool,
}

impl DiagnosticsFlags {
    pub fn any(&self) -> bool {
        self.smoothness_check || self.domination_check || self.unbiasedness_check || self.completeness_probes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckThresholds {
    /// `--check` fails when `V* − V^{π̄} > max_relative_gap · V*`.
    pub max_relative_gap: f64,
}

impl Default for CheckThresholds {
    fn default() -> Self {
        Self { max_relative_gap: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default)]
    pub base_class: BaseClassSpec,
    pub boost: BoostConfig,
    pub weak_learner: WeakLearnerSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsFlags,
    #[serde(default)]
    pub check: CheckThresholds,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.boost.validate()?;
        if let WeakLearnerSpec::ErmAlphaMix { alpha: Some(a) } = self.weak_learner {
            if a != self.boost.alpha {
                return Err(Error::Config(format!(
                    "weak_learner alpha {a} differs from boost.alpha {}",
                    self.boost.alpha
                )));
            }
        }
        if !(self.check.max_relative_gap >= 0.0) {
            return Err(Error::Config("check.max_relative_gap must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnbiasednessDiagnostic {
    pub episodes: usize,
    pub mean: f64,
    pub standard_error: f64,
    pub exact: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessDiagnostic {
    pub pairs: usize,
    pub worst_value_ratio: f64,
    pub worst_visitation_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationDiagnostic {
    #[serde(flatten)]
    pub sides: DominationSides,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<SmoothnessDiagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domination: Option<DominationDiagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unbiasedness: Option<UnbiasednessDiagnostic>,
    /// `E` over `{uniform, output}` from `d₀`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completeness: Option<f64>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.smoothness.as_ref().is_none_or(|d| d.pass)
            && self.domination.as_ref().is_none_or(|d| d.pass)
            && self.unbiasedness.as_ref().is_none_or(|d| d.pass)
    }
}

const UNBIASEDNESS_EPISODES: usize = 20_000;
const SMOOTHNESS_PAIRS: usize = 64;

fn diagnostics(
    mdp: &TabularMdp,
    output: &PolicyTree,
    class: &BasePolicyClass,
    flags: &DiagnosticsFlags,
    rng: &mut SimRng,
) -> Result<Diagnostics> {
    let pi = TabularPolicy::tabulate(output, mdp.n_states());
    let mut out = Diagnostics::default();
    if flags.smoothness_check {
        let pairs = class.len().min(SMOOTHNESS_PAIRS);
        let (mut wv, mut wd) = (0.0f64, 0.0f64);
        for k in 0..pairs {
            let SmoothnessSides {
                value_residual,
                value_bound,
                visitation_shift,
                visitation_bound,
            } = smoothness_sides(mdp, &pi, class.table(k))?;
            if value_bound > 0.0 {
                wv = wv.max(value_residual / value_bound);
            }
            if visitation_bound > 0.0 {
                wd = wd.max(visitation_shift / visitation_bound);
            }
        }
        out.smoothness = Some(SmoothnessDiagnostic {
            pairs,
            worst_value_ratio: wv,
            worst_visitation_ratio: wd,
            pass: wv <= 1.0 + 1e-9 && wd <= 1.0 + 1e-9,
        });
    }
    if flags.domination_check {
        let sides = domination_sides(mdp, &pi, class)?;
        let pass = sides.gap <= sides.episodic_bound + 1e-9 && sides.gap <= sides.nu_bound + 1e-9;
        out.domination = Some(DominationDiagnostic { sides, pass });
    }
    if flags.unbiasedness_check {
        let probe_seed = rng.random();
        let probe = crate::envs::random_policy(mdp.n_states(), mdp.n_actions(), probe_seed);
        let (mean, se, exact) = gradient_estimate(mdp, &pi, &probe, UNBIASEDNESS_EPISODES, rng)?;
        let z = if se > 0.0 { (mean - exact).abs() / se } else { (mean - exact).abs() / 1e-12 };
        out.unbiasedness = Some(UnbiasednessDiagnostic {
            episodes: UNBIASEDNESS_EPISODES,
            mean,
            standard_error: se,
            exact,
            z,
            pass: z <= 4.0,
        });
    }
    if flags.completeness_probes {
        let uniform = UniformPolicy { n_actions: mdp.n_actions() };
        let probes: [&dyn Policy; 2] = [&uniform, &pi];
        let members: Vec<&dyn Policy> = class.members().iter().map(|m| &*m.policy as &dyn Policy).collect();
        out.completeness = Some(policy_completeness(mdp, &probes, &members, mdp.start_dist())?);
    }
    Ok(out)
}

/// What a run produced, in memory.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: RunReport,
    pub tree: PolicyTree,
    pub diagnostics: Diagnostics,
    /// `gap ≤ max_relative_gap · V*` and every requested diagnostic passed.
    pub check_passed: bool,
}

/// Runs one experiment with `seed` and writes its files into `output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, output_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let mdp = cfg.env.build()?;
    let class = cfg.base_class.build(&mdp)?;
    let mut boost = cfg.boost.clone();
    boost.seed = seed;
    let mut rng = seeded(seed);
    let (tree, report) = match &cfg.weak_learner {
        WeakLearnerSpec::Erm => boost_supervised(&mdp, &class, &Erm, &boost, &mut rng)?,
        WeakLearnerSpec::ErmAlphaMix { .. } => {
            let learner: &dyn WeakLearner = &ErmAlphaMix { alpha: boost.alpha };
            boost_supervised(&mdp, &class, learner, &boost, &mut rng)?
        }
        WeakLearnerSpec::Hedge => boost_online(&mdp, &class, &boost, &mut rng)?,
    };
    let diagnostics = diagnostics(&mdp, &tree, &class, &cfg.diagnostics, &mut rng)?;
    let v_star = optimal_policy(&mdp)?.v_star;
    let check_passed = report.gap <= cfg.check.max_relative_gap * v_star && diagnostics.passed();

    fs::create_dir_all(output_dir)?;
    write_json(&output_dir.join("run_report.json"), &report)?;
    report.write_curve_csv(BufWriter::new(fs::File::create(output_dir.join("curve.csv"))?))?;
    write_json(&output_dir.join("policy_tree.json"), &tree.to_document())?;
    write_json(&output_dir.join("diagnostics.json"), &diagnostics)?;
    Ok(ExperimentOutcome {
        report,
        tree,
        diagnostics,
        check_passed,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a tree written by [`run_experiment`], resolving base ids against
/// the configured base class.
pub fn load_policy_tree(cfg: &ExperimentConfig, path: &Path) -> Result<PolicyTree> {
    let mdp = cfg.env.build()?;
    let class = cfg.base_class.build(&mdp)?;
    let doc: TreeDocument = serde_json::from_str(&fs::read_to_string(path)?)?;
    PolicyTree::from_document(&doc, &class)
}
