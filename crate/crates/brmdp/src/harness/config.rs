//! Experiment configuration: which environment to build, which formulations
//! to compare, how to solve them, and how to evaluate the solved policies.
//!
//! Configs are plain JSON (see `schema/experiment.schema.json` in the
//! repository root for the published schema). Every load path runs the full
//! validation, so a config that parses is also internally consistent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{build_inventory, build_maze, InventoryConfig, MazeConfig, MazeVariant};
use crate::error::{Error, Result};
use crate::model::{Environment, ParameterSpace};
use crate::posterior::{FinitePosterior, NormalMeanPosterior, Posterior};
use crate::risk::RiskFunctional;

/// Which benchmark problem the experiment runs on.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentSpec {
    Inventory(InventoryConfig),
    Maze(MazeConfig),
}

impl EnvironmentSpec {
    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvironmentSpec::Inventory(cfg) => build_inventory(cfg),
            EnvironmentSpec::Maze(cfg) => build_maze(cfg),
        }
    }

    /// The parameter value the data generator and the evaluator use.
    pub fn theta_true(&self) -> f64 {
        match self {
            EnvironmentSpec::Inventory(cfg) => cfg.demand.theta_true,
            EnvironmentSpec::Maze(cfg) => match &cfg.variant {
                MazeVariant::UncertainTransition { theta_true, .. } => *theta_true,
                MazeVariant::UncertainCost { theta_true, .. } => *theta_true,
            },
        }
    }

    /// The prior belief the Bayes-risk formulations start from.
    pub fn initial_belief(&self, env: &Environment) -> Result<Posterior> {
        let finite_prior = |weights: &Option<Vec<f64>>| -> Result<Posterior> {
            let fin = match weights {
                Some(w) => {
                    let atoms = env
                        .family()
                        .space
                        .atoms()
                        .expect("finite prior weights imply a finite space");
                    FinitePosterior::new(atoms.to_vec(), w.clone())?
                }
                None => FinitePosterior::uniform(env.family())?,
            };
            Ok(Posterior::Finite(fin))
        };
        match self {
            EnvironmentSpec::Inventory(cfg) => finite_prior(&cfg.demand.prior_weights),
            EnvironmentSpec::Maze(cfg) => match &cfg.variant {
                MazeVariant::UncertainTransition { prior_weights, .. } => {
                    finite_prior(prior_weights)
                }
                MazeVariant::UncertainCost {
                    prior_mean,
                    prior_variance,
                    ..
                } => Ok(Posterior::NormalMean(NormalMeanPosterior::new(
                    *prior_mean,
                    *prior_variance,
                )?)),
            },
        }
    }
}

/// Risk functional selector for the Bayes-risk formulations; the tail level
/// comes from the experiment-wide `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoKind {
    Expectation,
    Var,
    Cvar,
}

/// One column of the comparison: plan against the posterior with a risk
/// functional, or plug the maximum-likelihood point estimate into the
/// known-parameter problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulationSpec {
    Brmdp(RhoKind),
    Empirical,
}

impl FormulationSpec {
    /// Stable label used in CSV output and logs.
    pub fn label(&self) -> &'static str {
        match self {
            FormulationSpec::Brmdp(RhoKind::Expectation) => "brmdp_expectation",
            FormulationSpec::Brmdp(RhoKind::Var) => "brmdp_var",
            FormulationSpec::Brmdp(RhoKind::Cvar) => "brmdp_cvar",
            FormulationSpec::Empirical => "empirical",
        }
    }

    /// The risk functional this formulation plans with. The empirical
    /// plug-in always optimizes the plain expectation.
    pub fn functional(&self, alpha: Option<f64>) -> Result<RiskFunctional> {
        let need_alpha = || {
            alpha.ok_or_else(|| {
                Error::Config("tail-risk formulations need an `alpha` in the config".into())
            })
        };
        match self {
            FormulationSpec::Brmdp(RhoKind::Expectation) | FormulationSpec::Empirical => {
                Ok(RiskFunctional::expectation())
            }
            FormulationSpec::Brmdp(RhoKind::Var) => RiskFunctional::var(need_alpha()?),
            FormulationSpec::Brmdp(RhoKind::Cvar) => RiskFunctional::cvar(need_alpha()?),
        }
    }
}

/// Which solver turns a belief into a policy.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverSpec {
    /// Full enumeration of the reachable augmented states; finite parameter
    /// spaces only.
    Exact,
    /// Nested simulation: `outer` parameter draws times `inner` outcome
    /// draws per node and action. The remaining fields tune the belief grid
    /// used for conjugate-normal beliefs and default to the solver's own
    /// settings when omitted.
    Nso {
        outer: usize,
        inner: usize,
        #[serde(default)]
        obs_cap: Option<usize>,
        #[serde(default)]
        mean_step: Option<f64>,
        #[serde(default)]
        mean_halfwidth: Option<f64>,
        #[serde(default)]
        mean_bounds: Option<(f64, f64)>,
    },
    /// Adaptive play allocation with a fixed per-stage play budget;
    /// expectation objective and finite parameter spaces only.
    Ucb { plays_per_stage: usize },
}

/// How solved policies are scored against the true parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationSpec {
    /// Exact recursion over the reachable trajectory tree; countable outcome
    /// support only.
    Exact,
    /// Monte Carlo average over simulated episodes.
    Rollout { episodes: usize },
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        EvaluationSpec::Exact
    }
}

/// Effort spent computing the true-optimum reference value when the
/// parameter space is continuous and no exact solve exists: a nested solve
/// at the true parameter followed by a rollout of the resulting policy.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(default = "default_reference_draws")]
    pub outer: usize,
    #[serde(default = "default_reference_draws")]
    pub inner: usize,
    #[serde(default = "default_reference_episodes")]
    pub episodes: usize,
}

fn default_reference_draws() -> usize {
    64
}

fn default_reference_episodes() -> usize {
    1_000_000
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            outer: default_reference_draws(),
            inner: default_reference_draws(),
            episodes: default_reference_episodes(),
        }
    }
}

fn default_bin_width() -> f64 {
    0.05
}

/// A full experiment: data sizes crossed with replications, solved under
/// every listed formulation and scored against the true parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    /// Formulations to compare; their order fixes the output order.
    pub formulations: Vec<FormulationSpec>,
    pub solver: SolverSpec,
    /// Dataset sizes `H`; one batch of replications runs per entry.
    pub data_sizes: Vec<usize>,
    /// Replications per dataset size.
    pub replications: usize,
    /// Master seed; every replication derives its own streams from it.
    #[serde(default)]
    pub seed: u64,
    /// Tail level for the value-at-risk and conditional value-at-risk
    /// formulations.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// Bin width of the emitted true-performance histogram.
    #[serde(default = "default_bin_width")]
    pub histogram_bin_width: f64,
    /// Default output directory; the command line `--out` overrides it.
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Check everything that can be checked without running: the environment
    /// builds, the true parameter is generable, and the solver/evaluation
    /// combination is computable.
    pub fn validate(&self) -> Result<()> {
        let env = self.environment.build()?;
        let space = &env.family().space;
        let theta_true = self.environment.theta_true();
        if !space.contains(theta_true) {
            return Err(Error::ThetaOutsideSpace { theta: theta_true });
        }
        if let ParameterSpace::Finite(atoms) = space {
            if !atoms.contains(&theta_true) {
                return Err(Error::Config(format!(
                    "true parameter {theta_true} is not one of the candidate values"
                )));
            }
        }
        self.environment.initial_belief(&env)?;

        if self.replications == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.data_sizes.is_empty() {
            return Err(Error::Config("need at least one dataset size".into()));
        }
        for (i, &h) in self.data_sizes.iter().enumerate() {
            if self.data_sizes[..i].contains(&h) {
                return Err(Error::Config(format!("duplicate dataset size {h}")));
            }
        }
        if self.formulations.is_empty() {
            return Err(Error::Config("need at least one formulation".into()));
        }
        for (i, f) in self.formulations.iter().enumerate() {
            if self.formulations[..i].contains(f) {
                return Err(Error::Config(format!(
                    "formulation {} is listed twice",
                    f.label()
                )));
            }
            // resolves the functional, which checks alpha where needed
            f.functional(self.alpha)?;
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidAlpha { alpha: a });
            }
        }
        if !(self.histogram_bin_width > 0.0) || !self.histogram_bin_width.is_finite() {
            return Err(Error::Config(format!(
                "histogram bin width must be positive, got {}",
                self.histogram_bin_width
            )));
        }

        let finite = matches!(space, ParameterSpace::Finite(_));
        let countable_outcomes = !matches!(
            env.family().kind,
            crate::model::FamilyKind::TruncatedNormal { .. }
        );
        match &self.solver {
            SolverSpec::Exact => {
                if !finite || !countable_outcomes {
                    return Err(Error::Config(
                        "the exact solver needs a finite parameter space \
                         and a countable outcome support"
                            .into(),
                    ));
                }
            }
            SolverSpec::Nso { outer, inner, .. } => {
                if *outer == 0 || *inner == 0 {
                    return Err(Error::Config(
                        "nested simulation needs at least one outer and one inner draw".into(),
                    ));
                }
            }
            SolverSpec::Ucb { plays_per_stage } => {
                if !finite {
                    return Err(Error::Config(
                        "adaptive play allocation needs a finite parameter space".into(),
                    ));
                }
                if *plays_per_stage == 0 {
                    return Err(Error::Config("need at least one play per stage".into()));
                }
                for f in &self.formulations {
                    if matches!(f, FormulationSpec::Brmdp(k) if *k != RhoKind::Expectation) {
                        return Err(Error::Config(
                            "adaptive play allocation only optimizes the expectation; \
                             pick the exact or nested-simulation solver for tail risk"
                                .into(),
                        ));
                    }
                }
            }
        }
        match &self.evaluation {
            EvaluationSpec::Exact => {
                if !countable_outcomes {
                    return Err(Error::Config(
                        "exact evaluation needs a countable outcome support; \
                         use rollout evaluation with this outcome family"
                            .into(),
                    ));
                }
            }
            EvaluationSpec::Rollout { episodes } => {
                if *episodes == 0 {
                    return Err(Error::Config("rollout evaluation needs episodes".into()));
                }
            }
        }
        if self.reference.outer == 0 || self.reference.inner == 0 || self.reference.episodes == 0 {
            return Err(Error::Config(
                "reference solve needs positive draw and episode counts".into(),
            ));
        }
        Ok(())
    }
}
