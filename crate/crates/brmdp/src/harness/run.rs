//! Replication engine. One experiment crosses dataset sizes with
//! replications: each replication draws its own dataset at the true
//! parameter, every formulation turns that dataset into a policy, and each
//! policy is scored against the truth. Failures are recorded per replication
//! rather than aborting the batch.
//!
//! Determinism: every random quantity comes from a stream derived from the
//! master seed and the coordinates of the consumer (dataset size,
//! replication index, formulation index), never from execution order. Runs
//! with different thread counts produce identical results.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{EvaluationSpec, ExperimentConfig, FormulationSpec, SolverSpec};
use super::evaluate::{evaluate_exact, evaluate_rollout, evaluate_true_performance, Evaluation};
use super::mle::mle;
use crate::error::{Error, Result};
use crate::model::{Environment, ParameterSpace};
use crate::posterior::{FinitePosterior, NormalMeanPosterior, Posterior};
use crate::risk::RiskFunctional;
use crate::rng::{tags, RngStream};
use crate::solvers::{
    exact_dp, exact_dp_multi, nso_solve, ucb_solve, ExactDpOptions, NsoOptions, Policy,
    SamplingBudget,
};

/// Variance of the near-point-mass Gaussian belief standing in for a plug-in
/// estimate on a continuous parameter space.
const DEGENERATE_VARIANCE: f64 = 1e-9;

/// Child-stream index reserved for the reference solve and its scoring; data
/// sizes are `usize`, so no real batch can collide with it.
const REFERENCE_INDEX: u64 = u64::MAX;

/// One formulation's outcome on one replication. `value` is the true
/// performance of the solved policy, `solver_value` the solver's own root
/// objective estimate (not comparable to `value` for tail-risk functionals).
/// `wall_time_s` covers this formulation's solve and scoring; it is kept for
/// logs and diagnostics but never written to the CSVs, which must be
/// byte-identical across machines and thread counts.
#[derive(Clone, Debug)]
pub struct ReplicationResult {
    pub formulation: String,
    pub h: usize,
    pub replication: usize,
    pub value: Option<f64>,
    pub std_error: f64,
    pub solver_value: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

/// Aggregates over one (formulation, dataset size) cell. `average` and `std`
/// describe the true-performance sample (population standard deviation);
/// `d` is the mean squared relative deviation from the true optimum.
/// Cells whose every replication failed leave the statistics empty.
#[derive(Clone, Debug)]
pub struct SummaryRow {
    pub formulation: String,
    pub h: usize,
    pub replications: usize,
    pub failures: usize,
    pub average: Option<f64>,
    pub std: Option<f64>,
    pub d: Option<f64>,
}

/// Everything an experiment produces, in emission order.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    /// True-optimum value the relative deviations are measured against.
    pub v_star: f64,
    pub replications: Vec<ReplicationResult>,
    pub summary: Vec<SummaryRow>,
}

/// Run the full experiment on `threads` worker threads (0 picks the rayon
/// default). The thread count affects scheduling only, never the numbers.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let env = cfg.environment.build()?;
    let theta_true = cfg.environment.theta_true();
    let prior = cfg.environment.initial_belief(&env)?;
    let master = RngStream::from_seed(cfg.seed);

    let started = Instant::now();
    let v_star = reference_value(cfg, &env, theta_true, master)?;
    log::info!(
        "reference optimum {v_star} (theta = {theta_true}, {:.2}s)",
        started.elapsed().as_secs_f64()
    );

    let tasks: Vec<(usize, usize)> = cfg
        .data_sizes
        .iter()
        .enumerate()
        .flat_map(|(hi, _)| (0..cfg.replications).map(move |j| (hi, j)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("could not build the thread pool: {e}")))?;
    let by_task: Vec<Vec<ReplicationResult>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(hi, j)| replicate(cfg, &env, &prior, theta_true, v_star, master, hi, j))
            .collect()
    });

    // reorder by (formulation, dataset size, replication) for emission
    let nj = cfg.replications;
    let mut replications = Vec::with_capacity(by_task.len() * cfg.formulations.len());
    for fi in 0..cfg.formulations.len() {
        for hi in 0..cfg.data_sizes.len() {
            for j in 0..nj {
                replications.push(by_task[hi * nj + j][fi].clone());
            }
        }
    }

    let mut summary = Vec::with_capacity(cfg.formulations.len() * cfg.data_sizes.len());
    for fi in 0..cfg.formulations.len() {
        for (hi, &h) in cfg.data_sizes.iter().enumerate() {
            let block = &replications[(fi * cfg.data_sizes.len() + hi) * nj..][..nj];
            summary.push(summarize(cfg.formulations[fi].label(), h, block, v_star));
        }
    }

    log::info!(
        "experiment done: {} replications x {} formulations in {:.2}s",
        tasks.len(),
        cfg.formulations.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(ExperimentOutput {
        v_star,
        replications,
        summary,
    })
}

fn summarize(label: &str, h: usize, block: &[ReplicationResult], v_star: f64) -> SummaryRow {
    let values: Vec<f64> = block.iter().filter_map(|r| r.value).collect();
    let (average, std, d) = if values.is_empty() {
        (None, None, None)
    } else {
        let n = values.len() as f64;
        let avg = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / n;
        let dev = values
            .iter()
            .map(|v| ((v - v_star) / v_star).powi(2))
            .sum::<f64>()
            / n;
        (Some(avg), Some(var.sqrt()), Some(dev))
    };
    SummaryRow {
        formulation: label.to_string(),
        h,
        replications: block.len(),
        failures: block.len() - values.len(),
        average,
        std,
        d,
    }
}

/// The true-optimum value: the root value of the known-parameter problem at
/// the true parameter. Finite spaces solve it exactly; continuous spaces
/// solve a near-point-mass belief with the nested-simulation solver and
/// score the resulting policy.
fn reference_value(
    cfg: &ExperimentConfig,
    env: &Environment,
    theta_true: f64,
    master: RngStream,
) -> Result<f64> {
    match &env.family().space {
        ParameterSpace::Finite(atoms) => {
            let truth =
                Posterior::Finite(FinitePosterior::point_mass(atoms.clone(), theta_true)?);
            let (table, _) = exact_dp(env, &truth, &RiskFunctional::expectation())?;
            table
                .value(0, env.initial_state(), &truth)
                .ok_or_else(|| Error::Config("reference solve lost the initial state".into()))
        }
        ParameterSpace::Continuous { .. } => {
            let truth = Posterior::NormalMean(NormalMeanPosterior::new(
                theta_true,
                DEGENERATE_VARIANCE,
            )?);
            let budget = SamplingBudget::nested(cfg.reference.outer, cfg.reference.inner)?;
            let opts = degenerate_nso_options(nso_options(&cfg.solver, budget), theta_true);
            let (_, policy) = nso_solve(
                env,
                &truth,
                &RiskFunctional::expectation(),
                &opts,
                master.at(tags::SOLVE, REFERENCE_INDEX),
            )?;
            // countable outcome supports admit exact scoring; otherwise a
            // long rollout stands in
            match env.family().truncated_support(&[theta_true], 1e-12) {
                Ok(_) => evaluate_exact(env, &policy, theta_true),
                Err(_) => Ok(evaluate_rollout(
                    env,
                    &policy,
                    theta_true,
                    cfg.reference.episodes,
                    master.at(tags::EVAL, REFERENCE_INDEX),
                )?
                .value),
            }
        }
    }
}

/// Nested-simulation options carrying the experiment's tuning fields.
fn nso_options(solver: &SolverSpec, budget: SamplingBudget) -> NsoOptions {
    let mut opts = NsoOptions::new(budget);
    if let SolverSpec::Nso {
        obs_cap,
        mean_step,
        mean_halfwidth,
        mean_bounds,
        ..
    } = solver
    {
        if let Some(c) = obs_cap {
            opts.obs_cap = *c;
        }
        if let Some(s) = mean_step {
            opts.mean_step = *s;
        }
        if let Some(w) = mean_halfwidth {
            opts.mean_halfwidth = *w;
        }
        if let Some(b) = mean_bounds {
            opts.mean_bounds = Some(*b);
        }
    }
    opts
}

/// Collapse the Gaussian belief grid around a known center: a near-point-mass
/// belief neither widens nor drifts under conjugate updates, so tracking
/// layers and a wide mean grid would only multiply work.
fn degenerate_nso_options(mut opts: NsoOptions, center: f64) -> NsoOptions {
    opts.obs_cap = 0;
    opts.mean_bounds = Some((center - 0.5 * opts.mean_step, center + 0.5 * opts.mean_step));
    opts
}

/// A solved formulation waiting to be scored.
enum Solved {
    Ready {
        solver_value: Option<f64>,
        policy: Policy,
        solve_time_s: f64,
    },
    Failed(String),
}

/// One formulation's solve outcome, exposed for inspection tools.
#[derive(Debug)]
pub struct FormulationRun {
    pub label: String,
    pub solver_value: Option<f64>,
    pub policy: Option<Policy>,
    pub error: Option<String>,
    pub solve_time_s: f64,
}

/// One replication's dataset and solves, exposed for inspection tools.
#[derive(Debug)]
pub struct SolvedReplication {
    pub h: usize,
    pub replication: usize,
    pub data: Vec<f64>,
    pub runs: Vec<FormulationRun>,
}

/// Draw the dataset replication `j` of size `h` would see and solve every
/// formulation on it, exactly as the experiment would. `h` need not appear
/// in the config's dataset sizes.
pub fn solve_replication(cfg: &ExperimentConfig, h: usize, j: usize) -> Result<SolvedReplication> {
    cfg.validate()?;
    let env = cfg.environment.build()?;
    let theta_true = cfg.environment.theta_true();
    let prior = cfg.environment.initial_belief(&env)?;
    let master = RngStream::from_seed(cfg.seed);

    let mut rng = master
        .at(tags::DATA, h as u64)
        .at(tags::REPLICATION, j as u64)
        .rng();
    let data: Vec<f64> = (0..h)
        .map(|_| env.family().sample(theta_true, &mut rng))
        .collect::<Result<_>>()?;

    let runs = solve_all(cfg, &env, &prior, &data, master, h, j)
        .into_iter()
        .zip(&cfg.formulations)
        .map(|(s, f)| match s {
            Solved::Ready {
                solver_value,
                policy,
                solve_time_s,
            } => FormulationRun {
                label: f.label().to_string(),
                solver_value,
                policy: Some(policy),
                error: None,
                solve_time_s,
            },
            Solved::Failed(msg) => FormulationRun {
                label: f.label().to_string(),
                solver_value: None,
                policy: None,
                error: Some(msg),
                solve_time_s: 0.0,
            },
        })
        .collect();
    Ok(SolvedReplication {
        h,
        replication: j,
        data,
        runs,
    })
}

/// Run one replication: draw the dataset, solve every formulation on it, and
/// score each solved policy at the truth. Returns one row per formulation,
/// in configuration order.
#[allow(clippy::too_many_arguments)]
fn replicate(
    cfg: &ExperimentConfig,
    env: &Environment,
    prior: &Posterior,
    theta_true: f64,
    v_star: f64,
    master: RngStream,
    hi: usize,
    j: usize,
) -> Vec<ReplicationResult> {
    let h = cfg.data_sizes[hi];
    let family = env.family();
    let row = |fi: usize| ReplicationResult {
        formulation: cfg.formulations[fi].label().to_string(),
        h,
        replication: j,
        value: None,
        std_error: 0.0,
        solver_value: None,
        wall_time_s: 0.0,
        error: None,
    };

    let mut rng = master.at(tags::DATA, h as u64).at(tags::REPLICATION, j as u64).rng();
    let data: Result<Vec<f64>> = (0..h).map(|_| family.sample(theta_true, &mut rng)).collect();
    let data = match data {
        Ok(d) => d,
        Err(e) => {
            let msg = format!("data generation failed: {e}");
            return (0..cfg.formulations.len())
                .map(|fi| ReplicationResult {
                    error: Some(msg.clone()),
                    ..row(fi)
                })
                .collect();
        }
    };

    let solved = solve_all(cfg, env, prior, &data, master, h, j);

    solved
        .into_iter()
        .enumerate()
        .map(|(fi, s)| {
            let mut out = row(fi);
            let (policy, solve_time) = match s {
                Solved::Ready {
                    solver_value,
                    policy,
                    solve_time_s,
                } => {
                    out.solver_value = solver_value;
                    (policy, solve_time_s)
                }
                Solved::Failed(msg) => {
                    out.error = Some(msg);
                    return out;
                }
            };
            let eval_started = Instant::now();
            let scored = evaluate_true_performance(
                env,
                &policy,
                theta_true,
                &cfg.evaluation,
                master
                    .at(tags::EVAL, h as u64)
                    .at(tags::REPLICATION, j as u64)
                    .at(tags::FORMULATION, fi as u64),
            );
            out.wall_time_s = solve_time + eval_started.elapsed().as_secs_f64();
            match scored {
                Ok(Evaluation { value, std_error }) => {
                    if matches!(cfg.evaluation, EvaluationSpec::Exact)
                        && value < v_star - 1e-9
                    {
                        log::warn!(
                            "{} h={h} j={j}: exact score {value} beats the reference \
                             optimum {v_star}; the reference is suspect",
                            out.formulation
                        );
                    }
                    log::info!(
                        "{} h={h} j={j}: value {value} ({:.2}s)",
                        out.formulation,
                        out.wall_time_s
                    );
                    out.value = Some(value);
                    out.std_error = std_error;
                }
                Err(e) => out.error = Some(format!("evaluation failed: {e}")),
            }
            out
        })
        .collect()
}

/// Solve every formulation on one dataset, in configuration order. The
/// Bayes-risk formulations share one posterior; under the exact solver they
/// also share a single multi-functional sweep.
fn solve_all(
    cfg: &ExperimentConfig,
    env: &Environment,
    prior: &Posterior,
    data: &[f64],
    master: RngStream,
    h: usize,
    j: usize,
) -> Vec<Solved> {
    let family = env.family();
    let n = cfg.formulations.len();
    let mut slots: Vec<Option<Solved>> = (0..n).map(|_| None).collect();

    let posterior = prior.absorb(family, data);
    let solve_stream = |fi: usize| {
        master
            .at(tags::SOLVE, h as u64)
            .at(tags::REPLICATION, j as u64)
            .at(tags::FORMULATION, fi as u64)
    };

    // Bayes-risk formulations
    let br: Vec<(usize, RiskFunctional)> = cfg
        .formulations
        .iter()
        .enumerate()
        .filter_map(|(fi, f)| match f {
            FormulationSpec::Brmdp(_) => Some((fi, f.functional(cfg.alpha).expect("validated"))),
            FormulationSpec::Empirical => None,
        })
        .collect();
    if !br.is_empty() {
        match &posterior {
            Ok(post) => match &cfg.solver {
                SolverSpec::Exact => {
                    let rhos: Vec<RiskFunctional> = br.iter().map(|(_, r)| *r).collect();
                    let started = Instant::now();
                    match exact_dp_multi(env, post, &rhos, &ExactDpOptions::default()) {
                        Ok(results) => {
                            let share = started.elapsed().as_secs_f64() / br.len() as f64;
                            for ((fi, _), (table, policy)) in br.iter().zip(results) {
                                let root = table.value(0, env.initial_state(), post);
                                slots[*fi] = Some(Solved::Ready {
                                    solver_value: root,
                                    policy,
                                    solve_time_s: share,
                                });
                            }
                        }
                        Err(e) => {
                            let msg = format!("solve failed: {e}");
                            for (fi, _) in &br {
                                slots[*fi] = Some(Solved::Failed(msg.clone()));
                            }
                        }
                    }
                }
                SolverSpec::Nso { outer, inner, .. } => {
                    for (fi, rho) in &br {
                        slots[*fi] = Some(solve_one(|| {
                            let budget = SamplingBudget::nested(*outer, *inner)?;
                            let opts = nso_options(&cfg.solver, budget);
                            let (root, policy) =
                                nso_solve(env, post, rho, &opts, solve_stream(*fi))?;
                            Ok((Some(root), policy))
                        }));
                    }
                }
                SolverSpec::Ucb { plays_per_stage } => {
                    for (fi, _) in &br {
                        slots[*fi] = Some(solve_one(|| {
                            let stages = env.horizon().stages().ok_or_else(|| {
                                Error::Config(
                                    "adaptive play allocation needs a finite horizon".into(),
                                )
                            })?;
                            let budget =
                                SamplingBudget::adaptive_uniform(*plays_per_stage, stages)?;
                            let (root, policy) =
                                ucb_solve(env, post, &budget, solve_stream(*fi))?;
                            Ok((Some(root), policy))
                        }));
                    }
                }
            },
            Err(e) => {
                let msg = format!("posterior update failed: {e}");
                for (fi, _) in &br {
                    slots[*fi] = Some(Solved::Failed(msg.clone()));
                }
            }
        }
    }

    // plug-in formulation
    if let Some(fi) = cfg
        .formulations
        .iter()
        .position(|f| matches!(f, FormulationSpec::Empirical))
    {
        slots[fi] = Some(solve_one(|| {
            let theta_hat = mle(family, data)?;
            let plug_in = match &family.space {
                ParameterSpace::Finite(atoms) => Posterior::Finite(FinitePosterior::point_mass(
                    atoms.clone(),
                    theta_hat,
                )?),
                ParameterSpace::Continuous { .. } => Posterior::NormalMean(
                    NormalMeanPosterior::new(theta_hat, DEGENERATE_VARIANCE)?,
                ),
            };
            let rho = RiskFunctional::expectation();
            match &cfg.solver {
                SolverSpec::Exact => {
                    let (table, policy) = exact_dp(env, &plug_in, &rho)?;
                    let root = table.value(0, env.initial_state(), &plug_in);
                    Ok((root, policy))
                }
                SolverSpec::Nso { outer, inner, .. } => {
                    let budget = SamplingBudget::nested(*outer, *inner)?;
                    let opts = match &family.space {
                        ParameterSpace::Continuous { .. } => degenerate_nso_options(
                            nso_options(&cfg.solver, budget),
                            theta_hat,
                        ),
                        ParameterSpace::Finite(_) => nso_options(&cfg.solver, budget),
                    };
                    let (root, policy) = nso_solve(env, &plug_in, &rho, &opts, solve_stream(fi))?;
                    Ok((Some(root), policy))
                }
                SolverSpec::Ucb { plays_per_stage } => {
                    let stages = env.horizon().stages().ok_or_else(|| {
                        Error::Config("adaptive play allocation needs a finite horizon".into())
                    })?;
                    let budget = SamplingBudget::adaptive_uniform(*plays_per_stage, stages)?;
                    let (root, policy) = ucb_solve(env, &plug_in, &budget, solve_stream(fi))?;
                    Ok((Some(root), policy))
                }
            }
        }));
    }

    slots
        .into_iter()
        .map(|s| s.expect("every formulation slot filled"))
        .collect()
}

/// Run one timed solve, capturing the error as a failed slot.
fn solve_one<F>(solve: F) -> Solved
where
    F: FnOnce() -> Result<(Option<f64>, Policy)>,
{
    let started = Instant::now();
    match solve() {
        Ok((solver_value, policy)) => Solved::Ready {
            solver_value,
            policy,
            solve_time_s: started.elapsed().as_secs_f64(),
        },
        Err(e) => Solved::Failed(format!("solve failed: {e}")),
    }
}
