//! Nested-simulation solver for the augmented problem.
//!
//! `nso_stage` estimates the one-stage minimum at a single (state, belief)
//! node: it draws parameters from the belief, batches outcome draws per
//! parameter, averages stage cost plus discounted continuation (queried from
//! a caller-supplied lookup), and applies the risk functional across the
//! parameter draws. `nso_solve` runs that estimator backward over a
//! tabulated node set and returns a lookup policy.
//!
//! Finite beliefs reuse the exact solver's forward enumeration, so every
//! reachable node is tabulated. Gaussian beliefs live on a grid: the
//! observation count picks the posterior variance (conjugate updates shrink
//! it deterministically) and the posterior mean snaps to a uniform grid.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Environment, Horizon, ParametricFamily};
use crate::posterior::{NormalMeanPosterior, Posterior};
use crate::risk::RiskFunctional;
use crate::rng::{tags, RngStream};
use crate::solvers::exact::{enumerate_reachable, ExactDpOptions};
use crate::solvers::{nearest_in, pack, IntMap, KeySet, Policy, SamplingBudget};

/// Tuning for the nested-simulation solver.
#[derive(Clone, Debug)]
pub struct NsoOptions {
    /// Outer (parameter) and inner (outcome) draw counts per node and action.
    pub budget: SamplingBudget,
    /// Weight rounding used for belief keys on finite parameter spaces.
    pub weight_grid: f64,
    /// Mean and precision rounding used for Gaussian belief keys.
    pub gaussian_grid: f64,
    /// Probability mass below which outcome-support tails are folded when
    /// enumerating finite-belief nodes.
    pub support_tol: f64,
    /// Ceiling on enumerated (state, belief) nodes in the finite case.
    pub state_cap: usize,
    /// Gaussian beliefs: number of conjugate updates tracked exactly. Nodes
    /// that have absorbed more observations reuse the last tracked layer,
    /// which is already nearly flat in the variance.
    pub obs_cap: usize,
    /// Gaussian beliefs: spacing of the posterior-mean grid.
    pub mean_step: f64,
    /// Gaussian beliefs: half-width of the posterior-mean grid, centered on
    /// the initial mean when `mean_bounds` is not set.
    pub mean_halfwidth: f64,
    /// Gaussian beliefs: explicit grid bounds overriding the centered
    /// default. Useful when the initial belief is diffuse and its mean says
    /// little about where posterior means will land.
    pub mean_bounds: Option<(f64, f64)>,
}

impl NsoOptions {
    pub fn new(budget: SamplingBudget) -> Self {
        NsoOptions {
            budget,
            weight_grid: 1e-6,
            gaussian_grid: 1e-4,
            support_tol: 1e-10,
            state_cap: 5_000_000,
            obs_cap: 8,
            mean_step: 0.1,
            mean_halfwidth: 3.0,
            mean_bounds: None,
        }
    }
}

/// Any outcome the family supports; used to evaluate outcome-invariant
/// transitions without sampling.
fn probe_outcome(family: &ParametricFamily) -> f64 {
    if family.supports(0.0) {
        0.0
    } else {
        1.0
    }
}

/// Stage cost plus discounted continuation for one simulated outcome. The
/// belief is advanced only at observing states.
fn outcome_value(
    env: &Environment,
    state: usize,
    action: usize,
    xi: f64,
    belief: &Posterior,
    observes: bool,
    gamma: f64,
    v_next: &dyn Fn(usize, &Posterior) -> f64,
) -> Result<f64> {
    let (s2, c) = env.transition(state, action, xi);
    let cont = if observes {
        let updated = belief.update(env.family(), xi)?;
        v_next(s2, &updated)
    } else {
        v_next(s2, belief)
    };
    Ok(c + gamma * cont)
}

/// Estimate the risk-adjusted one-stage minimum at a (state, belief) node.
///
/// Per admissible action, `budget.outer` parameters are drawn from the
/// belief and each gets `budget.inner` outcome draws; the risk functional is
/// applied across the per-parameter averages of cost plus discounted
/// `v_next` continuation. Ties go to the lower action id. Pairs whose
/// transition ignores the outcome at non-observing states are evaluated
/// exactly with no draws. Returns the estimate and the chosen action.
///
/// The continuation of a given outcome does not depend on the drawn
/// parameter, so on countable-outcome families each distinct outcome is
/// evaluated once per action and reused.
pub fn nso_stage(
    env: &Environment,
    state: usize,
    belief: &Posterior,
    rho: &RiskFunctional,
    v_next: &dyn Fn(usize, &Posterior) -> f64,
    budget: &SamplingBudget,
    stream: RngStream,
) -> Result<(f64, usize)> {
    let actions = env.actions(state);
    if actions.is_empty() {
        return Err(Error::Config(format!(
            "state {state} has no admissible actions"
        )));
    }
    let gamma = env.horizon().discount();
    let family = env.family();
    let observes = env.observes(state);
    let cache_outcomes = family.is_discrete();

    let mut best = f64::INFINITY;
    let mut best_action = actions[0];
    let mut hbar = Vec::with_capacity(budget.outer);

    for (ai, &action) in actions.iter().enumerate() {
        let value = if !observes && env.xi_invariant(state, action) {
            let (s2, c) = env.transition(state, action, probe_outcome(family));
            c + gamma * v_next(s2, belief)
        } else {
            let mut seen: IntMap<f64> = IntMap::default();
            hbar.clear();
            let action_stream = stream.at(tags::ACTION, ai as u64);
            for i in 0..budget.outer {
                let mut rng = action_stream.at(tags::OUTER, i as u64).rng();
                let theta = belief.sample_theta(family, &mut rng);
                let mut acc = 0.0;
                for _ in 0..budget.inner {
                    let xi = family.sample(theta, &mut rng)?;
                    let h = if cache_outcomes {
                        match seen.entry(xi.to_bits()) {
                            Entry::Occupied(e) => *e.get(),
                            Entry::Vacant(slot) => *slot.insert(outcome_value(
                                env, state, action, xi, belief, observes, gamma, v_next,
                            )?),
                        }
                    } else {
                        outcome_value(env, state, action, xi, belief, observes, gamma, v_next)?
                    };
                    acc += h;
                }
                hbar.push(acc / budget.inner as f64);
            }
            rho.apply(&hbar)?
        };
        if value < best {
            best = value;
            best_action = action;
        }
    }
    Ok((best, best_action))
}

/// Approximate backward induction with `nso_stage` at every tabulated node.
///
/// Needs a finite horizon. Finite beliefs enumerate the exact reachable
/// node set; continuation lookups that miss (an outcome sampled past the
/// truncated support) snap to the closest stored belief at the successor
/// state. Gaussian beliefs are tabulated on the (observation count,
/// posterior mean) grid described by the options. Returns the stage-0 value
/// estimate at the initial augmented state together with the greedy policy.
pub fn nso_solve(
    env: &Environment,
    mu0: &Posterior,
    rho: &RiskFunctional,
    options: &NsoOptions,
    stream: RngStream,
) -> Result<(f64, Policy)> {
    let stages = match env.horizon() {
        Horizon::Finite { stages, .. } => stages,
        Horizon::Discounted { .. } => {
            return Err(Error::Config(
                "simulation solver needs a finite horizon".into(),
            ))
        }
    };
    if stages == 0 {
        return Err(Error::Config("horizon must have at least one stage".into()));
    }
    match mu0 {
        Posterior::Finite(_) => solve_finite(env, mu0, rho, options, stages, stream),
        Posterior::NormalMean(nm0) => solve_gaussian(env, mu0, nm0, rho, options, stages, stream),
    }
}

fn group_by_state(list: &[(u32, u32)]) -> HashMap<u32, Vec<u32>> {
    let mut by_state: HashMap<u32, Vec<u32>> = HashMap::new();
    for &(s, b) in list {
        by_state.entry(s).or_default().push(b);
    }
    by_state
}

fn solve_finite(
    env: &Environment,
    mu0: &Posterior,
    rho: &RiskFunctional,
    options: &NsoOptions,
    stages: usize,
    stream: RngStream,
) -> Result<(f64, Policy)> {
    let fin = mu0.as_finite().expect("checked by caller");
    let support = env
        .family()
        .truncated_support(fin.atoms(), options.support_tol)?;
    let dp_opts = ExactDpOptions {
        weight_grid: options.weight_grid,
        gaussian_grid: options.gaussian_grid,
        state_cap: options.state_cap,
        support_tol: options.support_tol,
    };
    let levels = enumerate_reachable(env, mu0, &support.points, stages, &dp_opts)?;
    let bank = levels.bank;
    let level_maps = levels.levels;

    let mut next_values: IntMap<f64> = level_maps[stages]
        .list
        .iter()
        .map(|&(s, b)| (pack(s, b), 0.0))
        .collect();
    let mut next_by_state = group_by_state(&level_maps[stages].list);
    let mut policy_stages: Vec<IntMap<u32>> = vec![IntMap::default(); stages];

    for t in (0..stages).rev() {
        let mut values: IntMap<f64> = IntMap::default();
        values.reserve(level_maps[t].list.len());
        let mut actions: IntMap<u32> = IntMap::default();
        actions.reserve(level_maps[t].list.len());

        {
            let v_next = |s2: usize, mu2: &Posterior| -> f64 {
                let key = mu2.quantize_with(options.weight_grid, options.gaussian_grid);
                if let Some(k) = bank.keyset().lookup(&key) {
                    if let Some(&v) = next_values.get(&pack(s2 as u32, k)) {
                        return v;
                    }
                }
                if let Some(cands) = next_by_state.get(&(s2 as u32)) {
                    if let Some(k) = nearest_in(bank.keyset(), cands, &key) {
                        if let Some(&v) = next_values.get(&pack(s2 as u32, k)) {
                            return v;
                        }
                    }
                }
                0.0
            };
            for (slot, &(su, bu)) in level_maps[t].list.iter().enumerate() {
                let node_stream = stream.at(tags::STAGE, t as u64).at(tags::NODE, slot as u64);
                let (value, action) = nso_stage(
                    env,
                    su as usize,
                    bank.get(bu),
                    rho,
                    &v_next,
                    &options.budget,
                    node_stream,
                )?;
                values.insert(pack(su, bu), value);
                actions.insert(pack(su, bu), action as u32);
            }
        }

        policy_stages[t] = actions;
        next_values = values;
        next_by_state = group_by_state(&level_maps[t].list);
    }

    let root_key = mu0.quantize_with(options.weight_grid, options.gaussian_grid);
    let root = bank
        .keyset()
        .lookup(&root_key)
        .and_then(|k| next_values.get(&pack(env.initial_state() as u32, k)))
        .copied()
        .ok_or_else(|| Error::Config("initial augmented state missing from the table".into()))?;

    let keyset = Arc::new(bank.into_keyset());
    Ok((
        root,
        Policy::staged(
            keyset,
            options.weight_grid,
            options.gaussian_grid,
            policy_stages,
            mu0.clone(),
        ),
    ))
}

/// Precomputed mean grid plus the variance ladder one conjugate update per
/// rung, so grid lookups can map any reachable Gaussian belief to a slot.
struct GaussianGrid {
    lo: f64,
    step: f64,
    m_count: usize,
    /// Posterior variance after j updates, j = 0..=obs_cap. Conjugate
    /// variance updates do not depend on the observed value, so this ladder
    /// is exact for every belief the solver or an evaluator can reach.
    variances: Vec<f64>,
    precisions: Vec<f64>,
}

impl GaussianGrid {
    fn build(
        env: &Environment,
        mu0: &Posterior,
        nm0: &NormalMeanPosterior,
        options: &NsoOptions,
    ) -> Result<GaussianGrid> {
        if !(options.mean_step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mean grid step must be positive, got {}",
                options.mean_step
            )));
        }
        let (lo, hi) = match options.mean_bounds {
            Some((lo, hi)) if hi > lo => (lo, hi),
            Some((lo, hi)) => {
                return Err(Error::InvalidParameter(format!(
                    "mean grid bounds must satisfy lo < hi, got ({lo}, {hi})"
                )));
            }
            None => (
                nm0.mean - options.mean_halfwidth,
                nm0.mean + options.mean_halfwidth,
            ),
        };
        let m_count = ((hi - lo) / options.mean_step).round() as usize + 1;

        let probe = probe_outcome(env.family());
        let mut variances = Vec::with_capacity(options.obs_cap + 1);
        variances.push(nm0.variance);
        let mut cur = mu0.clone();
        for _ in 0..options.obs_cap {
            cur = cur.update(env.family(), probe)?;
            match &cur {
                Posterior::NormalMean(nm) => variances.push(nm.variance),
                Posterior::Finite(_) => {
                    return Err(Error::InvalidParameter(
                        "conjugate update left the Gaussian family".into(),
                    ))
                }
            }
        }
        let precisions = variances.iter().map(|v| 1.0 / v).collect();
        Ok(GaussianGrid {
            lo,
            step: options.mean_step,
            m_count,
            variances,
            precisions,
        })
    }

    fn layers(&self) -> usize {
        self.variances.len()
    }

    fn mean_slot(&self, mean: f64) -> usize {
        let raw = ((mean - self.lo) / self.step).round();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.m_count - 1)
        }
    }

    fn mean_at(&self, slot: usize) -> f64 {
        self.lo + self.step * slot as f64
    }

    /// Index of the variance rung closest in precision. Posterior precision
    /// grows by the same increment on every conjugate update, so reachable
    /// beliefs land within float noise of a rung until they pass the cap.
    fn layer_of(&self, variance: f64) -> usize {
        let p = 1.0 / variance;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, &pj) in self.precisions.iter().enumerate() {
            let d = (p - pj).abs();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }

    fn index(&self, state: usize, layer: usize, mean_slot: usize) -> usize {
        (state * self.layers() + layer) * self.m_count + mean_slot
    }
}

fn solve_gaussian(
    env: &Environment,
    mu0: &Posterior,
    nm0: &NormalMeanPosterior,
    rho: &RiskFunctional,
    options: &NsoOptions,
    stages: usize,
    stream: RngStream,
) -> Result<(f64, Policy)> {
    let grid = GaussianGrid::build(env, mu0, nm0, options)?;
    let n_states = env.num_states();
    let layers = grid.layers();
    let table = n_states * layers * grid.m_count;

    let mut keyset = KeySet::default();
    let mut policy_stages: Vec<IntMap<u32>> = vec![IntMap::default(); stages];
    let mut next_values = vec![0.0f64; table];

    for t in (0..stages).rev() {
        let mut values = vec![0.0f64; table];
        let mut actions = IntMap::default();
        // beliefs at stage t have absorbed at most t observations
        let layer_cap = t.min(options.obs_cap);

        {
            let v_next = |s2: usize, mu2: &Posterior| -> f64 {
                match mu2 {
                    Posterior::NormalMean(nm) => {
                        let j = grid.layer_of(nm.variance);
                        let mi = grid.mean_slot(nm.mean);
                        next_values[grid.index(s2, j, mi)]
                    }
                    Posterior::Finite(_) => 0.0,
                }
            };
            for state in 0..n_states {
                for j in 0..=layer_cap {
                    for mi in 0..grid.m_count {
                        let belief = Posterior::NormalMean(NormalMeanPosterior {
                            mean: grid.mean_at(mi),
                            variance: grid.variances[j],
                        });
                        let node = grid.index(state, j, mi);
                        let node_stream = stream
                            .at(tags::STAGE, t as u64)
                            .at(tags::NODE, node as u64);
                        let (value, action) = nso_stage(
                            env,
                            state,
                            &belief,
                            rho,
                            &v_next,
                            &options.budget,
                            node_stream,
                        )?;
                        values[node] = value;
                        let key =
                            belief.quantize_with(options.weight_grid, options.gaussian_grid);
                        let k = keyset.intern(key);
                        actions.insert(pack(state as u32, k), action as u32);
                    }
                }
            }
        }

        policy_stages[t] = actions;
        next_values = values;
    }

    let root = next_values[grid.index(
        env.initial_state(),
        grid.layer_of(nm0.variance),
        grid.mean_slot(nm0.mean),
    )];
    Ok((
        root,
        Policy::staged(
            Arc::new(keyset),
            options.weight_grid,
            options.gaussian_grid,
            policy_stages,
            mu0.clone(),
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FamilyKind, ParameterSpace};
    use crate::posterior::FinitePosterior;
    use crate::solvers::exact_dp;

    fn poisson_family(atoms: Vec<f64>) -> ParametricFamily {
        ParametricFamily::new(FamilyKind::Poisson, ParameterSpace::Finite(atoms)).unwrap()
    }

    /// One state, three actions, deterministic per-action costs, outcome
    /// never matters.
    fn deterministic_env(costs: [f64; 3]) -> Environment {
        Environment::new(
            poisson_family(vec![1.0, 3.0]),
            vec![vec![0, 1, 2]],
            move |_, _, _| 0,
            move |_, a, _| costs[a],
            Horizon::Finite {
                stages: 1,
                discount: 1.0,
            },
        )
        .unwrap()
        .with_xi_invariant(|_, _| true)
        .with_observation_filter(|_| false)
    }

    fn uniform_belief(family: &ParametricFamily) -> Posterior {
        Posterior::Finite(FinitePosterior::uniform(family).unwrap())
    }

    #[test]
    fn invariant_outcomes_need_no_draws_and_match_exact() {
        let env = deterministic_env([3.0, 1.0, 2.0]);
        let mu0 = uniform_belief(env.family());
        let budget = SamplingBudget::nested(2, 2).unwrap();
        for rho in [
            RiskFunctional::Expectation,
            RiskFunctional::ValueAtRisk { alpha: 0.8 },
            RiskFunctional::ConditionalValueAtRisk { alpha: 0.8 },
        ] {
            let (value, action) = nso_stage(
                &env,
                0,
                &mu0,
                &rho,
                &|_, _| 0.0,
                &budget,
                RngStream::from_seed(7),
            )
            .unwrap();
            assert_eq!(value, 1.0);
            assert_eq!(action, 1);
        }
    }

    /// One observing state whose cost is the outcome itself: the expectation
    /// estimate must center on the belief-mixture mean.
    fn outcome_cost_env(atoms: Vec<f64>) -> Environment {
        Environment::new(
            poisson_family(atoms),
            vec![vec![0]],
            |_, _, _| 0,
            |_, _, xi| xi,
            Horizon::Finite {
                stages: 1,
                discount: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn expectation_estimates_center_on_the_mixture_mean() {
        let env = outcome_cost_env(vec![1.0, 3.0]);
        let mu0 = uniform_belief(env.family());
        let budget = SamplingBudget::nested(32, 32).unwrap();
        let reps = 100;
        let mut estimates = Vec::with_capacity(reps);
        for seed in 0..reps {
            let (v, _) = nso_stage(
                &env,
                0,
                &mu0,
                &RiskFunctional::Expectation,
                &|_, _| 0.0,
                &budget,
                RngStream::from_seed(1000 + seed as u64),
            )
            .unwrap();
            estimates.push(v);
        }
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / n;
        let var = estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        // theta is 1 or 3 with equal weight, so the mixture mean is 2
        assert!(
            (mean - 2.0).abs() < 4.0 * se.max(1e-3),
            "mean {mean} se {se}"
        );
    }

    #[test]
    fn quantile_estimates_land_on_the_right_parameter_cluster() {
        // five well separated rates; at alpha = 0.8 the weighted quantile of
        // the per-parameter means sits on the fourth atom
        let atoms = vec![10.0, 20.0, 30.0, 40.0, 50.0];
        let env = outcome_cost_env(atoms.clone());
        let fin = FinitePosterior::new(atoms, vec![0.1, 0.2, 0.4, 0.2, 0.1]).unwrap();
        let mu0 = Posterior::Finite(fin);
        let budget = SamplingBudget::nested(4000, 64).unwrap();
        let (v, _) = nso_stage(
            &env,
            0,
            &mu0,
            &RiskFunctional::ValueAtRisk { alpha: 0.8 },
            &|_, _| 0.0,
            &budget,
            RngStream::from_seed(42),
        )
        .unwrap();
        assert!((v - 40.0).abs() < 1.5, "estimate {v}");
    }

    #[test]
    fn estimates_tighten_with_budget() {
        let env = outcome_cost_env(vec![1.0, 3.0]);
        let mu0 = uniform_belief(env.family());
        let rmse = |outer: usize, inner: usize| {
            let budget = SamplingBudget::nested(outer, inner).unwrap();
            let reps = 60;
            let mut sq = 0.0;
            for seed in 0..reps {
                let (v, _) = nso_stage(
                    &env,
                    0,
                    &mu0,
                    &RiskFunctional::Expectation,
                    &|_, _| 0.0,
                    &budget,
                    RngStream::from_seed(9000 + seed as u64),
                )
                .unwrap();
                sq += (v - 2.0) * (v - 2.0);
            }
            (sq / reps as f64).sqrt()
        };
        assert!(rmse(64, 64) < rmse(4, 4));
    }

    #[test]
    fn same_stream_reproduces_and_streams_differ() {
        let env = outcome_cost_env(vec![1.0, 3.0]);
        let mu0 = uniform_belief(env.family());
        let budget = SamplingBudget::nested(16, 16).unwrap();
        let run = |seed: u64| {
            nso_stage(
                &env,
                0,
                &mu0,
                &RiskFunctional::Expectation,
                &|_, _| 0.0,
                &budget,
                RngStream::from_seed(seed),
            )
            .unwrap()
            .0
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn finite_solve_tracks_the_exact_root_value() {
        let cfg = crate::envs::InventoryConfig {
            capacity: 3,
            horizon: 2,
            initial_level: 1,
            holding_cost: 4.0,
            shortage_cost: 4.0,
            order_cost: 1.0,
            discount: 0.95,
            demand: crate::envs::DemandSpec {
                theta_space: vec![1.2, 1.6, 2.0, 2.4, 2.8],
                theta_true: 2.0,
                prior_weights: None,
            },
        };
        let env = crate::envs::build_inventory(&cfg).unwrap();
        let mu0 = uniform_belief(env.family());
        let rho = RiskFunctional::Expectation;
        let (table, _) = exact_dp(&env, &mu0, &rho).unwrap();
        let exact_root = table.value(0, env.initial_state(), &mu0).unwrap();

        let mut options = NsoOptions::new(SamplingBudget::nested(200, 200).unwrap());
        options.support_tol = 1e-10;
        let (solve_root, policy) =
            nso_solve(&env, &mu0, &rho, &options, RngStream::from_seed(11)).unwrap();
        // the tabulated policy exists at the root and picks a legal action
        let a0 = policy.action(0, env.initial_state(), &mu0).unwrap();
        assert!(env.is_admissible(env.initial_state(), a0));
        assert!(
            (solve_root - exact_root).abs() < 0.2,
            "solve root {solve_root} exact {exact_root}"
        );

        // re-estimate the root value through the same machinery for a
        // sanity band around the exact answer
        let dp_opts = ExactDpOptions::default();
        let support = env
            .family()
            .truncated_support(mu0.as_finite().unwrap().atoms(), dp_opts.support_tol)
            .unwrap();
        let levels =
            enumerate_reachable(&env, &mu0, &support.points, 2, &dp_opts).unwrap();
        let bank = levels.bank;
        // exact terminal-stage-1 values per node, then one sampled stage on top
        let (t1, _) = exact_dp(&env, &mu0, &rho).unwrap();
        let v_next = |s2: usize, mu2: &Posterior| t1.value_nearest(1, s2, mu2).unwrap_or(0.0);
        let (root, _) = nso_stage(
            &env,
            env.initial_state(),
            bank.get(0),
            &rho,
            &v_next,
            &options.budget,
            RngStream::from_seed(11),
        )
        .unwrap();
        assert!(
            (root - exact_root).abs() < 0.2,
            "sampled {root} exact {exact_root}"
        );
    }

    #[test]
    fn gaussian_solve_tabulates_a_usable_policy() {
        let cfg = crate::envs::MazeConfig {
            mask: crate::envs::DEFAULT_MASK.iter().map(|s| s.to_string()).collect(),
            t_max: 4,
            discount: 1.0,
            variant: crate::envs::MazeVariant::UncertainCost {
                sigma: 2.0,
                theta_true: 5.5,
                prior_mean: 5.0,
                prior_variance: 1.0,
                theta_lower: -1e9,
                theta_upper: None,
            },
        };
        let env = crate::envs::build_maze(&cfg).unwrap();
        let mu0 = Posterior::NormalMean(NormalMeanPosterior {
            mean: 5.0,
            variance: 1.0,
        });
        let mut options = NsoOptions::new(SamplingBudget::nested(8, 8).unwrap());
        options.obs_cap = 3;
        options.mean_step = 0.5;
        options.mean_halfwidth = 2.0;
        let rho = RiskFunctional::Expectation;
        let (root, policy) =
            nso_solve(&env, &mu0, &rho, &options, RngStream::from_seed(3)).unwrap();
        assert!(root.is_finite() && root >= 0.0, "root estimate {root}");

        let a0 = policy.action(0, env.initial_state(), &mu0).unwrap();
        assert!(env.is_admissible(env.initial_state(), a0));
        // off-grid beliefs snap to a tabulated neighbor instead of missing
        let shifted = Posterior::NormalMean(NormalMeanPosterior {
            mean: 5.23,
            variance: 0.74,
        });
        assert!(policy.action(1, env.initial_state(), &shifted).is_some());

        let (root_again, again) =
            nso_solve(&env, &mu0, &rho, &options, RngStream::from_seed(3)).unwrap();
        assert_eq!(root, root_again);
        assert_eq!(
            policy.action(0, env.initial_state(), &mu0),
            again.action(0, env.initial_state(), &mu0)
        );
    }
}
