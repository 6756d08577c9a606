//! Adaptive play allocation for the expectation formulation on finite
//! parameter spaces.
//!
//! Each stage node is a small minimization bandit: one play of an action
//! draws one outcome per parameter atom, advances the belief, and reads the
//! continuation from a lookup oracle; the belief-weighted per-atom averages
//! estimate the action's value. Plays follow an optimism index (estimate
//! minus an exploration bonus), so most of the budget lands on the apparent
//! minimizer while every action keeps a logarithmic share. The node
//! estimate is the play-frequency weighted average of the per-action
//! estimates, which sits above the true minimum by a term decaying like
//! log(plays)/plays.

use std::cell::RefCell;
use std::collections::hash_map::Entry;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Environment, Horizon};
use crate::posterior::Posterior;
use crate::rng::{tags, RngStream};
use crate::solvers::exact::ExactDpOptions;
use crate::solvers::{pack, BeliefBank, IntMap, Policy, SamplingBudget};

/// Allocate `plays` action evaluations at one (state, belief) node and
/// estimate its value for the expectation formulation.
///
/// Needs a finite-support belief. Initialization plays every action once
/// (one outcome draw per parameter atom); each further play goes to the
/// action minimizing `Q̂(a) - sqrt(2 ln n / plays(a))`, ties to the lower
/// action id. Returns the play-frequency weighted value estimate, the
/// per-action estimates, and the per-action play counts. Errors with
/// `BudgetTooSmall` when `plays` cannot cover the initialization.
pub fn ucb_stage(
    env: &Environment,
    state: usize,
    belief: &Posterior,
    v_next: &dyn Fn(usize, &Posterior) -> f64,
    plays: usize,
    stream: RngStream,
) -> Result<(f64, Vec<f64>, Vec<u64>)> {
    let fin = belief.as_finite().ok_or_else(|| {
        Error::InvalidParameter("adaptive play allocation needs a finite parameter space".into())
    })?;
    let actions = env.actions(state);
    let n_actions = actions.len();
    if plays < n_actions {
        return Err(Error::BudgetTooSmall {
            given: plays,
            minimum: n_actions,
        });
    }

    let family = env.family();
    let atoms: Vec<f64> = fin.atoms().to_vec();
    let weights: Vec<f64> = fin.weights().to_vec();
    let n_atoms = atoms.len();
    let gamma = env.horizon().discount();
    let observes = env.observes(state);
    // draws from a countable support repeat, so their evaluations are worth
    // caching; continuous draws almost never do
    let cache_outcomes = family.is_discrete();

    // running per-(action, atom) sums of cost plus discounted continuation
    let mut sums = vec![0.0f64; n_actions * n_atoms];
    let mut counts = vec![0u64; n_actions];
    let mut qvals = vec![0.0f64; n_actions];
    let mut caches: Vec<IntMap<f64>> = vec![IntMap::default(); n_actions];
    let invariant: Vec<bool> = actions
        .iter()
        .map(|&a| !observes && env.xi_invariant(state, a))
        .collect();
    // one generator per action keeps every action's draw sequence fixed no
    // matter how the index interleaves the plays
    let mut rngs: Vec<_> = (0..n_actions)
        .map(|ai| stream.at(tags::ACTION, ai as u64).rng())
        .collect();

    let mut play = |ai: usize,
                    counts: &mut [u64],
                    sums: &mut [f64],
                    qvals: &mut [f64],
                    rngs: &mut [rand_chacha::ChaCha8Rng]|
     -> Result<()> {
        let action = actions[ai];
        let rng = &mut rngs[ai];
        for (l, &theta) in atoms.iter().enumerate() {
            let xi = if invariant[ai] {
                if family.supports(0.0) {
                    0.0
                } else {
                    1.0
                }
            } else {
                family.sample(theta, rng)?
            };
            let evaluate = |xi: f64| -> Result<f64> {
                let (s2, c) = env.transition(state, action, xi);
                let cont = if observes {
                    let updated = belief.update(family, xi)?;
                    v_next(s2, &updated)
                } else {
                    v_next(s2, belief)
                };
                Ok(c + gamma * cont)
            };
            let h = if cache_outcomes {
                match caches[ai].entry(xi.to_bits()) {
                    Entry::Occupied(e) => *e.get(),
                    Entry::Vacant(slot) => *slot.insert(evaluate(xi)?),
                }
            } else {
                evaluate(xi)?
            };
            sums[ai * n_atoms + l] += h;
        }
        counts[ai] += 1;
        let n = counts[ai] as f64;
        qvals[ai] = weights
            .iter()
            .enumerate()
            .map(|(l, w)| w * sums[ai * n_atoms + l] / n)
            .sum();
        Ok(())
    };

    for ai in 0..n_actions {
        play(ai, &mut counts, &mut sums, &mut qvals, &mut rngs)?;
    }
    let mut n_total = n_actions as u64;

    while (n_total as usize) < plays {
        let log_n = (n_total as f64).ln();
        let mut pick = 0usize;
        let mut best = f64::INFINITY;
        for ai in 0..n_actions {
            let index = qvals[ai] - (2.0 * log_n / counts[ai] as f64).sqrt();
            if index < best {
                best = index;
                pick = ai;
            }
        }
        play(pick, &mut counts, &mut sums, &mut qvals, &mut rngs)?;
        n_total += 1;
    }

    let value = qvals
        .iter()
        .zip(&counts)
        .map(|(qa, &na)| qa * na as f64)
        .sum::<f64>()
        / n_total as f64;
    Ok((value, qvals, counts))
}

struct LazyCtx<'a> {
    env: &'a Environment,
    budget: &'a SamplingBudget,
    stream: RngStream,
    stages: usize,
    bank: RefCell<BeliefBank>,
    /// Per stage: packed (state, belief id) -> (value estimate, action).
    memo: RefCell<Vec<IntMap<(f64, u32)>>>,
    failure: RefCell<Option<Error>>,
}

/// Estimate one node's value, expanding children on demand and memoizing by
/// quantized belief key so each distinct node is sampled once.
fn lazy_value(ctx: &LazyCtx, t: usize, state: usize, belief: &Posterior) -> f64 {
    if t == ctx.stages || ctx.failure.borrow().is_some() {
        return 0.0;
    }
    let b = ctx.bank.borrow_mut().intern(belief.clone());
    let packed = pack(state as u32, b);
    if let Some(&(v, _)) = ctx.memo.borrow()[t].get(&packed) {
        return v;
    }
    let per_stage = &ctx.budget.per_stage;
    let plays = per_stage[t.min(per_stage.len() - 1)];
    let node_stream = ctx.stream.at(tags::STAGE, t as u64).at(tags::NODE, b as u64);
    let v_next = |s2: usize, mu2: &Posterior| lazy_value(ctx, t + 1, s2, mu2);
    match ucb_stage(ctx.env, state, belief, &v_next, plays, node_stream) {
        Ok((v, q, _)) => {
            let mut best_ai = 0usize;
            for (ai, &qa) in q.iter().enumerate() {
                if qa < q[best_ai] {
                    best_ai = ai;
                }
            }
            let action = ctx.env.actions(state)[best_ai] as u32;
            ctx.memo.borrow_mut()[t].insert(packed, (v, action));
            v
        }
        Err(e) => {
            let mut failure = ctx.failure.borrow_mut();
            if failure.is_none() {
                *failure = Some(e);
            }
            0.0
        }
    }
}

/// Backward value estimation over the whole horizon, expanding only the
/// (state, belief) nodes the sampling actually reaches and memoizing them by
/// quantized belief key.
///
/// The per-stage play budget comes from `budget.per_stage` (the last entry
/// covers any later stages). Returns the root value estimate and a policy
/// picking each visited node's lowest-estimate action.
pub fn ucb_solve(
    env: &Environment,
    mu0: &Posterior,
    budget: &SamplingBudget,
    stream: RngStream,
) -> Result<(f64, Policy)> {
    let stages = match env.horizon() {
        Horizon::Finite { stages, .. } => stages,
        Horizon::Discounted { .. } => {
            return Err(Error::Config(
                "adaptive play allocation needs a finite horizon".into(),
            ))
        }
    };
    if stages == 0 {
        return Err(Error::Config("horizon must have at least one stage".into()));
    }
    if mu0.as_finite().is_none() {
        return Err(Error::InvalidParameter(
            "adaptive play allocation needs a finite parameter space".into(),
        ));
    }
    if budget.per_stage.is_empty() {
        return Err(Error::Config(
            "adaptive play allocation needs per-stage play budgets".into(),
        ));
    }

    let opts = ExactDpOptions::default();
    let ctx = LazyCtx {
        env,
        budget,
        stream,
        stages,
        bank: RefCell::new(BeliefBank::new(opts.weight_grid, opts.gaussian_grid)),
        memo: RefCell::new(vec![IntMap::default(); stages]),
        failure: RefCell::new(None),
    };
    let root = lazy_value(&ctx, 0, env.initial_state(), mu0);
    if let Some(e) = ctx.failure.into_inner() {
        return Err(e);
    }

    let memo = ctx.memo.into_inner();
    let policy_stages: Vec<IntMap<u32>> = memo
        .into_iter()
        .map(|m| m.into_iter().map(|(k, (_, a))| (k, a)).collect())
        .collect();
    let keyset = Arc::new(ctx.bank.into_inner().into_keyset());
    let policy = Policy::staged(
        keyset,
        opts.weight_grid,
        opts.gaussian_grid,
        policy_stages,
        mu0.clone(),
    );
    Ok((root, policy))
}
