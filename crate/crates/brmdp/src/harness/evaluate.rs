//! True-performance scoring of a solved policy: the expected discounted cost
//! of running it when outcomes really are drawn at the true parameter.
//!
//! Two modes. Exact mode sums over the (truncated) outcome support with a
//! memo on reached `(stage, state, belief)` triples, so it is deterministic
//! and carries no Monte Carlo error. Rollout mode simulates episodes and
//! reports the sample mean with its standard error; it is the only option
//! when the outcome support is continuous.

use std::collections::HashMap;

use super::config::EvaluationSpec;
use crate::error::{Error, Result};
use crate::model::Environment;
use crate::posterior::{FinitePosterior, Posterior, PosteriorKey};
use crate::rng::{tags, RngStream};
use crate::solvers::Policy;

/// Grid used to merge beliefs in the exact-mode memo. Far finer than the
/// solver grids: it only collapses beliefs that are equal up to float noise
/// from update ordering, keeping the recursion polynomial without visibly
/// perturbing values.
const MEMO_GRID: f64 = 1e-12;

/// Tail mass dropped when truncating a countable outcome support. Kept well
/// below every tolerance quoted against exact evaluation.
const SUPPORT_TOL: f64 = 1e-12;

/// A scored policy: the estimated expected cost and the Monte Carlo standard
/// error of that estimate (zero in exact mode).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub std_error: f64,
}

/// Score a policy under the configured evaluation mode. `stream` feeds the
/// rollout episodes and is ignored in exact mode.
pub fn evaluate_true_performance(
    env: &Environment,
    policy: &Policy,
    theta_true: f64,
    mode: &EvaluationSpec,
    stream: RngStream,
) -> Result<Evaluation> {
    match mode {
        EvaluationSpec::Exact => Ok(Evaluation {
            value: evaluate_exact(env, policy, theta_true)?,
            std_error: 0.0,
        }),
        EvaluationSpec::Rollout { episodes } => {
            evaluate_rollout(env, policy, theta_true, *episodes, stream)
        }
    }
}

/// Exact expected discounted cost of `policy` under the true parameter, by
/// backward recursion over the reachable trajectory tree.
pub fn evaluate_exact(env: &Environment, policy: &Policy, theta_true: f64) -> Result<f64> {
    let stages = env.horizon().stages().ok_or_else(|| {
        Error::Config("true-performance evaluation needs a finite horizon".into())
    })?;
    if !env.family().space.contains(theta_true) {
        return Err(Error::ThetaOutsideSpace { theta: theta_true });
    }
    let support = env.family().truncated_support(&[theta_true], SUPPORT_TOL)?;
    let (tracking, mu0) = belief_setup(policy, theta_true)?;
    let mut walker = Walker {
        env,
        policy,
        points: &support.points,
        probs: &support.probs[0],
        gamma: env.horizon().discount(),
        stages,
        tracking,
        memo: HashMap::new(),
    };
    walker.value(0, env.initial_state(), &mu0)
}

/// Monte Carlo estimate of the expected discounted cost of `policy` under
/// the true parameter, from `episodes` simulated episodes. Episode `e` draws
/// from the child stream `at(tags::EPISODE, e)`, so the estimate does not
/// depend on batching.
pub fn evaluate_rollout(
    env: &Environment,
    policy: &Policy,
    theta_true: f64,
    episodes: usize,
    stream: RngStream,
) -> Result<Evaluation> {
    let stages = env.horizon().stages().ok_or_else(|| {
        Error::Config("true-performance evaluation needs a finite horizon".into())
    })?;
    if episodes == 0 {
        return Err(Error::Config("rollout evaluation needs episodes".into()));
    }
    if !env.family().space.contains(theta_true) {
        return Err(Error::ThetaOutsideSpace { theta: theta_true });
    }
    let (tracking, mu0) = belief_setup(policy, theta_true)?;
    let family = env.family();
    let gamma = env.horizon().discount();

    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for e in 0..episodes {
        let mut rng = stream.at(tags::EPISODE, e as u64).rng();
        let mut state = env.initial_state();
        let mut belief = mu0.clone();
        let mut total = 0.0;
        let mut weight = 1.0;
        for t in 0..stages {
            let action = chosen_action(env, policy, t, state, &belief)?;
            let xi = family.sample(theta_true, &mut rng)?;
            let (next, cost) = env.step(state, action, xi)?;
            total += weight * cost;
            weight *= gamma;
            if tracking && env.observes(state) {
                belief = belief.update(family, xi)?;
            }
            state = next;
        }
        let delta = total - mean;
        mean += delta / (e + 1) as f64;
        m2 += delta * (total - mean);
    }
    let std_error = if episodes > 1 {
        (m2 / (episodes - 1) as f64 / episodes as f64).sqrt()
    } else {
        0.0
    };
    Ok(Evaluation {
        value: mean,
        std_error,
    })
}

/// Whether the belief trajectory needs tracking, and the belief to start it
/// from. Belief-blind policies get a placeholder that is never read.
fn belief_setup(policy: &Policy, theta_true: f64) -> Result<(bool, Posterior)> {
    if policy.is_belief_free() {
        let placeholder = Posterior::Finite(FinitePosterior::new(vec![theta_true], vec![1.0])?);
        return Ok((false, placeholder));
    }
    let mu0 = policy.initial_belief().cloned().ok_or_else(|| {
        Error::Config("the policy carries no initial belief to evaluate from".into())
    })?;
    Ok((true, mu0))
}

fn chosen_action(
    env: &Environment,
    policy: &Policy,
    stage: usize,
    state: usize,
    belief: &Posterior,
) -> Result<usize> {
    if let Some(a) = policy.action(stage, state, belief) {
        return Ok(a);
    }
    // fallback rule for augmented states the solver never tabulated
    env.actions(state)
        .first()
        .copied()
        .ok_or_else(|| Error::Config(format!("state {state} has no admissible actions")))
}

struct Walker<'a> {
    env: &'a Environment,
    policy: &'a Policy,
    points: &'a [f64],
    probs: &'a [f64],
    gamma: f64,
    stages: usize,
    tracking: bool,
    memo: HashMap<(usize, usize, Option<PosteriorKey>), f64>,
}

impl Walker<'_> {
    fn value(&mut self, t: usize, state: usize, belief: &Posterior) -> Result<f64> {
        if t == self.stages {
            return Ok(0.0);
        }
        let key = (
            t,
            state,
            self.tracking
                .then(|| belief.quantize_with(MEMO_GRID, MEMO_GRID)),
        );
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let action = chosen_action(self.env, self.policy, t, state, belief)?;
        let observes = self.env.observes(state);
        let v = if !observes {
            // unobserved outcomes cannot steer cost or transition, so one
            // representative outcome stands in for the whole support
            let (next, cost) = self.env.step(state, action, self.points[0])?;
            cost + self.gamma * self.value(t + 1, next, belief)?
        } else {
            let mut acc = 0.0;
            for (j, &xi) in self.points.iter().enumerate() {
                let p = self.probs[j];
                if p == 0.0 {
                    continue;
                }
                let (next, cost) = self.env.step(state, action, xi)?;
                let tail = if self.tracking {
                    let updated = belief.update(self.env.family(), xi)?;
                    self.value(t + 1, next, &updated)?
                } else {
                    self.value(t + 1, next, belief)?
                };
                acc += p * (cost + self.gamma * tail);
            }
            acc
        };
        self.memo.insert(key, v);
        Ok(v)
    }
}
