//! Discounted-horizon planning over a fixed set of augmented states: a
//! one-sweep risk-adjusted backup operator and value iteration on top of it.
//!
//! Beliefs never recur exactly (every observation sharpens the posterior), so
//! no finite table can cover all beliefs an infinite run visits. The operator
//! therefore works on a caller-chosen universe of (state, belief) pairs.
//! Transitions that land outside it either snap to the nearest stored belief
//! for the destination state or raise [`Error::UniverseEscape`], depending on
//! the context's projection setting. [`point_mass_universe`] builds the one
//! universe that is exactly closed, since a point-mass belief is a fixed
//! point of the posterior update; it is the natural surface for checking
//! operator laws without any projection error.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Environment, Horizon, XiSupport};
use crate::posterior::{Posterior, PosteriorKey};
use crate::risk::RiskFunctional;
use crate::rng::{tags, RngStream};
use crate::solvers::{
    nearest_in, nso_stage, pack, IntMap, KeySet, Policy, SamplingBudget,
};

/// Stopping tolerance used by the CLI when none is given.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Sweep cap used by the CLI when none is given.
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// How one backup evaluates the per-action nested objective.
#[derive(Clone, Debug)]
pub enum Backend {
    /// Nested sums over the truncated outcome support. Needs finite-support
    /// beliefs and a countable outcome family.
    Exact,
    /// Nested Monte Carlo with the given budget. Every universe slot reuses
    /// its own substream on every sweep, so repeated applications are coupled
    /// through common random numbers and the sampled operator is measurably
    /// contractive.
    Sampled {
        budget: SamplingBudget,
        stream: RngStream,
    },
}

/// Construction knobs for [`OperatorContext`].
#[derive(Clone, Copy, Debug)]
pub struct OperatorOptions {
    /// Outcome tail mass dropped when truncating the support (exact backend).
    pub support_tol: f64,
    /// Quantization grid for finite-belief weights.
    pub weight_grid: f64,
    /// Quantization grid for conjugate normal beliefs.
    pub gaussian_grid: f64,
    /// Snap out-of-universe transitions to the nearest stored belief of the
    /// destination state instead of erroring.
    pub project: bool,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        OperatorOptions {
            support_tol: 1e-10,
            weight_grid: 1e-6,
            gaussian_grid: 1e-4,
            project: true,
        }
    }
}

/// A backup operator bound to one environment, risk functional, evaluation
/// backend, and augmented-state universe. Value maps are plain `&[f64]`
/// indexed by universe slot.
pub struct OperatorContext<'a> {
    env: &'a Environment,
    rho: RiskFunctional,
    backend: Backend,
    options: OperatorOptions,
    gamma: f64,
    /// Universe slots in caller order.
    states: Vec<(usize, Posterior)>,
    /// Interned key id of each slot's belief.
    slot_keys: Vec<u32>,
    keys: Arc<KeySet>,
    /// pack(state, key id) -> slot index.
    slot_of: IntMap<usize>,
    /// state -> sorted key ids stored for it (projection candidates).
    by_state: HashMap<u32, Vec<u32>>,
    /// Exact backend: common truncated support plus a row index per atom.
    support: Option<XiSupport>,
    atom_rows: HashMap<u64, usize>,
}

impl std::fmt::Debug for OperatorContext<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorContext")
            .field("rho", &self.rho)
            .field("backend", &self.backend)
            .field("gamma", &self.gamma)
            .field("universe", &self.states.len())
            .field("keys", &self.keys.len())
            .finish()
    }
}

impl<'a> OperatorContext<'a> {
    /// Validate and index a universe. The environment must carry a discounted
    /// horizon with discount strictly inside (0, 1); every universe state
    /// needs at least one admissible action; the exact backend additionally
    /// needs finite-support beliefs and a countable outcome family.
    pub fn new(
        env: &'a Environment,
        rho: RiskFunctional,
        backend: Backend,
        universe: Vec<(usize, Posterior)>,
        options: OperatorOptions,
    ) -> Result<Self> {
        let gamma = match env.horizon() {
            Horizon::Discounted { discount } => discount,
            Horizon::Finite { .. } => {
                return Err(Error::Config(
                    "the backup operator needs a discounted horizon".into(),
                ))
            }
        };
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Config(format!(
                "discount {gamma} must lie strictly inside (0, 1)"
            )));
        }
        if universe.is_empty() {
            return Err(Error::Config("universe must not be empty".into()));
        }

        let mut keyset = KeySet::default();
        let mut slot_keys = Vec::with_capacity(universe.len());
        let mut slot_of: IntMap<usize> = IntMap::default();
        let mut by_state: HashMap<u32, Vec<u32>> = HashMap::new();
        let mut union_atoms: Vec<f64> = Vec::new();
        for (slot, (state, belief)) in universe.iter().enumerate() {
            if *state >= env.num_states() {
                return Err(Error::InvalidParameter(format!(
                    "universe state {state} is out of range"
                )));
            }
            if env.actions(*state).is_empty() {
                return Err(Error::Config(format!(
                    "state {state} has no admissible actions"
                )));
            }
            if matches!(backend, Backend::Exact) {
                let fin = belief.as_finite().ok_or_else(|| {
                    Error::Config(
                        "the exact backend needs finite-support beliefs".into(),
                    )
                })?;
                for &a in fin.atoms() {
                    if !union_atoms.contains(&a) {
                        union_atoms.push(a);
                    }
                }
            }
            let key = belief.quantize_with(options.weight_grid, options.gaussian_grid);
            let before = keyset.len();
            let k = keyset.intern(key);
            if keyset.len() == before && slot_of.contains_key(&pack(*state as u32, k)) {
                return Err(Error::Config(format!(
                    "universe repeats the augmented state ({state}, belief {k})"
                )));
            }
            slot_of.insert(pack(*state as u32, k), slot);
            by_state.entry(*state as u32).or_default().push(k);
            slot_keys.push(k);
        }
        for keys in by_state.values_mut() {
            keys.sort_unstable();
            keys.dedup();
        }

        let (support, atom_rows) = if matches!(backend, Backend::Exact) {
            union_atoms.sort_by(f64::total_cmp);
            let support = env
                .family()
                .truncated_support(&union_atoms, options.support_tol)?;
            let rows = union_atoms
                .iter()
                .enumerate()
                .map(|(i, a)| (a.to_bits(), i))
                .collect();
            (Some(support), rows)
        } else {
            (None, HashMap::new())
        };

        Ok(OperatorContext {
            env,
            rho,
            backend,
            options,
            gamma,
            states: universe,
            slot_keys,
            keys: Arc::new(keyset),
            slot_of,
            by_state,
            support,
            atom_rows,
        })
    }

    pub fn env(&self) -> &Environment {
        self.env
    }

    pub fn discount(&self) -> f64 {
        self.gamma
    }

    /// Number of augmented states in the universe.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// The universe in slot order.
    pub fn universe(&self) -> &[(usize, Posterior)] {
        &self.states
    }

    /// Slot of an augmented state, when its quantized key is stored.
    pub fn slot(&self, state: usize, belief: &Posterior) -> Option<usize> {
        let key = belief.quantize_with(self.options.weight_grid, self.options.gaussian_grid);
        let k = self.keys.lookup(&key)?;
        self.slot_of.get(&pack(state as u32, k)).copied()
    }

    /// Largest absolute stage cost over states, admissible actions and the
    /// truncated outcome support. Bounds every value function by
    /// `cost_bound / (1 - discount)`.
    pub fn cost_bound(&self) -> Result<f64> {
        match &self.support {
            Some(support) => Ok(self.env.max_abs_cost(support)),
            None => {
                let atoms: Vec<f64> = self
                    .states
                    .iter()
                    .filter_map(|(_, b)| b.as_finite())
                    .flat_map(|f| f.atoms().iter().copied())
                    .collect();
                if atoms.is_empty() {
                    return Err(Error::UnboundedSupport(
                        "cost bound needs finite-support beliefs".into(),
                    ));
                }
                let support = self
                    .env
                    .family()
                    .truncated_support(&atoms, self.options.support_tol)?;
                Ok(self.env.max_abs_cost(&support))
            }
        }
    }

    /// Continuation value for a transition target: exact slot hit, else
    /// nearest stored belief of that state when projection is enabled.
    fn resolve(
        &self,
        values: &[f64],
        state: u32,
        key_id: Option<u32>,
        probe: &PosteriorKey,
    ) -> Result<f64> {
        if let Some(k) = key_id {
            if let Some(&slot) = self.slot_of.get(&pack(state, k)) {
                return Ok(values[slot]);
            }
        }
        if self.options.project {
            if let Some(candidates) = self.by_state.get(&state) {
                if let Some(k) = nearest_in(&self.keys, candidates, probe) {
                    if let Some(&slot) = self.slot_of.get(&pack(state, k)) {
                        return Ok(values[slot]);
                    }
                }
            }
        }
        Err(Error::UniverseEscape {
            state: state as usize,
        })
    }

    /// One backup at one slot, returning value and minimizing action.
    fn backup(&self, values: &[f64], slot: usize) -> Result<(f64, usize)> {
        let (state, belief) = &self.states[slot];
        match &self.backend {
            Backend::Exact => self.backup_exact(values, slot, *state, belief),
            Backend::Sampled { budget, stream } => {
                let escape = RefCell::new(None);
                let v_next = |s2: usize, mu2: &Posterior| -> f64 {
                    let probe =
                        mu2.quantize_with(self.options.weight_grid, self.options.gaussian_grid);
                    let key_id = self.keys.lookup(&probe);
                    match self.resolve(values, s2 as u32, key_id, &probe) {
                        Ok(v) => v,
                        Err(e) => {
                            escape.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                };
                let got = nso_stage(
                    self.env,
                    *state,
                    belief,
                    &self.rho,
                    &v_next,
                    budget,
                    stream.at(tags::NODE, slot as u64),
                )?;
                if let Some(e) = escape.into_inner() {
                    return Err(e);
                }
                Ok(got)
            }
        }
    }

    fn backup_exact(
        &self,
        values: &[f64],
        slot: usize,
        state: usize,
        belief: &Posterior,
    ) -> Result<(f64, usize)> {
        let fin = belief.as_finite().expect("validated at construction");
        let support = self.support.as_ref().expect("exact backend has support");
        let family = self.env.family();
        let observes = self.env.observes(state);

        // the belief after each outcome is action-independent; resolve its
        // key once per outcome, skipping outcomes the belief gives no mass
        // (the update is undefined there and only zero-weight atoms reach them)
        let mut next_keys: Vec<Option<(Option<u32>, PosteriorKey)>> =
            Vec::with_capacity(support.points.len());
        if observes {
            for (j, _) in support.points.iter().enumerate() {
                let reachable = fin.atoms().iter().zip(fin.weights()).any(|(&theta, &w)| {
                    w > 0.0 && support.probs[self.atom_rows[&theta.to_bits()]][j] > 0.0
                });
                if !reachable {
                    next_keys.push(None);
                    continue;
                }
                let updated = belief.update(family, support.points[j])?;
                let probe =
                    updated.quantize_with(self.options.weight_grid, self.options.gaussian_grid);
                let key_id = self.keys.lookup(&probe);
                next_keys.push(Some((key_id, probe)));
            }
        } else {
            let own = self.slot_keys[slot];
            let probe = self.keys.key(own).clone();
            next_keys.resize(support.points.len(), Some((Some(own), probe)));
        }

        let mut best = f64::INFINITY;
        let mut best_action = self.env.actions(state)[0];
        let mut per_atom = vec![0.0f64; fin.atoms().len()];
        for &action in self.env.actions(state) {
            for (l, &theta) in fin.atoms().iter().enumerate() {
                let row = self.atom_rows[&theta.to_bits()];
                let mut e = 0.0;
                for (j, &xi) in support.points.iter().enumerate() {
                    let p = support.probs[row][j];
                    if p == 0.0 {
                        continue;
                    }
                    let Some((key_id, probe)) = &next_keys[j] else {
                        continue;
                    };
                    let (s2, cost) = self.env.transition(state, action, xi);
                    let cont = self.resolve(values, s2 as u32, *key_id, probe)?;
                    e += p * (cost + self.gamma * cont);
                }
                per_atom[l] = e;
            }
            let value = self.rho.apply_weighted(&per_atom, fin.weights())?;
            if value < best {
                best = value;
                best_action = action;
            }
        }
        Ok((best, best_action))
    }

    fn apply_with_actions(&self, values: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        if values.len() != self.states.len() {
            return Err(Error::InvalidParameter(format!(
                "value map has {} entries for a universe of {}",
                values.len(),
                self.states.len()
            )));
        }
        let mut out = Vec::with_capacity(self.states.len());
        let mut acts = Vec::with_capacity(self.states.len());
        for slot in 0..self.states.len() {
            let (v, a) = self.backup(values, slot)?;
            out.push(v);
            acts.push(a);
        }
        Ok((out, acts))
    }
}

/// Apply the backup operator once: for every universe slot, the minimum over
/// admissible actions of the risk functional over per-parameter expected
/// cost-plus-discounted-continuation.
pub fn bellman_apply(ctx: &OperatorContext, values: &[f64]) -> Result<Vec<f64>> {
    Ok(ctx.apply_with_actions(values)?.0)
}

/// Result of [`value_iteration`]: the final value map over universe slots,
/// the greedy stationary policy extracted from it, the number of operator
/// sweeps performed, and whether the stopping rule was met before the sweep
/// cap.
#[derive(Debug)]
pub struct Convergence {
    pub values: Vec<f64>,
    pub policy: Policy,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterate the backup operator from `v0` until successive sweeps differ by at
/// most `epsilon * (1 - discount) / discount` in the sup norm, which leaves
/// the final map within `epsilon` of the fixed point, or until `max_iters`
/// sweeps have run (`converged` reports which). A final extraction sweep
/// computes the greedy policy; its refreshed values are the ones returned.
pub fn value_iteration(
    ctx: &OperatorContext,
    v0: &[f64],
    epsilon: f64,
    max_iters: usize,
) -> Result<Convergence> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {epsilon} must be positive"
        )));
    }
    if max_iters == 0 {
        return Err(Error::Config("need at least one sweep".into()));
    }
    let threshold = epsilon * (1.0 - ctx.gamma) / ctx.gamma;
    let mut values = v0.to_vec();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let next = bellman_apply(ctx, &values)?;
        iterations += 1;
        let delta = values
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        values = next;
        if delta <= threshold {
            converged = true;
            break;
        }
    }

    let (final_values, actions) = ctx.apply_with_actions(&values)?;
    let mut map: IntMap<u32> = IntMap::default();
    for (slot, &(state, _)) in ctx.states.iter().enumerate() {
        map.insert(
            pack(state as u32, ctx.slot_keys[slot]),
            actions[slot] as u32,
        );
    }
    let policy = Policy::stationary(
        ctx.keys.clone(),
        ctx.options.weight_grid,
        ctx.options.gaussian_grid,
        map,
        None,
    );
    Ok(Convergence {
        values: final_values,
        policy,
        iterations,
        converged,
    })
}

/// Every physical state paired with a point-mass belief at every parameter
/// atom. Point masses are fixed points of the posterior update, so this
/// universe is exactly closed under transitions and needs no projection.
pub fn point_mass_universe(env: &Environment) -> Result<Vec<(usize, Posterior)>> {
    let belief_atoms = crate::posterior::FinitePosterior::uniform(env.family())?
        .atoms()
        .to_vec();
    let mut universe = Vec::with_capacity(env.num_states() * belief_atoms.len());
    for state in 0..env.num_states() {
        for &theta in &belief_atoms {
            let point =
                crate::posterior::FinitePosterior::point_mass(belief_atoms.clone(), theta)?;
            universe.push((state, Posterior::Finite(point)));
        }
    }
    Ok(universe)
}
