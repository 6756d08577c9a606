//! Exact solver: enumerate every augmented state reachable from the initial
//! state and belief, then sweep backward applying the risk functional over
//! the posterior at each stage.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::Environment;
use crate::posterior::Posterior;
use crate::risk::RiskFunctional;

use super::{pack, BeliefBank, IntMap, Policy, ValueTable};

/// Tuning knobs for the exact solver.
#[derive(Clone, Debug)]
pub struct ExactDpOptions {
    /// Quantization grid for belief weights when interning belief keys.
    pub weight_grid: f64,
    /// Quantization grid for Gaussian belief coordinates.
    pub gaussian_grid: f64,
    /// Hard ceiling on the total number of tabulated augmented states,
    /// summed over stages.
    pub state_cap: usize,
    /// Outcome probability mass allowed beyond the truncated support.
    pub support_tol: f64,
}

impl Default for ExactDpOptions {
    fn default() -> Self {
        ExactDpOptions {
            weight_grid: crate::posterior::WEIGHT_GRID,
            gaussian_grid: crate::posterior::GAUSSIAN_GRID,
            state_cap: 5_000_000,
            support_tol: 1e-10,
        }
    }
}

/// One stage of the reachable set: packed `(state, belief)` pairs with a
/// stable slot order.
#[derive(Default)]
pub(crate) struct LevelMap {
    pub(crate) index: IntMap<u32>,
    pub(crate) list: Vec<(u32, u32)>,
}

impl LevelMap {
    fn insert(&mut self, state: u32, belief: u32) {
        let key = pack(state, belief);
        if let std::collections::hash_map::Entry::Vacant(e) = self.index.entry(key) {
            e.insert(self.list.len() as u32);
            self.list.push((state, belief));
        }
    }

    #[inline]
    pub(crate) fn slot(&self, state: u32, belief: u32) -> Option<u32> {
        self.index.get(&pack(state, belief)).copied()
    }
}

/// Reachable augmented states per stage, plus the belief-update successor
/// table shared by everything downstream of the forward pass.
pub(crate) struct Levels {
    pub(crate) bank: BeliefBank,
    /// Per belief id: the belief id reached by updating with each truncated
    /// support point, filled for beliefs expanded at observing states.
    pub(crate) succ: Vec<Option<Box<[u32]>>>,
    /// Stage `0..=stages`; the last level holds the terminal states.
    pub(crate) levels: Vec<LevelMap>,
}

fn intern_tracked(bank: &mut BeliefBank, succ: &mut Vec<Option<Box<[u32]>>>, p: Posterior) -> u32 {
    let idx = bank.intern(p);
    while succ.len() < bank.len() {
        succ.push(None);
    }
    idx
}

fn ensure_successors(
    env: &Environment,
    bank: &mut BeliefBank,
    succ: &mut Vec<Option<Box<[u32]>>>,
    belief: u32,
    points: &[f64],
) -> Result<()> {
    if succ[belief as usize].is_some() {
        return Ok(());
    }
    let mut row = Vec::with_capacity(points.len());
    for &xi in points {
        let updated = bank.get(belief).update(env.family(), xi)?;
        row.push(intern_tracked(bank, succ, updated));
    }
    succ[belief as usize] = Some(row.into_boxed_slice());
    Ok(())
}

/// Forward pass: enumerate the augmented states reachable at each stage from
/// `(initial state, mu0)` under every admissible action and every truncated
/// support point.
pub(crate) fn enumerate_reachable(
    env: &Environment,
    mu0: &Posterior,
    points: &[f64],
    stages: usize,
    opts: &ExactDpOptions,
) -> Result<Levels> {
    let mut bank = BeliefBank::new(opts.weight_grid, opts.gaussian_grid);
    let mut succ: Vec<Option<Box<[u32]>>> = Vec::new();
    let b0 = intern_tracked(&mut bank, &mut succ, mu0.clone());

    let mut root = LevelMap::default();
    root.insert(env.initial_state() as u32, b0);
    let mut levels = Vec::with_capacity(stages + 1);
    levels.push(root);
    let mut total = 1usize;

    for t in 0..stages {
        let current = std::mem::take(&mut levels[t].list);
        let mut next = LevelMap::default();
        for &(s, b) in &current {
            let su = s as usize;
            let observes = env.observes(su);
            for &a in env.actions(su) {
                if !observes {
                    if env.xi_invariant(su, a) {
                        let (s2, _) = env.transition(su, a, points[0]);
                        next.insert(s2 as u32, b);
                    } else {
                        for &xi in points {
                            let (s2, _) = env.transition(su, a, xi);
                            next.insert(s2 as u32, b);
                        }
                    }
                } else {
                    ensure_successors(env, &mut bank, &mut succ, b, points)?;
                    let row = succ[b as usize].as_deref().expect("just filled");
                    for (k, &xi) in points.iter().enumerate() {
                        let (s2, _) = env.transition(su, a, xi);
                        next.insert(s2 as u32, row[k]);
                    }
                }
            }
        }
        levels[t].list = current;
        total += next.list.len();
        if total > opts.state_cap {
            return Err(Error::StateCapExceeded {
                cap: opts.state_cap,
            });
        }
        levels.push(next);
    }

    Ok(Levels { bank, succ, levels })
}

/// Exact finite-horizon solve under one risk functional, with default
/// options. Returns the stage-value table over the reachable augmented
/// states and the minimizing policy.
pub fn exact_dp(
    env: &Environment,
    mu0: &Posterior,
    rho: &RiskFunctional,
) -> Result<(ValueTable, Policy)> {
    exact_dp_with(env, mu0, rho, &ExactDpOptions::default())
}

/// Exact finite-horizon solve with explicit options.
pub fn exact_dp_with(
    env: &Environment,
    mu0: &Posterior,
    rho: &RiskFunctional,
    opts: &ExactDpOptions,
) -> Result<(ValueTable, Policy)> {
    let mut out = exact_dp_multi(env, mu0, std::slice::from_ref(rho), opts)?;
    Ok(out.pop().expect("one functional in, one table out"))
}

/// Solve once per risk functional in a single backward sweep. The functionals
/// share the forward enumeration, successor lookups, and stage costs, which
/// is roughly a factor-of-`rhos.len()` saving over separate solves.
pub(crate) fn exact_dp_multi(
    env: &Environment,
    mu0: &Posterior,
    rhos: &[RiskFunctional],
    opts: &ExactDpOptions,
) -> Result<Vec<(ValueTable, Policy)>> {
    assert!(!rhos.is_empty(), "need at least one risk functional");
    let stages = env.horizon().stages().ok_or_else(|| {
        Error::Config("exact recursion requires a finite horizon".into())
    })?;
    let gamma = env.horizon().discount();
    let fin = mu0.as_finite().ok_or_else(|| {
        Error::InvalidParameter("exact recursion requires a finite parameter space".into())
    })?;
    let support = env.family().truncated_support(fin.atoms(), opts.support_tol)?;
    let points = &support.points;
    let n_rho = rhos.len();

    let Levels { bank, succ, levels } =
        enumerate_reachable(env, mu0, points, stages, opts)?;

    // Slot-major stage values with one lane per risk functional.
    let mut v_next: Vec<f64> = vec![0.0; levels[stages].list.len() * n_rho];

    let mut out_values: Vec<Vec<IntMap<f64>>> =
        (0..n_rho).map(|_| vec![IntMap::default(); stages + 1]).collect();
    let mut out_actions: Vec<Vec<IntMap<u32>>> =
        (0..n_rho).map(|_| vec![IntMap::default(); stages]).collect();
    for (ri, per_stage) in out_values.iter_mut().enumerate() {
        let terminal = &mut per_stage[stages];
        terminal.reserve(levels[stages].list.len());
        for &(s, b) in &levels[stages].list {
            terminal.insert(pack(s, b), 0.0);
        }
        let _ = ri;
    }

    // Reusable buffers: per-outcome continuations, per-atom expectations,
    // and the per-functional extraction column.
    let mut h = vec![0.0f64; points.len() * n_rho];
    let mut cand = vec![0.0f64; n_rho];
    let mut best = vec![0.0f64; n_rho];
    let mut best_a = vec![0u32; n_rho];

    for t in (0..stages).rev() {
        let level = &levels[t];
        let next = &levels[t + 1];
        let mut v_t = vec![0.0f64; level.list.len() * n_rho];
        for (ri, per_stage) in out_values.iter_mut().enumerate() {
            per_stage[t].reserve(level.list.len());
            out_actions[ri][t].reserve(level.list.len());
        }

        for (slot, &(s, b)) in level.list.iter().enumerate() {
            let su = s as usize;
            let observes = env.observes(su);
            let weights = bank
                .get(b)
                .as_finite()
                .expect("finite beliefs stay finite under updates")
                .weights();
            let n_atoms = weights.len();
            let mut e = vec![0.0f64; n_atoms * n_rho];
            let mut col = vec![0.0f64; n_atoms];

            best.iter_mut().for_each(|v| *v = f64::INFINITY);
            for &a in env.actions(su) {
                if !observes && env.xi_invariant(su, a) {
                    let (s2, c) = env.transition(su, a, points[0]);
                    let j = next
                        .slot(s2 as u32, b)
                        .expect("forward pass enumerated this successor")
                        as usize;
                    for ri in 0..n_rho {
                        cand[ri] = c + gamma * v_next[j * n_rho + ri];
                    }
                } else {
                    let row = if observes {
                        succ[b as usize].as_deref()
                    } else {
                        None
                    };
                    for (k, &xi) in points.iter().enumerate() {
                        let (s2, c) = env.transition(su, a, xi);
                        let nb = row.map_or(b, |r| r[k]);
                        let j = next
                            .slot(s2 as u32, nb)
                            .expect("forward pass enumerated this successor")
                            as usize;
                        for ri in 0..n_rho {
                            h[k * n_rho + ri] = c + gamma * v_next[j * n_rho + ri];
                        }
                    }
                    for i in 0..n_atoms {
                        let prow = &support.probs[i];
                        let lane = &mut e[i * n_rho..(i + 1) * n_rho];
                        lane.iter_mut().for_each(|v| *v = 0.0);
                        for (k, &p) in prow.iter().enumerate() {
                            if p == 0.0 {
                                continue;
                            }
                            for ri in 0..n_rho {
                                lane[ri] += p * h[k * n_rho + ri];
                            }
                        }
                    }
                    for (ri, rho) in rhos.iter().enumerate() {
                        for i in 0..n_atoms {
                            col[i] = e[i * n_rho + ri];
                        }
                        cand[ri] = rho.apply_weighted(&col, weights)?;
                    }
                }
                for ri in 0..n_rho {
                    // strict comparison keeps the earliest (lowest) action on ties
                    if cand[ri] < best[ri] {
                        best[ri] = cand[ri];
                        best_a[ri] = a as u32;
                    }
                }
            }

            let packed = pack(s, b);
            for ri in 0..n_rho {
                v_t[slot * n_rho + ri] = best[ri];
                out_values[ri][t].insert(packed, best[ri]);
                out_actions[ri][t].insert(packed, best_a[ri]);
            }
        }
        v_next = v_t;
    }

    let keyset = Arc::new(bank.into_keyset());
    let mut out = Vec::with_capacity(n_rho);
    for (values, actions) in out_values.into_iter().zip(out_actions) {
        let table = ValueTable::from_parts(
            Arc::clone(&keyset),
            opts.weight_grid,
            opts.gaussian_grid,
            values,
            actions.clone(),
        );
        let policy = Policy::staged(
            Arc::clone(&keyset),
            opts.weight_grid,
            opts.gaussian_grid,
            actions,
            mu0.clone(),
        );
        out.push((table, policy));
    }
    Ok(out)
}
