//! Finite-horizon solvers and the stage-value data structures they share.
//!
//! Values and actions are tabulated over augmented states: a physical state
//! index paired with a belief, the latter interned by its quantized key.
//! `exact_dp` fills the tables by exact backward recursion over the reachable
//! set, `nso_solve` by nested Monte Carlo sampling, and `ucb_solve` by
//! optimism-guided adaptive sampling with lazy memoization.

mod exact;
mod nso;
mod ucb;

pub use exact::{exact_dp, exact_dp_with, ExactDpOptions};
pub(crate) use exact::exact_dp_multi;
pub use nso::{nso_solve, nso_stage, NsoOptions};
pub use ucb::{ucb_solve, ucb_stage};

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::posterior::{Posterior, PosteriorKey};

/// Multiply-and-mix hasher for small integer keys (packed state/belief ids).
/// Solver inner loops are dominated by these lookups, and the default hasher
/// is measurably slower without buying anything for keys we generate
/// ourselves.
#[derive(Default)]
pub(crate) struct IntHasher(u64);

impl Hasher for IntHasher {
    #[inline]
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    #[inline]
    fn write_u64(&mut self, i: u64) {
        let mut x = i.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        x ^= x >> 29;
        x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x ^= x >> 32;
        self.0 = x;
    }

    #[inline]
    fn write_usize(&mut self, i: usize) {
        self.write_u64(i as u64);
    }
}

pub(crate) type IntMap<V> = HashMap<u64, V, BuildHasherDefault<IntHasher>>;

#[inline]
pub(crate) fn pack(state: u32, belief: u32) -> u64 {
    (u64::from(state) << 32) | u64::from(belief)
}

/// Interned belief keys shared by the tables and policies of one solve.
#[derive(Debug, Default)]
pub(crate) struct KeySet {
    keys: Vec<PosteriorKey>,
    index: HashMap<PosteriorKey, u32>,
}

impl KeySet {
    pub(crate) fn intern(&mut self, key: PosteriorKey) -> u32 {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.keys.len() as u32;
        self.keys.push(key.clone());
        self.index.insert(key, i);
        i
    }

    pub(crate) fn lookup(&self, key: &PosteriorKey) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub(crate) fn key(&self, i: u32) -> &PosteriorKey {
        &self.keys[i as usize]
    }

    pub(crate) fn len(&self) -> usize {
        self.keys.len()
    }
}

/// Beliefs interned by quantized key, so posterior updates can be memoized
/// and augmented states carry a compact id.
pub(crate) struct BeliefBank {
    pub(crate) weight_grid: f64,
    pub(crate) gaussian_grid: f64,
    items: Vec<Posterior>,
    keyset: KeySet,
}

impl BeliefBank {
    pub(crate) fn new(weight_grid: f64, gaussian_grid: f64) -> Self {
        BeliefBank {
            weight_grid,
            gaussian_grid,
            items: Vec::new(),
            keyset: KeySet::default(),
        }
    }

    pub(crate) fn intern(&mut self, belief: Posterior) -> u32 {
        let key = belief.quantize_with(self.weight_grid, self.gaussian_grid);
        let before = self.keyset.len();
        let idx = self.keyset.intern(key);
        if self.keyset.len() > before {
            self.items.push(belief);
        }
        idx
    }

    pub(crate) fn get(&self, idx: u32) -> &Posterior {
        &self.items[idx as usize]
    }

    pub(crate) fn len(&self) -> usize {
        self.items.len()
    }

    pub(crate) fn keyset(&self) -> &KeySet {
        &self.keyset
    }

    pub(crate) fn into_keyset(self) -> KeySet {
        self.keyset
    }
}

/// Per-state lists of stored belief-key ids, for nearest-key fallback.
type ByState = HashMap<u32, Vec<u32>>;

pub(crate) fn nearest_in(keys: &KeySet, candidates: &[u32], probe: &PosteriorKey) -> Option<u32> {
    let mut best: Option<(u64, u32)> = None;
    for &k in candidates {
        if let Some(d) = probe.l1(keys.key(k)) {
            match best {
                Some((bd, bk)) if (d, k) >= (bd, bk) => {}
                _ => best = Some((d, k)),
            }
        }
    }
    best.map(|(_, k)| k)
}

/// Stage-indexed value estimates over augmented states, with the best action
/// found alongside each value. Stage `T` (one past the last decision) is
/// stored explicitly and holds zeros.
pub struct ValueTable {
    keyset: Arc<KeySet>,
    weight_grid: f64,
    gaussian_grid: f64,
    values: Vec<IntMap<f64>>,
    actions: Vec<IntMap<u32>>,
    by_state: Vec<ByState>,
}

impl std::fmt::Debug for ValueTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ValueTable")
            .field("stages", &self.stages())
            .field("keys", &self.keyset.len())
            .field("entries", &self.values.iter().map(|m| m.len()).sum::<usize>())
            .finish()
    }
}

impl ValueTable {
    pub(crate) fn from_parts(
        keyset: Arc<KeySet>,
        weight_grid: f64,
        gaussian_grid: f64,
        values: Vec<IntMap<f64>>,
        actions: Vec<IntMap<u32>>,
    ) -> Self {
        let by_state = values
            .iter()
            .map(|stage| {
                let mut m: ByState = HashMap::new();
                for &packed in stage.keys() {
                    m.entry((packed >> 32) as u32)
                        .or_default()
                        .push(packed as u32);
                }
                for v in m.values_mut() {
                    v.sort_unstable();
                }
                m
            })
            .collect();
        ValueTable {
            keyset,
            weight_grid,
            gaussian_grid,
            values,
            actions,
            by_state,
        }
    }

    /// Number of decision stages (the value maps run one stage further).
    pub fn stages(&self) -> usize {
        self.actions.len()
    }

    pub fn stage_len(&self, stage: usize) -> usize {
        self.values.get(stage).map_or(0, |m| m.len())
    }

    fn slot(&self, stage: usize, state: usize, belief: &Posterior) -> Option<u64> {
        if stage >= self.values.len() {
            return None;
        }
        let key = belief.quantize_with(self.weight_grid, self.gaussian_grid);
        let k = self.keyset.lookup(&key)?;
        let packed = pack(state as u32, k);
        self.values[stage].contains_key(&packed).then_some(packed)
    }

    /// Stored value at an exactly matching quantized key.
    pub fn value(&self, stage: usize, state: usize, belief: &Posterior) -> Option<f64> {
        let packed = self.slot(stage, state, belief)?;
        self.values[stage].get(&packed).copied()
    }

    /// Stored value, falling back to the nearest stored key for this state
    /// (L1 distance on the quantized representation) when the exact key was
    /// never tabulated.
    pub fn value_nearest(&self, stage: usize, state: usize, belief: &Posterior) -> Option<f64> {
        if let Some(v) = self.value(stage, state, belief) {
            return Some(v);
        }
        if stage >= self.values.len() {
            return None;
        }
        let probe = belief.quantize_with(self.weight_grid, self.gaussian_grid);
        let candidates = self.by_state[stage].get(&(state as u32))?;
        let k = nearest_in(&self.keyset, candidates, &probe)?;
        self.values[stage].get(&pack(state as u32, k)).copied()
    }

    /// Minimizing action recorded for this augmented state, if any.
    pub fn best_action(&self, stage: usize, state: usize, belief: &Posterior) -> Option<usize> {
        let packed = self.slot(stage, state, belief)?;
        self.actions
            .get(stage)
            .and_then(|m| m.get(&packed))
            .map(|&a| a as usize)
    }
}

enum PolicyKind {
    /// One action map per decision stage.
    Staged {
        keyset: Arc<KeySet>,
        stages: Vec<IntMap<u32>>,
        by_state: Vec<ByState>,
    },
    /// A single action map used at every stage (infinite-horizon policies).
    Stationary {
        keyset: Arc<KeySet>,
        map: IntMap<u32>,
        by_state: ByState,
    },
    /// Ignores the belief entirely (known-parameter policies).
    StateOnly { actions: Vec<usize> },
}

/// A decision rule over augmented states. Lookups quantize the belief and
/// fall back to the nearest stored key (L1 on the quantized representation)
/// for keys never seen while solving; `None` means the state itself was never
/// tabulated at that stage, in which case callers default to the first
/// admissible action.
pub struct Policy {
    kind: PolicyKind,
    weight_grid: f64,
    gaussian_grid: f64,
    initial_belief: Option<Posterior>,
}

impl std::fmt::Debug for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            PolicyKind::Staged { stages, .. } => format!("staged({})", stages.len()),
            PolicyKind::Stationary { map, .. } => format!("stationary({})", map.len()),
            PolicyKind::StateOnly { actions } => format!("state_only({})", actions.len()),
        };
        f.debug_struct("Policy").field("kind", &kind).finish()
    }
}

impl Policy {
    pub(crate) fn staged(
        keyset: Arc<KeySet>,
        weight_grid: f64,
        gaussian_grid: f64,
        stages: Vec<IntMap<u32>>,
        initial_belief: Posterior,
    ) -> Self {
        let by_state = stages.iter().map(Self::index_states).collect();
        Policy {
            kind: PolicyKind::Staged {
                keyset,
                stages,
                by_state,
            },
            weight_grid,
            gaussian_grid,
            initial_belief: Some(initial_belief),
        }
    }

    pub(crate) fn stationary(
        keyset: Arc<KeySet>,
        weight_grid: f64,
        gaussian_grid: f64,
        map: IntMap<u32>,
        initial_belief: Option<Posterior>,
    ) -> Self {
        let by_state = Self::index_states(&map);
        Policy {
            kind: PolicyKind::Stationary {
                keyset,
                map,
                by_state,
            },
            weight_grid,
            gaussian_grid,
            initial_belief,
        }
    }

    /// A belief-blind stationary policy: `actions[s]` is played in state `s`
    /// at every stage.
    pub fn state_only(actions: Vec<usize>) -> Self {
        Policy {
            kind: PolicyKind::StateOnly { actions },
            weight_grid: crate::posterior::WEIGHT_GRID,
            gaussian_grid: crate::posterior::GAUSSIAN_GRID,
            initial_belief: None,
        }
    }

    fn index_states(map: &IntMap<u32>) -> ByState {
        let mut m: ByState = HashMap::new();
        for &packed in map.keys() {
            m.entry((packed >> 32) as u32)
                .or_default()
                .push(packed as u32);
        }
        for v in m.values_mut() {
            v.sort_unstable();
        }
        m
    }

    /// The belief the policy was solved from, when it has one; evaluation
    /// starts the belief trajectory here.
    pub fn initial_belief(&self) -> Option<&Posterior> {
        self.initial_belief.as_ref()
    }

    /// Whether lookups ignore the belief, so evaluation can skip tracking it.
    pub fn is_belief_free(&self) -> bool {
        matches!(self.kind, PolicyKind::StateOnly { .. })
    }

    /// Action prescribed at `(stage, state, belief)`.
    pub fn action(&self, stage: usize, state: usize, belief: &Posterior) -> Option<usize> {
        let (keyset, map, by_state) = match &self.kind {
            PolicyKind::StateOnly { actions } => return actions.get(state).copied(),
            PolicyKind::Staged {
                keyset,
                stages,
                by_state,
            } => (keyset, stages.get(stage)?, by_state.get(stage)?),
            PolicyKind::Stationary {
                keyset,
                map,
                by_state,
            } => (keyset, map, by_state),
        };
        let probe = belief.quantize_with(self.weight_grid, self.gaussian_grid);
        if let Some(k) = keyset.lookup(&probe) {
            if let Some(&a) = map.get(&pack(state as u32, k)) {
                return Some(a as usize);
            }
        }
        let candidates = by_state.get(&(state as u32))?;
        let k = nearest_in(keyset, candidates, &probe)?;
        map.get(&pack(state as u32, k)).map(|&a| a as usize)
    }
}

/// Sampling effort for the simulation-based solvers: `outer` parameter draws
/// with `inner` outcome draws each for the nested scheme, and a per-stage
/// play budget for the adaptive scheme.
#[derive(Clone, Debug)]
pub struct SamplingBudget {
    pub outer: usize,
    pub inner: usize,
    pub per_stage: Vec<usize>,
}

impl SamplingBudget {
    /// Budget for the nested scheme: `outer` parameter samples, `inner`
    /// outcome samples per parameter.
    pub fn nested(outer: usize, inner: usize) -> Result<Self> {
        if outer == 0 || inner == 0 {
            return Err(Error::BudgetTooSmall {
                given: outer.min(inner),
                minimum: 1,
            });
        }
        Ok(SamplingBudget {
            outer,
            inner,
            per_stage: Vec::new(),
        })
    }

    /// Budget for the adaptive scheme: `plays` total plays at each of the
    /// `stages` stages.
    pub fn adaptive_uniform(plays: usize, stages: usize) -> Result<Self> {
        Self::adaptive(vec![plays; stages])
    }

    /// Per-stage play budgets for the adaptive scheme.
    pub fn adaptive(per_stage: Vec<usize>) -> Result<Self> {
        if per_stage.is_empty() || per_stage.iter().any(|&n| n == 0) {
            return Err(Error::BudgetTooSmall {
                given: 0,
                minimum: 1,
            });
        }
        Ok(SamplingBudget {
            outer: 1,
            inner: 1,
            per_stage,
        })
    }

}
