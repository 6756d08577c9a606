//! Decision-process primitives: parameter spaces, parametric outcome families,
//! and the environment abstraction the solvers run against.
//!
//! States and actions are dense `usize` indices. An environment owns the
//! state equation `g(s, a, xi) -> s'`, the stage cost `C(s, a, xi)`, the
//! admissible action sets, and the outcome family whose parameter is unknown.
//! `observes` marks the states where a realized outcome is informative; belief
//! updates are suppressed elsewhere (the grid maze only learns on unreliable
//! cells, the inventory problem learns everywhere).

use std::sync::Arc;

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::numeric::{ln_gamma, normal_cdf, normal_pdf, normal_quantile, normal_sf};
use crate::posterior::Posterior;

/// Where the unknown parameter is allowed to live.
#[derive(Clone, Debug, PartialEq)]
pub enum ParameterSpace {
    /// Strictly increasing list of candidate values.
    Finite(Vec<f64>),
    /// Interval `[lower, upper]`; `upper = None` means unbounded above.
    Continuous { lower: f64, upper: Option<f64> },
}

impl ParameterSpace {
    pub fn contains(&self, theta: f64) -> bool {
        match self {
            ParameterSpace::Finite(atoms) => atoms.iter().any(|&a| a == theta),
            ParameterSpace::Continuous { lower, upper } => {
                theta >= *lower && upper.map_or(true, |u| theta <= u)
            }
        }
    }

    pub fn atoms(&self) -> Option<&[f64]> {
        match self {
            ParameterSpace::Finite(a) => Some(a),
            ParameterSpace::Continuous { .. } => None,
        }
    }

    pub fn lower_bound(&self) -> f64 {
        match self {
            ParameterSpace::Finite(a) => a[0],
            ParameterSpace::Continuous { lower, .. } => *lower,
        }
    }

    pub fn upper_bound(&self) -> Option<f64> {
        match self {
            ParameterSpace::Finite(a) => a.last().copied(),
            ParameterSpace::Continuous { upper, .. } => *upper,
        }
    }
}

/// The supported outcome distributions. `theta` is always the unknown
/// parameter; everything else is a known constant of the family.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyKind {
    /// Counts on {0, 1, ...} with mean `theta`.
    Poisson,
    /// Trials-to-first-success on {1, 2, ...}; `theta` is the success
    /// probability, so the mean is `1/theta`.
    Geometric,
    /// Normal with mean `theta` and known standard deviation, left-truncated
    /// at 1 and renormalized over `[1, inf)`.
    TruncatedNormal { sigma: f64 },
    /// Two-point outcomes on {0, 1}; `theta` is the probability of 1. Handy
    /// for small models whose scenario tree can be enumerated exactly.
    Bernoulli,
}

/// An outcome family paired with its parameter space.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricFamily {
    pub kind: FamilyKind,
    pub space: ParameterSpace,
}

impl ParametricFamily {
    pub fn new(kind: FamilyKind, space: ParameterSpace) -> Result<Self> {
        if let FamilyKind::TruncatedNormal { sigma } = kind {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "truncated-normal sigma must be positive and finite, got {sigma}"
                )));
            }
        }
        match &space {
            ParameterSpace::Finite(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::InvalidParameter("empty atom list".into()));
                }
                if atoms.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidParameter(
                        "atoms must be strictly increasing".into(),
                    ));
                }
                for &a in atoms {
                    check_theta_legal(&kind, a)?;
                }
            }
            ParameterSpace::Continuous { lower, upper } => {
                if !lower.is_finite() {
                    return Err(Error::InvalidParameter("lower bound must be finite".into()));
                }
                if let Some(u) = upper {
                    if !(u > lower) {
                        return Err(Error::InvalidParameter(
                            "upper bound must exceed lower bound".into(),
                        ));
                    }
                }
                check_theta_legal(&kind, *lower)?;
            }
        }
        Ok(ParametricFamily { kind, space })
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        if !self.space.contains(theta) {
            return Err(Error::ThetaOutsideSpace { theta });
        }
        check_theta_legal(&self.kind, theta)
    }

    /// Is `xi` inside the support (for any parameter value)?
    pub fn supports(&self, xi: f64) -> bool {
        match self.kind {
            FamilyKind::Poisson => xi >= 0.0 && xi.fract() == 0.0 && xi.is_finite(),
            FamilyKind::Geometric => xi >= 1.0 && xi.fract() == 0.0 && xi.is_finite(),
            FamilyKind::TruncatedNormal { .. } => xi >= 1.0 && xi.is_finite(),
            FamilyKind::Bernoulli => xi == 0.0 || xi == 1.0,
        }
    }

    /// Probability mass / density of `xi` under parameter `theta`. Outside the
    /// support this is 0; a parameter outside the space is an error.
    pub fn density(&self, theta: f64, xi: f64) -> Result<f64> {
        self.check_theta(theta)?;
        if !self.supports(xi) {
            return Ok(0.0);
        }
        Ok(self.log_density_unchecked(theta, xi).exp())
    }

    /// `ln f(xi; theta)` with no space check; `-inf` outside the support.
    /// Posterior updates accumulate these directly.
    pub(crate) fn log_density_unchecked(&self, theta: f64, xi: f64) -> f64 {
        if !self.supports(xi) {
            return f64::NEG_INFINITY;
        }
        match self.kind {
            FamilyKind::Poisson => {
                if theta == 0.0 {
                    return if xi == 0.0 { 0.0 } else { f64::NEG_INFINITY };
                }
                -theta + xi * theta.ln() - ln_gamma(xi + 1.0)
            }
            FamilyKind::Geometric => {
                if theta == 1.0 {
                    return if xi == 1.0 { 0.0 } else { f64::NEG_INFINITY };
                }
                (xi - 1.0) * (1.0 - theta).ln() + theta.ln()
            }
            FamilyKind::TruncatedNormal { sigma } => {
                let z = (xi - theta) / sigma;
                let keep = normal_sf((1.0 - theta) / sigma);
                (normal_pdf(z) / (sigma * keep)).ln()
            }
            FamilyKind::Bernoulli => {
                if theta == 0.0 || theta == 1.0 {
                    return if xi == theta { 0.0 } else { f64::NEG_INFINITY };
                }
                if xi == 1.0 {
                    theta.ln()
                } else {
                    (1.0 - theta).ln()
                }
            }
        }
    }

    /// Mean of the outcome under `theta`.
    pub fn mean(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::Poisson => theta,
            FamilyKind::Geometric => 1.0 / theta,
            FamilyKind::TruncatedNormal { sigma } => {
                // mean of a left-truncated normal: theta + sigma * phi(l)/(1-Phi(l))
                let l = (1.0 - theta) / sigma;
                theta + sigma * normal_pdf(l) / normal_sf(l)
            }
            FamilyKind::Bernoulli => theta,
        })
    }

    /// Whether the outcome distribution is supported on a countable set.
    ///
    /// Discrete families let samplers cache per-outcome work keyed on the
    /// drawn value; continuous draws almost never repeat, so caching them
    /// would only burn memory.
    pub(crate) fn is_discrete(&self) -> bool {
        !matches!(self.kind, FamilyKind::TruncatedNormal { .. })
    }

    /// Draw one outcome from `f(.; theta)`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::Poisson => {
                if theta == 0.0 {
                    0.0
                } else {
                    let d = rand_distr::Poisson::new(theta).map_err(|e| {
                        Error::InvalidParameter(format!("poisson rate {theta}: {e}"))
                    })?;
                    d.sample(rng)
                }
            }
            FamilyKind::Geometric => {
                if theta == 1.0 {
                    1.0
                } else {
                    let u: f64 = rng.random();
                    ((1.0 - u).ln() / (1.0 - theta).ln()).floor() + 1.0
                }
            }
            FamilyKind::TruncatedNormal { sigma } => {
                let cut = normal_cdf((1.0 - theta) / sigma);
                if cut < 1e-6 {
                    // almost no mass is removed: rejection is cheap and avoids
                    // quantile evaluation right at the edge of the unit interval
                    let mut draw = f64::NAN;
                    for _ in 0..100 {
                        let z: f64 = rand_distr::StandardNormal.sample(rng);
                        let x = theta + sigma * z;
                        if x >= 1.0 {
                            draw = x;
                            break;
                        }
                    }
                    if draw.is_nan() {
                        1.0
                    } else {
                        draw
                    }
                } else {
                    let u: f64 = rng.random();
                    let p = cut + u * (1.0 - cut);
                    theta + sigma * normal_quantile(p.clamp(1e-300, 1.0 - 1e-16))
                }
            }
            FamilyKind::Bernoulli => {
                let u: f64 = rng.random();
                if u < theta {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// Finite support prefix covering all `atoms` to mass `1 - tol`; the
    /// probability of the removed tail is folded into the last point so each
    /// row sums to one exactly. Only defined for the discrete families.
    pub fn truncated_support(&self, atoms: &[f64], tol: f64) -> Result<XiSupport> {
        let start: u64 = match self.kind {
            FamilyKind::Poisson | FamilyKind::Bernoulli => 0,
            FamilyKind::Geometric => 1,
            FamilyKind::TruncatedNormal { .. } => {
                return Err(Error::UnboundedSupport(
                    "truncated-normal outcomes are continuous".into(),
                ))
            }
        };
        for &a in atoms {
            self.check_theta(a)?;
        }
        const HARD_CAP: u64 = 1_000_000;
        let mut last = start;
        for &theta in atoms {
            let mut cum = 0.0;
            let mut k = start;
            loop {
                cum += self.log_density_unchecked(theta, k as f64).exp();
                if 1.0 - cum < tol {
                    break;
                }
                k += 1;
                if k - start > HARD_CAP {
                    return Err(Error::UnboundedSupport(format!(
                        "no finite prefix reaches mass 1-{tol} under theta={theta}"
                    )));
                }
            }
            last = last.max(k);
        }
        let points: Vec<f64> = (start..=last).map(|k| k as f64).collect();
        let probs = atoms
            .iter()
            .map(|&theta| {
                let mut row: Vec<f64> = points
                    .iter()
                    .map(|&x| self.log_density_unchecked(theta, x).exp())
                    .collect();
                let head: f64 = row.iter().take(row.len() - 1).sum();
                let n = row.len();
                row[n - 1] = (1.0 - head).max(0.0);
                row
            })
            .collect();
        Ok(XiSupport { points, probs })
    }
}

fn check_theta_legal(kind: &FamilyKind, theta: f64) -> Result<()> {
    let ok = match kind {
        FamilyKind::Poisson => theta >= 0.0,
        FamilyKind::Geometric => theta > 0.0 && theta <= 1.0,
        FamilyKind::TruncatedNormal { .. } => theta.is_finite(),
        FamilyKind::Bernoulli => (0.0..=1.0).contains(&theta),
    };
    if ok && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "parameter {theta} is illegal for {kind:?}"
        )))
    }
}

/// Common finite outcome support for a set of parameter atoms.
/// `probs[i][j]` is the mass of `points[j]` under atom `i`, with each row's
/// removed tail folded into its final entry.
#[derive(Clone, Debug)]
pub struct XiSupport {
    pub points: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
}

/// Finite stage count (with a per-stage discount, usually 1) or discounted
/// infinite horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Finite { stages: usize, discount: f64 },
    Discounted { discount: f64 },
}

impl Horizon {
    pub fn discount(&self) -> f64 {
        match self {
            Horizon::Finite { discount, .. } | Horizon::Discounted { discount } => *discount,
        }
    }

    pub fn stages(&self) -> Option<usize> {
        match self {
            Horizon::Finite { stages, .. } => Some(*stages),
            Horizon::Discounted { .. } => None,
        }
    }
}

type StepFn = Arc<dyn Fn(usize, usize, f64) -> usize + Send + Sync>;
type CostFn = Arc<dyn Fn(usize, usize, f64) -> f64 + Send + Sync>;
type ObserveFn = Arc<dyn Fn(usize) -> bool + Send + Sync>;
type XiInvariantFn = Arc<dyn Fn(usize, usize) -> bool + Send + Sync>;

/// A decision process with unknown outcome parameter.
#[derive(Clone)]
pub struct Environment {
    family: ParametricFamily,
    num_states: usize,
    initial_state: usize,
    actions: Vec<Vec<usize>>,
    step_fn: StepFn,
    cost_fn: CostFn,
    observe_fn: ObserveFn,
    xi_invariant_fn: XiInvariantFn,
    horizon: Horizon,
}

impl Environment {
    /// `actions[s]` lists the admissible action ids in state `s`; every state
    /// needs at least one.
    pub fn new(
        family: ParametricFamily,
        actions: Vec<Vec<usize>>,
        step_fn: impl Fn(usize, usize, f64) -> usize + Send + Sync + 'static,
        cost_fn: impl Fn(usize, usize, f64) -> f64 + Send + Sync + 'static,
        horizon: Horizon,
    ) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Config("environment needs at least one state".into()));
        }
        if let Some(s) = actions.iter().position(|a| a.is_empty()) {
            return Err(Error::Config(format!("state {s} has no admissible action")));
        }
        let g = horizon.discount();
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::Config(format!("discount {g} must lie in (0, 1]")));
        }
        Ok(Environment {
            family,
            num_states: actions.len(),
            initial_state: 0,
            actions,
            step_fn: Arc::new(step_fn),
            cost_fn: Arc::new(cost_fn),
            observe_fn: Arc::new(|_| true),
            xi_invariant_fn: Arc::new(|_, _| false),
            horizon,
        })
    }

    /// State the process starts in (defaults to 0).
    pub fn with_initial_state(mut self, state: usize) -> Result<Self> {
        if state >= self.num_states {
            return Err(Error::Config(format!(
                "initial state {state} out of range (num_states = {})",
                self.num_states
            )));
        }
        self.initial_state = state;
        Ok(self)
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Mark the (state, action) pairs whose cost and transition do not depend
    /// on the realized outcome, letting solvers collapse the outcome sum or
    /// skip sampling there. Claiming invariance where the dynamics do depend
    /// on the outcome silently corrupts values; builders must be conservative.
    pub fn with_xi_invariant(
        mut self,
        f: impl Fn(usize, usize) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.xi_invariant_fn = Arc::new(f);
        self
    }

    /// Whether cost and transition at `(state, action)` ignore the outcome.
    pub fn xi_invariant(&self, state: usize, action: usize) -> bool {
        (self.xi_invariant_fn)(state, action)
    }

    /// Restrict belief updates to the states where `f` is true. Outcomes in
    /// other states are treated as unobserved: the realized cost and
    /// transition there must not depend on the outcome.
    pub fn with_observation_filter(
        mut self,
        f: impl Fn(usize) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.observe_fn = Arc::new(f);
        self
    }

    pub fn family(&self) -> &ParametricFamily {
        &self.family
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    /// Same dynamics under a different horizon (used by the infinite-horizon
    /// operator and by evaluation with custom stage caps).
    pub fn with_horizon(mut self, horizon: Horizon) -> Result<Self> {
        let g = horizon.discount();
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::Config(format!("discount {g} must lie in (0, 1]")));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn actions(&self, state: usize) -> &[usize] {
        &self.actions[state]
    }

    pub fn is_admissible(&self, state: usize, action: usize) -> bool {
        state < self.num_states && self.actions[state].contains(&action)
    }

    /// Whether the outcome realized in `state` is observed (and may update
    /// the belief).
    pub fn observes(&self, state: usize) -> bool {
        (self.observe_fn)(state)
    }

    /// Apply the state equation and stage cost. Validates admissibility and
    /// outcome support; the dynamics themselves are pure.
    pub fn step(&self, state: usize, action: usize, xi: f64) -> Result<(usize, f64)> {
        if !self.is_admissible(state, action) {
            return Err(Error::InadmissibleAction { state, action });
        }
        if !self.family.supports(xi) {
            return Err(Error::OutsideSupport { xi });
        }
        Ok(self.transition(state, action, xi))
    }

    /// Unchecked fast path for solver inner loops.
    #[inline]
    pub fn transition(&self, state: usize, action: usize, xi: f64) -> (usize, f64) {
        (
            (self.step_fn)(state, action, xi),
            (self.cost_fn)(state, action, xi),
        )
    }

    /// Largest absolute stage cost over all states, admissible actions and
    /// support points. Used to calibrate exploration bonuses and to bound
    /// value functions.
    pub fn max_abs_cost(&self, support: &XiSupport) -> f64 {
        let mut m: f64 = 0.0;
        for s in 0..self.num_states {
            for &a in self.actions(s) {
                for &xi in &support.points {
                    m = m.max((self.cost_fn)(s, a, xi).abs());
                }
            }
        }
        m
    }
}

impl std::fmt::Debug for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Environment")
            .field("family", &self.family)
            .field("num_states", &self.num_states)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

/// A physical state together with the belief held on arrival.
#[derive(Clone, Debug)]
pub struct AugmentedState {
    pub state: usize,
    pub belief: Posterior,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;

    fn poisson(atoms: &[f64]) -> ParametricFamily {
        ParametricFamily::new(FamilyKind::Poisson, ParameterSpace::Finite(atoms.to_vec()))
            .unwrap()
    }

    #[test]
    fn poisson_pmf_matches_closed_form() {
        let fam = poisson(&[2.0]);
        // e^-2 * 2^2 / 2!
        assert_relative_eq!(
            fam.density(2.0, 2.0).unwrap(),
            0.270_670_566_473_225_4,
            max_relative = 1e-12
        );
        assert_eq!(fam.density(2.0, 2.5).unwrap(), 0.0);
        assert_eq!(fam.density(2.0, -1.0).unwrap(), 0.0);
        assert!(fam.density(3.0, 2.0).is_err());
    }

    #[test]
    fn geometric_pmf_and_mean() {
        let fam = ParametricFamily::new(
            FamilyKind::Geometric,
            ParameterSpace::Finite(vec![0.25]),
        )
        .unwrap();
        assert_relative_eq!(fam.density(0.25, 1.0).unwrap(), 0.25, max_relative = 1e-14);
        assert_relative_eq!(
            fam.density(0.25, 3.0).unwrap(),
            0.75 * 0.75 * 0.25,
            max_relative = 1e-13
        );
        assert_eq!(fam.density(0.25, 0.0).unwrap(), 0.0);
        assert_relative_eq!(fam.mean(0.25).unwrap(), 4.0, max_relative = 1e-14);

        let mut rng = RngStream::from_seed(402).rng();
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| fam.sample(0.25, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        // std of the mean is sqrt(12)/sqrt(n) ~ 0.0077
        assert!((mean - 4.0).abs() < 0.04, "mean {mean}");
    }

    #[test]
    fn poisson_sample_mean() {
        let fam = poisson(&[2.0]);
        let mut rng = RngStream::from_seed(403).rng();
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| fam.sample(2.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn truncated_normal_density_integrates_to_one() {
        let fam = ParametricFamily::new(
            FamilyKind::TruncatedNormal { sigma: 2.0 },
            ParameterSpace::Continuous {
                lower: -10.0,
                upper: None,
            },
        )
        .unwrap();
        for &theta in &[5.5, 1.0, -2.0, 0.3] {
            // Simpson's rule over [1, theta + 14 sigma]
            let lo = 1.0;
            let hi = theta + 14.0 * 2.0;
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let mut acc = fam.density(theta, lo).unwrap() + fam.density(theta, hi).unwrap();
            for i in 1..n {
                let x = lo + i as f64 * h;
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * fam.density(theta, x).unwrap();
            }
            let integral = acc * h / 3.0;
            assert!(
                (integral - 1.0).abs() < 1e-9,
                "theta {theta}: integral {integral}"
            );
        }
    }

    #[test]
    fn truncated_normal_sampling_respects_cut() {
        let fam = ParametricFamily::new(
            FamilyKind::TruncatedNormal { sigma: 2.0 },
            ParameterSpace::Continuous {
                lower: -10.0,
                upper: None,
            },
        )
        .unwrap();
        let mut rng = RngStream::from_seed(404).rng();
        // theta = 1.5 leaves substantial mass below the cut: inverse path
        let mut mean = 0.0;
        let n = 100_000;
        for _ in 0..n {
            let x = fam.sample(1.5, &mut rng).unwrap();
            assert!(x >= 1.0);
            mean += x;
        }
        mean /= n as f64;
        assert_relative_eq!(mean, fam.mean(1.5).unwrap(), max_relative = 0.01);

        // theta = 40 sigma above the cut: rejection path
        let x = fam.sample(40.0, &mut rng).unwrap();
        assert!(x > 1.0);
    }

    #[test]
    fn truncated_support_folds_tail() {
        let fam = poisson(&[1.2, 2.8]);
        let sup = fam.truncated_support(&[1.2, 2.8], 1e-10).unwrap();
        assert_eq!(sup.points[0], 0.0);
        for row in &sup.probs {
            let total: f64 = row.iter().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-14);
        }
        // the prefix must actually cover the mass, so the fold is tiny
        let last = *sup.probs[1].last().unwrap();
        let plain = fam
            .density(2.8, *sup.points.last().unwrap())
            .unwrap();
        assert!(last - plain <= 1e-10, "fold {last} vs pmf {plain}");
    }

    #[test]
    fn continuous_family_has_no_finite_support() {
        let fam = ParametricFamily::new(
            FamilyKind::TruncatedNormal { sigma: 2.0 },
            ParameterSpace::Continuous {
                lower: 0.0,
                upper: None,
            },
        )
        .unwrap();
        assert!(fam.truncated_support(&[5.0], 1e-10).is_err());
    }

    #[test]
    fn atoms_must_increase() {
        assert!(ParametricFamily::new(
            FamilyKind::Poisson,
            ParameterSpace::Finite(vec![2.0, 1.0])
        )
        .is_err());
        assert!(ParametricFamily::new(
            FamilyKind::Geometric,
            ParameterSpace::Finite(vec![0.5, 1.5])
        )
        .is_err());
    }

    #[test]
    fn step_validates_inputs() {
        let fam = poisson(&[2.0]);
        let env = Environment::new(
            fam,
            vec![vec![0, 1], vec![0]],
            |s, a, _| (s + a).min(1),
            |_, a, xi| a as f64 + xi,
            Horizon::Finite {
                stages: 3,
                discount: 1.0,
            },
        )
        .unwrap();
        assert_eq!(env.step(0, 1, 2.0).unwrap(), (1, 3.0));
        assert!(matches!(
            env.step(1, 1, 2.0),
            Err(Error::InadmissibleAction { state: 1, action: 1 })
        ));
        assert!(matches!(
            env.step(0, 0, 2.5),
            Err(Error::OutsideSupport { .. })
        ));
        // purity: same inputs, same outputs
        assert_eq!(env.step(0, 1, 2.0).unwrap(), env.step(0, 1, 2.0).unwrap());
    }
}
