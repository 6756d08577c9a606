//! Risk-adjusted multi-armed bandit.
//!
//! Each machine holds one cost distribution per scenario. A play of a machine
//! draws one cost from every scenario, and a risk functional aggregates the
//! per-scenario running averages into the machine's risk-adjusted average
//! cost. [`play_ucb`] allocates plays with the same optimism rule the
//! adaptive solver uses per stage node, [`regret`] prices a finished run
//! against the ground-truth gaps, and [`theorem1_bound`] is the matching
//! logarithmic ceiling on expected regret.
//!
//! The regret bound and the exploration bonus are calibrated for costs in
//! `[0, 1]`, so every cost model validates its support against that range.
//! The bound further assumes the risk functional is plain expectation; other
//! functionals still drive the play rule and the ledger, but carry no regret
//! guarantee.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::RiskFunctional;
use crate::rng::{tags, RngStream};

/// Cost distribution for one (machine, scenario) cell, supported on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Cost 1 with probability `p`, else 0.
    Bernoulli { p: f64 },
    /// Uniform draw on `[lo, hi]`, which must sit inside `[0, 1]`.
    Uniform { lo: f64, hi: f64 },
    /// Finite support with weights proportional to `probs`.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl CostModel {
    fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        match self {
            CostModel::Bernoulli { p } => {
                if !in_unit(*p) {
                    return Err(Error::InvalidParameter(format!(
                        "cost probability {p} must lie in [0, 1]"
                    )));
                }
            }
            CostModel::Uniform { lo, hi } => {
                if !(in_unit(*lo) && in_unit(*hi) && lo <= hi) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform cost range [{lo}, {hi}] must sit inside [0, 1]"
                    )));
                }
            }
            CostModel::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::InvalidParameter(
                        "discrete cost model needs matching nonempty values and probs".into(),
                    ));
                }
                if values.iter().any(|&v| !in_unit(v)) {
                    return Err(Error::InvalidParameter(
                        "discrete cost values must lie in [0, 1]".into(),
                    ));
                }
                if probs.iter().any(|&w| !w.is_finite() || w < 0.0)
                    || probs.iter().sum::<f64>() <= 0.0
                {
                    return Err(Error::InvalidParameter(
                        "discrete cost probs must be nonnegative with positive total".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// True mean cost of the cell.
    pub fn mean(&self) -> f64 {
        match self {
            CostModel::Bernoulli { p } => *p,
            CostModel::Uniform { lo, hi } => 0.5 * (lo + hi),
            CostModel::Discrete { values, probs } => {
                let total: f64 = probs.iter().sum();
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, w)| v * w / total)
                    .sum()
            }
        }
    }

    /// Draw one cost. Every variant consumes exactly one uniform variate, so
    /// runs on instances that differ only in cost values stay coupled under
    /// a shared stream.
    pub(crate) fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        match self {
            CostModel::Bernoulli { p } => {
                if u < *p {
                    1.0
                } else {
                    0.0
                }
            }
            CostModel::Uniform { lo, hi } => lo + u * (hi - lo),
            CostModel::Discrete { values, probs } => {
                let total: f64 = probs.iter().sum();
                let mut cum = 0.0;
                for (v, w) in values.iter().zip(probs) {
                    cum += w / total;
                    if u < cum {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
        }
    }
}

/// A simulated bandit: `machines x scenarios` cost models plus the risk
/// functional that aggregates scenario averages.
#[derive(Clone, Debug)]
pub struct BanditInstance {
    cells: Vec<Vec<CostModel>>,
    rho: RiskFunctional,
}

impl BanditInstance {
    /// Build and validate an instance. Rows are machines; every machine must
    /// carry the same nonzero number of scenario cost models.
    pub fn new(cells: Vec<Vec<CostModel>>, rho: RiskFunctional) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Config("bandit needs at least one machine".into()));
        }
        let k = cells[0].len();
        if k == 0 {
            return Err(Error::Config("bandit needs at least one scenario".into()));
        }
        for row in &cells {
            if row.len() != k {
                return Err(Error::Config(
                    "every machine must have the same number of scenarios".into(),
                ));
            }
            for cell in row {
                cell.validate()?;
            }
        }
        Ok(BanditInstance { cells, rho })
    }

    pub fn machines(&self) -> usize {
        self.cells.len()
    }

    pub fn scenarios(&self) -> usize {
        self.cells[0].len()
    }

    pub fn rho(&self) -> &RiskFunctional {
        &self.rho
    }

    /// Risk-adjusted true mean of each machine: the risk functional applied
    /// to the machine's scenario means.
    pub fn true_values(&self) -> Result<Vec<f64>> {
        self.cells
            .iter()
            .map(|row| {
                let means: Vec<f64> = row.iter().map(CostModel::mean).collect();
                self.rho.apply(&means)
            })
            .collect()
    }

    /// Optimality gaps: each machine's risk-adjusted true mean minus the best
    /// one. Nonnegative, with at least one zero.
    pub fn gaps(&self) -> Result<Vec<f64>> {
        let values = self.true_values()?;
        let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(values.iter().map(|v| v - best).collect())
    }

    fn sample_vector(&self, machine: usize, rng: &mut impl Rng) -> Vec<f64> {
        self.cells[machine]
            .iter()
            .map(|cell| cell.sample(rng))
            .collect()
    }
}

/// Play-by-play accounting for one bandit run: per-machine play counts,
/// per-(machine, scenario) accumulated costs, and (in simulation mode) the
/// ground-truth values and gaps that price the run.
#[derive(Clone, Debug)]
pub struct RegretLedger {
    counts: Vec<u64>,
    sums: Vec<Vec<f64>>,
    truth: Option<GroundTruth>,
}

#[derive(Clone, Debug)]
struct GroundTruth {
    values: Vec<f64>,
    best: f64,
    gaps: Vec<f64>,
}

impl RegretLedger {
    /// Ledger for machines whose true means are unknown (driving real
    /// systems). Regret is unavailable on it; averages and counts still work.
    pub fn new(machines: usize, scenarios: usize) -> Result<Self> {
        if machines == 0 || scenarios == 0 {
            return Err(Error::Config(
                "ledger needs at least one machine and one scenario".into(),
            ));
        }
        Ok(RegretLedger {
            counts: vec![0; machines],
            sums: vec![vec![0.0; scenarios]; machines],
            truth: None,
        })
    }

    /// Ledger priced against a simulated instance's ground truth.
    pub fn with_ground_truth(instance: &BanditInstance) -> Result<Self> {
        let values = instance.true_values()?;
        let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let gaps = values.iter().map(|v| v - best).collect();
        let mut ledger = RegretLedger::new(instance.machines(), instance.scenarios())?;
        ledger.truth = Some(GroundTruth { values, best, gaps });
        Ok(ledger)
    }

    /// Record one play: a full cost vector observed from `machine`.
    pub fn record(&mut self, machine: usize, costs: &[f64]) -> Result<()> {
        if machine >= self.counts.len() {
            return Err(Error::InvalidParameter(format!(
                "machine {machine} is out of range"
            )));
        }
        if costs.len() != self.sums[machine].len() {
            return Err(Error::InvalidParameter(format!(
                "cost vector length {} does not match {} scenarios",
                costs.len(),
                self.sums[machine].len()
            )));
        }
        for (slot, &c) in self.sums[machine].iter_mut().zip(costs) {
            *slot += c;
        }
        self.counts[machine] += 1;
        Ok(())
    }

    /// Per-machine play counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total plays recorded so far; always the sum of [`counts`](Self::counts).
    pub fn total_plays(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Accumulated per-scenario costs for one machine.
    pub fn scenario_sums(&self, machine: usize) -> &[f64] {
        &self.sums[machine]
    }

    /// Ground-truth optimality gaps, when known.
    pub fn gaps(&self) -> Option<&[f64]> {
        self.truth.as_ref().map(|t| t.gaps.as_slice())
    }

    /// Ground-truth risk-adjusted means, when known.
    pub fn true_values(&self) -> Option<&[f64]> {
        self.truth.as_ref().map(|t| t.values.as_slice())
    }

    /// Ground-truth optimum, when known.
    pub fn best_value(&self) -> Option<f64> {
        self.truth.as_ref().map(|t| t.best)
    }

    /// Per-scenario running averages of one machine. Errors before the
    /// machine's first play.
    pub fn averages(&self, machine: usize) -> Result<Vec<f64>> {
        if machine >= self.counts.len() {
            return Err(Error::InvalidParameter(format!(
                "machine {machine} is out of range"
            )));
        }
        let n = self.counts[machine];
        if n == 0 {
            return Err(Error::InvalidParameter(format!(
                "machine {machine} has not been played yet"
            )));
        }
        Ok(self.sums[machine].iter().map(|s| s / n as f64).collect())
    }

    /// Risk functional applied to one machine's per-scenario averages.
    pub fn risk_adjusted_average(&self, machine: usize, rho: &RiskFunctional) -> Result<f64> {
        rho.apply(&self.averages(machine)?)
    }
}

/// Run the optimism play rule for `plays` total plays: each machine once to
/// initialize, then always the machine minimizing its risk-adjusted average
/// minus `sqrt(2 ln n / plays(machine))`, ties to the lowest index. `n`
/// counts all plays made so far, initialization included.
///
/// Returns the machine chosen at every play and the priced ledger. Errors
/// with `BudgetTooSmall` when `plays` cannot cover the initialization. The
/// regret guarantee holds for the expectation functional; any other
/// functional is accepted and simply carries no guarantee.
pub fn play_ucb(
    instance: &BanditInstance,
    plays: usize,
    stream: RngStream,
) -> Result<(Vec<usize>, RegretLedger)> {
    let machines = instance.machines();
    if plays < machines {
        return Err(Error::BudgetTooSmall {
            given: plays,
            minimum: machines,
        });
    }
    let mut ledger = RegretLedger::with_ground_truth(instance)?;
    let mut history = Vec::with_capacity(plays);
    let mut adjusted = vec![0.0f64; machines];

    for t in 0..plays {
        let pick = if t < machines {
            t
        } else {
            let log_n = (ledger.total_plays() as f64).ln();
            let mut pick = 0usize;
            let mut best = f64::INFINITY;
            for (j, &aj) in adjusted.iter().enumerate() {
                let index = aj - (2.0 * log_n / ledger.counts[j] as f64).sqrt();
                if index < best {
                    best = index;
                    pick = j;
                }
            }
            pick
        };
        let mut rng = stream.at(tags::BANDIT, t as u64).rng();
        let costs = instance.sample_vector(pick, &mut rng);
        ledger.record(pick, &costs)?;
        adjusted[pick] = ledger.risk_adjusted_average(pick, instance.rho())?;
        history.push(pick);
    }
    Ok((history, ledger))
}

/// Price a finished run: the dot product of ground-truth gaps with realized
/// play counts. Averaging over independent runs estimates expected regret.
/// Errors when the ledger has no ground truth.
pub fn regret(ledger: &RegretLedger) -> Result<f64> {
    let gaps = ledger.gaps().ok_or_else(|| {
        Error::Unsupported("regret needs ground-truth machine means".into())
    })?;
    Ok(gaps
        .iter()
        .zip(ledger.counts())
        .map(|(g, &c)| g * c as f64)
        .sum())
}

/// Closed-form ceiling on expected regret after `n` plays of the optimism
/// rule with expectation aggregation and costs in `[0, 1]`:
/// `8 * sum(ln n / gap)` over machines with positive gap, plus
/// `(1 + pi^2/3) * sum(gaps)`. Nondecreasing in `n`; zero when every gap is
/// zero.
pub fn theorem1_bound(gaps: &[f64], n: u64) -> f64 {
    let log_n = (n as f64).ln();
    let log_part: f64 = gaps.iter().filter(|&&g| g > 0.0).map(|g| log_n / g).sum();
    let gap_sum: f64 = gaps.iter().sum();
    8.0 * log_part + (1.0 + PI * PI / 3.0) * gap_sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bernoulli_pair(p_good: f64, p_bad: f64) -> BanditInstance {
        BanditInstance::new(
            vec![
                vec![CostModel::Bernoulli { p: p_good }],
                vec![CostModel::Bernoulli { p: p_bad }],
            ],
            RiskFunctional::Expectation,
        )
        .unwrap()
    }

    #[test]
    fn single_machine_takes_every_play_with_zero_regret() {
        let inst = BanditInstance::new(
            vec![vec![
                CostModel::Uniform { lo: 0.2, hi: 0.8 },
                CostModel::Bernoulli { p: 0.5 },
            ]],
            RiskFunctional::Expectation,
        )
        .unwrap();
        let (history, ledger) = play_ucb(&inst, 40, RngStream::from_seed(1)).unwrap();
        assert!(history.iter().all(|&m| m == 0));
        assert_eq!(ledger.counts(), &[40]);
        assert_eq!(regret(&ledger).unwrap(), 0.0);
    }

    #[test]
    fn identical_machines_have_zero_gaps_and_zero_regret() {
        let cell = vec![
            CostModel::Discrete {
                values: vec![0.1, 0.9],
                probs: vec![0.5, 0.5],
            },
            CostModel::Uniform { lo: 0.0, hi: 1.0 },
        ];
        let inst = BanditInstance::new(
            vec![cell.clone(), cell.clone(), cell],
            RiskFunctional::Expectation,
        )
        .unwrap();
        assert_eq!(inst.gaps().unwrap(), vec![0.0, 0.0, 0.0]);
        let (_, ledger) = play_ucb(&inst, 300, RngStream::from_seed(2)).unwrap();
        assert_eq!(regret(&ledger).unwrap(), 0.0);
        assert_eq!(ledger.total_plays(), 300);
    }

    #[test]
    fn budgets_below_one_play_per_machine_error() {
        let inst = bernoulli_pair(0.1, 0.9);
        match play_ucb(&inst, 1, RngStream::from_seed(3)).unwrap_err() {
            Error::BudgetTooSmall { given, minimum } => assert_eq!((given, minimum), (1, 2)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn regret_without_ground_truth_is_unsupported() {
        let mut ledger = RegretLedger::new(2, 1).unwrap();
        ledger.record(0, &[0.3]).unwrap();
        ledger.record(1, &[0.9]).unwrap();
        assert!(matches!(regret(&ledger).unwrap_err(), Error::Unsupported(_)));
        assert_eq!(ledger.gaps(), None);
        assert_eq!(ledger.counts(), &[1, 1]);
    }

    #[test]
    fn ledger_conserves_counts_and_averages() {
        let mut ledger = RegretLedger::new(2, 2).unwrap();
        ledger.record(0, &[0.2, 0.4]).unwrap();
        ledger.record(0, &[0.6, 0.0]).unwrap();
        ledger.record(1, &[1.0, 1.0]).unwrap();
        assert_eq!(ledger.total_plays(), 3);
        assert_eq!(ledger.counts(), &[2, 1]);
        assert_eq!(ledger.averages(0).unwrap(), vec![0.4, 0.2]);
        assert_eq!(ledger.scenario_sums(1), &[1.0, 1.0]);
        assert!(ledger.averages(5).is_err());
        assert!(RegretLedger::new(0, 3).is_err());
        // wrong-width cost vectors are rejected before touching the sums
        assert!(ledger.record(0, &[0.1]).is_err());
        assert_eq!(ledger.counts(), &[2, 1]);
    }

    #[test]
    fn gap_example_matches_the_closed_form_bound() {
        assert_relative_eq!(
            theorem1_bound(&[0.0, 0.8], 10_000),
            95.5352982267,
            epsilon = 1e-9
        );
        assert_eq!(theorem1_bound(&[0.0, 0.0, 0.0], 500), 0.0);
        // monotone in the play count
        let gaps = [0.0, 0.3, 0.7];
        let mut last = theorem1_bound(&gaps, 1);
        for n in [10u64, 100, 1_000, 10_000] {
            let b = theorem1_bound(&gaps, n);
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn suboptimal_machine_plays_stay_under_the_logarithmic_count_bound() {
        // gap 0.8 between Bernoulli means 0.1 and 0.9; the count bound for
        // the bad machine is 8 ln n / gap^2 + 1 + pi^2/3
        let inst = bernoulli_pair(0.1, 0.9);
        let n_plays = 10_000usize;
        let runs = 200;
        let mut bad = Vec::with_capacity(runs);
        for seed in 0..runs as u64 {
            let (_, ledger) = play_ucb(&inst, n_plays, RngStream::from_seed(40 + seed)).unwrap();
            bad.push(ledger.counts()[1] as f64);
        }
        let n = bad.len() as f64;
        let mean = bad.iter().sum::<f64>() / n;
        let var = bad.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let bound = 8.0 * (n_plays as f64).ln() / 0.64 + 1.0 + PI * PI / 3.0;
        assert!(
            mean + 4.0 * se <= bound,
            "mean bad-machine plays {mean} (se {se}) exceeds bound {bound}"
        );
    }

    #[test]
    fn mean_regret_stays_under_the_bound_on_mixed_instances() {
        let instances = [
            BanditInstance::new(
                vec![
                    vec![
                        CostModel::Uniform { lo: 0.0, hi: 0.4 },
                        CostModel::Bernoulli { p: 0.3 },
                    ],
                    vec![
                        CostModel::Uniform { lo: 0.3, hi: 0.9 },
                        CostModel::Bernoulli { p: 0.7 },
                    ],
                ],
                RiskFunctional::Expectation,
            )
            .unwrap(),
            BanditInstance::new(
                vec![
                    vec![CostModel::Discrete {
                        values: vec![0.0, 0.5, 1.0],
                        probs: vec![0.6, 0.3, 0.1],
                    }],
                    vec![CostModel::Bernoulli { p: 0.55 }],
                    vec![CostModel::Uniform { lo: 0.6, hi: 1.0 }],
                ],
                RiskFunctional::Expectation,
            )
            .unwrap(),
        ];
        for (which, inst) in instances.iter().enumerate() {
            let gaps = inst.gaps().unwrap();
            for n_plays in [100usize, 1000] {
                let runs = 200;
                let mut total = 0.0;
                for seed in 0..runs {
                    let stream = RngStream::from_seed(7_000 + which as u64)
                        .at(tags::REPLICATION, seed as u64);
                    let (_, ledger) = play_ucb(inst, n_plays, stream).unwrap();
                    total += regret(&ledger).unwrap();
                }
                let mean = total / runs as f64;
                let bound = theorem1_bound(&gaps, n_plays as u64);
                assert!(
                    mean <= bound,
                    "instance {which}, n={n_plays}: mean regret {mean} above bound {bound}"
                );
            }
        }
    }

    #[test]
    fn priced_regret_decomposes_into_gap_weighted_counts() {
        // two independent estimates of the same expected regret: the
        // accumulated-cost definition (risk of per-scenario sums, minus the
        // optimal line) on one seed set, gap-weighted mean counts on another
        let inst = BanditInstance::new(
            vec![
                vec![
                    CostModel::Bernoulli { p: 0.25 },
                    CostModel::Uniform { lo: 0.1, hi: 0.5 },
                ],
                vec![
                    CostModel::Bernoulli { p: 0.45 },
                    CostModel::Discrete {
                        values: vec![0.2, 0.8],
                        probs: vec![0.4, 0.6],
                    },
                ],
                vec![
                    CostModel::Uniform { lo: 0.5, hi: 0.9 },
                    CostModel::Bernoulli { p: 0.6 },
                ],
            ],
            RiskFunctional::Expectation,
        )
        .unwrap();
        let n_plays = 500usize;
        let runs = 300;
        let vstar = inst
            .true_values()
            .unwrap()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let k = inst.scenarios() as f64;

        let mut lhs = Vec::with_capacity(runs);
        for seed in 0..runs as u64 {
            let (_, ledger) =
                play_ucb(&inst, n_plays, RngStream::from_seed(100 + seed)).unwrap();
            let summed: f64 = (0..inst.machines())
                .map(|m| ledger.scenario_sums(m).iter().sum::<f64>() / k)
                .sum();
            lhs.push(summed - vstar * n_plays as f64);
        }
        let mut rhs = Vec::with_capacity(runs);
        for seed in 0..runs as u64 {
            let (_, ledger) =
                play_ucb(&inst, n_plays, RngStream::from_seed(90_000 + seed)).unwrap();
            rhs.push(regret(&ledger).unwrap());
        }

        let stats = |xs: &[f64]| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var / n)
        };
        let (mean_l, var_l) = stats(&lhs);
        let (mean_r, var_r) = stats(&rhs);
        let sigma = (var_l + var_r).sqrt();
        assert!(
            (mean_l - mean_r).abs() <= 4.0 * sigma,
            "decomposition mismatch: {mean_l} vs {mean_r} (sigma {sigma})"
        );
    }

    #[test]
    fn scaling_costs_scales_every_risk_adjusted_average() {
        // record the same play history into two ledgers, one with all costs
        // halved; each functional must scale its averages exactly and keep
        // the best-looking machine identity
        let inst = BanditInstance::new(
            vec![
                vec![
                    CostModel::Uniform { lo: 0.2, hi: 1.0 },
                    CostModel::Bernoulli { p: 0.5 },
                    CostModel::Bernoulli { p: 0.9 },
                ],
                vec![
                    CostModel::Uniform { lo: 0.0, hi: 0.8 },
                    CostModel::Bernoulli { p: 0.4 },
                    CostModel::Bernoulli { p: 0.7 },
                ],
            ],
            RiskFunctional::Expectation,
        )
        .unwrap();
        let scale = 0.5;
        let mut raw = RegretLedger::new(2, 3).unwrap();
        let mut scaled = RegretLedger::new(2, 3).unwrap();
        for t in 0..120u64 {
            let machine = (t % 2) as usize;
            let mut rng = RngStream::from_seed(77).at(tags::BANDIT, t).rng();
            let costs = inst.sample_vector(machine, &mut rng);
            let shrunk: Vec<f64> = costs.iter().map(|c| c * scale).collect();
            raw.record(machine, &costs).unwrap();
            scaled.record(machine, &shrunk).unwrap();
        }
        for rho in [
            RiskFunctional::expectation(),
            RiskFunctional::var(0.7).unwrap(),
            RiskFunctional::cvar(0.7).unwrap(),
        ] {
            let r: Vec<f64> = (0..2)
                .map(|m| raw.risk_adjusted_average(m, &rho).unwrap())
                .collect();
            let s: Vec<f64> = (0..2)
                .map(|m| scaled.risk_adjusted_average(m, &rho).unwrap())
                .collect();
            for m in 0..2 {
                assert_relative_eq!(s[m], scale * r[m], epsilon = 1e-12);
            }
            let argmin = |v: &[f64]| if v[0] <= v[1] { 0 } else { 1 };
            assert_eq!(argmin(&r), argmin(&s));
        }
    }

    #[test]
    fn scenario_averages_concentrate_like_bounded_sums() {
        // the mean of k=3 scenario averages after t plays is an average of t
        // iid [0, 1] draws, so its upper tail is bounded by exp(-2 t a^2)
        let cells = [
            CostModel::Bernoulli { p: 0.35 },
            CostModel::Uniform { lo: 0.2, hi: 0.9 },
            CostModel::Discrete {
                values: vec![0.0, 0.5, 1.0],
                probs: vec![0.25, 0.5, 0.25],
            },
        ];
        let m_bar: f64 = cells.iter().map(CostModel::mean).sum::<f64>() / 3.0;
        let runs = 100_000u64;
        for (t, a) in [(50usize, 0.1f64), (200, 0.05)] {
            let mut hits = 0u64;
            for run in 0..runs {
                let mut rng = RngStream::from_seed(600)
                    .at(tags::BANDIT, run)
                    .at(tags::INNER, t as u64)
                    .rng();
                let mut y = 0.0;
                for _ in 0..t {
                    for cell in &cells {
                        y += cell.sample(&mut rng);
                    }
                }
                y /= (3 * t) as f64;
                if y >= m_bar + a {
                    hits += 1;
                }
            }
            let p_hat = hits as f64 / runs as f64;
            let se = (p_hat * (1.0 - p_hat) / runs as f64).sqrt();
            let bound = (-2.0 * t as f64 * a * a).exp();
            assert!(
                p_hat <= bound + 4.0 * se,
                "tail estimate {p_hat} above exp(-2ta^2)={bound} at t={t}, a={a}"
            );
        }
    }

    #[test]
    fn var_aggregation_targets_the_risky_scenario() {
        // machine 0 is better on average but terrible in its worst scenario;
        // a high-quantile functional must prefer machine 1
        let inst = BanditInstance::new(
            vec![
                vec![
                    CostModel::Bernoulli { p: 0.05 },
                    CostModel::Bernoulli { p: 0.95 },
                ],
                vec![
                    CostModel::Bernoulli { p: 0.45 },
                    CostModel::Bernoulli { p: 0.55 },
                ],
            ],
            RiskFunctional::var(0.9).unwrap(),
        )
        .unwrap();
        let values = inst.true_values().unwrap();
        assert_eq!(values, vec![0.95, 0.55]);
        let (_, ledger) = play_ucb(&inst, 2_000, RngStream::from_seed(11)).unwrap();
        assert!(
            ledger.counts()[1] > ledger.counts()[0],
            "counts {:?}",
            ledger.counts()
        );
    }
}
