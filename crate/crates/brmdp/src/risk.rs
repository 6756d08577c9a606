//! Risk functionals applied at every stage of the nested objective:
//! expectation, value-at-risk, conditional value-at-risk.
//!
//! Two evaluation paths exist and agree where they overlap:
//!
//! * [`RiskFunctional::apply`] takes a plain sample vector (the Monte Carlo
//!   solvers). VaR is the ceil(alpha*N)-th ascending order statistic; CVaR is
//!   the mean of the strictly-worse tail, or the maximum when that tail is
//!   empty.
//! * [`RiskFunctional::apply_weighted`] takes values with probability weights
//!   (exact dynamic programming over posterior atoms). VaR is the left
//!   quantile of the weighted empirical CDF; CVaR integrates that quantile
//!   function over `(alpha, 1]`, which is the definition the sample version
//!   converges to as N grows and reduces to it exactly when alpha*N is an
//!   integer.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RiskFunctional {
    Expectation,
    ValueAtRisk { alpha: f64 },
    ConditionalValueAtRisk { alpha: f64 },
}

/// Tolerance when deciding whether alpha*N landed on an integer; float
/// products like 0.8 * 5 must not spill into the next order statistic.
const INDEX_EPS: f64 = 1e-9;

impl RiskFunctional {
    pub fn expectation() -> Self {
        RiskFunctional::Expectation
    }

    pub fn var(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(RiskFunctional::ValueAtRisk { alpha })
    }

    pub fn cvar(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(RiskFunctional::ConditionalValueAtRisk { alpha })
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            RiskFunctional::Expectation => None,
            RiskFunctional::ValueAtRisk { alpha }
            | RiskFunctional::ConditionalValueAtRisk { alpha } => Some(alpha),
        }
    }

    /// All three functionals satisfy `rho(X + c) = rho(X) + c`.
    pub fn is_translation_invariant(&self) -> bool {
        true
    }

    /// All three functionals satisfy `rho(a X) = a rho(X)` for `a > 0`.
    pub fn is_positively_homogeneous(&self) -> bool {
        true
    }

    /// Evaluate on equally likely samples.
    pub fn apply(&self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::EmptyValues);
        }
        match *self {
            RiskFunctional::Expectation => {
                Ok(values.iter().sum::<f64>() / values.len() as f64)
            }
            RiskFunctional::ValueAtRisk { alpha } => {
                let sorted = sorted_copy(values);
                Ok(sorted[var_index(alpha, sorted.len()) - 1])
            }
            RiskFunctional::ConditionalValueAtRisk { alpha } => {
                let sorted = sorted_copy(values);
                let n = sorted.len();
                let idx = var_index(alpha, n);
                if idx >= n {
                    Ok(sorted[n - 1])
                } else {
                    let tail = &sorted[idx..];
                    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
                }
            }
        }
    }

    /// Evaluate on weighted atoms. Weights must be nonnegative with positive
    /// total; they are normalized internally.
    pub fn apply_weighted(&self, values: &[f64], weights: &[f64]) -> Result<f64> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::EmptyValues);
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "weights must be nonnegative and finite".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        match *self {
            RiskFunctional::Expectation => Ok(values
                .iter()
                .zip(weights)
                .map(|(&v, &w)| v * w)
                .sum::<f64>()
                / total),
            RiskFunctional::ValueAtRisk { alpha } => {
                let pairs = sorted_pairs(values, weights, total);
                let mut cum = 0.0;
                for &(v, w) in &pairs {
                    cum += w;
                    if cum >= alpha - 1e-12 {
                        return Ok(v);
                    }
                }
                Ok(pairs.last().unwrap().0)
            }
            RiskFunctional::ConditionalValueAtRisk { alpha } => {
                let pairs = sorted_pairs(values, weights, total);
                // integrate the quantile function over (alpha, 1]
                let mut acc = 0.0;
                let mut cum = 0.0f64;
                for &(v, w) in &pairs {
                    let lo = cum.max(alpha);
                    cum += w;
                    let hi = cum.min(1.0);
                    if hi > lo {
                        acc += v * (hi - lo);
                    }
                }
                // guard the float gap between the accumulated cum and 1
                if cum < 1.0 && 1.0 - cum.max(alpha) > 0.0 {
                    acc += pairs.last().unwrap().0 * (1.0 - cum.max(alpha));
                }
                Ok(acc / (1.0 - alpha))
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha { alpha })
    }
}

/// 1-based ascending order-statistic index `ceil(alpha n)`, clamped to `[1, n]`.
fn var_index(alpha: f64, n: usize) -> usize {
    let raw = (alpha * n as f64 - INDEX_EPS).ceil() as usize;
    raw.clamp(1, n)
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn sorted_pairs(values: &[f64], weights: &[f64], total: f64) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .map(|(&v, &w)| (v, w / total))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}
