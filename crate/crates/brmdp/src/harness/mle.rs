//! Maximum-likelihood estimation of the outcome parameter from an observed
//! dataset, used by the plug-in formulation.

use crate::error::{Error, Result};
use crate::model::{FamilyKind, ParameterSpace, ParametricFamily};

/// Tolerance on the estimate for the one-dimensional numeric search.
const SEARCH_TOL: f64 = 1e-8;

/// Maximum-likelihood estimate of the parameter given i.i.d. observations,
/// constrained to the family's parameter space.
///
/// Finite spaces take the candidate with the highest joint likelihood,
/// breaking ties toward the smallest candidate. Continuous spaces use the
/// closed-form estimator where one exists (sample mean for Poisson and
/// Bernoulli, reciprocal sample mean for Geometric) clamped to the space
/// bounds; the left-truncated normal has no closed form, so its estimate
/// comes from a golden-section search on the log-likelihood, which is
/// unimodal in the mean parameter.
pub fn mle(family: &ParametricFamily, data: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if let Some(&bad) = data.iter().find(|&&xi| !family.supports(xi)) {
        return Err(Error::OutsideSupport { xi: bad });
    }
    let loglik = |theta: f64| -> f64 {
        data.iter()
            .map(|&xi| family.log_density_unchecked(theta, xi))
            .sum()
    };
    match &family.space {
        ParameterSpace::Finite(atoms) => {
            let mut best = atoms[0];
            let mut best_ll = loglik(atoms[0]);
            for &theta in &atoms[1..] {
                let ll = loglik(theta);
                if ll > best_ll {
                    best = theta;
                    best_ll = ll;
                }
            }
            if best_ll == f64::NEG_INFINITY {
                return Err(Error::InvalidParameter(
                    "the data has zero likelihood under every candidate parameter".into(),
                ));
            }
            Ok(best)
        }
        ParameterSpace::Continuous { lower, upper } => {
            let mean = data.iter().sum::<f64>() / data.len() as f64;
            let clamp = |theta: f64| {
                let theta = theta.max(*lower);
                match upper {
                    Some(u) => theta.min(*u),
                    None => theta,
                }
            };
            match family.kind {
                FamilyKind::Poisson | FamilyKind::Bernoulli => Ok(clamp(mean)),
                FamilyKind::Geometric => Ok(clamp(1.0 / mean)),
                FamilyKind::TruncatedNormal { .. } => {
                    // the unconstrained maximizer sits strictly below the
                    // sample mean (truncation inflates observed values), so
                    // [lower, mean] brackets it and the search degrades
                    // gracefully to the nearer bound when the optimum is
                    // clamped away
                    let lo = *lower;
                    let hi = clamp(mean);
                    if lo >= hi {
                        return Ok(hi);
                    }
                    Ok(golden_max(lo, hi, SEARCH_TOL, loglik))
                }
            }
        }
    }
}

/// Golden-section search for the maximizer of a unimodal function on
/// `[lo, hi]`, to within `tol` on the argument.
fn golden_max(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{tags, RngStream};
    use approx::assert_abs_diff_eq;

    fn poisson_finite() -> ParametricFamily {
        ParametricFamily::new(
            FamilyKind::Poisson,
            ParameterSpace::Finite(vec![1.2, 1.6, 2.0, 2.4, 2.8]),
        )
        .unwrap()
    }

    #[test]
    fn finite_estimate_picks_the_likeliest_candidate() {
        let fam = poisson_finite();
        assert_eq!(mle(&fam, &[2.0, 2.0, 2.0]).unwrap(), 2.0);
        assert_eq!(mle(&fam, &[0.0, 1.0, 1.0]).unwrap(), 1.2);
        assert_eq!(mle(&fam, &[5.0, 6.0]).unwrap(), 2.8);
    }

    #[test]
    fn finite_ties_break_toward_the_smaller_candidate() {
        // an empty product over atoms is impossible, so engineer a tie: for
        // Bernoulli data with equal counts of 0 and 1, p and 1-p score the
        // same joint likelihood
        let fam = ParametricFamily::new(
            FamilyKind::Bernoulli,
            ParameterSpace::Finite(vec![0.4, 0.6]),
        )
        .unwrap();
        assert_eq!(mle(&fam, &[0.0, 1.0]).unwrap(), 0.4);
    }

    #[test]
    fn empty_and_unsupported_data_are_rejected() {
        let fam = poisson_finite();
        assert!(matches!(mle(&fam, &[]), Err(Error::EmptyData)));
        assert!(matches!(
            mle(&fam, &[2.0, -1.0]),
            Err(Error::OutsideSupport { .. })
        ));
    }

    #[test]
    fn continuous_poisson_estimate_is_the_sample_mean() {
        let fam = ParametricFamily::new(
            FamilyKind::Poisson,
            ParameterSpace::Continuous {
                lower: 0.0,
                upper: None,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(mle(&fam, &[1.0, 2.0, 6.0]).unwrap(), 3.0, epsilon = 1e-12);

        let mut rng = RngStream::from_seed(11).at(tags::DATA, 0).rng();
        let draws: Vec<f64> = (0..10_000)
            .map(|_| fam.sample(2.0, &mut rng).unwrap())
            .collect();
        // four standard errors of the sample mean at theta = 2
        assert_abs_diff_eq!(mle(&fam, &draws).unwrap(), 2.0, epsilon = 0.06);
    }

    #[test]
    fn continuous_estimates_respect_the_space_bounds() {
        let fam = ParametricFamily::new(
            FamilyKind::Poisson,
            ParameterSpace::Continuous {
                lower: 0.5,
                upper: Some(2.5),
            },
        )
        .unwrap();
        assert_eq!(mle(&fam, &[30.0]).unwrap(), 2.5);
        assert_eq!(mle(&fam, &[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn continuous_geometric_estimate_inverts_the_mean() {
        let fam = ParametricFamily::new(
            FamilyKind::Geometric,
            ParameterSpace::Continuous {
                lower: 0.01,
                upper: Some(1.0),
            },
        )
        .unwrap();
        assert_abs_diff_eq!(
            mle(&fam, &[4.0, 4.0, 4.0, 4.0]).unwrap(),
            0.25,
            epsilon = 1e-12
        );
    }

    #[test]
    fn truncated_normal_search_matches_a_grid_scan() {
        let fam = ParametricFamily::new(
            FamilyKind::TruncatedNormal { sigma: 2.0 },
            ParameterSpace::Continuous {
                lower: -100.0,
                upper: None,
            },
        )
        .unwrap();
        let mut rng = RngStream::from_seed(3).at(tags::DATA, 1).rng();
        let draws: Vec<f64> = (0..200)
            .map(|_| fam.sample(5.5, &mut rng).unwrap())
            .collect();
        let theta_hat = mle(&fam, &draws).unwrap();

        // independent check: exhaustive scan of the log-likelihood
        let loglik = |theta: f64| -> f64 {
            draws
                .iter()
                .map(|&xi| fam.log_density_unchecked(theta, xi))
                .sum()
        };
        let scan = (0..20_000)
            .map(|i| 2.0 + i as f64 * 4e-4)
            .max_by(|a, b| loglik(*a).total_cmp(&loglik(*b)))
            .unwrap();
        assert_abs_diff_eq!(theta_hat, scan, epsilon = 1e-3);
        // the truncation pulls the estimate below the sample mean
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(theta_hat < mean);
    }

    #[test]
    fn truncated_normal_estimate_sits_below_a_degenerate_sample() {
        // every observation at the truncation point pushes the estimate to
        // the lower bound of the space
        let fam = ParametricFamily::new(
            FamilyKind::TruncatedNormal { sigma: 1.0 },
            ParameterSpace::Continuous {
                lower: -3.0,
                upper: None,
            },
        )
        .unwrap();
        let theta_hat = mle(&fam, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(theta_hat, -3.0, epsilon = 1e-6);
    }
}
