use serde::{Deserialize, Serialize};

use super::blocks::BlockMaxima;
use super::fit::GevCoefficients;
use super::gev::gev_cdf;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub ks_stat: f64,
    pub ks_p: f64,
    pub ad_stat: f64,
    pub ad_p: f64,
}

/// Probability integral transform of each block maximum under its own
/// block's fitted distribution.
pub fn pit(coefficients: &GevCoefficients, data: &BlockMaxima) -> Vec<f64> {
    data.blocks
        .iter()
        .map(|b| {
            gev_cdf(
                b.max_value,
                coefficients.location(b.rate, b.cpi),
                coefficients.scale(b.cpi),
                coefficients.xi,
            )
        })
        .collect()
}

/// KS distance from Uniform(0,1) and its asymptotic p-value.
pub fn ks_test(u: &[f64]) -> (f64, f64) {
    let d = stats::ks_uniform_statistic(u);
    (d, stats::ks_p_value(d, u.len()))
}

/// Anderson–Darling A² against Uniform(0,1) and its asymptotic p-value.
pub fn ad_test(u: &[f64]) -> (f64, f64) {
    let a2 = stats::ad_uniform_statistic(u);
    (a2, stats::ad_p_value(a2))
}

pub fn gof(coefficients: &GevCoefficients, data: &BlockMaxima) -> GofResult {
    let u = pit(coefficients, data);
    let (ks_stat, ks_p) = ks_test(&u);
    let (ad_stat, ad_p) = ad_test(&u);
    GofResult {
        ks_stat,
        ks_p,
        ad_stat,
        ad_p,
    }
}

/// Likelihood ratio test of a nested model against a fuller one, from their
/// negative log-likelihoods.
pub fn lr_test(nested_nll: f64, full_nll: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain(
            "degrees of freedom must be at least 1".into(),
        ));
    }
    let deviance = 2.0 * (nested_nll - full_nll);
    if nested_nll < full_nll - 1e-9 {
        return Err(Error::NotNested { deviance });
    }
    Ok(stats::chi_square_sf(deviance.max(0.0), df as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ks_on_midpoint_grid() {
        let n = 100;
        let u: Vec<f64> = (1..=n)
            .map(|i| (2 * i - 1) as f64 / (2 * n) as f64)
            .collect();
        let (d, p) = ks_test(&u);
        assert_relative_eq!(d, 0.005, epsilon = 1e-12);
        assert!(p > 0.999_999);
    }

    #[test]
    fn single_point_statistics() {
        let (d, _) = ks_test(&[0.5]);
        assert_eq!(d, 0.5);
        let (a2, _) = ad_test(&[0.5]);
        assert!((a2 - 0.38629).abs() < 1e-5);
    }

    #[test]
    fn lr_values() {
        assert!((lr_test(10.0 + 3.841 / 2.0, 10.0, 1).unwrap() - 0.05).abs() < 1e-3);
        assert_eq!(lr_test(5.0, 5.0, 1).unwrap(), 1.0);
        assert_eq!(lr_test(5.0, 5.0, 3).unwrap(), 1.0);
        assert_eq!(lr_test(5.0, 5.0 + 1e-12, 2).unwrap(), 1.0);
        assert!(matches!(lr_test(4.0, 5.0, 1), Err(Error::NotNested { .. })));
        assert!(lr_test(6.0, 5.0, 0).is_err());
    }
}
