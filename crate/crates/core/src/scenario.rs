//! Covariate scenarios on a fitted nonstationary GEV: how far the
//! distribution of price maxima moves when the mortgage rate and CPI change,
//! and how large a rate rise cancels a given CPI rise.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{gev_pdf, gev_quantile, GevCoefficients};
use crate::par::Execution;

pub const GRID_POINTS: usize = 512;
/// Tail probability cut from each end of both distributions when choosing
/// the grid range.
pub const GRID_TAIL: f64 = 1e-4;
pub const DIRECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Leftward,
    Rightward,
    Null,
}

impl Direction {
    pub fn of(d_mu: f64) -> Self {
        if d_mu > DIRECTION_TOL {
            Direction::Rightward
        } else if d_mu < -DIRECTION_TOL {
            Direction::Leftward
        } else {
            Direction::Null
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Leftward => "leftward",
            Direction::Rightward => "rightward",
            Direction::Null => "null",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub rate: f64,
    pub cpi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub d_rate: f64,
    pub d_cpi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub x: f64,
    pub baseline: f64,
    pub shifted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub baseline: Covariates,
    pub delta: Delta,
    pub mu_baseline: f64,
    pub sigma_baseline: f64,
    pub d_mu: f64,
    pub d_sigma: f64,
    pub direction: Direction,
    #[serde(skip)]
    pub density_grid: Vec<DensityPoint>,
}

impl ScenarioResult {
    /// Writes the density grid as `x,baseline,shifted`.
    pub fn write_density_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "baseline", "shifted"])?;
        for p in &self.density_grid {
            w.write_record([p.x, p.baseline, p.shifted].map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Change in location `mu1 [ln(rate + d_rate) - ln(rate)] + mu2 d_cpi`.
pub fn location_shift(
    coefficients: &GevCoefficients,
    baseline_rate: f64,
    d_rate: f64,
    d_cpi: f64,
) -> Result<f64> {
    if !(baseline_rate > 0.0) {
        return Err(Error::Domain(format!(
            "baseline rate must be positive, got {baseline_rate}"
        )));
    }
    let shifted = baseline_rate + d_rate;
    if !(shifted > 0.0) {
        return Err(Error::Domain(format!(
            "shifted rate must be positive, got {shifted}"
        )));
    }
    Ok(coefficients.mu1 * (d_rate / baseline_rate).ln_1p() + coefficients.mu2 * d_cpi)
}

/// Baseline and shifted GEV distributions with a plot-ready density grid.
pub fn shift(
    coefficients: &GevCoefficients,
    baseline_rate: f64,
    baseline_cpi: f64,
    d_rate: f64,
    d_cpi: f64,
) -> Result<ScenarioResult> {
    let d_mu = location_shift(coefficients, baseline_rate, d_rate, d_cpi)?;
    let sigma_b = coefficients.scale(baseline_cpi);
    let sigma_s = coefficients.scale(baseline_cpi + d_cpi);
    if !(sigma_b > 0.0) || !(sigma_s > 0.0) {
        return Err(Error::Domain(format!(
            "scale must be positive (baseline {sigma_b}, shifted {sigma_s})"
        )));
    }
    let mu_b = coefficients.location(baseline_rate, baseline_cpi);
    let mu_s = mu_b + d_mu;
    let xi = coefficients.xi;

    let lo = gev_quantile(GRID_TAIL, mu_b, sigma_b, xi)?
        .min(gev_quantile(GRID_TAIL, mu_s, sigma_s, xi)?);
    let hi = gev_quantile(1.0 - GRID_TAIL, mu_b, sigma_b, xi)?.max(gev_quantile(
        1.0 - GRID_TAIL,
        mu_s,
        sigma_s,
        xi,
    )?);
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let density_grid = (0..GRID_POINTS)
        .map(|i| {
            let x = lo + i as f64 * step;
            DensityPoint {
                x,
                baseline: gev_pdf(x, mu_b, sigma_b, xi),
                shifted: gev_pdf(x, mu_s, sigma_s, xi),
            }
        })
        .collect();

    Ok(ScenarioResult {
        baseline: Covariates {
            rate: baseline_rate,
            cpi: baseline_cpi,
        },
        delta: Delta { d_rate, d_cpi },
        mu_baseline: mu_b,
        sigma_baseline: sigma_b,
        d_mu,
        d_sigma: sigma_s - sigma_b,
        direction: Direction::of(d_mu),
        density_grid,
    })
}

fn offset_preconditions(
    coefficients: &GevCoefficients,
    baseline_rate: f64,
    d_cpi: f64,
) -> Result<Option<f64>> {
    if !(baseline_rate > 0.0) {
        return Err(Error::Domain(format!(
            "baseline rate must be positive, got {baseline_rate}"
        )));
    }
    if !(coefficients.mu1 < 0.0) {
        return Err(Error::NoModeratingEffect {
            mu1: coefficients.mu1,
        });
    }
    // Nothing to offset: no rate rise is needed.
    if !(coefficients.mu2 * d_cpi > 0.0) {
        return Ok(Some(0.0));
    }
    Ok(None)
}

/// Smallest rate rise `d_rate >= 0` whose location shift cancels the CPI
/// rise `d_cpi`: `baseline_rate * (exp(-mu2 d_cpi / mu1) - 1)`. The closed
/// form is cross-checked against [`offsetting_rate_increase_bisection`].
pub fn offsetting_rate_increase(
    coefficients: &GevCoefficients,
    baseline_rate: f64,
    d_cpi: f64,
) -> Result<f64> {
    if let Some(zero) = offset_preconditions(coefficients, baseline_rate, d_cpi)? {
        return Ok(zero);
    }
    let closed = baseline_rate * (-coefficients.mu2 * d_cpi / coefficients.mu1).exp_m1();
    let bisected = offsetting_rate_increase_bisection(coefficients, baseline_rate, d_cpi)?;
    if (closed - bisected).abs() > 1e-6 * (1.0 + closed.abs()) {
        return Err(Error::Numerical(format!(
            "closed form {closed} and bisection {bisected} disagree"
        )));
    }
    Ok(closed)
}

/// Root of `location_shift(d_rate) = 0` by bracketing and bisection to
/// `1e-8` absolute width.
pub fn offsetting_rate_increase_bisection(
    coefficients: &GevCoefficients,
    baseline_rate: f64,
    d_cpi: f64,
) -> Result<f64> {
    if let Some(zero) = offset_preconditions(coefficients, baseline_rate, d_cpi)? {
        return Ok(zero);
    }
    let d_mu = |d_rate: f64| location_shift(coefficients, baseline_rate, d_rate, d_cpi);
    let mut lo = 0.0;
    let mut hi = baseline_rate.max(1.0);
    let mut doublings = 0;
    while d_mu(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1000 || !hi.is_finite() {
            return Err(Error::Numerical(
                "could not bracket the offsetting rate".into(),
            ));
        }
    }
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if d_mu(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // one more halving well below the tolerance keeps the midpoint accurate
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if d_mu(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetGridPoint {
    pub baseline_rate: f64,
    pub d_cpi: f64,
    pub d_rate: f64,
}

/// Offsetting rate rise over every `(baseline_rate, d_cpi)` pair, row-major
/// in `baselines`.
pub fn offset_sweep(
    coefficients: &GevCoefficients,
    baselines: &[f64],
    d_cpis: &[f64],
    execution: Execution,
) -> Result<Vec<OffsetGridPoint>> {
    let n = baselines.len() * d_cpis.len();
    execution
        .map(n, |i| {
            let baseline_rate = baselines[i / d_cpis.len()];
            let d_cpi = d_cpis[i % d_cpis.len()];
            offsetting_rate_increase(coefficients, baseline_rate, d_cpi).map(|d_rate| {
                OffsetGridPoint {
                    baseline_rate,
                    d_cpi,
                    d_rate,
                }
            })
        })
        .into_iter()
        .collect()
}

/// Scenario shifts over a grid of baselines and deltas, row-major in
/// `baselines` then `deltas`.
pub fn shift_sweep(
    coefficients: &GevCoefficients,
    baselines: &[Covariates],
    deltas: &[Delta],
    execution: Execution,
) -> Vec<Result<ScenarioResult>> {
    let n = baselines.len() * deltas.len();
    execution.map(n, |i| {
        let b = baselines[i / deltas.len()];
        let d = deltas[i % deltas.len()];
        shift(coefficients, b.rate, b.cpi, d.d_rate, d.d_cpi)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PRE: GevCoefficients = GevCoefficients::PRE_2020;
    const POST: GevCoefficients = GevCoefficients::POST_2020;

    #[test]
    fn pre_2020_shift_is_leftward() {
        let r = shift(&PRE, 6.0, 100.0, 1.0, 10.0).unwrap();
        let expected = -0.54 * (7.0f64 / 6.0).ln() - 1.3;
        assert!((r.d_mu - expected).abs() < 1e-12);
        assert!((r.d_mu + 1.383).abs() < 1e-3);
        assert_eq!(r.direction, Direction::Leftward);
        assert!((r.d_sigma + 0.1).abs() < 1e-12);
    }

    #[test]
    fn post_2020_shift_is_rightward() {
        let r = shift(&POST, 6.0, 130.0, 1.0, 10.0).unwrap();
        assert!((r.d_mu - 1.576).abs() < 1e-3);
        assert_eq!(r.direction, Direction::Rightward);
    }

    #[test]
    fn null_scenario() {
        let r = shift(&POST, 6.0, 130.0, 0.0, 0.0).unwrap();
        assert_eq!(r.d_mu, 0.0);
        assert_eq!(r.direction, Direction::Null);
    }

    #[test]
    fn infeasible_inputs() {
        assert!(shift(&POST, 0.0, 130.0, 1.0, 10.0).is_err());
        assert!(shift(&POST, 2.0, 130.0, -2.5, 10.0).is_err());
        // pre-2020 scale 1.21 - 0.01 cpi goes negative above cpi 121
        assert!(shift(&PRE, 6.0, 115.0, 1.0, 10.0).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        for (c, cpi) in [(PRE, 100.0), (POST, 130.0)] {
            let r = shift(&c, 6.0, cpi, 1.0, 10.0).unwrap();
            assert_eq!(r.density_grid.len(), GRID_POINTS);
            let h = r.density_grid[1].x - r.density_grid[0].x;
            let trap = |f: &dyn Fn(&DensityPoint) -> f64| {
                let v: Vec<f64> = r.density_grid.iter().map(f).collect();
                h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
            };
            let b = trap(&|p| p.baseline);
            let s = trap(&|p| p.shifted);
            assert!((b - 1.0).abs() < 1e-3, "baseline mass {b}");
            assert!((s - 1.0).abs() < 1e-3, "shifted mass {s}");
            assert!(r
                .density_grid
                .iter()
                .all(|p| p.baseline >= 0.0 && p.shifted >= 0.0));
        }
    }

    #[test]
    fn offset_values() {
        assert_eq!(offsetting_rate_increase(&POST, 6.0, 0.0).unwrap(), 0.0);
        let six = offsetting_rate_increase(&POST, 6.0, 10.0).unwrap();
        assert!((six - 6.0 * ((2.0f64 / 2.75).exp() - 1.0)).abs() < 1e-12);
        assert!((six - 6.42).abs() < 0.01);
        let high = offsetting_rate_increase(&POST, 10.29, 10.0).unwrap();
        assert!((high - 11.0).abs() < 0.05);
    }

    #[test]
    fn offset_requires_moderating_rate() {
        let c = GevCoefficients { mu1: 0.5, ..POST };
        assert!(matches!(
            offsetting_rate_increase(&c, 6.0, 10.0),
            Err(Error::NoModeratingEffect { .. })
        ));
    }

    #[test]
    fn offset_cancels_shift() {
        let d = offsetting_rate_increase(&POST, 6.0, 10.0).unwrap();
        let r = shift(&POST, 6.0, 130.0, d, 10.0).unwrap();
        assert!(r.d_mu.abs() < 1e-6);
    }

    #[test]
    fn sweeps_agree_across_modes() {
        let baselines = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let d_cpis = [5.0, 10.0, 20.0];
        let a = offset_sweep(&POST, &baselines, &d_cpis, Execution::Sequential).unwrap();
        let b = offset_sweep(&POST, &baselines, &d_cpis, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[1].baseline_rate, 2.0);
        assert_eq!(a[1].d_cpi, 10.0);
    }

    proptest! {
        #[test]
        fn offset_monotone(base in 0.5f64..20.0, db in 0.01f64..5.0, d_cpi in 0.1f64..30.0, dc in 0.01f64..5.0) {
            let o = offsetting_rate_increase(&POST, base, d_cpi).unwrap();
            prop_assert!(offsetting_rate_increase(&POST, base + db, d_cpi).unwrap() > o);
            prop_assert!(offsetting_rate_increase(&POST, base, d_cpi + dc).unwrap() > o);
        }

        #[test]
        fn d_mu_linear_in_cpi(d_rate in -1.0f64..5.0, d_cpi in -20.0f64..20.0) {
            let a = location_shift(&POST, 6.0, d_rate, d_cpi).unwrap();
            let b = location_shift(&POST, 6.0, d_rate, 2.0 * d_cpi).unwrap();
            let z = location_shift(&POST, 6.0, d_rate, 0.0).unwrap();
            prop_assert!(((b - z) - 2.0 * (a - z)).abs() < 1e-12);
        }
    }
}
