//! Least-squares calibration of the rate–price curve and of the ODE
//! parameters against an observed price path.

use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, LogisticCurve, OdeField, OdeParams, RatePath, SystemState};
use crate::error::{Error, Result};
use crate::optim::{MultiStart, NelderMead};
use crate::par::Execution;
use crate::timeseries::{quarters_between, TimeSeries};

/// Loss assigned to parameter sets whose simulation fails.
const PENALTY: f64 = 1e100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<P> {
    pub params: P,
    pub sse: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
    /// Loss at the initial parameters.
    pub initial_sse: f64,
}

/// Box constraints for the six curve coefficients, in `A, B, Q, g, M, nu`
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveBounds(pub [(f64, f64); 6]);

impl Default for CurveBounds {
    fn default() -> Self {
        CurveBounds([
            (0.0, 1e4),
            (1e-9, 1e4),
            (1e-6, 100.0),
            (1e-3, 100.0),
            (-20.0, 30.0),
            (1e-3, 100.0),
        ])
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub execution: Execution,
}

impl Default for LogisticFitOptions {
    fn default() -> Self {
        LogisticFitOptions {
            restarts: 5,
            seed: 0,
            max_iter: 20_000,
            execution: Execution::default(),
        }
    }
}

fn check_within(values: &[f64], bounds: &[(f64, f64)], names: &[&str]) -> Result<()> {
    for ((v, (lo, hi)), name) in values.iter().zip(bounds).zip(names) {
        if !(lo <= hi) {
            return Err(Error::Validation(format!("empty bounds for {name}")));
        }
        if !(v >= lo && v <= hi) {
            return Err(Error::Validation(format!(
                "initial {name} = {v} outside [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

fn curve_sse(curve: &LogisticCurve, pairs: &[(f64, f64)]) -> f64 {
    let sse: f64 = pairs
        .iter()
        .map(|&(x, y)| (y - curve.eval(x)).powi(2))
        .sum();
    if sse.is_finite() {
        sse
    } else {
        PENALTY
    }
}

/// Fits `G(X)` to `(rate, price)` pairs by bounded multi-start Nelder–Mead.
/// `converged` is false when no start reached tolerance or the best fit does
/// not improve on `init`.
pub fn fit_logistic(
    pairs: &[(f64, f64)],
    init: &LogisticCurve,
    bounds: &CurveBounds,
    options: &LogisticFitOptions,
) -> Result<FitReport<LogisticCurve>> {
    if pairs.len() < 6 {
        return Err(Error::Validation(format!(
            "need at least 6 (rate, price) pairs, got {}",
            pairs.len()
        )));
    }
    let x0 = init.to_array();
    check_within(&x0, &bounds.0, &LogisticCurve::FIELDS)?;

    let objective = |v: &[f64]| curve_sse(&LogisticCurve::from_slice(v), pairs);
    let initial_sse = objective(&x0);
    let nm = NelderMead {
        max_iter: options.max_iter,
        ftol: 1e-10,
        xtol: 1e-10,
        bounds: Some(bounds.0.to_vec()),
        initial_step: None,
        rebuilds: 5,
    };
    let ms = MultiStart {
        restarts: options.restarts.max(1),
        jitter: 0.1,
        zero_scale: Some(vec![1.0; 6]),
        seed: options.seed,
        execution: options.execution,
    };
    let result = ms.run(&nm, &objective, &x0);
    let params = LogisticCurve::from_slice(&result.best.x);
    let sse = result.best.fx;
    let improved = sse < initial_sse || initial_sse == 0.0;
    Ok(FitReport {
        params,
        sse,
        n_iter: result.best.n_iter,
        converged: result.runs.iter().any(|r| r.converged) && improved,
        residuals: pairs.iter().map(|&(x, y)| y - params.eval(x)).collect(),
        initial_sse,
    })
}

#[derive(Debug, Clone)]
pub struct OdeFitOptions {
    pub dt: f64,
    pub max_iter: usize,
    /// Simplex spread tolerance.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for OdeFitOptions {
    fn default() -> Self {
        OdeFitOptions {
            dt: 0.05,
            max_iter: 2000,
            tol: 1e-8,
            restarts: 1,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

/// Observation times (quarters since the rate path's epoch) and values that
/// fall inside the simulated horizon.
fn observation_times(observed: &TimeSeries, rates: &RatePath, t0: f64) -> Result<Vec<(f64, f64)>> {
    let epoch = rates
        .epoch()
        .ok_or_else(|| Error::Validation("rate path has no calendar epoch".into()))?;
    let obs: Vec<(f64, f64)> = observed
        .points()
        .iter()
        .map(|&(d, y)| (quarters_between(epoch, d), y))
        .filter(|&(t, _)| t >= t0 - 1e-9 && t <= rates.end() + 1e-9)
        .collect();
    if obs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(obs)
}

/// Model prices at the observation times, or `None` if the simulation fails.
fn model_prices(
    params: &OdeParams,
    initial: &SystemState,
    rates: &RatePath,
    obs: &[(f64, f64)],
    dt: f64,
) -> Option<Vec<f64>> {
    let t_end = obs.iter().map(|o| o.0).fold(initial.t, f64::max);
    let traj = simulate(initial, rates, params, t_end, dt).ok()?;
    obs.iter().map(|&(t, _)| traj.y_at(t)).collect()
}

/// Fits the `free` fields of the ODE parameters to an observed price path,
/// holding every other field at its value in `base`. The loss is the sum of
/// squared price residuals at the observation dates.
#[allow(clippy::too_many_arguments)]
pub fn fit_ode(
    observed: &TimeSeries,
    rates: &RatePath,
    initial: &SystemState,
    base: &OdeParams,
    free: &[OdeField],
    init: &[f64],
    bounds: &[(f64, f64)],
    options: &OdeFitOptions,
) -> Result<FitReport<OdeParams>> {
    if free.is_empty() {
        return Err(Error::Validation("no free parameters to fit".into()));
    }
    if init.len() != free.len() || bounds.len() != free.len() {
        return Err(Error::Validation(
            "free, init and bounds must have equal lengths".into(),
        ));
    }
    for (i, f) in free.iter().enumerate() {
        if free[..i].contains(f) {
            return Err(Error::Validation(format!("'{}' listed twice", f.name())));
        }
    }
    let names: Vec<&str> = free.iter().map(|f| f.name()).collect();
    check_within(init, bounds, &names)?;
    base.validate()?;
    let obs = observation_times(observed, rates, initial.t)?;

    let with = |v: &[f64]| {
        let mut p = *base;
        for (f, &x) in free.iter().zip(v) {
            p.set(*f, x);
        }
        p
    };
    let objective = |v: &[f64]| match model_prices(&with(v), initial, rates, &obs, options.dt) {
        Some(ys) => {
            let sse: f64 = ys.iter().zip(&obs).map(|(m, o)| (m - o.1).powi(2)).sum();
            if sse.is_finite() {
                sse
            } else {
                PENALTY
            }
        }
        None => PENALTY,
    };

    let initial_sse = objective(init);
    let nm = NelderMead {
        max_iter: options.max_iter,
        ftol: options.tol,
        xtol: options.tol,
        bounds: Some(bounds.to_vec()),
        initial_step: None,
        rebuilds: 3,
    };
    let ms = MultiStart {
        restarts: options.restarts.max(1),
        jitter: 0.1,
        zero_scale: None,
        seed: options.seed,
        execution: options.execution,
    };
    let result = ms.run(&nm, &objective, init);
    let params = with(&result.best.x);
    let residuals = model_prices(&params, initial, rates, &obs, options.dt)
        .map(|ys| ys.iter().zip(&obs).map(|(m, o)| o.1 - m).collect())
        .unwrap_or_default();
    let sse = result.best.fx;
    Ok(FitReport {
        params,
        sse,
        n_iter: result.best.n_iter,
        converged: result.best.converged
            && sse < PENALTY
            && (sse < initial_sse || initial_sse == 0.0),
        residuals,
        initial_sse,
    })
}
