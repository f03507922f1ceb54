//! Correlation and simple linear regression screens for candidate drivers.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::student_t_two_sided_p;
use crate::timeseries::AlignedFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub r_squared: f64,
    pub n: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Centred sums (Sxx, Syy, Sxy).
fn centred_sums(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    x.iter()
        .zip(y)
        .fold((0.0, 0.0, 0.0), |(sxx, syy, sxy), (&a, &b)| {
            let dx = a - mx;
            let dy = b - my;
            (sxx + dx * dx, syy + dy * dy, sxy + dx * dy)
        })
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateSample(
            "need at least 2 observations".into(),
        ));
    }
    let (sxx, syy, sxy) = centred_sums(x, y);
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSample("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Least-squares fit `y = intercept + slope * x` with a two-sided t-test of
/// `slope = 0` on `n - 2` degrees of freedom.
pub fn ols_slope_test(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::DegenerateSample(format!(
            "regression needs at least 3 observations, got {n}"
        )));
    }
    let (sxx, syy, sxy) = centred_sums(x, y);
    if sxx == 0.0 {
        return Err(Error::DegenerateSample("constant regressor".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean(y) - slope * mean(x);
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let df = (n - 2) as f64;
    let slope_stderr = (sse / df / sxx).sqrt();
    let t_stat = if slope_stderr > 0.0 {
        slope / slope_stderr
    } else if slope == 0.0 {
        0.0
    } else {
        slope.signum() * f64::INFINITY
    };
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(RegressionResult {
        slope,
        intercept,
        slope_stderr,
        t_stat,
        p_value: student_t_two_sided_p(t_stat, df),
        r_squared,
        n,
    })
}

/// Correlation and slope test for one split of the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreenResult {
    pub n: usize,
    pub pearson: Option<f64>,
    pub regression: Option<RegressionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriverScreen {
    pub driver: String,
    pub response: String,
    pub pre: ScreenResult,
    pub post: ScreenResult,
}

fn screen_split(x: &[f64], y: &[f64]) -> ScreenResult {
    let pearson = pearson(x, y);
    let regression = ols_slope_test(x, y);
    let note = match (&pearson, &regression) {
        (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
        _ => None,
    };
    ScreenResult {
        n: x.len(),
        pearson: pearson.ok(),
        regression: regression.ok(),
        note,
    }
}

/// Regresses `response` on `driver` separately before and from `cut`.
/// Degenerate splits are reported in `note` instead of failing the screen.
pub fn screen_driver(
    frame: &AlignedFrame,
    response: &str,
    driver: &str,
    cut: NaiveDate,
) -> Result<DriverScreen> {
    for name in [response, driver] {
        if frame.column(name).is_none() {
            return Err(Error::Validation(format!("frame has no column '{name}'")));
        }
    }
    let (pre, post) = frame.split_at(cut);
    let run = |f: &AlignedFrame| {
        screen_split(
            f.column(driver).unwrap_or_default(),
            f.column(response).unwrap_or_default(),
        )
    };
    Ok(DriverScreen {
        driver: driver.to_string(),
        response: response.to_string(),
        pre: run(&pre),
        post: run(&post),
    })
}
