//! Synthetic inputs shaped like the real ones. Mortgage rate and CPI follow
//! monthly knot paths over 2011–2025. Dwelling values come from running the
//! ODE model along those rates, while the daily price index has monthly
//! maxima drawn from the reference GEV coefficient sets.

use std::path::{Path, PathBuf};

use chrono::{Datelike, Months, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};

use crate::dynamics::{simulate, OdeParams, RatePath, SystemState};
use crate::error::{Error, Result};
use crate::evt::{gev_quantile, CovariateRow, GevCoefficients};
use crate::timeseries::{month_end, resample, Frequency, ResampleMethod, TimeSeries};

/// Mortgage rate knots `(year, month, percent)`.
const RATE_KNOTS: [(i32, u32, f64); 14] = [
    (2011, 1, 7.8),
    (2011, 12, 7.3),
    (2012, 12, 6.6),
    (2013, 12, 5.95),
    (2014, 1, 5.9),
    (2015, 6, 5.5),
    (2016, 9, 5.3),
    (2019, 6, 5.2),
    (2019, 12, 4.8),
    (2020, 6, 4.5),
    (2022, 4, 4.5),
    (2023, 6, 7.0),
    (2024, 12, 7.2),
    (2025, 12, 6.5),
];

const CPI_KNOTS: [(i32, u32, f64); 10] = [
    (2011, 1, 97.0),
    (2014, 1, 105.4),
    (2019, 12, 116.2),
    (2020, 6, 115.0),
    (2021, 1, 117.2),
    (2022, 1, 121.3),
    (2023, 1, 130.8),
    (2024, 1, 136.1),
    (2025, 1, 139.2),
    (2025, 12, 142.0),
];

pub const FIRST_MONTH: (i32, u32) = (2011, 1);
pub const LAST_MONTH: (i32, u32) = (2025, 12);

/// First quarter end of the fixture period; time zero of the ODE runs.
pub fn epoch() -> NaiveDate {
    month_end(2011, 3)
}

fn month_index(year: i32, month: u32) -> i32 {
    year * 12 + month as i32 - 1
}

fn interpolate(knots: &[(i32, u32, f64)], year: i32, month: u32) -> f64 {
    let m = month_index(year, month);
    let first = knots[0];
    if m <= month_index(first.0, first.1) {
        return first.2;
    }
    for w in knots.windows(2) {
        let (m0, m1) = (month_index(w[0].0, w[0].1), month_index(w[1].0, w[1].1));
        if m <= m1 {
            let f = (m - m0) as f64 / (m1 - m0) as f64;
            return w[0].2 + f * (w[1].2 - w[0].2);
        }
    }
    knots[knots.len() - 1].2
}

fn months(start: NaiveDate, end: NaiveDate) -> Vec<(i32, u32)> {
    let mut out = Vec::new();
    let (mut y, mut m) = (start.year(), start.month());
    while month_end(y, m) <= month_end(end.year(), end.month()) {
        out.push((y, m));
        if m == 12 {
            y += 1;
            m = 1;
        } else {
            m += 1;
        }
    }
    out
}

fn fixture_start() -> NaiveDate {
    month_end(FIRST_MONTH.0, FIRST_MONTH.1)
}

fn fixture_end() -> NaiveDate {
    month_end(LAST_MONTH.0, LAST_MONTH.1)
}

fn monthly(name: &str, knots: &[(i32, u32, f64)], start: NaiveDate, end: NaiveDate) -> TimeSeries {
    let points = months(start, end)
        .into_iter()
        .map(|(y, m)| (month_end(y, m), interpolate(knots, y, m)))
        .collect();
    TimeSeries::new(name, Frequency::Monthly, points).expect("fixture knots are valid")
}

/// Monthly mortgage rate between the months containing `start` and `end`.
pub fn monthly_rates(start: NaiveDate, end: NaiveDate) -> TimeSeries {
    monthly("rate", &RATE_KNOTS, start, end)
}

pub fn monthly_cpi(start: NaiveDate, end: NaiveDate) -> TimeSeries {
    monthly("cpi", &CPI_KNOTS, start, end)
}

/// Quarterly average mortgage rate over the whole fixture period.
pub fn quarterly_rates() -> TimeSeries {
    let m = monthly_rates(fixture_start(), fixture_end());
    resample(&m, Frequency::Quarterly, ResampleMethod::Mean).expect("monthly to quarterly")
}

/// The quarterly fixture rates as an ODE forcing path starting at t = 0.
pub fn rate_path() -> RatePath {
    RatePath::from_series(&quarterly_rates(), epoch()).expect("fixture rate path")
}

/// Covariates for every month in `[start, end]`.
pub fn covariate_rows(start: NaiveDate, end: NaiveDate) -> Vec<CovariateRow> {
    months(start, end)
        .into_iter()
        .map(|(y, m)| CovariateRow {
            period: month_end(y, m),
            cpi: interpolate(&CPI_KNOTS, y, m),
            rate: interpolate(&RATE_KNOTS, y, m),
        })
        .collect()
}

/// Default initial state of the fixture ODE runs.
pub fn initial_state() -> SystemState {
    SystemState {
        t: 0.0,
        y: 520.0,
        s: 400.0,
        d: 200.0,
    }
}

/// Quarterly dwelling values from simulating `params` along the fixture
/// rates, with optional Gaussian noise of standard deviation `noise_sd`.
pub fn dwelling_values(params: &OdeParams, noise_sd: f64, seed: u64) -> Result<TimeSeries> {
    let rates = rate_path();
    let traj = simulate(&initial_state(), &rates, params, rates.end(), 0.05)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd.max(0.0))
        .map_err(|e| Error::Validation(format!("noise: {e}")))?;
    let points = quarterly_rates()
        .points()
        .iter()
        .zip(rates.knots())
        .map(|(&(date, _), &(t, _))| {
            let y = traj.y_at(t).ok_or(Error::Coverage { t })?;
            let e = if noise_sd > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            Ok((date, y + e))
        })
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new("dwelling", Frequency::Quarterly, points)
}

/// Weekdays of one calendar month.
fn trading_days(year: i32, month: u32) -> Vec<NaiveDate> {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = first + Months::new(1);
    first
        .iter_days()
        .take_while(|d| *d < next)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

/// Coefficients used to generate the month ending on `period`: the pre-2020
/// set before 2020, the post-2020 set from then on.
pub fn generating_coefficients(period: NaiveDate) -> GevCoefficients {
    if period.year() < 2020 {
        GevCoefficients::PRE_2020
    } else {
        GevCoefficients::POST_2020
    }
}

/// A daily price index over `rows`' months. Each month's maximum is drawn
/// from the GEV given by [`generating_coefficients`] and that month's
/// covariates; the other trading days sit below it by exponential gaps.
pub fn daily_prices(rows: &[CovariateRow], seed: u64) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    for row in rows {
        let coefficients = generating_coefficients(row.period);
        let sigma = coefficients.scale(row.cpi);
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("scale {sigma} at {}", row.period)));
        }
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        let max = gev_quantile(
            u,
            coefficients.location(row.rate, row.cpi),
            sigma,
            coefficients.xi,
        )?;
        let days = trading_days(row.period.year(), row.period.month());
        let peak = rng.random_range(0..days.len());
        for (i, day) in days.into_iter().enumerate() {
            let value = if i == peak {
                max
            } else {
                let gap: f64 = Exp1.sample(&mut rng);
                max - sigma * (0.05 + gap)
            };
            points.push((day, value));
        }
    }
    TimeSeries::new("price", Frequency::Daily, points)
}

/// A quarterly series with no relation to prices, used as a screening
/// control.
pub fn migration(seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 8.0).expect("valid sd");
    let points = quarterly_rates()
        .dates()
        .map(|d| (d, 60.0 + noise.sample(&mut rng)))
        .collect();
    TimeSeries::new("migration", Frequency::Quarterly, points).expect("valid series")
}

/// Paths of the files written by [`write_fixtures`].
#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub dwelling: PathBuf,
    pub rate_quarterly: PathBuf,
    pub rate_monthly: PathBuf,
    pub cpi_monthly: PathBuf,
    pub daily_price: PathBuf,
    pub migration: PathBuf,
    pub config: PathBuf,
}

/// Writes the fixture CSVs and a matching `config.json` into `dir`.
pub fn write_fixtures(dir: impl AsRef<Path>, seed: u64) -> Result<FixtureFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = FixtureFiles {
        dwelling: dir.join("dwelling.csv"),
        rate_quarterly: dir.join("rate_quarterly.csv"),
        rate_monthly: dir.join("rate_monthly.csv"),
        cpi_monthly: dir.join("cpi_monthly.csv"),
        daily_price: dir.join("daily_price.csv"),
        migration: dir.join("migration.csv"),
        config: dir.join("config.json"),
    };
    let (start, end) = (fixture_start(), fixture_end());
    dwelling_values(&OdeParams::default(), 2.0, seed)?.save_csv(&files.dwelling)?;
    quarterly_rates().save_csv(&files.rate_quarterly)?;
    monthly_rates(start, end).save_csv(&files.rate_monthly)?;
    monthly_cpi(start, end).save_csv(&files.cpi_monthly)?;
    let price_rows = covariate_rows(month_end(2014, 1), end);
    daily_prices(&price_rows, seed)?.save_csv(&files.daily_price)?;
    migration(seed.wrapping_add(1)).save_csv(&files.migration)?;

    let config = serde_json::json!({
        "inputs": {
            "dwelling": {"path": "dwelling.csv", "frequency": "quarterly"},
            "rate": {"path": "rate_monthly.csv", "frequency": "monthly", "method": "mean"},
            "cpi": {"path": "cpi_monthly.csv", "frequency": "monthly"},
            "daily_price": {"path": "daily_price.csv", "frequency": "daily"},
            "drivers": {
                "migration": {"path": "migration.csv", "frequency": "quarterly"},
                "rate": {"path": "rate_monthly.csv", "frequency": "monthly", "method": "mean"}
            }
        },
        "seed": seed,
        "dynamics": {"initial": {"Y": initial_state().y, "S": initial_state().s, "D": initial_state().d}}
    });
    let text = serde_json::to_string_pretty(&config)? + "\n";
    std::fs::write(&files.config, text).map_err(|e| Error::io(&files.config, e))?;
    Ok(files)
}
