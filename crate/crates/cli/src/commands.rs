use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use housing_core::calibration::{self, LogisticFitOptions, OdeFitOptions};
use housing_core::config::{RunConfig, SeriesInput};
use housing_core::dynamics::{simulate as run_ode, RatePath, SystemState, TrajectorySummary};
use housing_core::evt::{
    self, block_maxima, FitWindow, GevCoefficients, GevFitOptions, GevModel, MIN_BLOCKS,
};
use housing_core::exploratory::screen_driver;
use housing_core::scenario;
use housing_core::timeseries::{align, resample, Frequency, ResampleMethod, TimeSeries};
use housing_core::Error;

use crate::display;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), CliError>;

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
    std::fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", display(path))))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("{}: {e}", display(path))))
}

/// Brings a series to `target`, averaging (or as configured) when it is
/// finer.
fn to_frequency(
    series: TimeSeries,
    spec: &SeriesInput,
    target: Frequency,
) -> Result<TimeSeries, Error> {
    if series.frequency() == target {
        Ok(series)
    } else {
        resample(&series, target, spec.method_or(ResampleMethod::Mean))
    }
}

fn load_at(
    config: &RunConfig,
    input: &Option<SeriesInput>,
    key: &str,
    target: Frequency,
) -> Result<TimeSeries, Error> {
    let series = config.require(input, key)?;
    let spec = input.as_ref().expect("required input present");
    to_frequency(series, spec, target)
}

fn day_before(date: NaiveDate) -> NaiveDate {
    date.pred_opt().unwrap_or(date)
}

#[derive(Serialize)]
struct ExploreReport<'a> {
    cut_date: NaiveDate,
    screens: &'a [housing_core::exploratory::DriverScreen],
}

pub fn explore(config: &RunConfig, out: &Path) -> CmdResult {
    let dwelling = load_at(
        config,
        &config.inputs.dwelling,
        "dwelling",
        Frequency::Quarterly,
    )?;
    if config.inputs.drivers.is_empty() {
        return Err(CliError::input("missing input 'inputs.drivers'"));
    }
    let mut screens = Vec::new();
    for (name, spec) in &config.inputs.drivers {
        let driver = spec.load(&config.base_dir, name)?;
        let driver = to_frequency(driver, spec, Frequency::Quarterly)?;
        let frame = align(&[dwelling.clone(), driver])?;
        screens.push(screen_driver(&frame, "dwelling", name, config.cut_date)?);
    }
    write_json(
        &out.join("explore.json"),
        &ExploreReport {
            cut_date: config.cut_date,
            screens: &screens,
        },
    )?;
    for s in &screens {
        let p = |r: &housing_core::exploratory::ScreenResult| {
            r.regression
                .as_ref()
                .map(|g| format!("{:.3e}", g.p_value))
                .unwrap_or_else(|| "n/a".into())
        };
        println!(
            "{}: p(pre) = {}, p(post) = {}",
            s.driver,
            p(&s.pre),
            p(&s.post)
        );
    }
    Ok(())
}

/// Quarterly rate path, time zero at the first rate quarter.
fn rate_path(config: &RunConfig) -> Result<RatePath, Error> {
    let rates = load_at(config, &config.inputs.rate, "rate", Frequency::Quarterly)?;
    RatePath::from_series(&rates, rates.first_date())
}

fn initial_state(config: &RunConfig, dwelling: Option<&TimeSeries>) -> Result<SystemState, Error> {
    let init = &config.dynamics.initial;
    let y = match (init.y, dwelling) {
        (Some(y), _) => y,
        (None, Some(d)) => d.points()[0].1,
        (None, None) => {
            return Err(Error::Validation(
                "set dynamics.initial.Y or provide inputs.dwelling".into(),
            ))
        }
    };
    Ok(SystemState {
        t: 0.0,
        y,
        s: init.s,
        d: init.d,
    })
}

#[derive(Serialize)]
struct SimulateReport {
    epoch: Option<NaiveDate>,
    dt: f64,
    #[serde(flatten)]
    summary: TrajectorySummary,
}

pub fn simulate(config: &RunConfig, out: &Path) -> CmdResult {
    let rates = rate_path(config)?;
    let dwelling = match &config.inputs.dwelling {
        Some(_) if config.dynamics.initial.y.is_none() => Some(load_at(
            config,
            &config.inputs.dwelling,
            "dwelling",
            Frequency::Quarterly,
        )?),
        _ => None,
    };
    let initial = initial_state(config, dwelling.as_ref())?;
    let t_end = config.dynamics.t_end.unwrap_or(rates.end());
    let traj = run_ode(
        &initial,
        &rates,
        &config.dynamics.params,
        t_end,
        config.dynamics.dt,
    )?;
    traj.write_csv(create(&out.join("trajectory.csv"))?)?;
    let summary = traj.summary();
    let alpha = summary.alpha;
    write_json(
        &out.join("simulate_summary.json"),
        &SimulateReport {
            epoch: rates.epoch(),
            dt: config.dynamics.dt,
            summary,
        },
    )?;
    println!(
        "{} points; alpha peaks at {:.4} (t = {}); final Y = {:.2}",
        traj.points.len(),
        alpha.peak_alpha,
        alpha.peak_t,
        traj.last().y
    );
    Ok(())
}

pub fn fit_logistic(config: &RunConfig, out: &Path) -> CmdResult {
    let dwelling = load_at(
        config,
        &config.inputs.dwelling,
        "dwelling",
        Frequency::Quarterly,
    )?;
    let rates = load_at(config, &config.inputs.rate, "rate", Frequency::Quarterly)?;
    let frame = align(&[rates, dwelling])?;
    let (pre, _) = frame.split_at(config.cut_date);
    let x = pre.column("rate").unwrap_or_default();
    let y = pre.column("dwelling").unwrap_or_default();
    let pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    let report = calibration::fit_logistic(
        &pairs,
        &config.logistic.init,
        &config.logistic.bounds,
        &LogisticFitOptions {
            restarts: config.logistic.restarts,
            seed: config.seed,
            ..Default::default()
        },
    )?;
    write_json(&out.join("logistic_fit.json"), &report)?;
    println!("sse = {:.6}; converged = {}", report.sse, report.converged);
    Ok(())
}

pub fn fit_ode(config: &RunConfig, out: &Path) -> CmdResult {
    let dwelling = load_at(
        config,
        &config.inputs.dwelling,
        "dwelling",
        Frequency::Quarterly,
    )?;
    let rates = rate_path(config)?;
    let observed = dwelling.window(dwelling.first_date(), day_before(config.cut_date))?;
    let initial = initial_state(config, Some(&observed))?;
    let (free, init, bounds) = config.ode_fit.split()?;
    let report = calibration::fit_ode(
        &observed,
        &rates,
        &initial,
        &config.dynamics.params,
        &free,
        &init,
        &bounds,
        &OdeFitOptions {
            dt: config.dynamics.dt,
            max_iter: config.ode_fit.max_iter,
            tol: config.ode_fit.tol,
            seed: config.seed,
            ..Default::default()
        },
    )?;
    write_json(&out.join("ode_fit.json"), &report)?;
    let fitted: Vec<String> = free
        .iter()
        .map(|f| format!("{} = {}", f.name(), report.params.get(*f)))
        .collect();
    println!("{}; sse = {:.6}", fitted.join(", "), report.sse);
    Ok(())
}

/// Parses `LABEL,START,END`.
pub fn parse_window(text: &str) -> Result<FitWindow, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [label, start, end] = parts.as_slice() else {
        return Err(CliError::input(format!(
            "window '{text}' is not LABEL,START,END"
        )));
    };
    let date = |s: &str| {
        s.parse::<NaiveDate>()
            .map_err(|e| CliError::input(format!("window '{text}': {e}")))
    };
    Ok(FitWindow {
        label: label.to_string(),
        start: date(start)?,
        end: date(end)?,
    })
}

pub fn fit_gev(config: &RunConfig, out: &Path) -> CmdResult {
    if config.gev.windows.is_empty() {
        return Err(CliError::input("no fit windows configured"));
    }
    let daily = config.require(&config.inputs.daily_price, "daily_price")?;
    let cpi = load_at(config, &config.inputs.cpi, "cpi", Frequency::Monthly)?;
    let rate = load_at(config, &config.inputs.rate, "rate", Frequency::Monthly)?;
    let covariates = align(&[cpi, rate])?;
    let blocks = block_maxima(&daily, &covariates, config.gev.min_block_size)?;

    let windows: Vec<_> = config
        .gev
        .windows
        .iter()
        .map(|w| (w, blocks.window(w.start, w.end)))
        .collect();
    if let Some((w, b)) = windows.iter().find(|(_, b)| b.len() < MIN_BLOCKS) {
        return Err(CliError::input(format!(
            "window '{}': {}",
            w.label,
            Error::TooFewBlocks {
                found: b.len(),
                required: MIN_BLOCKS
            }
        )));
    }
    for (w, data) in windows {
        let init = config
            .gev
            .init
            .unwrap_or_else(|| GevCoefficients::moment_init(&data));
        let options = GevFitOptions {
            restarts: config.gev.restarts,
            seed: config.seed,
            max_iter: config.gev.max_iter,
            window: Some(w.clone()),
            ..Default::default()
        };
        let model = evt::fit_gev(&data, &init, &options)?;
        data.write_csv(create(&out.join(format!("blocks_{}.csv", w.label)))?)?;
        write_json(&out.join(format!("gev_{}.json", w.label)), &model)?;
        let d = model.diagnostics.expect("fits carry diagnostics");
        println!(
            "{}: {} blocks, nll = {:.4}, ks_p = {:.4}, ad_p = {:.4}",
            w.label,
            model.n_blocks,
            model.nll.unwrap_or(f64::NAN),
            d.ks_p,
            d.ad_p
        );
    }
    Ok(())
}

fn load_model(spec: &str, base: &Path) -> Result<GevModel, CliError> {
    match spec {
        "pre2020" => Ok(GevModel::from_coefficients(GevCoefficients::PRE_2020)),
        "post2020" => Ok(GevModel::from_coefficients(GevCoefficients::POST_2020)),
        path => {
            let path = base.join(path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::input(format!("{}: {e}", display(&path))))?;
            Ok(serde_json::from_str(&text).map_err(Error::from)?)
        }
    }
}

#[derive(Serialize)]
struct ScenarioReport {
    model: String,
    #[serde(flatten)]
    result: scenario::ScenarioResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    offsetting_rate_increase: Option<f64>,
}

pub fn scenario(config: &RunConfig, out: &Path) -> CmdResult {
    let s = &config.scenario;
    let model_spec = s
        .model
        .as_deref()
        .ok_or_else(|| CliError::input("scenario needs --model"))?;
    let baseline_rate = s
        .baseline_rate
        .ok_or_else(|| CliError::input("scenario needs --baseline-rate"))?;
    let baseline_cpi = s
        .baseline_cpi
        .ok_or_else(|| CliError::input("scenario needs --baseline-cpi"))?;
    let d_rate = s.d_rate.unwrap_or(0.0);
    let d_cpi = s.d_cpi.unwrap_or(0.0);
    let model = load_model(model_spec, &config.base_dir)?;
    let c = model.coefficients;

    let result = scenario::shift(&c, baseline_rate, baseline_cpi, d_rate, d_cpi)?;
    let offset = if s.offset {
        Some(scenario::offsetting_rate_increase(
            &c,
            baseline_rate,
            d_cpi,
        )?)
    } else {
        None
    };
    result.write_density_csv(create(&out.join("scenario_density.csv"))?)?;
    println!("direction: {}", result.direction.as_str());
    println!("d_mu: {:.6}", result.d_mu);
    if let Some(o) = offset {
        println!("offsetting rate increase: {o:.6}");
    }
    write_json(
        &out.join("scenario.json"),
        &ScenarioReport {
            model: model_spec.to_string(),
            result,
            offsetting_rate_increase: offset,
        },
    )
}
