use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

mod commands;

use commands::CliError;
use housing_core::config::RunConfig;

/// House-price dynamics and price-extremes toolkit.
#[derive(Debug, Parser)]
#[command(name = "housing", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Date splitting pre- and post-regime samples.
    #[arg(long, global = true, value_name = "YYYY-MM-DD")]
    cut_date: Option<NaiveDate>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Correlation and slope screens of each driver against dwelling value,
    /// before and after the cut date.
    Explore,
    /// Integrate the price/supply/demand model along the rate path.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Fit the rate–price logistic curve to pre-cut quarterly data.
    FitLogistic,
    /// Fit free ODE parameters to the pre-cut dwelling-value path.
    FitOde,
    /// Fit the nonstationary GEV to monthly price maxima in each window.
    FitGev {
        /// Fit window `LABEL,START,END`; repeatable, replaces configured
        /// windows.
        #[arg(long = "window", value_name = "LABEL,START,END")]
        windows: Vec<String>,
        #[arg(long)]
        min_block_size: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Location shift of a fitted GEV under a rate and CPI change.
    Scenario {
        /// Model JSON path, or `pre2020` / `post2020` for the reference
        /// coefficients.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        baseline_rate: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        baseline_cpi: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        d_rate: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        d_cpi: Option<f64>,
        /// Also report the rate rise that cancels `d_cpi`.
        #[arg(long)]
        offset: bool,
    },
    /// Write synthetic input CSVs and a matching config.json.
    GenFixtures {
        /// Target directory (defaults to `--out`, then `fixtures`).
        dir: Option<PathBuf>,
    },
}

fn load_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &global.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(cut) = global.cut_date {
        config.cut_date = cut;
    }
    Ok(config)
}

fn out_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = config.out_dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::GenFixtures { dir } = &cli.command {
        let dir = dir
            .clone()
            .or_else(|| cli.global.out.clone())
            .unwrap_or_else(|| PathBuf::from("fixtures"));
        let files = housing_core::fixtures::write_fixtures(&dir, cli.global.seed.unwrap_or(0))?;
        println!("wrote fixtures and {}", display(&files.config));
        return Ok(());
    }
    let mut config = load_config(&cli.global)?;
    match cli.command {
        Command::Explore => commands::explore(&config, &out_dir(&config)?),
        Command::Simulate { t_end, dt } => {
            if let Some(t) = t_end {
                config.dynamics.t_end = Some(t);
            }
            if let Some(dt) = dt {
                config.dynamics.dt = dt;
            }
            commands::simulate(&config, &out_dir(&config)?)
        }
        Command::FitLogistic => commands::fit_logistic(&config, &out_dir(&config)?),
        Command::FitOde => commands::fit_ode(&config, &out_dir(&config)?),
        Command::FitGev {
            windows,
            min_block_size,
            restarts,
        } => {
            if !windows.is_empty() {
                config.gev.windows = windows
                    .iter()
                    .map(|w| commands::parse_window(w))
                    .collect::<Result<_, _>>()?;
            }
            if let Some(m) = min_block_size {
                config.gev.min_block_size = m;
            }
            if let Some(r) = restarts {
                config.gev.restarts = r;
            }
            config.validate()?;
            commands::fit_gev(&config, &out_dir(&config)?)
        }
        Command::Scenario {
            model,
            baseline_rate,
            baseline_cpi,
            d_rate,
            d_cpi,
            offset,
        } => {
            let s = &mut config.scenario;
            s.model = model.or(s.model.take());
            s.baseline_rate = baseline_rate.or(s.baseline_rate);
            s.baseline_cpi = baseline_cpi.or(s.baseline_cpi);
            s.d_rate = d_rate.or(s.d_rate);
            s.d_cpi = d_cpi.or(s.d_cpi);
            s.offset |= offset;
            commands::scenario(&config, &out_dir(&config)?)
        }
        Command::GenFixtures { .. } => unreachable!("handled above"),
    }
}

pub(crate) fn display(path: &Path) -> String {
    path.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
