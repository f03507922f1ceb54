//! JSON run configuration shared by the command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calibration::CurveBounds;
use crate::dynamics::{LogisticCurve, OdeField, OdeParams};
use crate::error::{Error, Result};
use crate::evt::{FitWindow, GevCoefficients};
use crate::timeseries::{load_csv, load_csv_infer, Frequency, ResampleMethod, TimeSeries};

/// A CSV input. `frequency` is inferred from the dates when omitted;
/// `method` controls any downsampling the consuming command performs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesInput {
    pub path: PathBuf,
    #[serde(default)]
    pub frequency: Option<Frequency>,
    #[serde(default)]
    pub method: Option<ResampleMethod>,
}

impl SeriesInput {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SeriesInput {
            path: path.into(),
            frequency: None,
            method: None,
        }
    }

    /// Loads the file, resolving relative paths against `base`, and names the
    /// series `name`.
    pub fn load(&self, base: &Path, name: &str) -> Result<TimeSeries> {
        let path = base.join(&self.path);
        let series = match self.frequency {
            Some(f) => load_csv(&path, f)?,
            None => load_csv_infer(&path)?,
        };
        Ok(series.with_name(name))
    }

    pub fn method_or(&self, default: ResampleMethod) -> ResampleMethod {
        self.method.unwrap_or(default)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Inputs {
    /// Quarterly dwelling value, $'000.
    pub dwelling: Option<SeriesInput>,
    /// Mortgage rate in percentage points.
    pub rate: Option<SeriesInput>,
    /// Monthly consumer price index.
    pub cpi: Option<SeriesInput>,
    /// Daily price index whose monthly maxima feed the GEV fits.
    pub daily_price: Option<SeriesInput>,
    /// Candidate explanatory series for the screening step.
    pub drivers: BTreeMap<String, SeriesInput>,
}

/// Initial state for simulations. `Y` defaults to the first dwelling value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(rename = "Y", default)]
    pub y: Option<f64>,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            y: None,
            s: 400.0,
            d: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub params: OdeParams,
    pub initial: InitialConfig,
    pub dt: f64,
    /// Horizon in quarters after the first rate observation. Runs to the end
    /// of the rate series when omitted.
    pub t_end: Option<f64>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            params: OdeParams::default(),
            initial: InitialConfig::default(),
            dt: 0.05,
            t_end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticConfig {
    pub init: LogisticCurve,
    pub bounds: CurveBounds,
    pub restarts: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            init: LogisticCurve::default(),
            bounds: CurveBounds::default(),
            restarts: 5,
        }
    }
}

/// One free ODE parameter with its starting value and search interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParam {
    pub name: String,
    pub init: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Free fields paired with their starting values and bounds.
pub type FreeSplit = (Vec<OdeField>, Vec<f64>, Vec<(f64, f64)>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeFitConfig {
    pub free: Vec<FreeParam>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for OdeFitConfig {
    fn default() -> Self {
        OdeFitConfig {
            free: vec![
                FreeParam {
                    name: "k".into(),
                    init: 20.0,
                    lower: 0.0,
                    upper: 200.0,
                },
                FreeParam {
                    name: "c".into(),
                    init: 0.1,
                    lower: 0.0,
                    upper: 2.0,
                },
            ],
            max_iter: 2000,
            tol: 1e-8,
        }
    }
}

impl OdeFitConfig {
    /// The free parameters split into parallel vectors.
    pub fn split(&self) -> Result<FreeSplit> {
        let mut fields = Vec::with_capacity(self.free.len());
        for p in &self.free {
            fields.push(p.name.parse::<OdeField>()?);
        }
        let init = self.free.iter().map(|p| p.init).collect();
        let bounds = self.free.iter().map(|p| (p.lower, p.upper)).collect();
        Ok((fields, init, bounds))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GevConfig {
    pub min_block_size: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub windows: Vec<FitWindow>,
    /// Starting coefficients; moment estimates from the data when omitted.
    pub init: Option<GevCoefficients>,
}

impl Default for GevConfig {
    fn default() -> Self {
        let window = |label: &str, start: (i32, u32, u32), end: (i32, u32, u32)| FitWindow {
            label: label.into(),
            start: NaiveDate::from_ymd_opt(start.0, start.1, start.2).unwrap(),
            end: NaiveDate::from_ymd_opt(end.0, end.1, end.2).unwrap(),
        };
        GevConfig {
            min_block_size: 10,
            restarts: 10,
            max_iter: 20_000,
            windows: vec![
                window("pre2020", (2014, 1, 1), (2019, 12, 31)),
                window("post2020", (2021, 1, 1), (2025, 12, 31)),
            ],
            init: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Path to a fitted model JSON, or `pre2020` / `post2020` for the
    /// reference coefficient sets.
    pub model: Option<String>,
    pub baseline_rate: Option<f64>,
    pub baseline_cpi: Option<f64>,
    pub d_rate: Option<f64>,
    pub d_cpi: Option<f64>,
    pub offset: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub cut_date: NaiveDate,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dynamics: DynamicsConfig,
    pub logistic: LogisticConfig,
    pub ode_fit: OdeFitConfig,
    pub gev: GevConfig,
    pub scenario: ScenarioConfig,
    /// Directory relative input paths are resolved against. Set to the
    /// config file's directory on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Inputs::default(),
            cut_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            dynamics: DynamicsConfig::default(),
            logistic: LogisticConfig::default(),
            ode_fit: OdeFitConfig::default(),
            gev: GevConfig::default(),
            scenario: ScenarioConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative input paths resolve against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::from_json(&text)?;
        config.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics.params.validate()?;
        if !(self.dynamics.dt > 0.0) {
            return Err(Error::Validation("dynamics.dt must be positive".into()));
        }
        if self.gev.restarts == 0 {
            return Err(Error::Validation("gev.restarts must be at least 1".into()));
        }
        let mut windows: Vec<&FitWindow> = self.gev.windows.iter().collect();
        for w in &windows {
            if w.start > w.end {
                return Err(Error::Validation(format!("window '{}' is empty", w.label)));
            }
        }
        windows.sort_by_key(|w| w.start);
        for pair in windows.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::Validation(format!(
                    "windows '{}' and '{}' overlap",
                    pair[0].label, pair[1].label
                )));
            }
        }
        let mut labels: Vec<&str> = self.gev.windows.iter().map(|w| w.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::Validation("duplicate window labels".into()));
        }
        self.ode_fit.split()?;
        Ok(())
    }

    /// Loads a required input, or fails naming the missing config key.
    pub fn require(&self, input: &Option<SeriesInput>, key: &str) -> Result<TimeSeries> {
        match input {
            Some(spec) => spec.load(&self.base_dir, key),
            None => Err(Error::Validation(format!("missing input 'inputs.{key}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.cut_date.to_string(), "2020-01-01");
        assert_eq!(c.gev.min_block_size, 10);
        assert_eq!(c.gev.windows.len(), 2);
        assert_eq!(c.dynamics.initial.s, 400.0);
        assert_eq!(c.dynamics.params, OdeParams::default());
    }

    #[test]
    fn parameters_use_symbol_names() {
        let c = RunConfig::from_json(
            r#"{"dynamics": {"params": {"k": 25, "C": 0.5, "r": 0.5, "K": 800, "c": 0.2, "a": 1, "b": 0.02}}}"#,
        );
        let c = c.unwrap();
        assert_eq!(c.dynamics.params.k, 25.0);
        assert_eq!(c.dynamics.params.c_s, 0.2);
    }

    #[test]
    fn rejects_unknown_keys_and_overlaps() {
        assert!(RunConfig::from_json(r#"{"cutdate": "2020-01-01"}"#).is_err());
        let overlapping = r#"{"gev": {"windows": [
            {"label": "a", "start": "2014-01-01", "end": "2020-06-30"},
            {"label": "b", "start": "2020-01-01", "end": "2025-12-31"}]}}"#;
        assert!(RunConfig::from_json(overlapping).is_err());
        let empty =
            r#"{"gev": {"windows": [{"label": "a", "start": "2020-01-01", "end": "2019-01-01"}]}}"#;
        assert!(RunConfig::from_json(empty).is_err());
        assert!(RunConfig::from_json(
            r#"{"ode_fit": {"free": [{"name": "zz", "init": 1, "lower": 0, "upper": 2}]}}"#
        )
        .is_err());
    }

    #[test]
    fn roundtrip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }
}
