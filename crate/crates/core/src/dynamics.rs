//! Coupled house-price / supply / demand ODE.
//!
//! Price `Y` follows the mortgage-rate curve `G(X)` with weight `alpha` and a
//! constant growth `k` with weight `1 - alpha`:
//!
//! ```text
//! dY/dt = alpha(S, D) * G'(X) * dX/dt + (1 - alpha(S, D)) * k
//! dS/dt = r * S * (1 - S / K) - c_s * Y
//! dD/dt = a * X + b * D
//! alpha(S, D) = (S/D)^2 / ((S/D)^2 + C^2)
//! ```
//!
//! Time is measured in quarters. The mortgage rate `X(t)` is exogenous and
//! piecewise linear between quarterly knots.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{quarters_between, TimeSeries};

/// Generalised logistic (Richards) curve
/// `G(X) = A - B / (1 + Q exp(-g (X - M)))^nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticCurve {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub g: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub nu: f64,
}

impl Default for LogisticCurve {
    /// Rate-to-price curve fitted on 2011–2019 data ($'000 against percent).
    fn default() -> Self {
        LogisticCurve {
            a: 683.8,
            b: 197.7,
            q: 0.5,
            g: 5.0,
            m: 5.1,
            nu: 10.0,
        }
    }
}

impl LogisticCurve {
    pub const FIELDS: [&'static str; 6] = ["A", "B", "Q", "g", "M", "nu"];

    pub fn to_array(&self) -> [f64; 6] {
        [self.a, self.b, self.q, self.g, self.m, self.nu]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        LogisticCurve {
            a: v[0],
            b: v[1],
            q: v[2],
            g: v[3],
            m: v[4],
            nu: v[5],
        }
    }

    /// Returns `(w, ln(1 + Q e^w))` with `w = -g (X - M)`, stable for large
    /// `|w|`.
    fn log_base(&self, x: f64) -> (f64, f64) {
        let w = -self.g * (x - self.m);
        let l = if w > 30.0 {
            self.q.ln() + w + ((-w).exp() / self.q).ln_1p()
        } else {
            (self.q * w.exp()).ln_1p()
        };
        (w, l)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if -self.g * (x - self.m) >= 700.0 {
            return self.a;
        }
        let (_, l) = self.log_base(x);
        self.a - self.b * (-self.nu * l).exp()
    }

    /// Analytic `dG/dX = -B nu Q g e^w (1 + Q e^w)^(-nu-1)`.
    pub fn derivative(&self, x: f64) -> f64 {
        let (w, l) = self.log_base(x);
        let log_mag = w - (self.nu + 1.0) * l;
        -self.b * self.nu * self.q * self.g * log_mag.exp()
    }

    /// `G(-inf)`.
    pub fn upper_asymptote(&self) -> f64 {
        self.a
    }

    /// `G(+inf)`.
    pub fn lower_asymptote(&self) -> f64 {
        self.a - self.b
    }
}

pub fn eval_g(curve: &LogisticCurve, x: f64) -> f64 {
    curve.eval(x)
}

pub fn eval_dg_dx(curve: &LogisticCurve, x: f64) -> f64 {
    curve.derivative(x)
}

/// Hill-type coupling `(S/D)^2 / ((S/D)^2 + C^2)`.
pub fn alpha(supply: f64, demand: f64, c: f64) -> Result<f64> {
    if !(demand > 0.0) {
        return Err(Error::Domain(format!(
            "demand must be positive, got {demand}"
        )));
    }
    if !(supply >= 0.0) {
        return Err(Error::Domain(format!(
            "supply must be non-negative, got {supply}"
        )));
    }
    let ratio = supply / demand;
    let r2 = ratio * ratio;
    if r2.is_infinite() {
        return Ok(1.0);
    }
    Ok(r2 / (r2 + c * c))
}

/// Model parameters. JSON keys follow the usual symbol names
/// (`k, C, r, K, c, a, b, G`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeParams {
    /// Linear price growth, $'000 per quarter.
    pub k: f64,
    /// Hill switching ratio: `alpha = 0.5` when `S = C D`.
    #[serde(rename = "C")]
    pub hill_c: f64,
    /// Supply logistic growth rate.
    pub r: f64,
    /// Supply carrying capacity.
    #[serde(rename = "K")]
    pub capacity: f64,
    /// Supply consumed per unit of price.
    #[serde(rename = "c")]
    pub c_s: f64,
    /// Demand response to the mortgage rate.
    pub a: f64,
    /// Demand self-growth rate.
    pub b: f64,
    #[serde(rename = "G", default)]
    pub curve: LogisticCurve,
}

impl Default for OdeParams {
    /// Parameters approximated on pre-2020 data.
    fn default() -> Self {
        OdeParams {
            k: 20.0,
            hill_c: 0.4f64.sqrt(),
            r: 0.5,
            capacity: 800.0,
            c_s: 0.1,
            a: 1.0,
            b: 0.02,
            curve: LogisticCurve::default(),
        }
    }
}

impl OdeParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k,
            self.hill_c,
            self.r,
            self.capacity,
            self.c_s,
            self.a,
            self.b,
        ]
        .into_iter()
        .chain(self.curve.to_array());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("parameters must be finite".into()));
        }
        if !(self.capacity > 0.0) {
            return Err(Error::Validation("K must be positive".into()));
        }
        if !(self.hill_c > 0.0) {
            return Err(Error::Validation("C must be positive".into()));
        }
        Ok(())
    }

    pub fn get(&self, field: OdeField) -> f64 {
        match field {
            OdeField::K => self.k,
            OdeField::HillC => self.hill_c,
            OdeField::R => self.r,
            OdeField::Capacity => self.capacity,
            OdeField::Cs => self.c_s,
            OdeField::A => self.a,
            OdeField::B => self.b,
        }
    }

    pub fn set(&mut self, field: OdeField, value: f64) {
        match field {
            OdeField::K => self.k = value,
            OdeField::HillC => self.hill_c = value,
            OdeField::R => self.r = value,
            OdeField::Capacity => self.capacity = value,
            OdeField::Cs => self.c_s = value,
            OdeField::A => self.a = value,
            OdeField::B => self.b = value,
        }
    }
}

/// Scalar fields of [`OdeParams`] that calibration may free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OdeField {
    #[serde(rename = "k")]
    K,
    #[serde(rename = "C")]
    HillC,
    #[serde(rename = "r")]
    R,
    #[serde(rename = "K")]
    Capacity,
    #[serde(rename = "c")]
    Cs,
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
}

impl OdeField {
    pub const ALL: [OdeField; 7] = [
        OdeField::K,
        OdeField::HillC,
        OdeField::R,
        OdeField::Capacity,
        OdeField::Cs,
        OdeField::A,
        OdeField::B,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OdeField::K => "k",
            OdeField::HillC => "C",
            OdeField::R => "r",
            OdeField::Capacity => "K",
            OdeField::Cs => "c",
            OdeField::A => "a",
            OdeField::B => "b",
        }
    }
}

impl std::str::FromStr for OdeField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        OdeField::ALL
            .into_iter()
            .find(|f| f.name() == s || (s == "c_s" && *f == OdeField::Cs))
            .ok_or_else(|| Error::Validation(format!("unknown ODE parameter '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

/// Piecewise-linear mortgage rate path over quarters.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePath {
    knots: Vec<(f64, f64)>,
    epoch: Option<NaiveDate>,
}

const COVERAGE_TOL: f64 = 1e-9;

impl RatePath {
    pub fn from_knots(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::NoObservations);
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation("duplicate rate knot times".into()));
        }
        if knots.iter().any(|(t, x)| !t.is_finite() || !x.is_finite()) {
            return Err(Error::Validation("non-finite rate knot".into()));
        }
        Ok(RatePath { knots, epoch: None })
    }

    /// Knots at quarters elapsed since `epoch` (see [`quarters_between`]).
    pub fn from_series(series: &TimeSeries, epoch: NaiveDate) -> Result<Self> {
        let knots = series
            .points()
            .iter()
            .map(|&(d, v)| (quarters_between(epoch, d), v))
            .collect();
        let mut path = RatePath::from_knots(knots)?;
        path.epoch = Some(epoch);
        Ok(path)
    }

    /// Constant rate over `[t0, t1]`.
    pub fn constant(rate: f64, t0: f64, t1: f64) -> Result<Self> {
        if t1 > t0 {
            RatePath::from_knots(vec![(t0, rate), (t1, rate)])
        } else {
            RatePath::from_knots(vec![(t0, rate)])
        }
    }

    pub fn epoch(&self) -> Option<NaiveDate> {
        self.epoch
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn start(&self) -> f64 {
        self.knots[0].0
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        t0 >= self.start() - COVERAGE_TOL && t1 <= self.end() + COVERAGE_TOL
    }

    /// `(X(t), dX/dt)`. The slope is right-continuous at knots; at the last
    /// knot it is the slope of the final segment.
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        if !self.covers(t, t) {
            return Err(Error::Coverage { t });
        }
        let k = &self.knots;
        if k.len() == 1 {
            return Ok((k[0].1, 0.0));
        }
        let i = k
            .partition_point(|(tk, _)| *tk <= t)
            .saturating_sub(1)
            .min(k.len() - 2);
        let (t0, x0) = k[i];
        let (t1, x1) = k[i + 1];
        let slope = (x1 - x0) / (t1 - t0);
        Ok((x0 + slope * (t - t0), slope))
    }
}

/// Time derivatives `(dY, dS, dD)`. Negative supply inside a Runge–Kutta
/// stage is treated as zero.
pub fn rhs(state: &SystemState, x: f64, dxdt: f64, params: &OdeParams) -> Result<[f64; 3]> {
    let s = state.s.max(0.0);
    let coupling = alpha(s, state.d, params.hill_c)?;
    let dy = coupling * params.curve.derivative(x) * dxdt + (1.0 - coupling) * params.k;
    let ds = params.r * s * (1.0 - s / params.capacity) - params.c_s * state.y;
    let dd = params.a * x + params.b * state.d;
    Ok([dy, ds, dd])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub alpha: f64,
}

impl TrajectoryPoint {
    pub fn state(&self) -> SystemState {
        SystemState {
            t: self.t,
            y: self.y,
            s: self.s,
            d: self.d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Times at which supply was clamped back to zero.
    pub clamp_events: Vec<f64>,
}

/// Shape of `alpha(t)` along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub peak_t: f64,
    pub peak_alpha: f64,
    pub peak_index: usize,
    /// Non-decreasing up to the peak.
    pub rises_to_peak: bool,
    /// Non-increasing after the peak.
    pub declines_after_peak: bool,
    /// The maximum is attained at a single step and the path is unimodal.
    pub unique_peak: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub n_points: usize,
    pub final_t: f64,
    pub final_y: f64,
    pub final_s: f64,
    pub final_d: f64,
    pub alpha: AlphaProfile,
    pub clamp_events: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory is never empty")
    }

    /// Value of `Y` at time `t`, interpolating linearly between steps.
    pub fn y_at(&self, t: f64) -> Option<f64> {
        let p = &self.points;
        let i = p.partition_point(|q| q.t < t);
        if i < p.len() && (p[i].t - t).abs() <= 1e-9 {
            return Some(p[i].y);
        }
        if i == 0 || i == p.len() {
            return None;
        }
        let (a, b) = (&p[i - 1], &p[i]);
        let w = (t - a.t) / (b.t - a.t);
        Some(a.y + w * (b.y - a.y))
    }

    pub fn alpha_profile(&self) -> AlphaProfile {
        let alphas: Vec<f64> = self.points.iter().map(|p| p.alpha).collect();
        let (peak_index, peak_alpha) =
            alphas
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, a)| {
                    if a > best.1 {
                        (i, a)
                    } else {
                        best
                    }
                });
        const EPS: f64 = 1e-12;
        let rises_to_peak = alphas[..=peak_index].windows(2).all(|w| w[1] >= w[0] - EPS);
        let declines_after_peak = alphas[peak_index..].windows(2).all(|w| w[1] <= w[0] + EPS);
        let ties = alphas.iter().filter(|&&a| a == peak_alpha).count();
        AlphaProfile {
            peak_t: self.points[peak_index].t,
            peak_alpha,
            peak_index,
            rises_to_peak,
            declines_after_peak,
            unique_peak: ties == 1 && rises_to_peak && declines_after_peak,
        }
    }

    pub fn summary(&self) -> TrajectorySummary {
        let last = self.last();
        TrajectorySummary {
            n_points: self.points.len(),
            final_t: last.t,
            final_y: last.y,
            final_s: last.s,
            final_d: last.d,
            alpha: self.alpha_profile(),
            clamp_events: self.clamp_events.clone(),
        }
    }

    /// Writes `t,Y,S,D,alpha`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "Y", "S", "D", "alpha"])?;
        for p in &self.points {
            w.write_record([p.t, p.y, p.s, p.d, p.alpha].map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn advance(s: &SystemState, k: &[f64; 3], h: f64) -> SystemState {
    SystemState {
        t: s.t + h,
        y: s.y + h * k[0],
        s: s.s + h * k[1],
        d: s.d + h * k[2],
    }
}

/// Classical fixed-step RK4 from `initial.t` to `t_end`. The last step is
/// shortened to land exactly on `t_end`. Supply is clamped at zero after
/// each step.
pub fn simulate(
    initial: &SystemState,
    rates: &RatePath,
    params: &OdeParams,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(t_end >= initial.t) {
        return Err(Error::Domain(format!(
            "end time {t_end} precedes start time {}",
            initial.t
        )));
    }
    if initial.s < 0.0 {
        return Err(Error::Domain("initial supply must be non-negative".into()));
    }
    if !rates.covers(initial.t, t_end) {
        let t = if initial.t < rates.start() {
            initial.t
        } else {
            t_end
        };
        return Err(Error::Coverage { t });
    }

    let t0 = initial.t;
    let n_steps = (((t_end - t0) / dt) - 1e-9).ceil().max(0.0) as usize;
    let time = |i: usize| {
        if i >= n_steps {
            t_end
        } else {
            t0 + i as f64 * dt
        }
    };

    let eval = |s: &SystemState| -> Result<[f64; 3]> {
        let (x, dxdt) = rates.at(s.t)?;
        rhs(s, x, dxdt, params)
    };

    let point = |s: &SystemState| -> Result<TrajectoryPoint> {
        Ok(TrajectoryPoint {
            t: s.t,
            y: s.y,
            s: s.s,
            d: s.d,
            alpha: alpha(s.s, s.d, params.hill_c)?,
        })
    };

    let mut state = *initial;
    let mut points = Vec::with_capacity(n_steps + 1);
    points.push(point(&state)?);
    let mut clamp_events = Vec::new();

    for i in 0..n_steps {
        let t_next = time(i + 1);
        let h = t_next - state.t;
        let k1 = eval(&state)?;
        let k2 = eval(&advance(&state, &k1, h / 2.0))?;
        let k3 = eval(&advance(&state, &k2, h / 2.0))?;
        let k4 = eval(&advance(&state, &k3, h))?;
        let incr: [f64; 3] =
            std::array::from_fn(|j| (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0);
        state = advance(&state, &incr, h);
        state.t = t_next;
        if ![state.y, state.s, state.d].iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { t: t_next });
        }
        if state.s < 0.0 {
            state.s = 0.0;
            clamp_events.push(t_next);
        }
        points.push(point(&state).map_err(|_| Error::BlowUp { t: t_next })?);
    }

    Ok(Trajectory {
        points,
        clamp_events,
    })
}
