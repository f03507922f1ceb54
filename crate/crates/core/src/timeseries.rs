//! Dated observation series with CSV ingestion and calendar resampling.
//!
//! Monthly and quarterly periods are stamped with their last calendar day.
//! Missing periods are never interpolated; they are simply absent.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Daily,
    Monthly,
    Quarterly,
}

impl Frequency {
    fn rank(self) -> u8 {
        match self {
            Frequency::Daily => 0,
            Frequency::Monthly => 1,
            Frequency::Quarterly => 2,
        }
    }

    /// Key identifying the period a date falls in.
    pub fn period_key(self, date: NaiveDate) -> (i32, u32) {
        match self {
            Frequency::Daily => (date.year(), date.ordinal()),
            Frequency::Monthly => (date.year(), date.month()),
            Frequency::Quarterly => (date.year(), (date.month() - 1) / 3 + 1),
        }
    }

    /// Last calendar day of the period containing `date`.
    pub fn period_end(self, date: NaiveDate) -> NaiveDate {
        match self {
            Frequency::Daily => date,
            Frequency::Monthly => month_end(date.year(), date.month()),
            Frequency::Quarterly => {
                let q = (date.month() - 1) / 3;
                month_end(date.year(), q * 3 + 3)
            }
        }
    }

    /// Guesses the frequency from the median spacing of sorted dates.
    pub fn infer(dates: &[NaiveDate]) -> Option<Frequency> {
        if dates.len() < 2 {
            return None;
        }
        let mut gaps: Vec<i64> = dates
            .windows(2)
            .map(|w| (w[1] - w[0]).num_days().abs())
            .collect();
        gaps.sort_unstable();
        let median = gaps[gaps.len() / 2];
        Some(match median {
            0..=7 => Frequency::Daily,
            8..=45 => Frequency::Monthly,
            _ => Frequency::Quarterly,
        })
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frequency::Daily => "daily",
            Frequency::Monthly => "monthly",
            Frequency::Quarterly => "quarterly",
        })
    }
}

impl FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "daily" | "d" => Ok(Frequency::Daily),
            "monthly" | "m" => Ok(Frequency::Monthly),
            "quarterly" | "q" => Ok(Frequency::Quarterly),
            other => Err(Error::Validation(format!("unknown frequency '{other}'"))),
        }
    }
}

pub fn month_end(year: i32, month: u32) -> NaiveDate {
    let (ny, nm) = if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .and_then(|d| d.pred_opt())
        .expect("valid calendar month")
}

/// Fractional quarters elapsed from `epoch` to `date`, counted in whole
/// months (so period-end stamps of consecutive quarters differ by exactly 1).
pub fn quarters_between(epoch: NaiveDate, date: NaiveDate) -> f64 {
    let months = (date.year() - epoch.year()) * 12 + date.month() as i32 - epoch.month() as i32;
    months as f64 / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMethod {
    Mean,
    Last,
}

impl FromStr for ResampleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(ResampleMethod::Mean),
            "last" => Ok(ResampleMethod::Last),
            other => Err(Error::Validation(format!(
                "unknown resample method '{other}'"
            ))),
        }
    }
}

/// A named, strictly increasing sequence of dated finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    frequency: Frequency,
    points: Vec<(NaiveDate, f64)>,
}

impl TimeSeries {
    /// Builds a series, sorting the points by date and validating them.
    pub fn new(
        name: impl Into<String>,
        frequency: Frequency,
        mut points: Vec<(NaiveDate, f64)>,
    ) -> Result<Self> {
        let name = name.into();
        if points.is_empty() {
            return Err(Error::NoObservations);
        }
        if let Some((d, v)) = points.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "{name}: non-finite value {v} at {d}"
            )));
        }
        points.sort_by_key(|(d, _)| *d);
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Validation(format!(
                    "{name}: duplicate date {}",
                    w[0].0
                )));
            }
            if frequency.period_key(w[0].0) == frequency.period_key(w[1].0) {
                return Err(Error::Validation(format!(
                    "{name}: dates {} and {} fall in the same {frequency} period",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(TimeSeries {
            name,
            frequency,
            points,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.points.iter().map(|(d, _)| *d)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|(_, v)| *v)
    }

    pub fn first_date(&self) -> NaiveDate {
        self.points[0].0
    }

    pub fn last_date(&self) -> NaiveDate {
        self.points[self.points.len() - 1].0
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Points with `start <= date <= end`.
    pub fn window(&self, start: NaiveDate, end: NaiveDate) -> Result<TimeSeries> {
        let points: Vec<_> = self
            .points
            .iter()
            .copied()
            .filter(|(d, _)| *d >= start && *d <= end)
            .collect();
        TimeSeries::new(self.name.clone(), self.frequency, points)
    }

    /// Writes the series as a `date,value` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "value"])?;
        for (d, v) in &self.points {
            w.write_record([d.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Reads a `date,value` CSV.
pub fn load_csv(path: impl AsRef<Path>, frequency: Frequency) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, name, Some(frequency))
}

/// Reads a `date,value` CSV, inferring the frequency from date spacing.
pub fn load_csv_infer(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, name, None)
}

/// Parses CSV content. Row numbers in errors are file line numbers, with the
/// header on line 1.
pub fn read_csv<R: Read>(
    reader: R,
    name: impl Into<String>,
    frequency: Option<Frequency>,
) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if cols != ["date", "value"] {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected header 'date,value', found '{}'", cols.join(",")),
        });
    }
    let mut points = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Parse {
                row,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            row,
            message: format!("bad date '{}': {e}", &record[0]),
        })?;
        let value: f64 = record[1].parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad value '{}'", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                row,
                message: format!("non-finite value '{}'", &record[1]),
            });
        }
        points.push((date, value));
    }
    if points.is_empty() {
        return Err(Error::NoObservations);
    }
    let frequency = match frequency {
        Some(f) => f,
        None => {
            let mut dates: Vec<_> = points.iter().map(|(d, _)| *d).collect();
            dates.sort_unstable();
            Frequency::infer(&dates).ok_or_else(|| {
                Error::Validation("cannot infer frequency from a single observation".into())
            })?
        }
    };
    TimeSeries::new(name, frequency, points)
}

/// Aggregates to a coarser frequency, one point per non-empty target period,
/// stamped at the period end. Resampling to the series' own (non-daily)
/// frequency just moves the stamps to period ends.
pub fn resample(
    series: &TimeSeries,
    target: Frequency,
    method: ResampleMethod,
) -> Result<TimeSeries> {
    if target == Frequency::Daily || target.rank() < series.frequency.rank() {
        return Err(Error::Validation(format!(
            "cannot resample {} series to finer frequency {target}",
            series.frequency
        )));
    }
    let mut groups: BTreeMap<(i32, u32), (NaiveDate, f64, usize, f64)> = BTreeMap::new();
    for &(d, v) in &series.points {
        let entry = groups
            .entry(target.period_key(d))
            .or_insert((target.period_end(d), 0.0, 0, v));
        entry.1 += v;
        entry.2 += 1;
        entry.3 = v;
    }
    let points = groups
        .into_values()
        .map(|(end, sum, n, last)| {
            let value = match method {
                ResampleMethod::Mean => sum / n as f64,
                ResampleMethod::Last => last,
            };
            (end, value)
        })
        .collect();
    TimeSeries::new(series.name.clone(), target, points)
}

/// Several series restricted to their common dates.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFrame {
    frequency: Frequency,
    dates: Vec<NaiveDate>,
    columns: Vec<(String, Vec<f64>)>,
}

/// Restricts all series to the dates present in every one of them.
pub fn align(series_list: &[TimeSeries]) -> Result<AlignedFrame> {
    let first = series_list
        .first()
        .ok_or_else(|| Error::Validation("align needs at least one series".into()))?;
    let frequency = first.frequency;
    for s in series_list {
        if s.frequency != frequency {
            return Err(Error::Validation(format!(
                "cannot align {} series '{}' with {frequency} series '{}'",
                s.frequency, s.name, first.name
            )));
        }
        if series_list.iter().filter(|o| o.name == s.name).count() > 1 {
            return Err(Error::Validation(format!(
                "duplicate series label '{}'",
                s.name
            )));
        }
    }
    let mut dates: Vec<NaiveDate> = first.dates().collect();
    for s in &series_list[1..] {
        let other: std::collections::HashSet<NaiveDate> = s.dates().collect();
        dates.retain(|d| other.contains(d));
    }
    if dates.is_empty() {
        return Err(Error::NoOverlap);
    }
    let columns = series_list
        .iter()
        .map(|s| {
            let lookup: BTreeMap<NaiveDate, f64> = s.points.iter().copied().collect();
            let values = dates.iter().map(|d| lookup[d]).collect();
            (s.name.clone(), values)
        })
        .collect();
    Ok(AlignedFrame {
        frequency,
        dates,
        columns,
    })
}

impl AlignedFrame {
    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Splits the columns back into individual series.
    pub fn to_series(&self) -> Vec<TimeSeries> {
        self.columns
            .iter()
            .map(|(name, values)| TimeSeries {
                name: name.clone(),
                frequency: self.frequency,
                points: self
                    .dates
                    .iter()
                    .copied()
                    .zip(values.iter().copied())
                    .collect(),
            })
            .collect()
    }

    /// Rows with `date < cut` and rows with `date >= cut`. Either side may be
    /// empty.
    pub fn split_at(&self, cut: NaiveDate) -> (AlignedFrame, AlignedFrame) {
        let k = self.dates.partition_point(|d| *d < cut);
        let part = |range: std::ops::Range<usize>| AlignedFrame {
            frequency: self.frequency,
            dates: self.dates[range.clone()].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|(n, v)| (n.clone(), v[range.clone()].to_vec()))
                .collect(),
        };
        (part(0..k), part(k..self.dates.len()))
    }

    /// Writes `date,col1,col2,...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut row = vec![d.to_string()];
            row.extend(self.columns.iter().map(|(_, v)| v[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
