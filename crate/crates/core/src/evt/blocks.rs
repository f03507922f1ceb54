use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{month_end, AlignedFrame, Frequency, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Last day of the month.
    pub period: NaiveDate,
    pub max_value: f64,
    pub cpi: f64,
    /// Mortgage rate in percent.
    pub rate: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroppedMonth {
    pub period: NaiveDate,
    pub n_obs: usize,
}

/// Monthly maxima joined with that month's covariates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockMaxima {
    pub blocks: Vec<Block>,
    /// Months excluded for having fewer than the minimum number of
    /// observations.
    pub dropped: Vec<DroppedMonth>,
}

impl BlockMaxima {
    /// Builds from ready-made blocks, checking ordering and covariate
    /// validity.
    pub fn from_blocks(mut blocks: Vec<Block>) -> Result<Self> {
        blocks.sort_by_key(|b| b.period);
        if blocks.windows(2).any(|w| w[0].period == w[1].period) {
            return Err(Error::Validation("duplicate block period".into()));
        }
        for b in &blocks {
            if !(b.rate > 0.0) || !b.cpi.is_finite() || !b.max_value.is_finite() {
                return Err(Error::Validation(format!(
                    "invalid block {}: rate must be positive and values finite",
                    b.period
                )));
            }
        }
        Ok(BlockMaxima {
            blocks,
            dropped: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn maxima(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.max_value).collect()
    }

    /// Blocks whose period lies in `[start, end]`.
    pub fn window(&self, start: NaiveDate, end: NaiveDate) -> BlockMaxima {
        let within = |d: NaiveDate| {
            let d = month_end(d.year(), d.month());
            d >= month_end(start.year(), start.month()) && d <= end
        };
        BlockMaxima {
            blocks: self
                .blocks
                .iter()
                .copied()
                .filter(|b| within(b.period))
                .collect(),
            dropped: self
                .dropped
                .iter()
                .copied()
                .filter(|b| within(b.period))
                .collect(),
        }
    }

    /// Writes `month,max_value,cpi,rate,n_obs`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["month", "max_value", "cpi", "rate", "n_obs"])?;
        for b in &self.blocks {
            w.write_record([
                b.period.format("%Y-%m").to_string(),
                b.max_value.to_string(),
                b.cpi.to_string(),
                b.rate.to_string(),
                b.n_obs.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Extracts monthly maxima of a daily series and attaches the `cpi` and
/// `rate` columns of a monthly covariate frame. Months with fewer than
/// `min_block_size` observations are dropped and listed in `dropped`.
pub fn block_maxima(
    series: &TimeSeries,
    covariates: &AlignedFrame,
    min_block_size: usize,
) -> Result<BlockMaxima> {
    if series.frequency() != Frequency::Daily {
        return Err(Error::Validation(format!(
            "block maxima need a daily series, got {}",
            series.frequency()
        )));
    }
    if covariates.frequency() != Frequency::Monthly {
        return Err(Error::Validation(format!(
            "covariates must be monthly, got {}",
            covariates.frequency()
        )));
    }
    let (cpi, rate) = match (covariates.column("cpi"), covariates.column("rate")) {
        (Some(c), Some(r)) => (c, r),
        _ => {
            return Err(Error::Validation(
                "covariate frame needs 'cpi' and 'rate' columns".into(),
            ))
        }
    };
    let covariate_at: BTreeMap<NaiveDate, (f64, f64)> = covariates
        .dates()
        .iter()
        .enumerate()
        .map(|(i, d)| (month_end(d.year(), d.month()), (cpi[i], rate[i])))
        .collect();

    let mut months: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for &(d, v) in series.points() {
        let e = months
            .entry(month_end(d.year(), d.month()))
            .or_insert((f64::NEG_INFINITY, 0));
        e.0 = e.0.max(v);
        e.1 += 1;
    }

    let mut blocks = Vec::new();
    let mut dropped = Vec::new();
    let mut missing = Vec::new();
    for (period, (max_value, n_obs)) in months {
        if n_obs < min_block_size {
            dropped.push(DroppedMonth { period, n_obs });
            continue;
        }
        match covariate_at.get(&period) {
            Some(&(cpi, rate)) => blocks.push(Block {
                period,
                max_value,
                cpi,
                rate,
                n_obs,
            }),
            None => missing.push(period),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingCovariates(missing));
    }
    let mut out = BlockMaxima::from_blocks(blocks)?;
    out.dropped = dropped;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::align;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn covariates(months: &[(i32, u32)]) -> AlignedFrame {
        let pts = |v: f64| months.iter().map(|&(y, m)| (month_end(y, m), v)).collect();
        let cpi = TimeSeries::new("cpi", Frequency::Monthly, pts(120.0)).unwrap();
        let rate = TimeSeries::new("rate", Frequency::Monthly, pts(5.0)).unwrap();
        align(&[cpi, rate]).unwrap()
    }

    #[test]
    fn monthly_maxima() {
        let s = TimeSeries::new(
            "p",
            Frequency::Daily,
            vec![
                (d(2021, 1, 4), 1.0),
                (d(2021, 1, 5), 3.0),
                (d(2021, 1, 6), 2.0),
                (d(2021, 2, 1), 5.0),
                (d(2021, 2, 2), 4.0),
            ],
        )
        .unwrap();
        let bm = block_maxima(&s, &covariates(&[(2021, 1), (2021, 2)]), 1).unwrap();
        assert_eq!(bm.maxima(), vec![3.0, 5.0]);
        assert_eq!(bm.blocks[0].n_obs, 3);
        assert_eq!(bm.blocks[1].period, d(2021, 2, 28));
        assert_eq!(bm.blocks[0].cpi, 120.0);
    }

    #[test]
    fn sparse_month_is_dropped() {
        let pts = (1..=9).map(|i| (d(2021, 1, i), i as f64)).collect();
        let s = TimeSeries::new("p", Frequency::Daily, pts).unwrap();
        let bm = block_maxima(&s, &covariates(&[(2021, 1)]), 10).unwrap();
        assert!(bm.is_empty());
        assert_eq!(
            bm.dropped,
            vec![DroppedMonth {
                period: d(2021, 1, 31),
                n_obs: 9
            }]
        );
    }

    #[test]
    fn two_years_give_24_blocks() {
        let mut pts = Vec::new();
        let mut day = d(2021, 1, 1);
        while day <= d(2022, 12, 31) {
            pts.push((day, day.ordinal() as f64));
            day = day.succ_opt().unwrap();
        }
        let s = TimeSeries::new("p", Frequency::Daily, pts).unwrap();
        let months: Vec<_> = (2021..=2022)
            .flat_map(|y| (1..=12).map(move |m| (y, m)))
            .collect();
        let bm = block_maxima(&s, &covariates(&months), 10).unwrap();
        assert_eq!(bm.len(), 24);
    }

    #[test]
    fn missing_covariates_listed() {
        let pts = vec![(d(2021, 1, 4), 1.0), (d(2021, 3, 4), 1.0)];
        let s = TimeSeries::new("p", Frequency::Daily, pts).unwrap();
        match block_maxima(&s, &covariates(&[(2021, 1)]), 1) {
            Err(Error::MissingCovariates(m)) => assert_eq!(m, vec![d(2021, 3, 31)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_layout() {
        let bm = BlockMaxima::from_blocks(vec![Block {
            period: d(2021, 1, 31),
            max_value: 2.5,
            cpi: 117.2,
            rate: 4.5,
            n_obs: 20,
        }])
        .unwrap();
        let mut buf = Vec::new();
        bm.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "month,max_value,cpi,rate,n_obs\n2021-01,2.5,117.2,4.5,20\n"
        );
    }
}
