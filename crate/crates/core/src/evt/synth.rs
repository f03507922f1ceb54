use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blocks::{Block, BlockMaxima};
use super::fit::{fit_gev, GevCoefficients, GevFitOptions, GevModel};
use super::gev::gev_quantile;
use crate::error::{Error, Result};
use crate::par::Execution;

/// Covariate values for one monthly block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateRow {
    pub period: NaiveDate,
    pub cpi: f64,
    pub rate: f64,
}

/// Draws one maximum per covariate row from the nonstationary GEV.
pub fn simulate_blocks<R: Rng>(
    truth: &GevCoefficients,
    rows: &[CovariateRow],
    rng: &mut R,
) -> Result<BlockMaxima> {
    let blocks = rows
        .iter()
        .map(|row| {
            let sigma = truth.scale(row.cpi);
            if !(sigma > 0.0) {
                return Err(Error::Domain(format!(
                    "scale {sigma} is not positive for {}",
                    row.period
                )));
            }
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            let x = gev_quantile(u, truth.location(row.rate, row.cpi), sigma, truth.xi)?;
            Ok(Block {
                period: row.period,
                max_value: x,
                cpi: row.cpi,
                rate: row.rate,
                n_obs: 21,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BlockMaxima::from_blocks(blocks)
}

#[derive(Debug, Clone)]
pub struct RecoveryRun {
    pub seed: u64,
    pub data: BlockMaxima,
    pub model: std::result::Result<GevModel, String>,
}

impl RecoveryRun {
    /// Per coefficient, whether the truth lies within `k` reported standard
    /// errors of the estimate. All false if the fit failed or has no
    /// standard errors.
    pub fn covered(&self, truth: &GevCoefficients, k: f64) -> [bool; 6] {
        let Ok(model) = &self.model else {
            return [false; 6];
        };
        let Some(se) = &model.stderrs else {
            return [false; 6];
        };
        let est = model.coefficients.to_array();
        let se = se.to_array();
        let t = truth.to_array();
        std::array::from_fn(|i| (est[i] - t[i]).abs() <= k * se[i])
    }
}

/// Simulate-then-refit over many seeds. Each replicate draws fresh block
/// maxima with `ChaCha8Rng::seed_from_u64(seed)` and fits from `init`
/// (moment estimates when `None`). Replicates run through `execution`;
/// restarts inside each fit use `options.execution`.
pub fn recovery_study(
    truth: &GevCoefficients,
    rows: &[CovariateRow],
    seeds: &[u64],
    init: Option<GevCoefficients>,
    options: &GevFitOptions,
    execution: Execution,
) -> Result<Vec<RecoveryRun>> {
    let runs = execution.map_slice(seeds, |&seed| -> Result<RecoveryRun> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = simulate_blocks(truth, rows, &mut rng)?;
        let start = init.unwrap_or_else(|| GevCoefficients::moment_init(&data));
        let opts = GevFitOptions {
            seed,
            ..options.clone()
        };
        let model = fit_gev(&data, &start, &opts).map_err(|e| e.to_string());
        Ok(RecoveryRun { seed, data, model })
    });
    runs.into_iter().collect()
}
