//! Block maxima and nonstationary GEV modelling.
//!
//! Location and scale vary by block with the covariates:
//!
//! ```text
//! mu_t    = mu0 + mu1 * ln(rate_t) + mu2 * cpi_t
//! sigma_t = sigma0 + sigma1 * cpi_t
//! xi      constant
//! ```
//!
//! `rate` is the mortgage rate in percent and `cpi` the index level.

mod blocks;
mod fit;
mod gev;
mod gof;
mod synth;

pub use blocks::{block_maxima, Block, BlockMaxima, DroppedMonth};
pub use fit::{fit_gev, nll, FitWindow, GevCoefficients, GevFitOptions, GevModel, MIN_BLOCKS};
pub use gev::{gev_cdf, gev_log_pdf, gev_pdf, gev_quantile, XI_EPS};
pub use gof::{ad_test, gof, ks_test, lr_test, pit, GofResult};
pub use synth::{recovery_study, simulate_blocks, CovariateRow, RecoveryRun};
