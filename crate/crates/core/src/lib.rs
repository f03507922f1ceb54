//! House-price dynamics and extreme value analysis.
//!
//! The crate has two halves. [`dynamics`] and [`calibration`] hold a coupled
//! ODE model in which house price responds to the mortgage rate through a
//! generalised logistic curve, with the strength of that response set by a
//! Hill function of the supply/demand ratio. [`evt`] and [`scenario`] fit a
//! nonstationary GEV distribution to monthly price maxima with CPI and
//! log mortgage rate as covariates, then ask how far the location of that
//! distribution moves under a change in either covariate.
//!
//! [`timeseries`] and [`exploratory`] cover data ingestion and the simple
//! correlation/regression screens used to pick drivers.
//!
//! Inner loops that are independent across restarts or scenario grid
//! cells run through [`par::Execution`]. With the default `parallel` feature
//! they use rayon; without it everything runs sequentially. Results are
//! identical either way.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod evt;
pub mod exploratory;
pub mod fixtures;
pub mod optim;
pub mod par;
pub mod scenario;
pub mod stats;
pub mod timeseries;

pub use error::{Error, Result};
