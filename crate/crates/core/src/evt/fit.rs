use chrono::NaiveDate;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::blocks::BlockMaxima;
use super::gev::XI_EPS;
use super::gof::{gof, GofResult};
use crate::error::{Error, Result};
use crate::optim::{MultiStart, NelderMead};
use crate::par::Execution;

/// Fewest blocks accepted by [`fit_gev`].
pub const MIN_BLOCKS: usize = 30;

/// The shape is kept inside `(-XI_BOUND, XI_BOUND)` while fitting.
const XI_BOUND: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevCoefficients {
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub xi: f64,
}

impl GevCoefficients {
    pub const NAMES: [&'static str; 6] = ["mu0", "mu1", "mu2", "sigma0", "sigma1", "xi"];

    /// Monthly maxima fit over 2014–2019.
    pub const PRE_2020: GevCoefficients = GevCoefficients {
        mu0: 17.76,
        mu1: -0.54,
        mu2: -0.13,
        sigma0: 1.21,
        sigma1: -0.01,
        xi: 0.18,
    };

    /// Monthly maxima fit over 2021–2025.
    pub const POST_2020: GevCoefficients = GevCoefficients {
        mu0: -17.92,
        mu1: -2.75,
        mu2: 0.20,
        sigma0: 0.46,
        sigma1: 0.0,
        xi: 0.0,
    };

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.mu0,
            self.mu1,
            self.mu2,
            self.sigma0,
            self.sigma1,
            self.xi,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        GevCoefficients {
            mu0: v[0],
            mu1: v[1],
            mu2: v[2],
            sigma0: v[3],
            sigma1: v[4],
            xi: v[5],
        }
    }

    pub fn location(&self, rate: f64, cpi: f64) -> f64 {
        self.mu0 + self.mu1 * rate.ln() + self.mu2 * cpi
    }

    pub fn scale(&self, cpi: f64) -> f64 {
        self.sigma0 + self.sigma1 * cpi
    }

    /// Stationary Gumbel moment estimates with zero covariate effects and a
    /// small positive shape.
    pub fn moment_init(data: &BlockMaxima) -> Self {
        let x = data.maxima();
        let n = x.len().max(1) as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let sigma = (var.sqrt() * 6f64.sqrt() / std::f64::consts::PI).max(1e-6);
        GevCoefficients {
            mu0: mean - 0.577_215_664_901_532_9 * sigma,
            mu1: 0.0,
            mu2: 0.0,
            sigma0: sigma,
            sigma1: 0.0,
            xi: 0.1,
        }
    }
}

/// Negative log-likelihood of the block maxima. Returns `+inf` when any
/// block has non-positive scale or lies outside the support.
pub fn nll(coefficients: &GevCoefficients, data: &BlockMaxima) -> f64 {
    let xi = coefficients.xi;
    let mut total = 0.0;
    for b in &data.blocks {
        let mu = coefficients.location(b.rate, b.cpi);
        let sigma = coefficients.scale(b.cpi);
        if !(sigma > 0.0) {
            return f64::INFINITY;
        }
        let z = (b.max_value - mu) / sigma;
        let term = if xi.abs() < XI_EPS {
            sigma.ln() + z + (-z).exp()
        } else {
            let t = xi * z;
            if t <= -1.0 {
                return f64::INFINITY;
            }
            let l = t.ln_1p();
            sigma.ln() + (1.0 + 1.0 / xi) * l + (-l / xi).exp()
        };
        total += term;
    }
    if total.is_nan() {
        f64::INFINITY
    } else {
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone)]
pub struct GevFitOptions {
    /// Total Nelder–Mead starts, the first from the given initial values.
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub execution: Execution,
    pub window: Option<FitWindow>,
}

impl Default for GevFitOptions {
    fn default() -> Self {
        GevFitOptions {
            restarts: 10,
            seed: 0,
            max_iter: 20_000,
            execution: Execution::default(),
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevModel {
    pub coefficients: GevCoefficients,
    /// Absent when the Hessian is not positive definite or the covariates
    /// are collinear.
    #[serde(default)]
    pub stderrs: Option<GevCoefficients>,
    #[serde(default)]
    pub nll: Option<f64>,
    #[serde(default)]
    pub n_blocks: usize,
    #[serde(default)]
    pub diagnostics: Option<GofResult>,
    #[serde(default)]
    pub converged: bool,
    #[serde(default)]
    pub hessian_positive_definite: bool,
    #[serde(default)]
    pub rank_deficient: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub window: Option<FitWindow>,
}

impl GevModel {
    /// A model carrying only coefficients, e.g. reference values.
    pub fn from_coefficients(coefficients: GevCoefficients) -> Self {
        GevModel {
            coefficients,
            stderrs: None,
            nll: None,
            n_blocks: 0,
            diagnostics: None,
            converged: false,
            hessian_positive_definite: false,
            rank_deficient: false,
            warnings: Vec::new(),
            restarts: 0,
            seed: 0,
            window: None,
        }
    }
}

/// Affine change of coordinates that centres and scales the covariates so
/// the simplex search sees a well-conditioned problem. The likelihood is
/// unchanged, so the optimum maps back exactly.
struct Standardisation {
    lr_mean: f64,
    lr_sd: f64,
    cpi_mean: f64,
    cpi_sd: f64,
}

fn mean_sd(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count().max(1) as f64;
    let mean = v.clone().sum::<f64>() / n;
    let sd = (v.map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, sd)
}

impl Standardisation {
    fn new(data: &BlockMaxima) -> Self {
        let (lr_mean, lr_sd) = mean_sd(data.blocks.iter().map(|b| b.rate.ln()));
        let (cpi_mean, cpi_sd) = mean_sd(data.blocks.iter().map(|b| b.cpi));
        let guard = |sd: f64, mean: f64| {
            if sd > 1e-12 * (1.0 + mean.abs()) {
                sd
            } else {
                1.0
            }
        };
        Standardisation {
            lr_mean,
            lr_sd: guard(lr_sd, lr_mean),
            cpi_mean,
            cpi_sd: guard(cpi_sd, cpi_mean),
        }
    }

    fn to_internal(&self, c: &GevCoefficients) -> [f64; 6] {
        [
            c.mu0 + c.mu1 * self.lr_mean + c.mu2 * self.cpi_mean,
            c.mu1 * self.lr_sd,
            c.mu2 * self.cpi_sd,
            c.sigma0 + c.sigma1 * self.cpi_mean,
            c.sigma1 * self.cpi_sd,
            c.xi,
        ]
    }

    fn to_natural(&self, v: &[f64]) -> GevCoefficients {
        let mu1 = v[1] / self.lr_sd;
        let mu2 = v[2] / self.cpi_sd;
        let sigma1 = v[4] / self.cpi_sd;
        GevCoefficients {
            mu0: v[0] - mu1 * self.lr_mean - mu2 * self.cpi_mean,
            mu1,
            mu2,
            sigma0: v[3] - sigma1 * self.cpi_mean,
            sigma1,
            xi: v[5],
        }
    }
}

/// True when `1, ln(rate), cpi` are (numerically) linearly dependent across
/// blocks, leaving the covariate coefficients unidentifiable.
fn covariates_rank_deficient(data: &BlockMaxima) -> bool {
    let n = data.len();
    if n < 3 {
        return true;
    }
    let (lm, ls) = mean_sd(data.blocks.iter().map(|b| b.rate.ln()));
    let (cm, cs) = mean_sd(data.blocks.iter().map(|b| b.cpi));
    if ls <= 1e-10 * (1.0 + lm.abs()) || cs <= 1e-10 * (1.0 + cm.abs()) {
        return true;
    }
    let r = data
        .blocks
        .iter()
        .map(|b| (b.rate.ln() - lm) / ls * (b.cpi - cm) / cs)
        .sum::<f64>()
        / n as f64;
    1.0 - r.abs() < 1e-10
}

/// Central finite-difference Hessian of `f` at `theta`, step
/// `1e-4 * (1 + |theta_i|)` per coordinate.
fn hessian(f: impl Fn(&[f64; 6]) -> f64, theta: &[f64; 6]) -> DMatrix<f64> {
    let h: Vec<f64> = theta.iter().map(|t| 1e-4 * (1.0 + t.abs())).collect();
    let f0 = f(theta);
    let shifted = |i: usize, si: f64, j: usize, sj: f64| {
        let mut v = *theta;
        v[i] += si * h[i];
        v[j] += sj * h[j];
        f(&v)
    };
    let mut m = DMatrix::zeros(6, 6);
    for i in 0..6 {
        let mut up = *theta;
        up[i] += h[i];
        let mut down = *theta;
        down[i] -= h[i];
        m[(i, i)] = (f(&up) - 2.0 * f0 + f(&down)) / (h[i] * h[i]);
        for j in 0..i {
            let v = (shifted(i, 1.0, j, 1.0) - shifted(i, 1.0, j, -1.0) - shifted(i, -1.0, j, 1.0)
                + shifted(i, -1.0, j, -1.0))
                / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Inverse-Hessian standard errors of the natural coefficients, from a
/// Hessian taken in the standardised coordinates and mapped back through the
/// (linear) change of variables. `None` unless the Hessian is finite and
/// positive definite.
fn standard_errors(hess: DMatrix<f64>, std: &Standardisation) -> Option<[f64; 6]> {
    if hess.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let eig = SymmetricEigen::new(hess.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let cov_internal = hess.cholesky()?.inverse();
    let origin = std.to_natural(&[0.0; 6]).to_array();
    let jacobian = DMatrix::from_fn(6, 6, |i, j| {
        let mut e = [0.0; 6];
        e[j] = 1.0;
        std.to_natural(&e).to_array()[i] - origin[i]
    });
    let cov = &jacobian * cov_internal * jacobian.transpose();
    let mut se = [0.0; 6];
    for (i, s) in se.iter_mut().enumerate() {
        let v = cov[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return None;
        }
        *s = v.sqrt();
    }
    Some(se)
}

/// Maximum-likelihood fit of the nonstationary GEV by multi-start
/// Nelder–Mead, with inverse-Hessian standard errors and PIT
/// goodness-of-fit diagnostics.
pub fn fit_gev(
    data: &BlockMaxima,
    init: &GevCoefficients,
    options: &GevFitOptions,
) -> Result<GevModel> {
    if data.len() < MIN_BLOCKS {
        return Err(Error::TooFewBlocks {
            found: data.len(),
            required: MIN_BLOCKS,
        });
    }
    let std = Standardisation::new(data);
    let objective = |v: &[f64]| {
        if !(v[5].abs() < XI_BOUND) {
            return f64::INFINITY;
        }
        nll(&std.to_natural(v), data)
    };

    let mut start = std.to_internal(init);
    start[5] = start[5].clamp(-0.9, 0.9);
    if !objective(&start).is_finite() {
        let fallback = std.to_internal(&GevCoefficients::moment_init(data));
        if !objective(&fallback).is_finite() {
            return Err(Error::Numerical(
                "initial coefficients give zero likelihood".into(),
            ));
        }
        start = fallback;
    }

    let spread = {
        let (_, sd) = mean_sd(data.blocks.iter().map(|b| b.max_value));
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    };
    let steps = vec![
        0.2 * spread,
        0.2 * spread,
        0.2 * spread,
        0.2 * start[3].abs().max(0.1 * spread),
        0.1 * spread,
        0.05,
    ];
    let nm = NelderMead {
        max_iter: options.max_iter,
        ftol: 1e-10,
        xtol: 1e-9,
        bounds: None,
        initial_step: Some(steps.clone()),
        rebuilds: 5,
    };
    let ms = MultiStart {
        restarts: options.restarts.max(1),
        jitter: 0.1,
        zero_scale: Some(steps),
        seed: options.seed,
        execution: options.execution,
    };
    let result = ms.run(&nm, &objective, &start);
    if !result.best.fx.is_finite() {
        return Err(Error::Numerical("no feasible optimum found".into()));
    }
    let coefficients = std.to_natural(&result.best.x);
    let nll_value = nll(&coefficients, data);

    let mut warnings = Vec::new();
    let rank_deficient = covariates_rank_deficient(data);
    if rank_deficient {
        warnings.push("covariates are collinear; mu1, mu2, sigma1 are not identifiable".into());
    }
    let internal = std.to_internal(&coefficients);
    let hess = hessian(|v| nll(&std.to_natural(v), data), &internal);
    let se = standard_errors(hess, &std);
    let hessian_positive_definite = se.is_some();
    if !hessian_positive_definite {
        warnings.push("Hessian is not positive definite; standard errors omitted".into());
    }
    if !result.best.converged {
        warnings.push("optimiser stopped before meeting its tolerance".into());
    }
    let stderrs = match (se, rank_deficient) {
        (Some(se), false) => Some(GevCoefficients::from_slice(&se)),
        _ => None,
    };

    Ok(GevModel {
        coefficients,
        stderrs,
        nll: Some(nll_value),
        n_blocks: data.len(),
        diagnostics: Some(gof(&coefficients, data)),
        converged: result.best.converged,
        hessian_positive_definite,
        rank_deficient,
        warnings,
        restarts: ms.restarts,
        seed: options.seed,
        window: options.window.clone(),
    })
}
