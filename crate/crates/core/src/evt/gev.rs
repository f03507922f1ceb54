use crate::error::{Error, Result};

/// Below this `|xi|` the Gumbel limit is used.
pub const XI_EPS: f64 = 1e-6;

/// GEV distribution function. Outside the support it is 0 or 1.
pub fn gev_cdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let z = (x - mu) / sigma;
    if xi.abs() < XI_EPS {
        return (-(-z).exp()).exp();
    }
    let t = xi * z;
    if t <= -1.0 {
        return if xi > 0.0 { 0.0 } else { 1.0 };
    }
    (-(-t.ln_1p() / xi).exp()).exp()
}

/// Inverse of [`gev_cdf`] on `(0, 1)`.
pub fn gev_quantile(p: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "scale must be positive, got {sigma}"
        )));
    }
    let y = -p.ln(); // -ln p > 0
    if xi.abs() < XI_EPS {
        Ok(mu - sigma * y.ln())
    } else {
        Ok(mu + sigma * (-xi * y.ln()).exp_m1() / xi)
    }
}

/// Log density; `-inf` outside the support.
pub fn gev_log_pdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let z = (x - mu) / sigma;
    if xi.abs() < XI_EPS {
        return -sigma.ln() - z - (-z).exp();
    }
    let t = xi * z;
    if t <= -1.0 {
        return f64::NEG_INFINITY;
    }
    let l = t.ln_1p();
    -sigma.ln() - (1.0 + 1.0 / xi) * l - (-l / xi).exp()
}

pub fn gev_pdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    gev_log_pdf(x, mu, sigma, xi).exp()
}
