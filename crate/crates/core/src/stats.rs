//! Reference distributions and uniformity tests.
//!
//! Regularised incomplete beta and gamma functions come from `statrs`; the
//! Kolmogorov and Anderson–Darling tail approximations are implemented here.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_ur;

/// Two-sided p-value `P(|T| >= |t|)` for Student's t with `df` degrees of
/// freedom, via `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Upper tail `P(X >= x)` of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(df / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov distance of `u` from Uniform(0,1).
pub fn ks_uniform_statistic(u: &[f64]) -> f64 {
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            let upper = (i + 1) as f64 / n - x;
            let lower = x - i as f64 / n;
            upper.max(lower)
        })
        .fold(0.0, f64::max)
}

/// Survival function of the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form converges fast for small arguments.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * c).exp()
            })
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let sf: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                let kf = k as f64;
                sign * (-2.0 * kf * kf * lambda * lambda).exp()
            })
            .sum::<f64>()
            * 2.0;
        sf.clamp(0.0, 1.0)
    }
}

/// Asymptotic KS p-value with Stephens' small-sample scaling of the
/// statistic, `(sqrt(n) + 0.12 + 0.11/sqrt(n)) * D`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)
}

/// Anderson–Darling A² of `u` against Uniform(0,1). Returns infinity if any
/// value sits on 0 or 1.
pub fn ad_uniform_statistic(u: &[f64]) -> f64 {
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let nf = n as f64;
    let sum: f64 = (0..n)
        .map(|i| {
            let lo = s[i];
            let hi = s[n - 1 - i];
            (2 * i + 1) as f64 * (lo.ln() + (1.0 - hi).ln())
        })
        .sum();
    let a2 = -nf - sum / nf;
    if a2.is_nan() {
        f64::INFINITY
    } else {
        a2
    }
}

/// Limiting CDF of A² for a fully specified null, using the Marsaglia &
/// Marsaglia (2004) rational approximation.
pub fn anderson_darling_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z.is_infinite() {
        return 1.0;
    }
    let p = if z < 2.0 {
        (-1.2337141 / z).exp() / z.sqrt()
            * (2.00012
                + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z)
                    * z)
    } else {
        (-(1.0776
            - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z)
            .exp())
        .exp()
    };
    p.clamp(0.0, 1.0)
}

pub fn ad_p_value(a2: f64) -> f64 {
    1.0 - anderson_darling_cdf(a2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn t_p_values() {
        assert_relative_eq!(student_t_two_sided_p(0.0, 5.0), 1.0, epsilon = 1e-14);
        // t_{0.975, 10} = 2.228138851986
        assert_relative_eq!(
            student_t_two_sided_p(2.228138851986, 10.0),
            0.05,
            epsilon = 1e-10
        );
        // df=1 is Cauchy: P(|T|>1) = 0.5
        assert_relative_eq!(student_t_two_sided_p(1.0, 1.0), 0.5, epsilon = 1e-12);
        assert_eq!(student_t_two_sided_p(f64::INFINITY, 3.0), 0.0);
    }

    #[test]
    fn chi_square_tail() {
        assert_relative_eq!(chi_square_sf(3.841458820694124, 1.0), 0.05, epsilon = 1e-10);
        // df=2 is exponential with mean 2
        assert_relative_eq!(chi_square_sf(3.0, 2.0), (-1.5f64).exp(), epsilon = 1e-12);
        assert_eq!(chi_square_sf(0.0, 3.0), 1.0);
    }

    #[test]
    fn kolmogorov_branches_meet() {
        let a = kolmogorov_sf(1.18 - 1e-9);
        let b = kolmogorov_sf(1.18 + 1e-9);
        assert!((a - b).abs() < 1e-8);
        // 5% critical value of the limiting distribution
        assert_relative_eq!(kolmogorov_sf(1.3580986), 0.05, epsilon = 1e-6);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ad_critical_value() {
        // 5% critical value of the case-0 limiting distribution is 2.4924
        assert!((ad_p_value(2.4924) - 0.05).abs() < 5e-4);
        assert_eq!(ad_p_value(0.0), 1.0);
    }

    #[test]
    fn ad_single_point() {
        let a2 = ad_uniform_statistic(&[0.5]);
        assert_relative_eq!(a2, -1.0 - 2.0 * 0.5f64.ln(), epsilon = 1e-14);
        assert_eq!(ad_uniform_statistic(&[0.0, 0.5]), f64::INFINITY);
    }
}
