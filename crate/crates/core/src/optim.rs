//! Derivative-free minimisation: Nelder–Mead with box clamping, plus a
//! seeded multi-start wrapper.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::par::{stream_seed, Execution};

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Convergence requires the spread of function values over the simplex
    /// to fall below this.
    pub ftol: f64,
    /// ...and every vertex to lie within `xtol * (1 + |x_best|)` of the best
    /// vertex in each coordinate.
    pub xtol: f64,
    /// Vertices are clamped into these intervals.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Edge lengths of the initial simplex; defaults to 5% of each
    /// coordinate (0.00025 for zero coordinates).
    pub initial_step: Option<Vec<f64>>,
    /// After convergence the simplex is rebuilt around the best point and the
    /// search repeated, up to this many extra times, until a round stops
    /// improving. Guards against premature collapse.
    pub rebuilds: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_iter: 2000,
            ftol: 1e-8,
            xtol: 1e-8,
            bounds: None,
            initial_step: None,
            rebuilds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub n_iter: usize,
    pub n_eval: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

impl NelderMead {
    fn clamp(&self, x: &mut [f64]) {
        if let Some(bounds) = &self.bounds {
            for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
                *xi = xi.clamp(lo, hi);
            }
        }
    }

    fn step(&self, x0: &[f64], i: usize) -> f64 {
        match &self.initial_step {
            Some(s) => s[i],
            None if x0[i] != 0.0 => 0.05 * x0[i].abs(),
            None => 0.00025,
        }
    }

    pub fn minimize<F: Fn(&[f64]) -> f64>(&self, f: F, x0: &[f64]) -> Minimum {
        let mut start = x0.to_vec();
        self.clamp(&mut start);
        let mut best = self.run(&f, &start, self.max_iter);
        let mut rounds = 0;
        while best.converged && rounds < self.rebuilds && best.n_iter < self.max_iter {
            rounds += 1;
            let next = self.run(&f, &best.x, self.max_iter - best.n_iter);
            let improved = next.fx < best.fx - self.ftol;
            let n_iter = best.n_iter + next.n_iter;
            let n_eval = best.n_eval + next.n_eval;
            if next.fx <= best.fx {
                best = Minimum {
                    n_iter,
                    n_eval,
                    ..next
                };
            } else {
                best.n_iter = n_iter;
                best.n_eval = n_eval;
            }
            if !improved {
                break;
            }
        }
        best
    }

    fn run<F: Fn(&[f64]) -> f64>(&self, f: &F, x0: &[f64], max_iter: usize) -> Minimum {
        let n = x0.len();
        let nf = n.max(1) as f64;
        // Adaptive coefficients (Gao & Han 2012).
        let alpha = 1.0;
        let gamma = 1.0 + 2.0 / nf;
        let rho = 0.75 - 1.0 / (2.0 * nf);
        let sigma = 1.0 - 1.0 / nf;

        let mut n_eval = 0usize;
        let mut eval = |x: &[f64]| {
            n_eval += 1;
            sanitize(f(x))
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..n {
            let mut x = x0.to_vec();
            let h = self.step(x0, i);
            x[i] += h;
            self.clamp(&mut x);
            if x[i] == x0[i] {
                x[i] -= h;
                self.clamp(&mut x);
            }
            let fx = eval(&x);
            simplex.push((x, fx));
        }

        let mut n_iter = 0;
        let mut converged = false;
        let order = |s: &mut Vec<(Vec<f64>, f64)>| {
            s.sort_by(|a, b| a.1.total_cmp(&b.1));
        };
        order(&mut simplex);
        while n_iter < max_iter {
            if self.has_converged(&simplex) {
                converged = true;
                break;
            }
            n_iter += 1;

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / nf)
                .collect();
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                let mut x: Vec<f64> = centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect();
                self.clamp(&mut x);
                x
            };

            let xr = along(alpha);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(alpha * gamma);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst.1 {
                    let xc = along(alpha * rho);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < fr.min(worst.1) {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        let mut x: Vec<f64> = best
                            .iter()
                            .zip(&v.0)
                            .map(|(b, xi)| b + sigma * (xi - b))
                            .collect();
                        self.clamp(&mut x);
                        let fx = eval(&x);
                        *v = (x, fx);
                    }
                }
            }
            order(&mut simplex);
        }
        if !converged {
            converged = self.has_converged(&simplex);
        }
        let (x, fx) = simplex.swap_remove(0);
        Minimum {
            x,
            fx,
            n_iter,
            n_eval,
            converged,
        }
    }

    fn has_converged(&self, simplex: &[(Vec<f64>, f64)]) -> bool {
        let (best_x, best_f) = &simplex[0];
        if !best_f.is_finite() {
            return false;
        }
        let f_spread = simplex
            .iter()
            .map(|(_, f)| (f - best_f).abs())
            .fold(0.0, f64::max);
        if !(f_spread <= self.ftol) {
            return false;
        }
        simplex.iter().all(|(x, _)| {
            x.iter()
                .zip(best_x)
                .all(|(a, b)| (a - b).abs() <= self.xtol * (1.0 + b.abs()))
        })
    }
}

/// Runs Nelder–Mead from the initial point and from `restarts - 1` jittered
/// copies of it, returning the best by `(fx, restart index)`.
#[derive(Debug, Clone)]
pub struct MultiStart {
    /// Total number of starts; start 0 is the unjittered initial point.
    pub restarts: usize,
    /// Relative uniform jitter per coordinate (0.1 = ±10%). Zero coordinates
    /// receive an absolute jitter of the same fraction of `zero_scale`.
    pub jitter: f64,
    pub zero_scale: Option<Vec<f64>>,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for MultiStart {
    fn default() -> Self {
        MultiStart {
            restarts: 5,
            jitter: 0.1,
            zero_scale: None,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiStartResult {
    pub best: Minimum,
    pub best_index: usize,
    pub runs: Vec<Minimum>,
}

impl MultiStart {
    /// Starting point for restart `index`.
    pub fn start(&self, x0: &[f64], index: usize) -> Vec<f64> {
        if index == 0 {
            return x0.to_vec();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.seed, index as u64));
        x0.iter()
            .enumerate()
            .map(|(j, &v)| {
                let u: f64 = rng.random_range(-self.jitter..=self.jitter);
                if v != 0.0 {
                    v * (1.0 + u)
                } else {
                    let scale = self.zero_scale.as_ref().map_or(1.0, |s| s[j]);
                    u * scale
                }
            })
            .collect()
    }

    pub fn run<F>(&self, nm: &NelderMead, f: &F, x0: &[f64]) -> MultiStartResult
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let restarts = self.restarts.max(1);
        let runs = self
            .execution
            .map(restarts, |i| nm.minimize(f, &self.start(x0, i)));
        let best_index = runs
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.fx.total_cmp(&b.fx).then(i.cmp(j)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        MultiStartResult {
            best: runs[best_index].clone(),
            best_index,
            runs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn minimises_quadratic() {
        let nm = NelderMead::default();
        let m = nm.minimize(
            |x| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2),
            &[0.0, 0.0],
        );
        assert!(m.converged);
        assert!((m.x[0] - 3.0).abs() < 1e-4);
        assert!((m.x[1] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn minimises_rosenbrock() {
        let nm = NelderMead {
            max_iter: 5000,
            ..Default::default()
        };
        let m = nm.minimize(rosenbrock, &[-1.2, 1.0]);
        assert!(m.fx < 1e-8, "fx = {}", m.fx);
        assert!((m.x[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn respects_bounds() {
        let nm = NelderMead {
            bounds: Some(vec![(2.0, 5.0)]),
            ..Default::default()
        };
        let m = nm.minimize(|x| x[0] * x[0], &[4.0]);
        assert!((m.x[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn tolerates_infinite_regions() {
        let nm = NelderMead::default();
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                f64::INFINITY
            } else {
                (x[0] - 1.0).powi(2) + x[1].powi(2)
            }
        };
        let m = nm.minimize(f, &[2.0, 1.0]);
        assert!((m.x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn multistart_is_deterministic_across_modes() {
        let nm = NelderMead::default();
        let f = |x: &[f64]| (x[0].sin() * 3.0 + x[0] * 0.1).powi(2) + x[1].powi(2);
        let mut ms = MultiStart {
            restarts: 6,
            seed: 7,
            execution: Execution::Sequential,
            ..Default::default()
        };
        let a = ms.run(&nm, &f, &[2.0, 1.0]);
        ms.execution = Execution::Parallel;
        let b = ms.run(&nm, &f, &[2.0, 1.0]);
        assert_eq!(a.best, b.best);
        assert_eq!(a.best_index, b.best_index);
        assert_eq!(ms.start(&[2.0, 1.0], 0), vec![2.0, 1.0]);
        let s = ms.start(&[2.0, 0.0], 3);
        assert!((s[0] - 2.0).abs() <= 0.2 + 1e-12);
        assert!(s[1].abs() <= 0.1 + 1e-12);
    }
}
