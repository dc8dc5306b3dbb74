//! Derivative-free local search and deterministic multi-start over the unit
//! ball.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Nelder–Mead simplex search with standard coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    /// Converged when every vertex is within this distance of the best one.
    pub tol: f64,
    /// Also converged when the value spread across the simplex drops to
    /// this level. Zero disables the test.
    pub ftol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { tol: 1e-8, ftol: 0.0, max_iter: 20_000, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimizes `f` starting at `x0`. Every trial point is passed through
    /// `project` before evaluation, which keeps the search inside a feasible
    /// set.
    pub fn minimize<F, P>(&self, mut f: F, x0: &[f64], project: P) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
        P: Fn(&mut [f64]),
    {
        let dim = x0.len();
        let mut start = x0.to_vec();
        project(&mut start);
        let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
        for i in 0..dim {
            let mut v = start.clone();
            v[i] += self.initial_step;
            let mut probe = v.clone();
            project(&mut probe);
            if probe != v {
                // stepping forward leaves the feasible set, try backward
                v[i] = start[i] - self.initial_step;
                probe = v.clone();
                project(&mut probe);
            }
            simplex.push(probe);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            order(&mut simplex, &mut values);
            if self.has_converged(&simplex, &values) {
                converged = true;
                break;
            }
            iterations += 1;

            let worst = dim;
            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..worst].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> =
                    (0..dim).map(|j| centroid[j] + t * (simplex[worst][j] - centroid[j])).collect();
                project(&mut p);
                p
            };

            let xr = along(-alpha);
            let fr = f(&xr);
            if fr < values[0] {
                let xe = along(-alpha * gamma);
                let fe = f(&xe);
                if fe < fr {
                    simplex[worst] = xe;
                    values[worst] = fe;
                } else {
                    simplex[worst] = xr;
                    values[worst] = fr;
                }
                continue;
            }
            if fr < values[worst - 1] {
                simplex[worst] = xr;
                values[worst] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[worst] {
                let xc = along(-alpha * rho);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < values[worst].min(fr) {
                simplex[worst] = xc;
                values[worst] = fc;
                continue;
            }
            // shrink toward the best vertex
            for i in 1..=dim {
                let mut p: Vec<f64> = (0..dim)
                    .map(|j| simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]))
                    .collect();
                project(&mut p);
                values[i] = f(&p);
                simplex[i] = p;
            }
        }
        order(&mut simplex, &mut values);
        Minimum { x: simplex[0].clone(), value: values[0], iterations, converged }
    }

    fn has_converged(&self, simplex: &[Vec<f64>], values: &[f64]) -> bool {
        let best = &simplex[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(best).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if diameter < self.tol {
            return true;
        }
        let spread = values[values.len() - 1] - values[0];
        self.ftol > 0.0 && spread <= self.ftol * (1.0 + values[0].abs())
    }
}

fn order(simplex: &mut Vec<Vec<f64>>, values: &mut Vec<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    *simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
    *values = idx.iter().map(|&i| values[i]).collect();
}

/// Radial projection onto the closed unit ball.
pub fn project_to_ball(x: &mut [f64]) {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r > 1.0 {
        x.iter_mut().for_each(|v| *v /= r);
    }
}

/// Radial projection onto the unit sphere (zero maps to the first axis).
pub fn project_to_sphere(x: &mut [f64]) {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        x[0] = 1.0;
    } else {
        x.iter_mut().for_each(|v| *v /= r);
    }
}

/// `i`-th element of the van der Corput sequence in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

/// First `count` Halton points in `[-1, 1]^dim`, skipping the origin-mapped
/// index 0.
pub fn halton_cube(count: usize, dim: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton dimension too large");
    (1..=count as u64)
        .map(|i| (0..dim).map(|j| 2.0 * radical_inverse(i, PRIMES[j]) - 1.0).collect())
        .collect()
}

/// The 6 axis poles followed by `extra` Halton points mapped
/// volume-uniformly into the unit ball.
pub fn ball_starts(extra: usize) -> Vec<[f64; 3]> {
    let mut out = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    for i in 1..=extra as u64 {
        let r = radical_inverse(i, 2).cbrt();
        let cos_t = 2.0 * radical_inverse(i, 3) - 1.0;
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        let phi = 2.0 * std::f64::consts::PI * radical_inverse(i, 5);
        out.push([r * sin_t * phi.cos(), r * sin_t * phi.sin(), r * cos_t]);
    }
    out
}

/// Number of starts used by [`MultiStart::default`].
pub const DEFAULT_STARTS: usize = 32;

/// Deterministic multi-start maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStart {
    pub starts: usize,
    pub local: NelderMead,
}

impl Default for MultiStart {
    fn default() -> Self {
        Self { starts: DEFAULT_STARTS, local: NelderMead::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged_starts: usize,
}

impl MultiStart {
    /// Maximizes `f` over the unit ball in `R^3`.
    pub fn maximize_ball<F>(&self, f: F) -> Result<Maximum>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let starts: Vec<Vec<f64>> = ball_starts(self.starts.saturating_sub(6))
            .into_iter()
            .take(self.starts)
            .map(|p| p.to_vec())
            .collect();
        self.maximize_from(&starts, f, project_to_ball)
    }

    /// Maximizes `f` from explicit starting points under a projection.
    pub fn maximize_from<F, P>(&self, starts: &[Vec<f64>], f: F, project: P) -> Result<Maximum>
    where
        F: Fn(&[f64]) -> f64 + Sync,
        P: Fn(&mut [f64]) + Sync,
    {
        let runs: Vec<Minimum> = starts
            .par_iter()
            .map(|x0| self.local.minimize(|x| -f(x), x0, &project))
            .collect();
        let converged_starts = runs.iter().filter(|m| m.converged).count();
        if converged_starts == 0 {
            return Err(Error::OptimizerFailed(format!(
                "none of {} starts converged within {} iterations",
                starts.len(),
                self.local.max_iter
            )));
        }
        // ties resolve to the earliest start
        let best = runs
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
            .map(|(_, m)| m)
            .expect("at least one start");
        Ok(Maximum { x: best.x.clone(), value: -best.value, converged_starts })
    }
}
