//! Reference computations shared by the integration tests. These avoid the
//! library routines they are compared against.

#![allow(dead_code)]

use macrofield::linalg::{Operator, SiteSpace, C64};
use macrofield::stochastics::BooleanExpr;
use rand::Rng;

/// Kronecker power by explicit index arithmetic.
pub fn kron_power(a: &Operator, m: usize) -> Operator {
    let d = a.dim();
    let space = SiteSpace::new(a.space().d(), m).unwrap();
    let dim = space.dim();
    let mut data = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            let (mut rr, mut cc) = (r, c);
            let mut z = C64::new(1.0, 0.0);
            for _ in 0..m {
                z *= a.get(rr % d, cc % d);
                rr /= d;
                cc /= d;
            }
            data.push(z);
        }
    }
    Operator::from_row_major(space, data).unwrap()
}

/// Exact binomial coefficient.
pub fn choose(n: usize, k: usize) -> u128 {
    let mut c = 1u128;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// `Σ_{|k/n − p| ≤ ε} C(n,k) p^k (1−p)^{n−k}` with exact coefficients.
pub fn binomial_oracle(p: f64, n: usize, eps: f64) -> f64 {
    (0..=n)
        .filter(|&k| (k as f64 / n as f64 - p).abs() <= eps + 1e-12)
        .map(|k| choose(n, k) as f64 * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
        .sum()
}

/// Product-measure probability of `expr` over all `2^n` strings.
pub fn enumerate_probability(expr: &BooleanExpr, n: usize, p: f64) -> f64 {
    (0u32..1 << n)
        .filter(|&s| expr.eval(&|k: usize| ((s >> (n - k)) & 1) as u8))
        .map(|s| {
            let ones = s.count_ones() as i32;
            p.powi(ones) * (1.0 - p).powi(n as i32 - ones)
        })
        .sum()
}

/// Bloch vector with uniform direction and radius in `[r_min, r_max]`.
pub fn random_bloch<R: Rng>(rng: &mut R, r_min: f64, r_max: f64) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            let r = rng.random_range(r_min..=r_max);
            return v.map(|x| x * r / norm);
        }
    }
}

/// Random Hermitian operator on `m` qubits with entries of order one.
pub fn random_hermitian<R: Rng>(rng: &mut R, m: usize) -> Operator {
    let space = SiteSpace::new(2, m).unwrap();
    let dim = space.dim();
    let raw: Vec<C64> = (0..dim * dim)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    Operator::from_fn(space, |r, c| 0.5 * (raw[r * dim + c] + raw[c * dim + r].conj()))
}
