//! Finite-N sweeps for the large-N limit claims: commutator decay, norm
//! convergence against the product-state supremum, and the eigenvalue-window
//! projection of the frequency operator.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{commutator, hermitian_eig, spectral_norm, tensor, Operator, SiteSpace, C64};
use crate::optimize::{halton_cube, project_to_sphere, MultiStart, NelderMead};
use crate::sections::{frequency_operator, FrequencySpec, Section, SymmetricSection};
use crate::states::{bloch_to_density, BlochVector, DensityMatrix, PureState};

/// Eigenvalues within this distance outside the window still count as inside.
pub const WINDOW_EDGE_TOL: f64 = 1e-12;
/// Number of largest-n points used by [`fit_power_law`].
pub const FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRecord {
    pub n: usize,
    pub value: f64,
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub records: Vec<DecayRecord>,
    /// `γ` in `value ≈ C·n^(-γ)`, when at least two fitted values are positive.
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormGapRecord {
    pub n: usize,
    pub exact_norm: f64,
    pub product_sup: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowMassRecord {
    pub n: usize,
    pub epsilon: f64,
    pub p: f64,
    pub mass: f64,
}

/// Rejects empty, non-increasing, or too-small site lists.
pub fn validate_n_list(n_list: &[usize], min_order: usize) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("empty site list".into()));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n < min_order.max(1)) {
        return Err(Error::BadOrder { n, m: min_order.max(1) });
    }
    if let Some(w) = n_list.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "site list must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// `‖[A_n, B_n]‖` over `n_list`, with a fitted decay exponent.
pub fn commutator_decay<S1, S2>(s1: &S1, s2: &S2, n_list: &[usize]) -> Result<DecayReport>
where
    S1: Section + ?Sized,
    S2: Section + ?Sized,
{
    if s1.local_dim() != s2.local_dim() {
        return Err(Error::MismatchedLocalDimension { left: s1.local_dim(), right: s2.local_dim() });
    }
    validate_n_list(n_list, s1.seed_order().max(s2.seed_order()))?;
    let records = n_list
        .par_iter()
        .map(|&n| {
            let c = commutator(&s1.materialize(n)?, &s2.materialize(n)?)?;
            let value = spectral_norm(&c)?;
            Ok(DecayRecord { n, value, scaled: value * n as f64 })
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(usize, f64)> = records.iter().map(|r| (r.n, r.value)).collect();
    Ok(DecayReport { exponent: fit_power_law(&points), records })
}

/// Least-squares slope of `log value` against `log n` over the
/// [`FIT_POINTS`] largest `n`, returned as a decay exponent (negated slope).
/// Non-positive values are skipped.
pub fn fit_power_law(points: &[(usize, f64)]) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, v)| *n > 0 && *v > 0.0 && v.is_finite())
        .map(|&(n, v)| ((n as f64).ln(), v.ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tail = &pts[pts.len().saturating_sub(FIT_POINTS)..];
    if tail.len() < 2 {
        return None;
    }
    let k = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / k;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Result of [`product_state_sup`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSup {
    pub value: f64,
    /// A one-site state attaining `value`.
    pub state: DensityMatrix,
}

/// `sup_ω |ω^{⊗n}(A_n)|` over one-site states `ω`.
///
/// Since `ω^{⊗n}(j_nm(A_m)) = ω^{⊗m}(A_m)`, the search runs at the seed
/// order. Qubits are searched over the Bloch ball; `d = 3, 4` over unit
/// purification matrices `M` with `ω = M M†`.
pub fn product_state_sup(section: &SymmetricSection, n: usize) -> Result<ProductSup> {
    product_state_sup_with(section, n, &MultiStart::default())
}

pub fn product_state_sup_with(
    section: &SymmetricSection,
    n: usize,
    search: &MultiStart,
) -> Result<ProductSup> {
    let m = section.seed_order();
    if n < m {
        return Err(Error::BadOrder { n, m });
    }
    let seed = section.seed();
    let d = section.local_dim();
    match d {
        2 => {
            let objective = |v: &[f64]| {
                let rho = bloch_to_density(BlochVector { x: v[0], y: v[1], z: v[2] });
                product_expectation(rho.operator(), seed).abs()
            };
            let best = search.maximize_ball(objective)?;
            let state = bloch_to_density(BlochVector { x: best.x[0], y: best.x[1], z: best.x[2] });
            Ok(ProductSup { value: best.value, state })
        }
        3 | 4 => {
            let starts = halton_cube(search.starts, 2 * d * d);
            let local = NelderMead { ftol: 1e-15, ..search.local };
            let search = MultiStart { local, ..search.clone() };
            let objective = |x: &[f64]| {
                let rho = purification_density(d, x);
                product_expectation(&rho, seed).abs()
            };
            let best = search.maximize_from(&starts, objective, project_to_sphere)?;
            let state = DensityMatrix::new(purification_density(d, &best.x))?;
            Ok(ProductSup { value: best.value, state })
        }
        _ => Err(Error::InvalidArgument(format!(
            "product-state search supports d ≤ 4, got d = {d}"
        ))),
    }
}

/// `M M† / Tr(M M†)` with `M` read row-major from `(re, im)` pairs.
fn purification_density(d: usize, x: &[f64]) -> Operator {
    let space = SiteSpace::site(d).expect("d >= 2");
    let m: Vec<C64> = x.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
    let mm = Operator::from_fn(space, |r, c| {
        (0..d).map(|k| m[r * d + k] * m[c * d + k].conj()).sum()
    });
    let tr = mm.trace().re;
    mm.scale_real(1.0 / tr)
}

/// `Tr(ρ^{⊗m} A)` for one-site `ρ` and `m`-site `A`.
fn product_expectation(rho: &Operator, a: &Operator) -> f64 {
    let mut power = rho.clone();
    for _ in 1..a.space().n() {
        power = tensor(&power, rho).expect("same local dimension");
    }
    power.inner(a).re
}

/// `‖A_n‖` against the product-state supremum for each `n`.
pub fn norm_gap(section: &SymmetricSection, n_list: &[usize]) -> Result<Vec<NormGapRecord>> {
    validate_n_list(n_list, section.seed_order())?;
    let product_sup = product_state_sup(section, n_list[0])?.value;
    n_list
        .par_iter()
        .map(|&n| {
            let exact_norm = spectral_norm(&section.materialize(n)?)?;
            Ok(NormGapRecord { n, exact_norm, product_sup, gap: exact_norm - product_sup })
        })
        .collect()
}

fn validate_window(p: f64, epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("target mean {p} outside [0, 1]")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("window half-width {epsilon} must be > 0")));
    }
    Ok(())
}

/// Spectral projection of `f_n` onto eigenvalues in `[p − ε, p + ε]`.
pub fn window_projection(spec: &FrequencySpec, n: usize, p: f64, epsilon: f64) -> Result<Operator> {
    validate_window(p, epsilon)?;
    let f = frequency_operator(spec, n)?;
    let sd = hermitian_eig(&f)?;
    Ok(sd.projection(|l| (l - p).abs() <= epsilon + WINDOW_EDGE_TOL))
}

/// `⟨ψ^{⊗n}, W ψ^{⊗n}⟩` for the window `W` centred on the Born probability
/// `p = ⟨ψ|P|ψ⟩`.
pub fn window_mass(psi: &PureState, spec: &FrequencySpec, n: usize, epsilon: f64) -> Result<WindowMassRecord> {
    let p = psi.born_probability(spec)?.clamp(0.0, 1.0);
    let w = window_projection(spec, n, p, epsilon)?;
    let mass = psi.expect_power(&w)?;
    Ok(WindowMassRecord { n, epsilon, p, mass })
}

/// `Σ_{|k/n − p| ≤ ε} C(n,k) p^k (1−p)^{n−k}`, the closed form of the window
/// mass; usable far beyond the sizes the matrix path reaches.
pub fn binomial_window_mass(p: f64, n: usize, epsilon: f64) -> Result<f64> {
    validate_window(p, epsilon)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let inside = |k: usize| (k as f64 / n as f64 - p).abs() <= epsilon + WINDOW_EDGE_TOL;
    if p == 0.0 || p == 1.0 {
        let k = if p == 0.0 { 0 } else { n };
        return Ok(if inside(k) { 1.0 } else { 0.0 });
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut ln_choose = 0.0;
    let mut mass = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64 / k as f64).ln();
        }
        if inside(k) {
            mass += (ln_choose + k as f64 * lp + (n - k) as f64 * lq).exp();
        }
    }
    Ok(mass.min(1.0))
}

/// `‖(f_n − p) ψ^{⊗n}‖₂` with `p = ⟨ψ|P|ψ⟩`; equals `√(p(1−p)/n)`.
pub fn strong_limit_residual(psi: &PureState, spec: &FrequencySpec, n: usize) -> Result<f64> {
    let p = psi.born_probability(spec)?;
    let v = psi.tensor_power(n)?;
    let fv = frequency_operator(spec, n)?.apply(&v)?;
    Ok(fv.iter().zip(&v).map(|(a, b)| (a - b * p).norm_sqr()).sum::<f64>().sqrt())
}
