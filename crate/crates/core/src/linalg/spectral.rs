use faer::Side;

use super::{Operator, C64, TOL_HERM};
use crate::error::{Error, Result};

/// Above this dimension [`spectral_norm`] switches to power iteration on `A†A`.
pub const POWER_ITERATION_DIM: usize = 4096;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// Eigen-decomposition `A = V Λ V†` of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary whose columns are the eigenvectors.
    pub eigenvectors: Operator,
}

impl SpectralData {
    pub fn reconstruct(&self) -> Operator {
        let v = &self.eigenvectors;
        let scaled = Operator::from_fn(v.space(), |r, c| v.get(r, c) * self.eigenvalues[c]);
        &scaled * &v.adjoint()
    }

    /// `max |V†V - 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let v = &self.eigenvectors;
        let g = &v.adjoint() * v;
        g.max_abs_diff(&Operator::identity(v.space()))
    }

    /// Column `i` of the eigenvector matrix.
    pub fn eigenvector(&self, i: usize) -> Vec<C64> {
        let v = &self.eigenvectors;
        (0..v.dim()).map(|r| v.get(r, i)).collect()
    }

    /// Spectral projection onto the eigenvalues accepted by `keep`.
    pub fn projection(&self, mut keep: impl FnMut(f64) -> bool) -> Operator {
        let v = &self.eigenvectors;
        let dim = v.dim();
        let cols: Vec<usize> = (0..dim).filter(|&i| keep(self.eigenvalues[i])).collect();
        let mut out = Operator::zeros(v.space());
        if cols.is_empty() {
            return out;
        }
        if v.is_diagonal() || is_permutation_matrix(v) {
            let data = out.entries_mut();
            for &i in &cols {
                for r in 0..dim {
                    let x = v.get(r, i);
                    if x != C64::new(0.0, 0.0) {
                        data[r * dim + r] += x * x.conj();
                    }
                }
            }
            return out;
        }
        let w = Operator::from_fn(v.space(), |r, c| {
            if keep_col(&cols, c) {
                v.get(r, c)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        &w * &w.adjoint()
    }
}

fn keep_col(cols: &[usize], c: usize) -> bool {
    cols.binary_search(&c).is_ok()
}

fn is_permutation_matrix(v: &Operator) -> bool {
    let dim = v.dim();
    (0..dim).all(|r| v.row(r).iter().filter(|z| **z != C64::new(0.0, 0.0)).count() == 1)
        && v.entries().iter().all(|z| *z == C64::new(0.0, 0.0) || *z == C64::new(1.0, 0.0))
}

fn ensure_hermitian(a: &Operator) -> Result<()> {
    let dev = a.hermitian_deviation();
    if dev > TOL_HERM {
        Err(Error::NotHermitian(dev))
    } else {
        Ok(())
    }
}

fn evd_failed(e: impl std::fmt::Debug) -> Error {
    Error::EigFailed(format!("{e:?}"))
}

/// Full eigen-decomposition of a Hermitian operator.
///
/// Diagonal inputs are sorted directly; real symmetric inputs use a real
/// tridiagonal solver.
pub fn hermitian_eig(a: &Operator) -> Result<SpectralData> {
    ensure_hermitian(a)?;
    let space = a.space();
    let dim = a.dim();
    if a.is_diagonal() {
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| a.get(i, i).re.total_cmp(&a.get(j, j).re));
        let eigenvalues = order.iter().map(|&i| a.get(i, i).re).collect();
        let mut v = Operator::zeros(space);
        let data = v.entries_mut();
        for (col, &i) in order.iter().enumerate() {
            data[i * dim + col] = C64::new(1.0, 0.0);
        }
        return Ok(SpectralData { eigenvalues, eigenvectors: v });
    }
    if a.is_real() {
        let evd = a.real_part().self_adjoint_eigen(Side::Lower).map_err(evd_failed)?;
        let s = evd.S();
        let eigenvalues = (0..dim).map(|i| s[i]).collect();
        let eigenvectors = Operator::from_real(space, evd.U());
        return Ok(SpectralData { eigenvalues, eigenvectors });
    }
    let evd = a.as_faer().self_adjoint_eigen(Side::Lower).map_err(evd_failed)?;
    let s = evd.S();
    let u = evd.U();
    let eigenvalues = (0..dim).map(|i| s[i].re).collect();
    let eigenvectors = Operator::from_fn(space, |r, c| u[(r, c)]);
    Ok(SpectralData { eigenvalues, eigenvectors })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(a: &Operator) -> Result<Vec<f64>> {
    ensure_hermitian(a)?;
    let dim = a.dim();
    if a.is_diagonal() {
        let mut ev: Vec<f64> = (0..dim).map(|i| a.get(i, i).re).collect();
        ev.sort_by(f64::total_cmp);
        return Ok(ev);
    }
    if a.is_real() {
        return a.real_part().self_adjoint_eigenvalues(Side::Lower).map_err(evd_failed);
    }
    a.as_faer().self_adjoint_eigenvalues(Side::Lower).map_err(evd_failed)
}

/// Largest singular value.
pub fn spectral_norm(a: &Operator) -> Result<f64> {
    let dim = a.dim();
    if a.is_diagonal() {
        return Ok((0..dim).map(|i| a.get(i, i).norm()).fold(0.0, f64::max));
    }
    if dim > POWER_ITERATION_DIM {
        return power_iteration_norm(a);
    }
    if a.hermitian_deviation() <= TOL_HERM {
        let ev = hermitian_eigenvalues(a)?;
        return Ok(max_abs(&ev));
    }
    if !a.is_real() && a.anti_hermitian_deviation() <= TOL_HERM {
        // iA is Hermitian with the same singular values
        let ia = hermitize(&a.scale(C64::new(0.0, 1.0)));
        return Ok(max_abs(&hermitian_eigenvalues(&ia)?));
    }
    let gram = hermitize(&(&a.adjoint() * a));
    let top = hermitian_eigenvalues(&gram)?.last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// Removes rounding-level asymmetry so the Hermitian solver accepts the input.
fn hermitize(a: &Operator) -> Operator {
    let adj = a.adjoint();
    (a + &adj).scale_real(0.5)
}

fn power_iteration_norm(a: &Operator) -> Result<f64> {
    let dim = a.dim();
    let adj = a.adjoint();
    // deterministic start with support on every basis vector
    let mut v: Vec<C64> =
        (0..dim).map(|i| C64::new(1.0 + (i as f64 * 0.618_033_988_75).fract(), 0.0)).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let mut w = adj.apply(&a.apply(&v)?)?;
        let next = norm2(&w);
        if next == 0.0 {
            return Ok(0.0);
        }
        w.iter_mut().for_each(|z| *z /= next);
        let converged = (next - lambda).abs() <= POWER_TOL * next;
        lambda = next;
        v = w;
        if converged {
            return Ok(lambda.sqrt());
        }
    }
    Err(Error::EigFailed(format!("power iteration did not converge in {POWER_MAX_ITER} steps")))
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [C64]) {
    let n = norm2(v);
    v.iter_mut().for_each(|z| *z /= n);
}

/// `AB - BA`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    let ab = a.checked_mul(b)?;
    let ba = b.checked_mul(a)?;
    ab.checked_sub(&ba)
}
