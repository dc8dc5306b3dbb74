use std::ops::{Add, Mul, Neg, Sub};

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef};

use super::{SiteSpace, C64};
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A dense `dim × dim` complex matrix on a [`SiteSpace`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: SiteSpace,
    data: Vec<C64>,
}

impl Operator {
    pub fn from_row_major(space: SiteSpace, data: Vec<C64>) -> Result<Self> {
        let dim = space.dim();
        if data.len() != dim * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for dimension {dim}, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { space, data })
    }

    /// One-site operator from nested rows; the row count fixes `d`.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("rows must form a square matrix".into()));
        }
        let space = SiteSpace::site(d)?;
        Self::from_row_major(space, rows.concat())
    }

    pub fn from_fn(space: SiteSpace, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let dim = space.dim();
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { space, data }
    }

    pub fn zeros(space: SiteSpace) -> Self {
        let dim = space.dim();
        Self { space, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(space: SiteSpace) -> Self {
        Self::diagonal(space, &vec![1.0; space.dim()])
    }

    /// Real diagonal operator.
    pub fn diagonal(space: SiteSpace, diag: &[f64]) -> Self {
        let mut op = Self::zeros(space);
        let dim = space.dim();
        for (i, v) in diag.iter().enumerate().take(dim) {
            op.data[i * dim + i] = C64::new(*v, 0.0);
        }
        op
    }

    /// Rank-one operator `|u⟩⟨v|`.
    pub fn outer(space: SiteSpace, u: &[C64], v: &[C64]) -> Result<Self> {
        let dim = space.dim();
        if u.len() != dim || v.len() != dim {
            return Err(Error::InvalidArgument("vector length does not match space".into()));
        }
        Ok(Self::from_fn(space, |r, c| u[r] * v[c].conj()))
    }

    pub fn space(&self) -> SiteSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim() + c]
    }

    pub fn row(&self, r: usize) -> &[C64] {
        let dim = self.dim();
        &self.data[r * dim..(r + 1) * dim]
    }

    pub(crate) fn as_faer(&self) -> MatRef<'_, C64> {
        MatRef::from_row_major_slice(&self.data, self.dim(), self.dim())
    }

    pub(crate) fn real_part(&self) -> Mat<f64> {
        let dim = self.dim();
        Mat::from_fn(dim, dim, |r, c| self.data[r * dim + c].re)
    }

    pub(crate) fn from_real(space: SiteSpace, m: MatRef<'_, f64>) -> Self {
        Self::from_fn(space, |r, c| C64::new(m[(r, c)], 0.0))
    }

    pub fn adjoint(&self) -> Self {
        let dim = self.dim();
        Self::from_fn(self.space, |r, c| self.data[c * dim + r].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |a_ij - b_ij|`; infinite when the spaces differ.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        if self.space != other.space {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A - A†|` entrywise.
    pub fn hermitian_deviation(&self) -> f64 {
        let dim = self.dim();
        let mut dev = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                dev = dev.max((self.data[r * dim + c] - self.data[c * dim + r].conj()).norm());
            }
        }
        dev
    }

    /// `max |A + A†|` entrywise.
    pub fn anti_hermitian_deviation(&self) -> f64 {
        let dim = self.dim();
        let mut dev = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                dev = dev.max((self.data[r * dim + c] + self.data[c * dim + r].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// All imaginary parts are exactly zero.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// All off-diagonal entries are exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let dim = self.dim();
        self.data
            .iter()
            .enumerate()
            .all(|(i, z)| i / dim == i % dim || *z == ZERO)
    }

    /// `Tr(A† B)`.
    pub fn inner(&self, other: &Operator) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { space: self.space, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// `self + s·other` in place.
    pub fn add_scaled(&mut self, other: &Operator, s: C64) -> Result<()> {
        self.space.ensure_same(&other.space)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Operator) -> Result<Operator> {
        let mut out = self.clone();
        out.add_scaled(other, ONE)?;
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Operator) -> Result<Operator> {
        let mut out = self.clone();
        out.add_scaled(other, -ONE)?;
        Ok(out)
    }

    /// Matrix product; real inputs take a real-arithmetic path.
    pub fn checked_mul(&self, other: &Operator) -> Result<Operator> {
        self.space.ensure_same(&other.space)?;
        let dim = self.dim();
        let par = faer::get_global_parallelism();
        if self.is_real() && other.is_real() {
            let (a, b) = (self.real_part(), other.real_part());
            let mut out = Mat::<f64>::zeros(dim, dim);
            matmul(out.as_mut(), Accum::Replace, a.as_ref(), b.as_ref(), 1.0, par);
            return Ok(Self::from_real(self.space, out.as_ref()));
        }
        let mut data = vec![ZERO; dim * dim];
        matmul(
            MatMut::from_row_major_slice_mut(&mut data, dim, dim),
            Accum::Replace,
            self.as_faer(),
            other.as_faer(),
            ONE,
            par,
        );
        Ok(Self { space: self.space, data })
    }

    /// `A v`.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let dim = self.dim();
        if v.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "vector length {} does not match dimension {dim}",
                v.len()
            )));
        }
        Ok(self
            .data
            .chunks_exact(dim)
            .map(|row| row.iter().zip(v).map(|(a, x)| a * x).sum())
            .collect())
    }

    /// `⟨v, A v⟩`.
    pub fn quadratic_form(&self, v: &[C64]) -> Result<C64> {
        let av = self.apply(v)?;
        Ok(v.iter().zip(&av).map(|(x, y)| x.conj() * y).sum())
    }
}

impl Add for &Operator {
    type Output = Operator;

    /// Panics when the spaces differ; use [`Operator::checked_add`] otherwise.
    fn add(self, rhs: &Operator) -> Operator {
        self.checked_add(rhs).expect("operator spaces must match")
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        self.checked_sub(rhs).expect("operator spaces must match")
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        self.checked_mul(rhs).expect("operator spaces must match")
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;

    fn mul(self, rhs: f64) -> Operator {
        self.scale_real(rhs)
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;

    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;

    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}
