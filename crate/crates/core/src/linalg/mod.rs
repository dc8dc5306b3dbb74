//! Dense complex operators on multi-site Hilbert spaces `(C^d)^{⊗n}`.
//!
//! Site ordering: site 1 is the leftmost, slowest-varying tensor factor, so in
//! a basis index `r = Σ_k x_k d^{n-k}` the digit of site `k` has place value
//! `d^{n-k}`. Every index computation in the crate goes through
//! [`SiteSpace::place_value`] and [`SiteSpace::digit`].

mod operator;
pub mod pauli;
mod perm;
mod spectral;

pub use operator::Operator;
pub use perm::SitePermutation;
pub use spectral::{
    commutator, hermitian_eig, hermitian_eigenvalues, spectral_norm, SpectralData,
    POWER_ITERATION_DIM,
};

use crate::error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Relative tolerance for eigen-decompositions.
pub const TOL_EIG: f64 = 1e-10;
/// Absolute entrywise tolerance for the Hermiticity test.
pub const TOL_HERM: f64 = 1e-12;

/// `n` copies of a `d`-dimensional site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SiteSpace {
    d: usize,
    n: usize,
    dim: usize,
}

impl SiteSpace {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidSpace(format!("local dimension {d} < 2")));
        }
        if n == 0 {
            return Err(Error::InvalidSpace("site count must be at least 1".into()));
        }
        let dim = u32::try_from(n)
            .ok()
            .and_then(|n32| d.checked_pow(n32))
            .filter(|dim| dim.checked_mul(*dim).is_some())
            .ok_or(Error::DimensionOverflow { d, n })?;
        Ok(Self { d, n, dim })
    }

    /// A single site of dimension `d`.
    pub fn site(d: usize) -> Result<Self> {
        Self::new(d, 1)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Place value `d^{n-k}` of 1-based site `k`.
    #[inline]
    pub fn place_value(&self, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.n);
        self.d.pow((self.n - k) as u32)
    }

    /// Digit of 1-based site `k` in basis index `index`.
    #[inline]
    pub fn digit(&self, index: usize, k: usize) -> usize {
        (index / self.place_value(k)) % self.d
    }

    /// Digits of `index`, site 1 first.
    pub fn digits(&self, index: usize) -> Vec<usize> {
        (1..=self.n).map(|k| self.digit(index, k)).collect()
    }

    /// Basis index of a digit string, site 1 first.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.n);
        digits.iter().fold(0, |acc, &x| acc * self.d + x)
    }

    pub(crate) fn ensure_same(&self, other: &SiteSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(self.d, self.n, other.d, other.n))
        }
    }
}

/// Kronecker product with `a`'s sites leftmost.
pub fn tensor(a: &Operator, b: &Operator) -> Result<Operator> {
    let (sa, sb) = (a.space(), b.space());
    if sa.d() != sb.d() {
        return Err(Error::MismatchedLocalDimension { left: sa.d(), right: sb.d() });
    }
    let space = SiteSpace::new(sa.d(), sa.n() + sb.n())?;
    let (da, db) = (sa.dim(), sb.dim());
    let dim = space.dim();
    let mut data = vec![C64::new(0.0, 0.0); dim * dim];
    for ra in 0..da {
        for ca in 0..da {
            let x = a.get(ra, ca);
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for rb in 0..db {
                let row = (ra * db + rb) * dim + ca * db;
                for cb in 0..db {
                    data[row + cb] = x * b.get(rb, cb);
                }
            }
        }
    }
    Operator::from_row_major(space, data)
}

/// `1 ⊗ … ⊗ b ⊗ … ⊗ 1` with `b` on 1-based site `k` of `n`.
pub fn embed_at_site(b: &Operator, k: usize, n: usize) -> Result<Operator> {
    if b.space().n() != 1 {
        return Err(Error::InvalidArgument(format!(
            "embedded operator must act on one site, got {}",
            b.space().n()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::SiteOutOfRange { site: k, n });
    }
    let d = b.space().d();
    let space = SiteSpace::new(d, n)?;
    let dim = space.dim();
    let pv = space.place_value(k);
    let mut data = vec![C64::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        let x = space.digit(r, k);
        let base = r - x * pv;
        for y in 0..d {
            data[r * dim + base + y * pv] = b.get(x, y);
        }
    }
    Operator::from_row_major(space, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn space_rejects_zero_sites_and_overflow() {
        assert!(SiteSpace::new(2, 0).is_err());
        assert!(SiteSpace::new(1, 3).is_err());
        assert_eq!(SiteSpace::new(2, 10).unwrap().dim(), 1024);
        assert!(matches!(SiteSpace::new(2, 40), Err(Error::DimensionOverflow { .. })));
    }

    #[test]
    fn site_one_is_most_significant() {
        let s = SiteSpace::new(2, 3).unwrap();
        // |100> has index 4
        assert_eq!(s.index_of(&[1, 0, 0]), 4);
        assert_eq!(s.digit(4, 1), 1);
        assert_eq!(s.digits(6), vec![1, 1, 0]);
    }

    #[test]
    fn tensor_of_identities_and_projectors() {
        let i2 = pauli::identity(2);
        let i4 = tensor(&i2, &i2).unwrap();
        assert_eq!(i4, Operator::identity(SiteSpace::new(2, 2).unwrap()));

        let p0 = pauli::p0();
        let pp = tensor(&p0, &p0).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let want = if r == 0 && col == 0 { 1.0 } else { 0.0 };
                assert_eq!(pp.get(r, col), c(want));
            }
        }
    }

    #[test]
    fn tensor_x_z_blocks() {
        // σx ⊗ σz = [[0, Z], [Z, 0]] with Z = diag(1, -1)
        let xz = tensor(&pauli::x(), &pauli::z()).unwrap();
        let expected = [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
        ];
        for (r, row) in expected.iter().enumerate() {
            for (col, v) in row.iter().enumerate() {
                assert_eq!(xz.get(r, col), c(*v), "entry ({r},{col})");
            }
        }
    }

    #[test]
    fn tensor_rejects_mixed_local_dims() {
        let a = pauli::identity(2);
        let b = pauli::identity(3);
        assert!(matches!(tensor(&a, &b), Err(Error::MismatchedLocalDimension { .. })));
    }

    #[test]
    fn embed_examples() {
        assert_eq!(embed_at_site(&pauli::z(), 1, 1).unwrap(), pauli::z());
        let e = embed_at_site(&pauli::p1(), 2, 2).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| e.get(i, i).re).collect();
        assert_eq!(diag, vec![0.0, 1.0, 0.0, 1.0]);
        assert!(e.is_diagonal());
        assert!(matches!(
            embed_at_site(&pauli::z(), 3, 2),
            Err(Error::SiteOutOfRange { site: 3, n: 2 })
        ));
        assert!(embed_at_site(&pauli::z(), 0, 2).is_err());
    }

    #[test]
    fn embed_matches_kronecker_chain() {
        let b = pauli::y();
        for n in 1..=4 {
            for k in 1..=n {
                let mut acc: Option<Operator> = None;
                for site in 1..=n {
                    let f = if site == k { b.clone() } else { pauli::identity(2) };
                    acc = Some(match acc {
                        None => f,
                        Some(a) => tensor(&a, &f).unwrap(),
                    });
                }
                assert_eq!(embed_at_site(&b, k, n).unwrap(), acc.unwrap());
            }
        }
    }

    #[test]
    fn disjoint_sites_commute() {
        let a = embed_at_site(&pauli::x(), 1, 2).unwrap();
        let b = embed_at_site(&pauli::z(), 2, 2).unwrap();
        assert_eq!(commutator(&a, &b).unwrap().max_abs(), 0.0);
    }
}
