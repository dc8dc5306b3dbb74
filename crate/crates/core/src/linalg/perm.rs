use super::{Operator, SiteSpace};
use crate::error::{Error, Result};

/// A permutation `σ` of the sites of an `n`-site space.
///
/// The associated unitary acts on basis strings by moving the digit of site
/// `k` to site `σ(k)`: `U_σ |x_1 … x_n⟩ = |y⟩` with `y_{σ(k)} = x_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SitePermutation {
    // 0-based images
    images: Vec<usize>,
}

impl SitePermutation {
    /// Builds from 1-based images `σ(1), …, σ(n)`.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &s in images {
            if s == 0 || s > n || seen[s - 1] {
                return Err(Error::InvalidArgument(format!("{images:?} is not a permutation")));
            }
            seen[s - 1] = true;
        }
        Ok(Self { images: images.iter().map(|s| s - 1).collect() })
    }

    pub fn identity(n: usize) -> Self {
        Self { images: (0..n).collect() }
    }

    /// Exchange of 1-based sites `i` and `j`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Result<Self> {
        for s in [i, j] {
            if s == 0 || s > n {
                return Err(Error::SiteOutOfRange { site: s, n });
            }
        }
        let mut p = Self::identity(n);
        p.images.swap(i - 1, j - 1);
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Basis-index image table `r ↦ U_σ r` on `space`.
    pub fn index_map(&self, space: &SiteSpace) -> Result<Vec<usize>> {
        if space.n() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "permutation of {} sites applied to {} sites",
                self.len(),
                space.n()
            )));
        }
        let n = space.n();
        let mut y = vec![0; n];
        Ok((0..space.dim())
            .map(|r| {
                for k in 0..n {
                    y[self.images[k]] = space.digit(r, k + 1);
                }
                space.index_of(&y)
            })
            .collect())
    }

    /// `U_σ A U_σ†`.
    pub fn conjugate(&self, a: &Operator) -> Result<Operator> {
        let map = self.index_map(&a.space())?;
        Ok(conjugate_by_map(a, &map))
    }
}

/// `U A U†` for the permutation unitary with basis-index table `map`.
pub(crate) fn conjugate_by_map(a: &Operator, map: &[usize]) -> Operator {
    let dim = a.dim();
    let mut out = Operator::zeros(a.space());
    let data = out.entries_mut();
    for r in 0..dim {
        let row = a.row(r);
        let base = map[r] * dim;
        for (c, v) in row.iter().enumerate() {
            data[base + map[c]] = *v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli, tensor};

    #[test]
    fn swap_conjugation_exchanges_factors() {
        let xz = tensor(&pauli::x(), &pauli::z()).unwrap();
        let zx = tensor(&pauli::z(), &pauli::x()).unwrap();
        let swap = SitePermutation::transposition(2, 1, 2).unwrap();
        assert_eq!(swap.conjugate(&xz).unwrap(), zx);
    }

    #[test]
    fn cycle_moves_factor() {
        // σ = (1→2, 2→3, 3→1) moves the X on site 1 to site 2
        let x11 = tensor(&tensor(&pauli::x(), &pauli::identity(2)).unwrap(), &pauli::identity(2))
            .unwrap();
        let x2 = crate::linalg::embed_at_site(&pauli::x(), 2, 3).unwrap();
        let sigma = SitePermutation::from_images(&[2, 3, 1]).unwrap();
        assert_eq!(sigma.conjugate(&x11).unwrap(), x2);
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(SitePermutation::from_images(&[1, 1]).is_err());
        assert!(SitePermutation::from_images(&[0, 1]).is_err());
        assert!(SitePermutation::transposition(3, 1, 4).is_err());
    }
}
