//! One-site states, the qubit Bloch ball, product powers `ρ^{⊗N}` and
//! permutation-invariant N-site states.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigenvalues, pauli, tensor, Operator, SitePermutation, SiteSpace, C64, TOL_HERM,
};
use crate::sections::{FrequencySpec, Section, SymmetricSection};

const TRACE_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-12;
/// Tolerance of the permutation-invariance test.
pub const SYMMETRY_TOL: f64 = 1e-10;

fn validate_density(op: &Operator) -> Result<()> {
    let herm = op.hermitian_deviation();
    if herm > TOL_HERM {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
    }
    let tr = op.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
    }
    let min = hermitian_eigenvalues(op)?[0];
    if min < -POSITIVITY_TOL {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

/// A density matrix on one site.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        if op.space().n() != 1 {
            return Err(Error::InvalidState("one-site density matrix expected".into()));
        }
        validate_density(&op)?;
        Ok(Self { op })
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        Ok(Self { op: Operator::identity(SiteSpace::site(d)?).scale_real(1.0 / d as f64) })
    }

    pub fn d(&self) -> usize {
        self.op.space().d()
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    /// `Tr(ρ a)` for a one-site Hermitian `a`.
    pub fn expect(&self, a: &Operator) -> Result<f64> {
        trace_pairing(&self.op, a)
    }

    /// Inverse of [`bloch_to_density`]: `(Tr ρσx, Tr ρσy, Tr ρσz)`.
    pub fn bloch_vector(&self) -> Result<BlochVector> {
        if self.d() != 2 {
            return Err(Error::InvalidArgument(format!("Bloch chart needs d = 2, got {}", self.d())));
        }
        Ok(BlochVector {
            x: self.expect(&pauli::x())?,
            y: self.expect(&pauli::y())?,
            z: self.expect(&pauli::z())?,
        })
    }

    /// `½ Σ |eig(ρ - σ)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        let diff = self.op.checked_sub(&other.op)?;
        Ok(0.5 * hermitian_eigenvalues(&diff)?.iter().map(|l| l.abs()).sum::<f64>())
    }

    pub fn purity(&self) -> f64 {
        self.op.inner(&self.op).re
    }
}

/// A point of the closed unit ball, the qubit state-space chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self { x, y, z };
        let r = v.norm();
        if !(r <= 1.0 + 1e-12) {
            return Err(Error::OutsideBall(r));
        }
        Ok(v)
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_density(self) -> DensityMatrix {
        bloch_to_density(self)
    }
}

/// `ρ = ½ [[1+z, x−iy], [x+iy, 1−z]]`.
pub fn bloch_to_density(v: BlochVector) -> DensityMatrix {
    let space = SiteSpace::site(2).expect("qubit");
    let data = vec![
        C64::new(0.5 * (1.0 + v.z), 0.0),
        C64::new(0.5 * v.x, -0.5 * v.y),
        C64::new(0.5 * v.x, 0.5 * v.y),
        C64::new(0.5 * (1.0 - v.z), 0.0),
    ];
    DensityMatrix { op: Operator::from_row_major(space, data).expect("2x2") }
}

/// A unit vector in `C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidState("need at least two amplitudes".into()));
        }
        let norm = norm2(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("amplitude norm {norm} ≠ 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales to unit norm; rejects the zero vector.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = norm2(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(amplitudes.into_iter().map(|z| z / norm).collect())
    }

    /// Computational basis vector `|k⟩` in `C^d`.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidArgument(format!("basis index {k} ≥ d = {d}")));
        }
        let mut a = vec![C64::new(0.0, 0.0); d];
        a[k] = C64::new(1.0, 0.0);
        Self::new(a)
    }

    /// Unitarily invariant random unit vector.
    pub fn haar_random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        loop {
            let a: Vec<C64> = (0..d)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            if let Ok(s) = Self::normalized(a) {
                return s;
            }
        }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn d(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn density(&self) -> DensityMatrix {
        let space = SiteSpace::site(self.d()).expect("d >= 2");
        DensityMatrix {
            op: Operator::outer(space, &self.amplitudes, &self.amplitudes).expect("lengths match"),
        }
    }

    /// `⟨ψ|P|ψ⟩`; equals `|⟨λ|ψ⟩|²` for `P = |λ⟩⟨λ|`.
    pub fn born_probability(&self, spec: &FrequencySpec) -> Result<f64> {
        if spec.d() != self.d() {
            return Err(Error::MismatchedLocalDimension { left: spec.d(), right: self.d() });
        }
        Ok(spec.projector().quadratic_form(&self.amplitudes)?.re)
    }

    /// The vector `ψ^{⊗n}`.
    pub fn tensor_power(&self, n: usize) -> Result<Vec<C64>> {
        let space = SiteSpace::new(self.d(), n)?;
        let mut v = vec![C64::new(1.0, 0.0)];
        for _ in 0..n {
            v = v.iter().flat_map(|a| self.amplitudes.iter().map(move |b| a * b)).collect();
        }
        debug_assert_eq!(v.len(), space.dim());
        Ok(v)
    }

    /// `⟨ψ^{⊗n}| A |ψ^{⊗n}⟩` for Hermitian `A` on `n` sites.
    pub fn expect_power(&self, a: &Operator) -> Result<f64> {
        if a.space().d() != self.d() {
            return Err(Error::MismatchedLocalDimension { left: a.space().d(), right: self.d() });
        }
        ensure_hermitian(a)?;
        Ok(a.quadratic_form(&self.tensor_power(a.space().n())?)?.re)
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn ensure_hermitian(a: &Operator) -> Result<()> {
    let dev = a.hermitian_deviation();
    if dev > TOL_HERM {
        Err(Error::NotHermitian(dev))
    } else {
        Ok(())
    }
}

fn trace_pairing(rho: &Operator, a: &Operator) -> Result<f64> {
    rho.space().ensure_same(&a.space())?;
    ensure_hermitian(a)?;
    // Tr(ρA) = Σ_{rc} ρ_rc A_cr; ρ and A Hermitian so Tr(ρA) = ⟨ρ, A⟩_F
    Ok(rho.inner(a).re)
}

/// A density matrix on `n` sites with a cached permutation-invariance flag.
#[derive(Debug, Clone, PartialEq)]
pub struct NSiteState {
    rho: Operator,
    symmetric: bool,
}

impl NSiteState {
    /// Validates the density-matrix conditions and computes the flag.
    pub fn new(rho: Operator) -> Result<Self> {
        validate_density(&rho)?;
        let symmetric = permutation_deviation(&rho) <= SYMMETRY_TOL;
        Ok(Self { rho, symmetric })
    }

    pub(crate) fn from_trusted(rho: Operator, symmetric: bool) -> Self {
        Self { rho, symmetric }
    }

    pub fn space(&self) -> SiteSpace {
        self.rho.space()
    }

    pub fn operator(&self) -> &Operator {
        &self.rho
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// `ρ^{⊗n}`.
pub fn product_power(rho: &DensityMatrix, n: usize) -> Result<NSiteState> {
    let space = SiteSpace::new(rho.d(), n)?;
    let mut acc = rho.op.clone();
    for _ in 1..n {
        acc = tensor(&acc, &rho.op)?;
    }
    debug_assert_eq!(acc.space(), space);
    Ok(NSiteState::from_trusted(acc, true))
}

/// `Tr(ρA)` with the (rounding-level) imaginary part discarded.
pub fn expect(state: &NSiteState, a: &Operator) -> Result<f64> {
    trace_pairing(&state.rho, a)
}

/// `A_∞(ρ) = ρ^{⊗m}(A_m)` for a section with seed `A_m`.
///
/// For a symmetric section `ρ^{⊗N}(A_N)` does not depend on `N ≥ m`, so this
/// is also the large-N limit.
pub fn a_infinity(section: &SymmetricSection, rho: &DensityMatrix) -> Result<f64> {
    if rho.d() != section.local_dim() {
        return Err(Error::MismatchedLocalDimension { left: section.local_dim(), right: rho.d() });
    }
    expect(&product_power(rho, section.seed_order())?, section.seed())
}

/// Largest `max |U_τ ρ U_τ† − ρ|` over adjacent transpositions `τ`.
pub fn permutation_deviation(rho: &Operator) -> f64 {
    let n = rho.space().n();
    (1..n)
        .map(|k| {
            let t = SitePermutation::transposition(n, k, k + 1).expect("adjacent sites");
            t.conjugate(rho).map(|c| c.max_abs_diff(rho)).unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max)
}

/// Invariance under the adjacent transpositions, which generate `S_n`.
pub fn is_permutation_invariant(state: &NSiteState) -> bool {
    permutation_deviation(&state.rho) <= SYMMETRY_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(n: usize, d: &[f64]) -> Operator {
        Operator::diagonal(SiteSpace::new(2, n).unwrap(), d)
    }

    #[test]
    fn bloch_examples() {
        let origin = bloch_to_density(BlochVector::new(0.0, 0.0, 0.0).unwrap());
        assert_eq!(origin, DensityMatrix::maximally_mixed(2).unwrap());

        let north = bloch_to_density(BlochVector::new(0.0, 0.0, 1.0).unwrap());
        assert_eq!(north.operator(), &pauli::p0());

        let plus = bloch_to_density(BlochVector::new(1.0, 0.0, 0.0).unwrap());
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(plus.operator().get(r, c), C64::new(0.5, 0.0));
            }
        }
        let ev = hermitian_eig(plus.operator()).unwrap().eigenvalues;
        assert!(ev[0].abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);

        assert!(matches!(BlochVector::new(1.0, 1.0, 0.0), Err(Error::OutsideBall(_))));
    }

    #[test]
    fn bloch_round_trip() {
        let v = BlochVector::new(0.3, -0.4, 0.5).unwrap();
        let back = bloch_to_density(v).bloch_vector().unwrap();
        assert!((back.x - v.x).abs() < 1e-12);
        assert!((back.y - v.y).abs() < 1e-12);
        assert!((back.z - v.z).abs() < 1e-12);
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(pauli::z()).is_err());
        assert!(DensityMatrix::new(pauli::p0().scale_real(2.0)).is_err());
        let neg = Operator::diagonal(SiteSpace::site(2).unwrap(), &[1.5, -0.5]);
        assert!(DensityMatrix::new(neg).is_err());
        assert!(DensityMatrix::new(pauli::p1()).is_ok());
    }

    #[test]
    fn product_power_examples() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let s = product_power(&mixed, 2).unwrap();
        assert_eq!(s.operator(), &diag(2, &[0.25; 4]));
        assert!(s.is_symmetric());

        let p0 = DensityMatrix::new(pauli::p0()).unwrap();
        assert_eq!(product_power(&p0, 2).unwrap().operator(), &diag(2, &[1.0, 0.0, 0.0, 0.0]));

        let psi = PureState::normalized(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let cube = product_power(&psi.density(), 3).unwrap();
        let ev = hermitian_eigenvalues(cube.operator()).unwrap();
        assert_eq!(ev.iter().filter(|l| l.abs() > 1e-10).count(), 1);
    }

    #[test]
    fn expectation_examples() {
        let mixed = product_power(&DensityMatrix::maximally_mixed(2).unwrap(), 1).unwrap();
        assert_eq!(expect(&mixed, &pauli::z()).unwrap(), 0.0);
        assert!((expect(&mixed, &pauli::identity(2)).unwrap() - 1.0).abs() < 1e-15);
        let not_herm = &pauli::x() * &pauli::z();
        assert!(matches!(expect(&mixed, &not_herm), Err(Error::NotHermitian(_))));
        let two = product_power(&DensityMatrix::maximally_mixed(2).unwrap(), 2).unwrap();
        assert!(matches!(expect(&two, &pauli::z()), Err(Error::SpaceMismatch(..))));
    }

    #[test]
    fn born_rule_for_product_powers() {
        let spec = FrequencySpec::basis(2, 1).unwrap();
        let psi = PureState::normalized(vec![C64::new(0.8, 0.0), C64::new(0.6, 0.0)]).unwrap();
        for n in 1..=6 {
            let f = crate::sections::frequency_operator(&spec, n).unwrap();
            let v = expect(&product_power(&psi.density(), n).unwrap(), &f).unwrap();
            assert!((v - 0.36).abs() < 1e-12);
            assert!((psi.expect_power(&f).unwrap() - 0.36).abs() < 1e-12);
        }
    }

    #[test]
    fn a_infinity_examples() {
        let psi = PureState::haar_random(2, &mut ChaCha8Rng::seed_from_u64(3));
        let spec = FrequencySpec::basis(2, 1).unwrap();
        let born = psi.amplitudes()[1].norm_sqr();
        assert!((a_infinity(&spec.section(), &psi.density()).unwrap() - born).abs() < 1e-14);

        let id = SymmetricSection::new(Operator::identity(SiteSpace::new(2, 2).unwrap()));
        let rho = BlochVector::new(0.1, 0.2, 0.3).unwrap().to_density();
        assert!((a_infinity(&id, &rho).unwrap() - 1.0).abs() < 1e-15);

        let zz = SymmetricSection::new(tensor(&pauli::z(), &pauli::z()).unwrap());
        let z0 = -0.7;
        let rho = BlochVector::new(0.0, 0.0, z0).unwrap().to_density();
        assert!((a_infinity(&zz, &rho).unwrap() - z0 * z0).abs() < 1e-15);
    }

    #[test]
    fn permutation_invariance_examples() {
        let rho = BlochVector::new(0.2, 0.1, -0.5).unwrap().to_density();
        assert!(is_permutation_invariant(&product_power(&rho, 4).unwrap()));

        let s01 = NSiteState::new(diag(2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(!is_permutation_invariant(&s01));
        assert!(!s01.is_symmetric());

        let mix = NSiteState::new(diag(2, &[0.0, 0.5, 0.5, 0.0])).unwrap();
        assert!(is_permutation_invariant(&mix));
        assert!(mix.is_symmetric());
    }
}
