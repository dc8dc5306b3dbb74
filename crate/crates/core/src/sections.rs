//! Symmetrization calculus: `S_N`, the embeddings `j_NM`, frequency operators,
//! and section objects `N ↦ A_N`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Operator, SitePermutation, SiteSpace, C64, TOL_EIG, TOL_HERM};

/// Cost bounds for the symmetrization maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Symmetrizer {
    /// Largest seed order accepted by [`Symmetrizer::j_nm`].
    pub max_seed_order: usize,
    /// Largest site count for the direct `n!`-term sum in
    /// [`Symmetrizer::symmetrize`].
    pub max_direct_sites: usize,
}

impl Default for Symmetrizer {
    fn default() -> Self {
        Self { max_seed_order: 3, max_direct_sites: 8 }
    }
}

impl Symmetrizer {
    /// `(1/n!) Σ_σ U_σ A U_σ†` by direct enumeration of the symmetric group.
    ///
    /// Permutations are visited in Heap's order, so each basis-index table is
    /// obtained from the previous one by a single site transposition.
    pub fn symmetrize(&self, a: &Operator) -> Result<Operator> {
        let space = a.space();
        let n = space.n();
        if n > self.max_direct_sites {
            return Err(Error::OrderTooLarge { order: n, bound: self.max_direct_sites });
        }
        let dim = space.dim();
        let swaps: Vec<Vec<usize>> = (1..n)
            .map(|i| SitePermutation::transposition(n, i, i + 1).and_then(|t| t.index_map(&space)))
            .collect::<Result<_>>()?;
        let transposition = |i: usize, j: usize| -> Result<Vec<usize>> {
            if j == i + 1 {
                Ok(swaps[i - 1].clone())
            } else {
                SitePermutation::transposition(n, i, j)?.index_map(&space)
            }
        };

        let mut acc = vec![C64::new(0.0, 0.0); dim * dim];
        let mut map: Vec<usize> = (0..dim).collect();
        let mut count: u64 = 0;
        let mut accumulate = |map: &[usize], count: &mut u64| {
            for r in 0..dim {
                let base = map[r] * dim;
                for (c, v) in a.row(r).iter().enumerate() {
                    acc[base + map[c]] += v;
                }
            }
            *count += 1;
        };
        accumulate(&map, &mut count);

        // iterative Heap's algorithm over site positions 1..=n
        let mut stack = vec![0usize; n];
        let mut i = 1;
        while i < n {
            if stack[i] < i {
                let (p, q) = if i % 2 == 0 { (1, i + 1) } else { (stack[i] + 1, i + 1) };
                let t = transposition(p, q)?;
                map = t.iter().map(|&r| map[r]).collect();
                accumulate(&map, &mut count);
                stack[i] += 1;
                i = 1;
            } else {
                stack[i] = 0;
                i += 1;
            }
        }
        let scale = 1.0 / count as f64;
        Operator::from_row_major(space, acc.into_iter().map(|z| z * scale).collect())
    }

    /// `j_NM(A_M) = S_N(A_M ⊗ 1^{⊗(N-M)})`.
    ///
    /// Evaluated as a sum over the `N!/(N-M)!` ordered placements of the seed
    /// sites, each placement expanded in the seed's matrix-unit basis. Only
    /// nonzero seed entries contribute.
    pub fn j_nm(&self, n: usize, m: usize, a: &Operator) -> Result<Operator> {
        let seed_space = a.space();
        if seed_space.n() != m {
            return Err(Error::InvalidArgument(format!(
                "seed acts on {} sites but m = {m}",
                seed_space.n()
            )));
        }
        if n < m {
            return Err(Error::BadOrder { n, m });
        }
        if m > self.max_seed_order {
            return Err(Error::OrderTooLarge { order: m, bound: self.max_seed_order });
        }
        let d = seed_space.d();
        let space = SiteSpace::new(d, n)?;
        let dim = space.dim();
        let dm = seed_space.dim();

        let placements: Vec<Vec<usize>> = ordered_placements(n, m)
            .into_iter()
            .map(|sites| sites.iter().map(|&s| space.place_value(s)).collect())
            .collect();
        // nonzero entries per seed row, with the seed column's digits
        let seed_rows: Vec<Vec<(Vec<usize>, C64)>> = (0..dm)
            .map(|i| {
                (0..dm)
                    .filter_map(|j| {
                        let v = a.get(i, j);
                        (v != C64::new(0.0, 0.0)).then(|| (seed_space.digits(j), v))
                    })
                    .collect()
            })
            .collect();
        let scale = 1.0 / placements.len() as f64;

        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        data.par_chunks_mut(dim).enumerate().for_each(|(r, out)| {
            for pvs in &placements {
                let mut i = 0;
                let mut base = r;
                for &pv in pvs {
                    let x = (r / pv) % d;
                    i = i * d + x;
                    base -= x * pv;
                }
                for (digits, v) in &seed_rows[i] {
                    let c = base + digits.iter().zip(pvs).map(|(y, pv)| y * pv).sum::<usize>();
                    out[c] += v;
                }
            }
            out.iter_mut().for_each(|z| *z *= scale);
        });
        Operator::from_row_major(space, data)
    }
}

/// All ordered `m`-tuples of distinct 1-based sites out of `n`.
pub fn ordered_placements(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn extend(n: usize, m: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for s in 1..=n {
            if !used[s - 1] {
                used[s - 1] = true;
                cur.push(s);
                extend(n, m, cur, used, out);
                cur.pop();
                used[s - 1] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(n, m, &mut Vec::with_capacity(m), &mut vec![false; n], &mut out);
    out
}

/// [`Symmetrizer::symmetrize`] with default bounds.
pub fn symmetrize(a: &Operator) -> Result<Operator> {
    Symmetrizer::default().symmetrize(a)
}

/// [`Symmetrizer::j_nm`] with default bounds.
pub fn j_nm(n: usize, m: usize, a: &Operator) -> Result<Operator> {
    Symmetrizer::default().j_nm(n, m, a)
}

/// A one-site projector whose site average is the frequency operator.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySpec {
    projector: Operator,
}

impl FrequencySpec {
    pub fn new(projector: Operator) -> Result<Self> {
        if projector.space().n() != 1 {
            return Err(Error::NotProjector("must act on a single site".into()));
        }
        let herm = projector.hermitian_deviation();
        if herm > TOL_HERM {
            return Err(Error::NotProjector(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let idem = (&projector * &projector).max_abs_diff(&projector);
        if idem > TOL_HERM {
            return Err(Error::NotProjector(format!("P² ≠ P (deviation {idem:.3e})")));
        }
        Ok(Self { projector })
    }

    /// `|λ⟩⟨λ|` for a computational basis vector `λ` of a `d`-level site.
    pub fn basis(d: usize, outcome: usize) -> Result<Self> {
        if outcome >= d {
            return Err(Error::InvalidArgument(format!("outcome {outcome} ≥ d = {d}")));
        }
        let mut diag = vec![0.0; d];
        diag[outcome] = 1.0;
        Self::new(Operator::diagonal(SiteSpace::site(d)?, &diag))
    }

    /// `|λ⟩⟨λ|` for an arbitrary vector, normalized first.
    pub fn from_vector(lambda: &[C64]) -> Result<Self> {
        let norm = lambda.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero vector".into()));
        }
        let u: Vec<C64> = lambda.iter().map(|z| z / norm).collect();
        Self::new(Operator::outer(SiteSpace::site(lambda.len())?, &u, &u)?)
    }

    pub fn projector(&self) -> &Operator {
        &self.projector
    }

    pub fn d(&self) -> usize {
        self.projector.space().d()
    }

    pub fn rank(&self) -> usize {
        self.projector.trace().re.round() as usize
    }

    /// The order-one section `N ↦ f_N`.
    pub fn section(&self) -> SymmetricSection {
        SymmetricSection::new(self.projector.clone())
    }
}

/// `f_N = j_N1(P) = (1/N) Σ_k P_k`.
pub fn frequency_operator(spec: &FrequencySpec, n: usize) -> Result<Operator> {
    j_nm(n, 1, spec.projector())
}

/// A sequence `N ↦ A_N` defined for `N` at or above its seed order.
pub trait Section: Send + Sync {
    fn local_dim(&self) -> usize;
    fn seed_order(&self) -> usize;
    fn materialize(&self, n: usize) -> Result<Operator>;
}

/// `A_N = j_NM(A_M)` for a fixed seed `A_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSection {
    seed: Operator,
    symmetrizer: Symmetrizer,
}

impl SymmetricSection {
    pub fn new(seed: Operator) -> Self {
        Self { seed, symmetrizer: Symmetrizer::default() }
    }

    /// Order-one section `N ↦ j_N1(b)`, the site average of `b`.
    pub fn averaged(b: Operator) -> Result<Self> {
        if b.space().n() != 1 {
            return Err(Error::InvalidArgument("averaged observable must be one-site".into()));
        }
        Ok(Self::new(b))
    }

    pub fn with_symmetrizer(mut self, symmetrizer: Symmetrizer) -> Self {
        self.symmetrizer = symmetrizer;
        self
    }

    pub fn seed(&self) -> &Operator {
        &self.seed
    }
}

impl Section for SymmetricSection {
    fn local_dim(&self) -> usize {
        self.seed.space().d()
    }

    fn seed_order(&self) -> usize {
        self.seed.space().n()
    }

    fn materialize(&self, n: usize) -> Result<Operator> {
        self.symmetrizer.j_nm(n, self.seed_order(), &self.seed)
    }
}

type PerturbationFn = dyn Fn(usize) -> Result<Operator> + Send + Sync;

/// A symmetric section plus a perturbation with declared norm decay
/// `‖perturbation(N)‖ ≤ c·N^(-γ)`.
#[derive(Clone)]
pub struct PerturbedSection {
    base: SymmetricSection,
    perturbation: Arc<PerturbationFn>,
    c: f64,
    gamma: f64,
}

impl fmt::Debug for PerturbedSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbedSection")
            .field("base", &self.base)
            .field("c", &self.c)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

impl PerturbedSection {
    pub fn new(
        base: SymmetricSection,
        c: f64,
        gamma: f64,
        perturbation: impl Fn(usize) -> Result<Operator> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(c >= 0.0) || !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "decay constants must satisfy c ≥ 0, γ > 0 (got c={c}, γ={gamma})"
            )));
        }
        Ok(Self { base, perturbation: Arc::new(perturbation), c, gamma })
    }

    pub fn base(&self) -> &SymmetricSection {
        &self.base
    }

    pub fn decay_bound(&self, n: usize) -> f64 {
        self.c * (n as f64).powf(-self.gamma)
    }
}

impl Section for PerturbedSection {
    fn local_dim(&self) -> usize {
        self.base.local_dim()
    }

    fn seed_order(&self) -> usize {
        self.base.seed_order()
    }

    /// Fails with [`Error::DecayViolation`] when the perturbation breaks its
    /// declared bound at `n`.
    fn materialize(&self, n: usize) -> Result<Operator> {
        let base = self.base.materialize(n)?;
        let pert = (self.perturbation)(n)?;
        let norm = spectral_norm(&pert)?;
        let bound = self.decay_bound(n);
        if norm > bound + 10.0 * TOL_EIG {
            return Err(Error::DecayViolation { n, norm, bound });
        }
        base.checked_add(&pert)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{embed_at_site, hermitian_eigenvalues, pauli, tensor};

    fn kron(ops: &[Operator]) -> Operator {
        ops[1..].iter().fold(ops[0].clone(), |acc, o| tensor(&acc, o).unwrap())
    }

    fn i2() -> Operator {
        pauli::identity(2)
    }

    #[test]
    fn placements_count() {
        assert_eq!(ordered_placements(4, 2).len(), 12);
        assert_eq!(ordered_placements(3, 3).len(), 6);
        assert_eq!(ordered_placements(5, 1), vec![vec![1], vec![2], vec![3], vec![4], vec![5]]);
    }

    #[test]
    fn symmetrize_two_site_examples() {
        let x1 = kron(&[pauli::x(), i2()]);
        let expected = (&x1 + &kron(&[i2(), pauli::x()])).scale_real(0.5);
        assert!(symmetrize(&x1).unwrap().max_abs_diff(&expected) < 1e-15);

        let xz = kron(&[pauli::x(), pauli::z()]);
        let expected = (&xz + &kron(&[pauli::z(), pauli::x()])).scale_real(0.5);
        assert!(symmetrize(&xz).unwrap().max_abs_diff(&expected) < 1e-15);

        assert!(symmetrize(&expected).unwrap().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn symmetrize_visits_every_permutation_once() {
        // |0001⟩⟨0001| averages to the uniform mixture over weight-1 strings
        let space = SiteSpace::new(2, 4).unwrap();
        let mut diag = vec![0.0; 16];
        diag[1] = 1.0;
        let s = symmetrize(&Operator::diagonal(space, &diag)).unwrap();
        for i in 0..16 {
            let want = if (i as u32).count_ones() == 1 { 0.25 } else { 0.0 };
            assert!((s.get(i, i).re - want).abs() < 1e-15, "index {i}");
        }
    }

    #[test]
    fn symmetrize_respects_bound() {
        let tight = Symmetrizer { max_direct_sites: 2, ..Default::default() };
        let a = Operator::identity(SiteSpace::new(2, 3).unwrap());
        assert!(matches!(tight.symmetrize(&a), Err(Error::OrderTooLarge { order: 3, bound: 2 })));
    }

    #[test]
    fn j_nm_examples() {
        let xx = kron(&[pauli::x(), pauli::x()]);
        assert!(j_nm(2, 2, &xx).unwrap().max_abs_diff(&xx) < 1e-15);

        let xz = kron(&[pauli::x(), pauli::z()]);
        assert!(j_nm(2, 2, &xz).unwrap().max_abs_diff(&symmetrize(&xz).unwrap()) < 1e-15);

        let z = pauli::z();
        let avg = (&(&kron(&[z.clone(), i2(), i2()]) + &kron(&[i2(), z.clone(), i2()]))
            + &kron(&[i2(), i2(), z.clone()]))
            .scale_real(1.0 / 3.0);
        assert!(j_nm(3, 1, &z).unwrap().max_abs_diff(&avg) < 1e-15);

        let inner = j_nm(2, 1, &z).unwrap();
        let lhs = j_nm(4, 2, &inner).unwrap();
        let rhs = j_nm(4, 1, &z).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn j_nm_errors() {
        assert!(matches!(j_nm(1, 2, &kron(&[i2(), i2()])), Err(Error::BadOrder { n: 1, m: 2 })));
        let seed4 = Operator::identity(SiteSpace::new(2, 4).unwrap());
        assert!(matches!(j_nm(5, 4, &seed4), Err(Error::OrderTooLarge { .. })));
        assert!(j_nm(3, 2, &pauli::z()).is_err());
    }

    #[test]
    fn frequency_operator_spectra() {
        let spec = FrequencySpec::basis(2, 1).unwrap();
        assert_eq!(frequency_operator(&spec, 1).unwrap(), pauli::p1());

        let ev = hermitian_eigenvalues(&frequency_operator(&spec, 2).unwrap()).unwrap();
        assert_eq!(ev, vec![0.0, 0.5, 0.5, 1.0]);

        let ev = hermitian_eigenvalues(&frequency_operator(&spec, 3).unwrap()).unwrap();
        let mut counts = [0usize; 4];
        for l in ev {
            let k = (l * 3.0).round();
            assert!((l - k / 3.0).abs() < 1e-14);
            counts[k as usize] += 1;
        }
        assert_eq!(counts, [1, 3, 3, 1]);
    }

    #[test]
    fn frequency_operator_matches_site_embedding_sum() {
        let spec = FrequencySpec::from_vector(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        for n in 1..=5 {
            let mut sum = Operator::zeros(SiteSpace::new(2, n).unwrap());
            for k in 1..=n {
                sum.add_scaled(&embed_at_site(spec.projector(), k, n).unwrap(), C64::new(1.0, 0.0))
                    .unwrap();
            }
            let avg = sum.scale_real(1.0 / n as f64);
            assert!(frequency_operator(&spec, n).unwrap().max_abs_diff(&avg) < 1e-15);
        }
    }

    #[test]
    fn frequency_spec_validation() {
        assert!(FrequencySpec::new(pauli::z()).is_err());
        assert!(FrequencySpec::new(pauli::x().scale_real(0.5)).is_err());
        assert!(FrequencySpec::basis(2, 2).is_err());
        assert_eq!(FrequencySpec::basis(3, 0).unwrap().rank(), 1);
    }

    #[test]
    fn materialize_examples() {
        let spec = FrequencySpec::basis(2, 1).unwrap();
        assert_eq!(spec.section().materialize(1).unwrap(), pauli::p1());

        let x = pauli::x();
        let s = SymmetricSection::new(kron(&[x.clone(), x.clone()]));
        let expected = (&(&kron(&[x.clone(), x.clone(), i2()]) + &kron(&[x.clone(), i2(), x.clone()]))
            + &kron(&[i2(), x.clone(), x.clone()]))
            .scale_real(1.0 / 3.0);
        assert!(s.materialize(3).unwrap().max_abs_diff(&expected) < 1e-15);
        assert!(matches!(s.materialize(1), Err(Error::BadOrder { .. })));
    }

    #[test]
    fn perturbed_section_adds_and_checks_decay() {
        let base = SymmetricSection::averaged(pauli::x()).unwrap();
        let p = PerturbedSection::new(base.clone(), 1.0, 1.0, |n| {
            Ok(j_nm(n, 1, &pauli::z())?.scale_real(1.0 / n as f64))
        })
        .unwrap();
        for n in 1..=4 {
            let want = &base.materialize(n).unwrap()
                + &j_nm(n, 1, &pauli::z()).unwrap().scale_real(1.0 / n as f64);
            assert!(p.materialize(n).unwrap().max_abs_diff(&want) < 1e-15);
        }

        let liar = PerturbedSection::new(base, 0.1, 2.0, |n| j_nm(n, 1, &pauli::z())).unwrap();
        assert!(matches!(liar.materialize(2), Err(Error::DecayViolation { n: 2, .. })));
        assert!(PerturbedSection::new(
            SymmetricSection::new(pauli::z()),
            1.0,
            0.0,
            |n| j_nm(n, 1, &pauli::z())
        )
        .is_err());
    }
}
