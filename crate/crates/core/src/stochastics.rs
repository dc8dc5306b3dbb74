//! Bernoulli sequences, Monte Carlo strong-law checks, and the map from
//! finitely generated cylinder events to diagonal projections.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{embed_at_site, pauli, Operator, SiteSpace};
use crate::states::PureState;

/// Largest number of distinct sites an expression may mention.
pub const MAX_EVENT_SITES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernoulliSpec {
    p: f64,
}

impl BernoulliSpec {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("Bernoulli parameter {p} outside [0, 1]")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Generator for trial `trial` under `seed`. Each trial owns a ChaCha stream,
/// so draws do not depend on how trials are scheduled.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform draw on `[0, 1)` with 53 random bits.
pub fn uniform53(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn bernoulli_bit(rng: &mut impl RngCore, p: f64) -> bool {
    uniform53(rng) < p
}

/// Row-per-trial packed bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        Self { rows, cols, words_per_row, words: vec![0; rows * words_per_row] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "bit index out of range");
        self.words[r * self.words_per_row + c / 64] >> (c % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, bit: bool) {
        assert!(r < self.rows && c < self.cols, "bit index out of range");
        let w = &mut self.words[r * self.words_per_row + c / 64];
        if bit {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    pub fn row_ones(&self, r: usize) -> usize {
        let start = r * self.words_per_row;
        self.words[start..start + self.words_per_row].iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn row_mean(&self, r: usize) -> f64 {
        self.row_ones(r) as f64 / self.cols as f64
    }

    pub fn ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

fn check_sizes(n: usize, trials: usize) -> Result<()> {
    if n == 0 || trials == 0 {
        return Err(Error::InvalidArgument("horizon and trial count must be positive".into()));
    }
    Ok(())
}

/// `trials × n` i.i.d. Bernoulli(p) bits, reproducible from `seed`.
pub fn sample_sequences(spec: BernoulliSpec, n: usize, trials: usize, seed: u64) -> Result<BitMatrix> {
    check_sizes(n, trials)?;
    let mut out = BitMatrix::zeros(trials, n);
    let wpr = out.words_per_row;
    out.words.par_chunks_mut(wpr).enumerate().for_each(|(t, row)| {
        let mut rng = trial_rng(seed, t as u64);
        for c in 0..n {
            if bernoulli_bit(&mut rng, spec.p) {
                row[c / 64] |= 1 << (c % 64);
            }
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SllnReport {
    pub p: f64,
    pub horizon: usize,
    pub trials: usize,
    pub delta: f64,
    pub hits: usize,
    pub hit_fraction: f64,
    pub hoeffding_bound: f64,
}

/// `2·exp(−2nδ²)`.
pub fn hoeffding_bound(n: usize, delta: f64) -> f64 {
    2.0 * (-2.0 * n as f64 * delta * delta).exp()
}

/// Fraction of trials whose sample mean over `n` draws lies within `δ` of
/// `p`. Uses the same streams as [`sample_sequences`] without storing bits.
pub fn slln_check(spec: BernoulliSpec, n: usize, trials: usize, delta: f64, seed: u64) -> Result<SllnReport> {
    check_sizes(n, trials)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {delta} must be > 0")));
    }
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = trial_rng(seed, t as u64);
            let ones = (0..n).filter(|_| bernoulli_bit(&mut rng, spec.p)).count();
            (ones as f64 / n as f64 - spec.p).abs() <= delta
        })
        .count();
    Ok(SllnReport {
        p: spec.p,
        horizon: n,
        trials,
        delta,
        hits,
        hit_fraction: hits as f64 / trials as f64,
        hoeffding_bound: hoeffding_bound(n, delta),
    })
}

/// Finite set of constraints "bit at site `k` equals `ε`" (sites 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CylinderEvent {
    constraints: BTreeMap<usize, u8>,
}

impl CylinderEvent {
    pub fn new(constraints: impl IntoIterator<Item = (usize, u8)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, bit) in constraints {
            if k == 0 {
                return Err(Error::InvalidArgument("cylinder sites start at 1".into()));
            }
            if bit > 1 {
                return Err(Error::InvalidArgument(format!("bit value {bit} is not 0 or 1")));
            }
            if map.insert(k, bit).is_some() {
                return Err(Error::InvalidArgument(format!("site {k} constrained twice")));
            }
        }
        if map.len() > MAX_EVENT_SITES {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_EVENT_SITES} constraints per event"
            )));
        }
        Ok(Self { constraints: map })
    }

    /// The generating event `B_k^(ε)`.
    pub fn single(k: usize, bit: u8) -> Result<Self> {
        Self::new([(k, bit)])
    }

    pub fn constraints(&self) -> &BTreeMap<usize, u8> {
        &self.constraints
    }

    pub fn matches(&self, bit_at: impl Fn(usize) -> u8) -> bool {
        self.constraints.iter().all(|(&k, &b)| bit_at(k) == b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BooleanExpr {
    Event(CylinderEvent),
    And(Box<BooleanExpr>, Box<BooleanExpr>),
    Or(Box<BooleanExpr>, Box<BooleanExpr>),
    Not(Box<BooleanExpr>),
}

impl BooleanExpr {
    pub fn leaf(k: usize, bit: u8) -> Result<Self> {
        Ok(Self::Event(CylinderEvent::single(k, bit)?))
    }

    pub fn and(a: Self, b: Self) -> Self {
        Self::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        Self::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Self) -> Self {
        Self::Not(Box::new(a))
    }

    pub fn sites(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_sites(&mut out);
        out
    }

    fn collect_sites(&self, out: &mut BTreeSet<usize>) {
        match self {
            Self::Event(e) => out.extend(e.constraints.keys().copied()),
            Self::And(a, b) | Self::Or(a, b) => {
                a.collect_sites(out);
                b.collect_sites(out);
            }
            Self::Not(a) => a.collect_sites(out),
        }
    }

    pub fn max_site(&self) -> usize {
        self.sites().last().copied().unwrap_or(0)
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Self::Event(_) => 1,
            Self::And(a, b) | Self::Or(a, b) => a.leaf_count() + b.leaf_count(),
            Self::Not(a) => a.leaf_count(),
        }
    }

    /// Truth value on a sequence given by `bit_at(k)`.
    pub fn eval(&self, bit_at: &impl Fn(usize) -> u8) -> bool {
        match self {
            Self::Event(e) => e.matches(bit_at),
            Self::And(a, b) => a.eval(bit_at) && b.eval(bit_at),
            Self::Or(a, b) => a.eval(bit_at) || b.eval(bit_at),
            Self::Not(a) => !a.eval(bit_at),
        }
    }

    fn check_horizon(&self, n: usize) -> Result<()> {
        match self.max_site() {
            k if k > n => Err(Error::SiteBeyondHorizon { site: k, horizon: n }),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for BooleanExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Event(e) => {
                let parts: Vec<String> =
                    e.constraints.iter().map(|(k, b)| format!("b{k}={b}")).collect();
                if parts.len() == 1 {
                    write!(f, "{}", parts[0])
                } else {
                    write!(f, "and({})", parts.join(","))
                }
            }
            Self::And(a, b) => write!(f, "and({a},{b})"),
            Self::Or(a, b) => write!(f, "or({a},{b})"),
            Self::Not(a) => write!(f, "not({a})"),
        }
    }
}

/// Random expression with `leaves` generating events on sites `1..=n`.
pub fn random_expression<R: Rng + ?Sized>(rng: &mut R, leaves: usize, n: usize) -> BooleanExpr {
    assert!(leaves >= 1 && n >= 1);
    let mut expr = if leaves == 1 {
        BooleanExpr::leaf(rng.random_range(1..=n), rng.random_range(0..=1)).expect("valid leaf")
    } else {
        let left = rng.random_range(1..leaves);
        let a = random_expression(rng, left, n);
        let b = random_expression(rng, leaves - left, n);
        if rng.random_bool(0.5) {
            BooleanExpr::and(a, b)
        } else {
            BooleanExpr::or(a, b)
        }
    };
    if rng.random_bool(0.3) {
        expr = BooleanExpr::not(expr);
    }
    expr
}

/// Diagonal of the projection assigned to `expr` on `n` qubits.
fn projection_diagonal(expr: &BooleanExpr, n: usize) -> Result<Vec<f64>> {
    Ok(match expr {
        BooleanExpr::Event(e) => {
            let space = SiteSpace::new(2, n)?;
            let mut diag = vec![1.0; space.dim()];
            for (&k, &bit) in &e.constraints {
                let local = if bit == 0 { pauli::p0() } else { pauli::p1() };
                let p = embed_at_site(&local, k, n)?;
                diag.iter_mut().enumerate().for_each(|(i, v)| *v *= p.get(i, i).re);
            }
            diag
        }
        BooleanExpr::And(a, b) => {
            let (a, b) = (projection_diagonal(a, n)?, projection_diagonal(b, n)?);
            a.iter().zip(&b).map(|(x, y)| x * y).collect()
        }
        BooleanExpr::Or(a, b) => {
            let (a, b) = (projection_diagonal(a, n)?, projection_diagonal(b, n)?);
            a.iter().zip(&b).map(|(x, y)| x + y - x * y).collect()
        }
        BooleanExpr::Not(a) => projection_diagonal(a, n)?.iter().map(|x| 1.0 - x).collect(),
    })
}

/// The projection `𝒫(expr)` on `n` qubit sites. Leaves map to embedded
/// `|ε⟩⟨ε|`; every image is diagonal in the computational basis, so the
/// lattice operations act entrywise on the diagonal.
pub fn cylinder_to_projection(expr: &BooleanExpr, n: usize) -> Result<Operator> {
    expr.check_horizon(n)?;
    let diag = projection_diagonal(expr, n)?;
    Ok(Operator::diagonal(SiteSpace::new(2, n)?, &diag))
}

/// Largest entry deviation among the projection-lattice identities for
/// `P = 𝒫(expr)`: `P² = P`, `P† = P`, `𝒫(¬e) = 1 − P`, `𝒫(e ∧ ¬e) = 0`,
/// `𝒫(e ∨ ¬e) = 1` and `𝒫(e ∧ e) = P`, with the products formed as matrices.
pub fn lattice_defect(expr: &BooleanExpr, n: usize) -> Result<f64> {
    let p = cylinder_to_projection(expr, n)?;
    let id = Operator::identity(p.space());
    let not = cylinder_to_projection(&BooleanExpr::not(expr.clone()), n)?;
    let meet = cylinder_to_projection(&BooleanExpr::and(expr.clone(), BooleanExpr::not(expr.clone())), n)?;
    let join = cylinder_to_projection(&BooleanExpr::or(expr.clone(), BooleanExpr::not(expr.clone())), n)?;
    let twice = cylinder_to_projection(&BooleanExpr::and(expr.clone(), expr.clone()), n)?;
    Ok([
        p.checked_mul(&p)?.max_abs_diff(&p),
        p.hermitian_deviation(),
        (&id - &p).max_abs_diff(&not),
        p.checked_mul(&not)?.max_abs().max(meet.max_abs()),
        join.max_abs_diff(&id),
        twice.max_abs_diff(&p),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

/// `μ_p`-probability of `expr`, summed exactly over the bit assignments of
/// the sites it mentions.
pub fn classical_probability(expr: &BooleanExpr, p: f64) -> Result<f64> {
    let spec = BernoulliSpec::new(p)?;
    let sites: Vec<usize> = expr.sites().into_iter().collect();
    if sites.len() > MAX_EVENT_SITES {
        return Err(Error::InvalidArgument(format!(
            "expression mentions {} sites, limit is {MAX_EVENT_SITES}",
            sites.len()
        )));
    }
    let mut total = 0.0;
    for mask in 0u32..(1 << sites.len()) {
        let bit_at = |k: usize| {
            let j = sites.binary_search(&k).expect("site collected above");
            (mask >> j & 1) as u8
        };
        if expr.eval(&bit_at) {
            let ones = mask.count_ones() as i32;
            let zeros = sites.len() as i32 - ones;
            total += spec.p.powi(ones) * (1.0 - spec.p).powi(zeros);
        }
    }
    Ok(total)
}

/// `(⟨ψ^{⊗n}, 𝒫(expr) ψ^{⊗n}⟩, μ_p(expr))` with `p = |⟨1|ψ⟩|²`.
pub fn quantum_classical_agreement(psi: &PureState, expr: &BooleanExpr, n: usize) -> Result<(f64, f64)> {
    if psi.d() != 2 {
        return Err(Error::MismatchedLocalDimension { left: 2, right: psi.d() });
    }
    let projection = cylinder_to_projection(expr, n)?;
    let quantum = psi.expect_power(&projection)?;
    let p = psi.amplitudes()[1].norm_sqr().min(1.0);
    Ok((quantum, classical_probability(expr, p)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{tensor, C64};

    fn bern(p: f64) -> BernoulliSpec {
        BernoulliSpec::new(p).unwrap()
    }

    #[test]
    fn degenerate_parameters() {
        assert_eq!(sample_sequences(bern(0.0), 70, 5, 1).unwrap().ones(), 0);
        let ones = sample_sequences(bern(1.0), 70, 5, 1).unwrap();
        assert_eq!(ones.ones(), 350);
        assert!((0..5).all(|r| ones.row_mean(r) == 1.0));
        assert!(BernoulliSpec::new(1.2).is_err());
        assert!(sample_sequences(bern(0.5), 0, 5, 1).is_err());
    }

    #[test]
    fn fair_coin_mean() {
        // Hoeffding: P(|mean − ½| > 0.02) ≤ 2e^{-8}
        let m = sample_sequences(bern(0.5), 10_000, 1, 42).unwrap();
        assert!((m.row_mean(0) - 0.5).abs() <= 0.02);
    }

    #[test]
    fn sampling_is_reproducible_and_stream_local() {
        let a = sample_sequences(bern(0.3), 200, 8, 9).unwrap();
        assert_eq!(a, sample_sequences(bern(0.3), 200, 8, 9).unwrap());
        assert_ne!(a, sample_sequences(bern(0.3), 200, 8, 10).unwrap());
        // trial t does not depend on how many trials were requested
        let b = sample_sequences(bern(0.3), 200, 3, 9).unwrap();
        for r in 0..3 {
            for c in 0..200 {
                assert_eq!(a.get(r, c), b.get(r, c));
            }
        }
    }

    #[test]
    fn slln_matches_stored_samples() {
        let m = sample_sequences(bern(0.4), 300, 50, 3).unwrap();
        let hits = (0..50).filter(|&r| (m.row_mean(r) - 0.4).abs() <= 0.05).count();
        let rep = slln_check(bern(0.4), 300, 50, 0.05, 3).unwrap();
        assert_eq!(rep.hits, hits);
    }

    #[test]
    fn slln_trivial_cases() {
        assert_eq!(slln_check(bern(0.7), 50, 20, 1.0, 0).unwrap().hit_fraction, 1.0);
        assert_eq!(slln_check(bern(0.0), 50, 20, 1e-6, 0).unwrap().hit_fraction, 1.0);
        let rep = slln_check(bern(0.3), 100, 10, 0.1, 0).unwrap();
        assert!((rep.hoeffding_bound - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!(slln_check(bern(0.3), 100, 10, 0.0, 0).is_err());
    }

    #[test]
    fn leaf_projection_ordering() {
        let e = BooleanExpr::leaf(1, 1).unwrap();
        let p = cylinder_to_projection(&e, 2).unwrap();
        let want = tensor(&pauli::p1(), &pauli::identity(2)).unwrap();
        assert_eq!(p, want);
        let diag: Vec<f64> = (0..4).map(|i| p.get(i, i).re).collect();
        assert_eq!(diag, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn lattice_identities() {
        let a = BooleanExpr::and(BooleanExpr::leaf(1, 1).unwrap(), BooleanExpr::leaf(3, 0).unwrap());
        let contra = BooleanExpr::and(a.clone(), BooleanExpr::not(a.clone()));
        assert_eq!(cylinder_to_projection(&contra, 3).unwrap().max_abs(), 0.0);

        let both = BooleanExpr::or(BooleanExpr::leaf(1, 0).unwrap(), BooleanExpr::leaf(1, 1).unwrap());
        let id = Operator::identity(SiteSpace::new(2, 3).unwrap());
        assert_eq!(cylinder_to_projection(&both, 3).unwrap(), id);

        assert!(matches!(
            cylinder_to_projection(&BooleanExpr::leaf(4, 1).unwrap(), 3),
            Err(Error::SiteBeyondHorizon { site: 4, horizon: 3 })
        ));
    }

    #[test]
    fn agreement_examples() {
        let psi = PureState::normalized(vec![C64::new(0.8, 0.0), C64::new(0.0, 0.6)]).unwrap();
        let p = 0.36;
        let b1 = BooleanExpr::leaf(1, 1).unwrap();
        let (q, c) = quantum_classical_agreement(&psi, &b1, 3).unwrap();
        assert!((q - p).abs() < 1e-12 && (c - p).abs() < 1e-12);

        let both = BooleanExpr::and(b1, BooleanExpr::leaf(2, 1).unwrap());
        let (q, c) = quantum_classical_agreement(&psi, &both, 3).unwrap();
        assert!((q - p * p).abs() < 1e-12 && (c - p * p).abs() < 1e-12);

        let not3 = BooleanExpr::not(BooleanExpr::leaf(3, 1).unwrap());
        let (q, c) = quantum_classical_agreement(&psi, &not3, 3).unwrap();
        assert!((q - (1.0 - p)).abs() < 1e-12 && (c - (1.0 - p)).abs() < 1e-12);
    }

    #[test]
    fn multi_constraint_event() {
        let e = CylinderEvent::new([(2, 1), (1, 0)]).unwrap();
        assert!(CylinderEvent::new([(2, 1), (2, 0)]).is_err());
        assert!(CylinderEvent::new([(0, 1)]).is_err());
        let expr = BooleanExpr::Event(e);
        assert_eq!(expr.to_string(), "and(b1=0,b2=1)");
        assert!((classical_probability(&expr, 0.25).unwrap() - 0.75 * 0.25).abs() < 1e-15);
    }
}
