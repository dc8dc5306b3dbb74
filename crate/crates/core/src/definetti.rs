//! Finite-atom De Finetti mixtures `Σ wᵢ ρᵢ^{⊗n}`, a fitter that recovers
//! such mixtures from permutation-invariant qubit states, and the
//! finite-N check of the continuous field of states.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{tensor, Operator, SiteSpace, C64};
use crate::macrolimit::validate_n_list;
use crate::optimize::{ball_starts, project_to_ball, MultiStart};
use crate::sections::{Section, SymmetricSection};
use crate::states::{
    a_infinity, bloch_to_density, expect, product_power, BlochVector, DensityMatrix, NSiteState,
};

pub const DEFAULT_MERGE_DELTA: f64 = 1e-2;
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Weighted atoms `(wᵢ, ρᵢ)` with positive weights summing to one and atoms
/// pairwise at least `merge_delta` apart in trace distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMixture {
    atoms: Vec<(f64, DensityMatrix)>,
}

impl DiscreteMixture {
    pub fn new(atoms: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        Self::with_separation(atoms, DEFAULT_MERGE_DELTA)
    }

    pub fn with_separation(atoms: Vec<(f64, DensityMatrix)>, merge_delta: f64) -> Result<Self> {
        let Some((_, first)) = atoms.first() else {
            return Err(Error::InvalidArgument("mixture needs at least one atom".into()));
        };
        let d = first.d();
        if let Some((_, rho)) = atoms.iter().find(|(_, rho)| rho.d() != d) {
            return Err(Error::MismatchedLocalDimension { left: d, right: rho.d() });
        }
        if let Some((w, _)) = atoms.iter().find(|(w, _)| !(*w > 0.0)) {
            return Err(Error::InvalidArgument(format!("atom weight {w} must be positive")));
        }
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        for (i, (_, a)) in atoms.iter().enumerate() {
            for (_, b) in &atoms[i + 1..] {
                let dist = a.trace_distance(b)?;
                if dist < merge_delta {
                    return Err(Error::InvalidArgument(format!(
                        "atoms {dist:.3e} apart, below separation {merge_delta:.3e}"
                    )));
                }
            }
        }
        Ok(Self { atoms })
    }

    /// Qubit mixture from `(weight, Bloch vector)` pairs.
    pub fn from_bloch(atoms: &[(f64, [f64; 3])]) -> Result<Self> {
        let atoms = atoms
            .iter()
            .map(|&(w, v)| Ok((w, BlochVector::from_array(v)?.to_density())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(f64, DensityMatrix)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn d(&self) -> usize {
        self.atoms[0].1.d()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|(w, _)| *w).collect()
    }
}

/// `Σ wᵢ ρᵢ^{⊗n}`.
pub fn mixture_state(mix: &DiscreteMixture, n: usize) -> Result<NSiteState> {
    let space = SiteSpace::new(mix.d(), n)?;
    let mut acc = Operator::zeros(space);
    for (w, rho) in mix.atoms() {
        acc.add_scaled(product_power(rho, n)?.operator(), C64::new(*w, 0.0))?;
    }
    Ok(NSiteState::from_trusted(acc, true))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Atom budget.
    pub k_max: usize,
    pub merge_delta: f64,
    /// Stop once an outer iteration improves the residual by less than this.
    pub improvement_tol: f64,
    pub max_iterations: usize,
    /// Projected-gradient iterations for the simplex weight solve.
    pub weight_iterations: usize,
    /// Damped Gauss–Newton iterations in the joint atom/weight polish.
    pub polish_iterations: usize,
    pub search: MultiStart,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            k_max: 20,
            merge_delta: DEFAULT_MERGE_DELTA,
            improvement_tol: 1e-9,
            max_iterations: 100,
            weight_iterations: 500,
            polish_iterations: 100,
            search: MultiStart::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub mixture: DiscreteMixture,
    /// Frobenius distance between target and fitted mixture state.
    pub residual: f64,
    pub iterations: usize,
    /// Residual after each accepted iteration; nonincreasing.
    pub history: Vec<f64>,
    /// Set when the atom budget or iteration cap ended the fit.
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone)]
struct Atoms {
    weights: Vec<f64>,
    bloch: Vec<[f64; 3]>,
}

struct Fitter<'a> {
    target: &'a Operator,
    n: usize,
    opts: &'a FitOptions,
}

fn bloch_density(v: [f64; 3]) -> Operator {
    // no ball check: finite differences may step just outside
    bloch_to_density(BlochVector { x: v[0], y: v[1], z: v[2] }).operator().clone()
}

fn power(v: [f64; 3], n: usize) -> Operator {
    let rho = bloch_density(v);
    let mut acc = rho.clone();
    for _ in 1..n {
        acc = tensor(&acc, &rho).expect("qubit factors");
    }
    acc
}

impl Fitter<'_> {
    fn model(&self, a: &Atoms) -> Operator {
        let mut acc = Operator::zeros(self.target.space());
        for (w, v) in a.weights.iter().zip(&a.bloch) {
            acc.add_scaled(&power(*v, self.n), C64::new(*w, 0.0)).expect("same space");
        }
        acc
    }

    fn residual_op(&self, a: &Atoms) -> Operator {
        self.target - &self.model(a)
    }

    fn residual(&self, a: &Atoms) -> f64 {
        self.residual_op(a).frobenius_norm()
    }

    /// Bloch vector maximizing `Tr(ρ_v^{⊗n} R)`; the origin is tried
    /// alongside the usual starts.
    fn best_direction(&self, r: &Operator) -> Result<[f64; 3]> {
        let search = &self.opts.search;
        let mut starts = vec![vec![0.0; 3]];
        starts.extend(
            ball_starts(search.starts.saturating_sub(6))
                .into_iter()
                .take(search.starts)
                .map(|p| p.to_vec()),
        );
        let best = search.maximize_from(&starts, |v| power([v[0], v[1], v[2]], self.n).inner(r).re, project_to_ball)?;
        Ok([best.x[0], best.x[1], best.x[2]])
    }

    /// Minimizes the residual over the simplex with the atoms fixed.
    fn solve_weights(&self, a: &mut Atoms) {
        let powers: Vec<Operator> = a.bloch.iter().map(|v| power(*v, self.n)).collect();
        let k = powers.len();
        let gram: Vec<Vec<f64>> =
            (0..k).map(|i| (0..k).map(|j| powers[i].inner(&powers[j]).re).collect()).collect();
        let b: Vec<f64> = powers.iter().map(|p| p.inner(self.target).re).collect();
        let objective = |w: &[f64]| -> f64 {
            let mut f = 0.0;
            for i in 0..k {
                f += w[i] * ((0..k).map(|j| gram[i][j] * w[j]).sum::<f64>() - 2.0 * b[i]);
            }
            f
        };
        let mut w = project_to_simplex(&a.weights);
        let mut fw = objective(&w);
        let mut step = 1.0;
        for _ in 0..self.opts.weight_iterations {
            let grad: Vec<f64> =
                (0..k).map(|i| 2.0 * ((0..k).map(|j| gram[i][j] * w[j]).sum::<f64>() - b[i])).collect();
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
                let next = project_to_simplex(&trial);
                let diff: Vec<f64> = next.iter().zip(&w).map(|(x, y)| x - y).collect();
                let lin: f64 = grad.iter().zip(&diff).map(|(g, d)| g * d).sum();
                let quad: f64 = diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
                let fnext = objective(&next);
                if fnext <= fw + lin + quad + 1e-15 * fw.abs() {
                    moved = diff.iter().any(|d| d.abs() > 1e-16) && fnext < fw;
                    if fnext <= fw {
                        w = next;
                        fw = fnext;
                    }
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
            step *= 2.0;
        }
        a.weights = w;
    }

    /// Damped Gauss–Newton on all Bloch vectors and weights together, with
    /// each step projected back onto the ball and the simplex. Only steps that
    /// lower the residual are taken.
    fn polish(&self, a: &mut Atoms) {
        let k = a.weights.len();
        let p = 4 * k;
        let mut current = self.residual(a);
        let mut damping = 1e-3;
        for _ in 0..self.opts.polish_iterations {
            if current < 1e-14 {
                break;
            }
            let r0 = flatten(&self.residual_op(a));
            let m = r0.len();
            let h = 1e-6;
            let mut jac = Mat::<f64>::zeros(m, p);
            for col in 0..p {
                let (plus, minus) = (perturb(a, col, h), perturb(a, col, -h));
                let rp = flatten(&self.residual_op(&plus));
                let rm = flatten(&self.residual_op(&minus));
                for row in 0..m {
                    jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
                }
            }
            let jtj = jac.transpose() * &jac;
            let mut jtr = Mat::<f64>::zeros(p, 1);
            for col in 0..p {
                jtr[(col, 0)] = (0..m).map(|row| jac[(row, col)] * r0[row]).sum();
            }
            let mut accepted = false;
            while damping < 1e12 {
                let mut lhs = jtj.clone();
                for i in 0..p {
                    lhs[(i, i)] += damping * (jtj[(i, i)] + 1e-12);
                }
                let delta = lhs.partial_piv_lu().solve(&jtr);
                let mut trial = a.clone();
                for i in 0..k {
                    for c in 0..3 {
                        trial.bloch[i][c] -= delta[(4 * i + c, 0)];
                    }
                    trial.weights[i] -= delta[(4 * i + 3, 0)];
                    project_to_ball(&mut trial.bloch[i]);
                }
                trial.weights = project_to_simplex(&trial.weights);
                let value = self.residual(&trial);
                if value.is_finite() && value < current {
                    let gain = current - value;
                    *a = trial;
                    current = value;
                    damping = (damping / 3.0).max(1e-12);
                    accepted = gain > 1e-15 * (1.0 + current);
                    break;
                }
                damping *= 4.0;
            }
            if !accepted {
                break;
            }
        }
    }

    /// Merges atoms closer than `merge_delta` and drops vanishing weights.
    fn merge(&self, a: &mut Atoms) {
        loop {
            let k = a.weights.len();
            let mut closest: Option<(usize, usize, f64)> = None;
            for i in 0..k {
                for j in i + 1..k {
                    let dist = trace_distance_bloch(a.bloch[i], a.bloch[j]);
                    if dist < self.opts.merge_delta && closest.is_none_or(|c| dist < c.2) {
                        closest = Some((i, j, dist));
                    }
                }
            }
            let Some((i, j, _)) = closest else { break };
            let (wi, wj) = (a.weights[i], a.weights[j]);
            let total = wi + wj;
            for c in 0..3 {
                a.bloch[i][c] = if total > 0.0 {
                    (wi * a.bloch[i][c] + wj * a.bloch[j][c]) / total
                } else {
                    a.bloch[i][c]
                };
            }
            a.weights[i] = total;
            a.weights.remove(j);
            a.bloch.remove(j);
        }
        let keep: Vec<usize> = (0..a.weights.len()).filter(|&i| a.weights[i] > 1e-14).collect();
        if keep.len() < a.weights.len() && !keep.is_empty() {
            a.bloch = keep.iter().map(|&i| a.bloch[i]).collect();
            a.weights = project_to_simplex(&keep.iter().map(|&i| a.weights[i]).collect::<Vec<_>>());
        }
    }

    fn refine(&self, a: &mut Atoms) {
        self.solve_weights(a);
        self.polish(a);
        self.merge(a);
        self.solve_weights(a);
        self.polish(a);
    }
}

fn perturb(a: &Atoms, col: usize, h: f64) -> Atoms {
    let mut out = a.clone();
    let (i, c) = (col / 4, col % 4);
    if c < 3 {
        out.bloch[i][c] += h;
    } else {
        out.weights[i] += h;
    }
    out
}

fn flatten(op: &Operator) -> Vec<f64> {
    op.entries().iter().flat_map(|z| [z.re, z.im]).collect()
}

fn trace_distance_bloch(u: [f64; 3], v: [f64; 3]) -> f64 {
    0.5 * u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Fits `Σ wᵢ ρ_{vᵢ}^{⊗n}` to a permutation-invariant qubit state.
///
/// Each outer iteration adds the product state best correlated with the
/// current residual, re-solves the weights on the simplex, polishes atoms and
/// weights jointly, and merges near-duplicate atoms. An iteration is kept
/// only when it lowers the residual by at least `improvement_tol`.
pub fn fit_mixture(target: &NSiteState, opts: &FitOptions) -> Result<FitResult> {
    if !target.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let space = target.space();
    if space.d() != 2 {
        return Err(Error::InvalidArgument(format!(
            "mixture fitting supports qubits only, got d = {}",
            space.d()
        )));
    }
    if opts.k_max == 0 {
        return Err(Error::InvalidArgument("atom budget must be positive".into()));
    }
    let fitter = Fitter { target: target.operator(), n: space.n(), opts };
    let mut current: Option<(Atoms, f64)> = None;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut budget_exhausted = true;
    while iterations < opts.max_iterations {
        let mut candidate = match &current {
            None => Atoms { weights: vec![], bloch: vec![] },
            Some((a, _)) if a.weights.len() >= opts.k_max => break,
            Some((a, _)) => a.clone(),
        };
        let r = match &current {
            None => target.operator().clone(),
            Some((a, _)) => fitter.residual_op(a),
        };
        let v = fitter.best_direction(&r)?;
        candidate.bloch.push(v);
        candidate.weights.push(if candidate.weights.is_empty() { 1.0 } else { 0.0 });
        fitter.refine(&mut candidate);
        let value = fitter.residual(&candidate);
        iterations += 1;
        match &current {
            Some((_, best)) if *best - value < opts.improvement_tol => {
                budget_exhausted = false;
                break;
            }
            _ => {
                history.push(value);
                current = Some((candidate, value));
            }
        }
        if value < 1e-14 {
            budget_exhausted = false;
            break;
        }
    }
    let (atoms, residual) = current.expect("at least one iteration ran");
    let pairs = atoms
        .weights
        .iter()
        .zip(&atoms.bloch)
        .map(|(&w, &v)| (w, bloch_to_density(BlochVector { x: v[0], y: v[1], z: v[2] })))
        .collect();
    let mixture = DiscreteMixture::with_separation(pairs, opts.merge_delta)?;
    Ok(FitResult { mixture, residual, iterations, history, budget_exhausted })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldRecord {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// `ω_N(A_N)` for the mixture state against `μ(A_∞) = Σ wᵢ A_∞(ρᵢ)`.
pub fn field_of_states_check(
    mix: &DiscreteMixture,
    section: &SymmetricSection,
    n_list: &[usize],
) -> Result<Vec<FieldRecord>> {
    validate_n_list(n_list, section.seed_order())?;
    let mut rhs = 0.0;
    for (w, rho) in mix.atoms() {
        rhs += w * a_infinity(section, rho)?;
    }
    n_list
        .iter()
        .map(|&n| {
            let lhs = expect(&mixture_state(mix, n)?, &section.materialize(n)?)?;
            Ok(FieldRecord { n, lhs, rhs })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;
    use crate::sections::FrequencySpec;
    use crate::states::{is_permutation_invariant, PureState};

    #[test]
    fn mixture_validation() {
        assert!(DiscreteMixture::from_bloch(&[(0.5, [0.0, 0.0, 1.0]), (0.5, [0.0, 0.0, -1.0])]).is_ok());
        assert!(DiscreteMixture::from_bloch(&[(0.6, [0.0, 0.0, 1.0]), (0.5, [0.0, 0.0, -1.0])]).is_err());
        assert!(DiscreteMixture::from_bloch(&[(0.5, [0.0, 0.0, 1.0]), (0.5, [0.0, 0.0, 0.99])]).is_err());
        assert!(DiscreteMixture::from_bloch(&[(1.0, [0.0, 0.0, 1.0]), (0.0, [1.0, 0.0, 0.0])]).is_err());
        assert!(DiscreteMixture::new(vec![]).is_err());
    }

    #[test]
    fn mixture_state_examples() {
        let single = DiscreteMixture::from_bloch(&[(1.0, [0.3, -0.2, 0.5])]).unwrap();
        let want = product_power(&single.atoms()[0].1, 3).unwrap();
        assert!(mixture_state(&single, 3).unwrap().operator().max_abs_diff(want.operator()) < 1e-15);

        let poles = DiscreteMixture::from_bloch(&[(0.5, [0.0, 0.0, 1.0]), (0.5, [0.0, 0.0, -1.0])]).unwrap();
        let s = mixture_state(&poles, 2).unwrap();
        let want = Operator::diagonal(SiteSpace::new(2, 2).unwrap(), &[0.5, 0.0, 0.0, 0.5]);
        assert!(s.operator().max_abs_diff(&want) < 1e-15);
        assert!(is_permutation_invariant(&s));
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_to_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn single_atom_recovery() {
        let v = [0.3, -0.4, 0.6];
        let mix = DiscreteMixture::from_bloch(&[(1.0, v)]).unwrap();
        let target = mixture_state(&mix, 4).unwrap();
        let fit = fit_mixture(&target, &FitOptions::default()).unwrap();
        assert_eq!(fit.mixture.len(), 1);
        assert!(fit.residual <= 1e-8, "residual {}", fit.residual);
        let dist = fit.mixture.atoms()[0].1.trace_distance(&mix.atoms()[0].1).unwrap();
        assert!(dist <= 1e-6);
    }

    #[test]
    fn two_atom_round_trip() {
        let mix = DiscreteMixture::from_bloch(&[(0.5, [0.0, 0.0, 1.0]), (0.5, [1.0, 0.0, 0.0])]).unwrap();
        let target = mixture_state(&mix, 6).unwrap();
        let fit = fit_mixture(&target, &FitOptions::default()).unwrap();
        assert_eq!(fit.mixture.len(), 2, "{:?}", fit.mixture.weights());
        assert!(fit.residual <= 1e-6, "residual {}", fit.residual);
        for w in fit.mixture.weights() {
            assert!((w - 0.5).abs() < 1e-3);
        }
        assert!(fit.history.windows(2).all(|h| h[1] <= h[0]));
    }

    #[test]
    fn maximally_mixed_target() {
        let target = mixture_state(&DiscreteMixture::from_bloch(&[(1.0, [0.0; 3])]).unwrap(), 4).unwrap();
        let fit = fit_mixture(&target, &FitOptions::default()).unwrap();
        assert!(fit.residual <= 0.05);
    }

    #[test]
    fn rejects_asymmetric_target() {
        let space = SiteSpace::new(2, 2).unwrap();
        let rho = Operator::diagonal(space, &[0.0, 1.0, 0.0, 0.0]);
        let state = NSiteState::new(rho).unwrap();
        assert!(matches!(fit_mixture(&state, &FitOptions::default()), Err(Error::NotSymmetric)));
    }

    #[test]
    fn field_examples() {
        let psi = PureState::normalized(vec![C64::new(0.8, 0.0), C64::new(0.6, 0.0)]).unwrap();
        let delta = DiscreteMixture::new(vec![(1.0, psi.density())]).unwrap();
        let freq = FrequencySpec::basis(2, 1).unwrap().section();
        for r in field_of_states_check(&delta, &freq, &[1, 2, 3, 5]).unwrap() {
            assert!((r.lhs - 0.36).abs() < 1e-12 && (r.rhs - 0.36).abs() < 1e-12);
        }

        let id = SymmetricSection::new(Operator::identity(SiteSpace::new(2, 2).unwrap()));
        let two = DiscreteMixture::from_bloch(&[(0.3, [0.0, 0.6, 0.8]), (0.7, [0.5, 0.0, -0.5])]).unwrap();
        for r in field_of_states_check(&two, &id, &[2, 4]).unwrap() {
            assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 1.0).abs() < 1e-12);
        }

        let z = SymmetricSection::averaged(pauli::z()).unwrap();
        let want = 0.3 * 0.8 + 0.7 * -0.5;
        for r in field_of_states_check(&two, &z, &[1, 2, 3, 6]).unwrap() {
            assert!((r.lhs - want).abs() < 1e-12 && (r.rhs - want).abs() < 1e-12);
        }
    }
}
