//! Equality-constrained ℓ1 minimization `min ‖d‖₁ s.t. F d = f`.
//!
//! The solver is a Douglas–Rachford splitting between the proximal map of
//! `‖·‖₁` (soft thresholding) and the exact projection onto the affine
//! constraint set. In complex mode the projection uses a Cholesky
//! factorization of `F F^*`; in real mode it uses the pseudo-inverse of the
//! stacked real system `[Re F; Im F]`.
//!
//! A dual-certificate check and a small dense simplex solver serve as
//! independent optimality oracles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greedy::is_exact_recovery;
use crate::linalg::{HermitianCholesky, IncrementalQr};
use crate::measurement::{norm2, LinearOperator, SupportOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative pivot threshold for the `F F^*` factorization.
pub const PIVOT_TOL: f64 = 1e-12;

/// Entries below this fraction of the largest are dropped before debiasing.
pub const DEBIAS_THRESHOLD: f64 = 1e-6;

/// Margin below one required of off-support dual correlations.
pub const CERTIFICATE_MARGIN: f64 = 1e-8;

/// Largest `D` accepted by the simplex oracle.
pub const LP_MAX_COLUMNS: usize = 64;

const LP_PIVOT_GUARD: usize = 20_000;

#[derive(Clone, Copy)]
pub struct BpProblem<'a> {
    pub op: &'a dyn LinearOperator,
    pub samples: &'a [Complex64],
    /// Restrict the coefficients to real values.
    pub real_mode: bool,
}

impl<'a> BpProblem<'a> {
    pub fn new(op: &'a dyn LinearOperator, samples: &'a [Complex64]) -> Self {
        BpProblem { op, samples, real_mode: false }
    }

    pub fn real(op: &'a dyn LinearOperator, samples: &'a [Complex64]) -> Self {
        BpProblem { op, samples, real_mode: true }
    }

    fn check(&self) -> Result<()> {
        if self.op.rows() == 0 {
            return Err(Error::InvalidArgument("no samples".into()));
        }
        if self.samples.len() != self.op.rows() {
            return Err(Error::LengthMismatch { expected: self.op.rows(), got: self.samples.len() });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpOptions {
    /// Absolute bound on `‖F d − f‖₂`; `None` means `1e−10·‖f‖₂`.
    pub feas_tol: Option<f64>,
    /// Stop once `max|y − x| ≤ gap_tol` between the two half-steps.
    pub gap_tol: f64,
    /// `None` means `50·D`.
    pub max_iter: Option<usize>,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions { feas_tol: None, gap_tol: 1e-9, max_iter: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpSolution {
    pub coefficients: Vec<Complex64>,
    /// `Σ |d_k|`
    pub objective: f64,
    /// `‖F d − f‖₂`
    pub constraint_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BpSolution {
    fn zero(d: usize) -> Self {
        BpSolution {
            coefficients: vec![ZERO; d],
            objective: 0.0,
            constraint_residual: 0.0,
            iterations: 0,
            converged: true,
        }
    }
}

enum Projector<'a> {
    Complex { op: &'a dyn LinearOperator, chol: HermitianCholesky, rhs: Vec<Complex64> },
    Real { a: DMatrix<f64>, pinv: DMatrix<f64>, rhs: DVector<f64> },
}

impl<'a> Projector<'a> {
    fn build(problem: &BpProblem<'a>) -> Result<Self> {
        let op = problem.op;
        let n = op.rows();
        if problem.real_mode {
            let d = op.cols();
            let mut a = DMatrix::zeros(2 * n, d);
            for k in 0..d {
                for (j, v) in op.column(k).into_iter().enumerate() {
                    a[(j, k)] = v.re;
                    a[(n + j, k)] = v.im;
                }
            }
            // A^+ = A^T (A A^T)^+ via a symmetric eigensolve, which stays
            // accurate for the heavily clustered spectra of grid sampling.
            let eig = (&a * a.transpose()).symmetric_eigen();
            let cutoff = PIVOT_TOL * eig.eigenvalues.max();
            let inv = eig.eigenvalues.map(|l| if l > cutoff { 1.0 / l } else { 0.0 });
            let u = &eig.eigenvectors;
            let pinv = a.transpose() * (u * DMatrix::from_diagonal(&inv) * u.transpose());
            Ok(Projector::Real { a, pinv, rhs: stack_real(problem.samples) })
        } else {
            let mut g = DMatrix::from_element(n, n, ZERO);
            let mut e = vec![ZERO; n];
            for j in 0..n {
                e[j] = Complex64::new(1.0, 0.0);
                let col = op.apply(&op.adjoint(&e)?)?;
                e[j] = ZERO;
                for (i, v) in col.into_iter().enumerate() {
                    g[(i, j)] = v;
                }
            }
            let chol = HermitianCholesky::factor(&g, PIVOT_TOL)?;
            Ok(Projector::Complex { op, chol, rhs: problem.samples.to_vec() })
        }
    }

    fn rescale(&mut self, s: f64) {
        match self {
            Projector::Complex { rhs, .. } => rhs.iter_mut().for_each(|v| *v /= s),
            Projector::Real { rhs, .. } => *rhs /= s,
        }
    }

    fn project(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        match self {
            Projector::Complex { op, chol, rhs } => {
                let mut r = op.apply(z)?;
                for (a, b) in r.iter_mut().zip(rhs) {
                    *a -= b;
                }
                let w = op.adjoint(&chol.solve(&r))?;
                Ok(z.iter().zip(w).map(|(a, b)| a - b).collect())
            }
            Projector::Real { a, pinv, rhs } => {
                let zr = DVector::from_iterator(z.len(), z.iter().map(|v| v.re));
                let r = a * &zr - rhs;
                let x = zr - pinv * r;
                Ok(x.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            }
        }
    }

    fn residual(&self, x: &[Complex64]) -> Result<f64> {
        match self {
            Projector::Complex { op, rhs, .. } => {
                let r = op.apply(x)?;
                Ok(r.iter().zip(rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
            }
            Projector::Real { a, rhs, .. } => {
                let xr = DVector::from_iterator(x.len(), x.iter().map(|v| v.re));
                Ok((a * xr - rhs).norm())
            }
        }
    }
}

fn stack_real(f: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(2 * f.len(), f.iter().map(|v| v.re).chain(f.iter().map(|v| v.im)))
}

fn soft_threshold(v: Complex64, t: f64, real: bool) -> Complex64 {
    if real {
        let m = v.re.abs() - t;
        return if m > 0.0 { Complex64::new(m.copysign(v.re), 0.0) } else { ZERO };
    }
    let a = v.norm();
    if a > t {
        v * ((a - t) / a)
    } else {
        ZERO
    }
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Solves basis pursuit by Douglas–Rachford splitting with unit step.
///
/// The samples are normalized internally so that the minimum-norm solution
/// has unit max-norm, which makes the result scale-equivariant. Running out of
/// iterations is reported through `converged`, not as an error.
pub fn solve_bp(problem: &BpProblem, opts: &BpOptions) -> Result<BpSolution> {
    problem.check()?;
    let d = problem.op.cols();
    let fnorm = norm2(problem.samples);
    let feas_tol = opts.feas_tol.unwrap_or(1e-10 * fnorm);
    let max_iter = opts.max_iter.unwrap_or(50 * d);
    let mut proj = Projector::build(problem)?;

    let x0 = proj.project(&vec![ZERO; d])?;
    let r0 = proj.residual(&x0)?;
    if problem.real_mode && r0 > feas_tol.max(1e-12 * fnorm) {
        return Err(Error::Infeasible { residual: r0 });
    }
    let s = max_abs(&x0);
    if s == 0.0 {
        return Ok(BpSolution::zero(d));
    }
    proj.rescale(s);
    let feas_scaled = feas_tol / s;

    let mut z: Vec<Complex64> = x0.iter().map(|v| v / s).collect();
    let mut x = z.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        x = proj.project(&z)?;
        let y: Vec<Complex64> =
            x.iter().zip(&z).map(|(a, b)| soft_threshold(2.0 * a - b, 1.0, problem.real_mode)).collect();
        let mut gap = 0.0f64;
        for ((zi, yi), xi) in z.iter_mut().zip(&y).zip(&x) {
            let step = yi - xi;
            gap = gap.max(step.norm());
            *zi += step;
        }
        if gap * s <= opts.gap_tol && proj.residual(&x)? <= feas_scaled {
            converged = true;
            break;
        }
    }

    let coefficients: Vec<Complex64> = x.iter().map(|v| v * s).collect();
    let constraint_residual = proj.residual(&x)? * s;
    Ok(BpSolution {
        objective: coefficients.iter().map(|v| v.norm()).sum(),
        coefficients,
        constraint_residual,
        iterations,
        converged,
    })
}

/// Least-squares refit on `{k : |d_k| > 1e−6·max|d|}`. Returns the input
/// unchanged if that support is empty, larger than `N`, or rank deficient.
pub fn debias(op: &dyn LinearOperator, samples: &[Complex64], x: &[Complex64], real_mode: bool) -> Vec<Complex64> {
    let top = max_abs(x);
    if top == 0.0 {
        return x.to_vec();
    }
    let support: Vec<usize> = (0..x.len()).filter(|&k| x[k].norm() > DEBIAS_THRESHOLD * top).collect();
    if support.len() > op.rows() {
        return x.to_vec();
    }
    let mut qr = IncrementalQr::new(samples.to_vec());
    for &k in &support {
        if qr.push(&op.column(k), k).is_err() {
            return x.to_vec();
        }
    }
    let mut out = vec![ZERO; x.len()];
    for (&k, v) in support.iter().zip(qr.solve()) {
        out[k] = if real_mode { Complex64::new(v.re, 0.0) } else { v };
    }
    out
}

/// Solves, debiases and applies the exact-recovery criterion against `truth`.
pub fn bp_recovers(problem: &BpProblem, opts: &BpOptions, truth: &[Complex64]) -> Result<bool> {
    let sol = solve_bp(problem, opts)?;
    let refit = debias(problem.op, problem.samples, &sol.coefficients, problem.real_mode);
    Ok(is_exact_recovery(&refit, truth))
}

#[derive(Clone, Debug, PartialEq)]
pub enum CertificateFailure {
    /// The candidate does not reproduce the samples.
    Infeasible { residual: f64 },
    /// More support columns than samples.
    NotInjective,
    /// The support Gram matrix is numerically singular.
    Singular,
    /// `|(F^*η)_k| ≥ 1 − margin` at an off-support index.
    OffSupport { index: usize, magnitude: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    Certified,
    NotCertified(CertificateFailure),
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::Certified)
    }
}

/// Checks whether `candidate` is the unique ℓ1 minimizer using the dual vector
/// `η = F_T (F_T^* F_T)^{-1} sign(c_T)`.
pub fn check_dual_certificate(
    op: &dyn LinearOperator,
    candidate: &[Complex64],
    samples: &[Complex64],
) -> Result<Certificate> {
    if candidate.len() != op.cols() {
        return Err(Error::LengthMismatch { expected: op.cols(), got: candidate.len() });
    }
    if samples.len() != op.rows() {
        return Err(Error::LengthMismatch { expected: op.rows(), got: samples.len() });
    }
    let fitted = op.apply(candidate)?;
    let residual = fitted.iter().zip(samples).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    if residual > 1e-10 * norm2(samples).max(f64::MIN_POSITIVE) {
        return Ok(Certificate::NotCertified(CertificateFailure::Infeasible { residual }));
    }
    let support: Vec<usize> = (0..candidate.len()).filter(|&k| candidate[k] != ZERO).collect();
    if support.is_empty() {
        return Ok(Certificate::Certified);
    }
    if support.len() > op.rows() {
        return Ok(Certificate::NotCertified(CertificateFailure::NotInjective));
    }
    let sub = SupportOperator::new(op, support.clone())?;
    let chol = match HermitianCholesky::factor(&sub.gram()?, PIVOT_TOL) {
        Ok(c) => c,
        Err(_) => return Ok(Certificate::NotCertified(CertificateFailure::Singular)),
    };
    let signs: Vec<Complex64> = support.iter().map(|&k| candidate[k] / candidate[k].norm()).collect();
    let eta = sub.apply(&chol.solve(&signs))?;
    let corr = op.adjoint(&eta)?;
    let mut in_support = vec![false; op.cols()];
    support.iter().for_each(|&k| in_support[k] = true);
    for (k, c) in corr.iter().enumerate() {
        if !in_support[k] && c.norm() >= 1.0 - CERTIFICATE_MARGIN {
            return Ok(Certificate::NotCertified(CertificateFailure::OffSupport { index: k, magnitude: c.norm() }));
        }
    }
    Ok(Certificate::Certified)
}

const LP_EPS: f64 = 1e-9;

/// Gaussian elimination with partial pivoting on `[A | b]`. Returns the
/// independent rows, or `Infeasible` if a dependent row has a nonzero
/// right-hand side.
fn reduce_rows(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (m, n) = a.shape();
    let mut w = DMatrix::from_fn(m, n + 1, |i, j| if j < n { a[(i, j)] } else { b[i] });
    let tol = LP_EPS * a.amax().max(1.0);
    let mut rank = 0;
    for col in 0..n {
        if rank == m {
            break;
        }
        let (p, v) = (rank..m).map(|i| (i, w[(i, col)].abs())).fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if v <= tol {
            continue;
        }
        w.swap_rows(rank, p);
        for i in (rank + 1)..m {
            let f = w[(i, col)] / w[(rank, col)];
            if f != 0.0 {
                for j in col..=n {
                    w[(i, j)] -= f * w[(rank, j)];
                }
            }
        }
        rank += 1;
    }
    let residual = (rank..m).map(|i| w[(i, n)].abs()).fold(0.0, f64::max);
    if residual > tol * b.amax().max(1.0) {
        return Err(Error::Infeasible { residual });
    }
    Ok((w.view((0, 0), (rank, n)).into_owned(), w.view((0, n), (rank, 1)).column(0).into_owned()))
}

/// Revised simplex with Bland's rule. The basis matrix is refactored at every
/// step, which trades speed for accuracy on these tiny problems.
struct Simplex {
    a: DMatrix<f64>,
    b: DVector<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Simplex {
    fn basic_solution(&self) -> Result<(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, DVector<f64>)> {
        let bm = self.a.select_columns(&self.basis);
        let lu = bm.lu();
        let x = lu.solve(&self.b).ok_or(Error::SingularSystem { row: 0, pivot: 0.0 })?;
        Ok((lu, x))
    }

    /// Minimizes `cost · x` with entering variables restricted to `0..allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        loop {
            let (lu, x) = self.basic_solution()?;
            let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| cost[j]));
            let y = self
                .a
                .select_columns(&self.basis)
                .transpose()
                .lu()
                .solve(&cb)
                .ok_or(Error::SingularSystem { row: 0, pivot: 0.0 })?;
            // Bland's rule; a candidate without a positive pivot only has a
            // reduced cost at rounding level, so it is skipped.
            let mut step = None;
            for j in 0..allowed {
                if self.basis.contains(&j) || cost[j] - self.a.column(j).dot(&y) >= -LP_EPS {
                    continue;
                }
                let dir =
                    lu.solve(&self.a.column(j).into_owned()).ok_or(Error::SingularSystem { row: 0, pivot: 0.0 })?;
                let mut leave: Option<(usize, f64)> = None;
                for i in 0..self.basis.len() {
                    if dir[i] > LP_EPS {
                        let ratio = x[i].max(0.0) / dir[i];
                        let better = match leave {
                            None => true,
                            Some((li, lr)) => {
                                ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                            }
                        };
                        if better {
                            leave = Some((i, ratio));
                        }
                    }
                }
                if let Some((i, _)) = leave {
                    step = Some((i, j));
                    break;
                }
            }
            let Some((i, j)) = step else { return Ok(()) };
            self.basis[i] = j;
            self.pivots += 1;
            if self.pivots > LP_PIVOT_GUARD {
                return Err(Error::CyclingGuard(self.pivots));
            }
        }
    }
}

/// Real-mode basis pursuit as the linear program `min Σu + Σv` subject to
/// `A(u − v) = b`, `u, v ≥ 0`, with `A = [Re F; Im F]`. Only for `D ≤ 64`.
///
/// Dependent rows are removed first; inconsistent ones are rejected as
/// infeasible.
pub fn solve_bp_real_lp_check(problem: &BpProblem) -> Result<BpSolution> {
    problem.check()?;
    if !problem.real_mode {
        return Err(Error::InvalidArgument("the linear program oracle needs real mode".into()));
    }
    let (n, d) = (problem.op.rows(), problem.op.cols());
    if d > LP_MAX_COLUMNS {
        return Err(Error::InvalidArgument(format!("D = {d} exceeds the oracle limit {LP_MAX_COLUMNS}")));
    }
    let mut a = DMatrix::zeros(2 * n, d);
    for k in 0..d {
        for (j, v) in problem.op.column(k).into_iter().enumerate() {
            a[(j, k)] = v.re;
            a[(n + j, k)] = v.im;
        }
    }
    let (a, mut b) = reduce_rows(&a, &stack_real(problem.samples))?;
    let rows = a.nrows();
    let vars = 2 * d;
    let mut full = DMatrix::zeros(rows, vars + rows);
    for i in 0..rows {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        b[i] *= sign;
        for k in 0..d {
            full[(i, k)] = sign * a[(i, k)];
            full[(i, d + k)] = -sign * a[(i, k)];
        }
        full[(i, vars + i)] = 1.0;
    }
    let mut lp = Simplex { a: full, b, basis: (vars..vars + rows).collect(), pivots: 0 };

    let phase1: Vec<f64> = (0..vars + rows).map(|j| if j >= vars { 1.0 } else { 0.0 }).collect();
    lp.optimize(&phase1, vars + rows)?;
    let (lu, x) = lp.basic_solution()?;
    let infeas: f64 = lp.basis.iter().zip(x.iter()).filter(|(&j, _)| j >= vars).map(|(_, v)| v.abs()).sum();
    if infeas > 1e-9 * lp.b.amax().max(1.0) {
        return Err(Error::Infeasible { residual: infeas });
    }
    // Swap zero-level artificials out of the basis; full row rank guarantees a partner.
    for i in 0..rows {
        if lp.basis[i] >= vars {
            let (lu, _) = lp.basic_solution()?;
            let partner = (0..vars).filter(|j| !lp.basis.contains(j)).find(|&j| {
                lu.solve(&lp.a.column(j).into_owned()).is_some_and(|dv| dv[i].abs() > LP_EPS)
            });
            match partner {
                Some(j) => lp.basis[i] = j,
                None => return Err(Error::SingularSystem { row: i, pivot: 0.0 }),
            }
        }
    }
    drop(lu);

    let phase2: Vec<f64> = (0..vars + rows).map(|j| if j < vars { 1.0 } else { 0.0 }).collect();
    lp.optimize(&phase2, vars)?;
    let (_, x) = lp.basic_solution()?;
    let mut primal = vec![0.0; vars];
    for (&j, &v) in lp.basis.iter().zip(x.iter()) {
        if j < vars {
            primal[j] = v.max(0.0);
        }
    }
    let coefficients: Vec<Complex64> = (0..d).map(|k| Complex64::new(primal[k] - primal[d + k], 0.0)).collect();
    let fitted = problem.op.apply(&coefficients)?;
    let constraint_residual =
        fitted.iter().zip(problem.samples).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok(BpSolution {
        objective: coefficients.iter().map(|v| v.norm()).sum(),
        coefficients,
        constraint_residual,
        iterations: lp.pivots,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::MeasurementOperator;
    use crate::sampling::SamplingSet;
    use crate::spectrum::{CoefficientStyle, FrequencySet, SparseCoefficients};
    use proptest::prelude::*;

    fn instance(
        d: usize,
        n: usize,
        m: usize,
        style: CoefficientStyle,
        seed: u64,
    ) -> (MeasurementOperator, SparseCoefficients, Vec<Complex64>) {
        let g = FrequencySet::centered(d, 1).unwrap().into_shared();
        let s = SamplingSet::discrete_distinct(d, 1, n, seed).unwrap();
        let op = MeasurementOperator::new(s, g.clone()).unwrap();
        let c = SparseCoefficients::random(&g, m, style, seed ^ 0xabc).unwrap();
        let f = op.apply(&c.to_dense()).unwrap();
        (op, c, f)
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn full_grid_gives_the_unique_feasible_point() {
        let (op, c, f) = instance(32, 32, 5, CoefficientStyle::ComplexGaussian, 1);
        let sol = solve_bp(&BpProblem::new(&op, &f), &BpOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(max_err(&sol.coefficients, &c.to_dense()) <= 1e-8);
    }

    #[test]
    fn seeded_instance_is_recovered_and_certified() {
        let (op, c, f) = instance(32, 16, 3, CoefficientStyle::ComplexGaussian, 4);
        let sol = solve_bp(&BpProblem::new(&op, &f), &BpOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.constraint_residual <= 1e-10 * norm2(&f));
        assert!(is_exact_recovery(&sol.coefficients, &c.to_dense()));
        let cert = check_dual_certificate(&op, &sol.coefficients, &f).unwrap();
        assert!(cert.is_certified() || check_dual_certificate(&op, &c.to_dense(), &f).unwrap().is_certified());
    }

    #[test]
    fn certificate_agrees_with_solver() {
        let mut certified = 0;
        for seed in 0..50 {
            let (op, c, f) = instance(32, 16, 3, CoefficientStyle::ComplexGaussian, 100 + seed);
            let opts = BpOptions { gap_tol: 1e-11, max_iter: Some(20_000), ..BpOptions::default() };
            let exact = bp_recovers(&BpProblem::new(&op, &f), &opts, &c.to_dense()).unwrap();
            let cert = check_dual_certificate(&op, &c.to_dense(), &f).unwrap();
            assert_eq!(exact, cert.is_certified(), "seed {seed}: {cert:?}");
            certified += cert.is_certified() as usize;
        }
        assert!(certified > 0);
    }

    #[test]
    fn certificate_trivial_cases() {
        let (op, c, f) = instance(16, 16, 3, CoefficientStyle::ComplexGaussian, 9);
        assert_eq!(check_dual_certificate(&op, &c.to_dense(), &f).unwrap(), Certificate::Certified);

        let (op, c, f) = instance(16, 1, 1, CoefficientStyle::ComplexGaussian, 9);
        assert!(matches!(
            check_dual_certificate(&op, &c.to_dense(), &f).unwrap(),
            Certificate::NotCertified(CertificateFailure::OffSupport { .. })
        ));

        let (op, c, mut f) = instance(16, 8, 2, CoefficientStyle::ComplexGaussian, 9);
        f[0] += 1.0;
        assert!(matches!(
            check_dual_certificate(&op, &c.to_dense(), &f).unwrap(),
            Certificate::NotCertified(CertificateFailure::Infeasible { .. })
        ));
    }

    #[test]
    fn singular_outer_gram_is_detected() {
        let g = FrequencySet::centered(16, 1).unwrap().into_shared();
        let s = SamplingSet::from_grid_indices(16, 1, vec![3, 5, 3], 0).unwrap();
        let op = MeasurementOperator::new(s, g).unwrap();
        let f = vec![Complex64::new(1.0, 0.0); 3];
        let err = solve_bp(&BpProblem::new(&op, &f), &BpOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }));
    }

    #[test]
    fn zero_samples_give_zero_solution() {
        let (op, _c, _f) = instance(32, 16, 3, CoefficientStyle::RealGaussian, 2);
        let zero = vec![ZERO; 16];
        let sol = solve_bp(&BpProblem::new(&op, &zero), &BpOptions::default()).unwrap();
        assert!(sol.coefficients.iter().all(|v| *v == ZERO) && sol.converged);
        let lp = solve_bp_real_lp_check(&BpProblem::real(&op, &zero)).unwrap();
        assert_eq!(lp.objective, 0.0);
    }

    #[test]
    fn lp_oracle_matches_real_mode_solver() {
        for seed in 0..25 {
            let (op, _c, f) = instance(32, 16, 3, CoefficientStyle::RealGaussian, 500 + seed);
            let problem = BpProblem::real(&op, &f);
            let lp = solve_bp_real_lp_check(&problem).unwrap();
            let opts = BpOptions { gap_tol: 1e-12, max_iter: Some(50_000), ..BpOptions::default() };
            let dr = solve_bp(&problem, &opts).unwrap();
            assert!(lp.constraint_residual <= 1e-8 * norm2(&f));
            assert!((lp.objective - dr.objective).abs() <= 1e-6, "seed {seed}: {} vs {}", lp.objective, dr.objective);
        }
    }

    #[test]
    fn infeasible_real_samples_are_rejected() {
        // D = 16 real unknowns cannot match 2N = 32 generic real equations.
        let (op, _c, mut f) = instance(16, 16, 2, CoefficientStyle::RealGaussian, 3);
        let s = SamplingSet::continuous(1, 16, 3).unwrap();
        let op2 = MeasurementOperator::new(s, op.frequencies().clone()).unwrap();
        f[0] += Complex64::new(0.5, 0.25);
        let problem = BpProblem::real(&op2, &f);
        assert!(matches!(solve_bp(&problem, &BpOptions::default()), Err(Error::Infeasible { .. })));
        assert!(matches!(solve_bp_real_lp_check(&problem), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn real_mode_matches_complex_mode_on_real_truth() {
        for seed in 0..10 {
            let (op, c, f) = instance(64, 24, 3, CoefficientStyle::RealGaussian, 60 + seed);
            let cx = solve_bp(&BpProblem::new(&op, &f), &BpOptions::default()).unwrap();
            if cx.coefficients.iter().all(|v| v.im.abs() <= 1e-9) {
                let re = solve_bp(&BpProblem::real(&op, &f), &BpOptions::default()).unwrap();
                assert!(max_err(&re.coefficients, &cx.coefficients) <= 1e-6);
                assert!(is_exact_recovery(&re.coefficients, &c.to_dense()));
            }
        }
    }

    #[test]
    fn converged_solutions_do_not_exceed_true_objective() {
        for seed in 0..20 {
            let (op, c, f) = instance(64, 20, 6, CoefficientStyle::ComplexGaussian, 30 + seed);
            let opts = BpOptions::default();
            let sol = solve_bp(&BpProblem::new(&op, &f), &opts).unwrap();
            if sol.converged {
                assert!(sol.constraint_residual <= 1e-10 * norm2(&f));
                assert!(sol.objective <= c.l1_norm() + opts.gap_tol * 64.0, "{} {} {}", sol.objective, c.l1_norm(), sol.iterations);
            }
        }
    }

    #[test]
    fn bp_succeeds_at_low_sparsity() {
        let mut ok = 0;
        for t in 0..40 {
            let (op, c, f) = instance(100, 40, 5, CoefficientStyle::ComplexGaussian, 800 + t);
            ok += bp_recovers(&BpProblem::new(&op, &f), &BpOptions::default(), &c.to_dense()).unwrap() as usize;
        }
        assert!(ok >= 38, "{ok}/40");
    }

    #[test]
    fn debias_refits_on_detected_support() {
        let (op, c, f) = instance(64, 24, 3, CoefficientStyle::ComplexGaussian, 8);
        let mut rough = c.to_dense();
        for v in rough.iter_mut() {
            *v *= 0.999;
        }
        rough[0] += Complex64::new(1e-9, 0.0);
        let fixed = debias(&op, &f, &rough, false);
        assert!(max_err(&fixed, &c.to_dense()) <= 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn scaling_equivariance(seed in any::<u64>(), re in -4.0..4.0f64, im in 0.1..4.0f64) {
            let (op, _c, f) = instance(48, 20, 3, CoefficientStyle::ComplexGaussian, seed);
            let alpha = Complex64::new(re, im);
            let scaled: Vec<Complex64> = f.iter().map(|v| v * alpha).collect();
            let a = solve_bp(&BpProblem::new(&op, &f), &BpOptions::default()).unwrap();
            let b = solve_bp(&BpProblem::new(&op, &scaled), &BpOptions::default()).unwrap();
            let want: Vec<Complex64> = a.coefficients.iter().map(|v| v * alpha).collect();
            let scale = max_abs(&want);
            prop_assert!(max_err(&b.coefficients, &want) <= 1e-6 * scale);
        }
    }
}
