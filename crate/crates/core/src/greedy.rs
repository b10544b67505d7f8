//! Greedy reconstruction: orthogonal matching pursuit, ordinary matching
//! pursuit and thresholding.
//!
//! All argmax selections break ties toward the smallest canonical column
//! index, which keeps every run reproducible.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{lsqr, IncrementalQr};
use crate::measurement::{norm2, DenseOperator, LinearOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative max-norm tolerance for declaring a reconstruction exact.
pub const RECOVERY_TOLERANCE: f64 = 1e-4;

/// Iteration cap for matching pursuit when none is given.
pub const DEFAULT_MP_ITERATIONS: usize = 1000;

/// When to stop the pursuit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoppingRule {
    /// Stop after this many selections (OMP). Must not exceed `N`.
    pub max_sparsity: Option<usize>,
    /// Stop once `‖r_s‖₂ ≤ ε` (absolute).
    pub residual_tolerance: Option<f64>,
    /// Iteration cap for matching pursuit, where indices may repeat.
    pub max_iterations: Option<usize>,
}

impl StoppingRule {
    pub fn sparsity(m: usize) -> Self {
        StoppingRule { max_sparsity: Some(m), residual_tolerance: None, max_iterations: None }
    }

    pub fn tolerance(eps: f64) -> Self {
        StoppingRule { max_sparsity: None, residual_tolerance: Some(eps), max_iterations: None }
    }

    /// `ε = 1e−8·‖f‖₂`, used when the sparsity is unknown.
    pub fn default_for(samples: &[Complex64]) -> Self {
        Self::tolerance(1e-8 * norm2(samples))
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = Some(n);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_sparsity.is_none() && self.residual_tolerance.is_none() {
            return Err(Error::InvalidArgument("stopping rule needs a sparsity or a residual tolerance".into()));
        }
        if let Some(eps) = self.residual_tolerance {
            if !(eps >= 0.0) {
                return Err(Error::InvalidArgument(format!("residual tolerance {eps} must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Least-squares backend used by OMP's projection step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LsBackend {
    /// QR factorization updated by one column per iteration.
    QrUpdate,
    /// LSQR, warm-started from the previous solution. `implicit` applies
    /// `F_{T_s X}` through the parent operator (FFT) instead of stored columns.
    Iterative { tol: f64, max_iter: usize, implicit: bool },
}

impl LsBackend {
    pub fn iterative() -> Self {
        LsBackend::Iterative { tol: 1e-12, max_iter: 500, implicit: false }
    }

    pub fn iterative_implicit() -> Self {
        LsBackend::Iterative { tol: 1e-12, max_iter: 500, implicit: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryOutcome {
    /// Length-`D` vector, zero off `support`.
    pub coefficients: Vec<Complex64>,
    /// Recovered support in ascending order.
    pub support: Vec<usize>,
    pub iterations: usize,
    /// `‖r_s‖₂` after each iteration.
    pub residual_norms: Vec<f64>,
    /// Index chosen at each iteration.
    pub selected_indices: Vec<usize>,
}

impl RecoveryOutcome {
    fn empty(d: usize) -> Self {
        RecoveryOutcome {
            coefficients: vec![ZERO; d],
            support: Vec::new(),
            iterations: 0,
            residual_norms: Vec::new(),
            selected_indices: Vec::new(),
        }
    }

    /// Selections outside `truth` (OMP may still end up exact, since the
    /// projection can assign them zero).
    pub fn wrong_selections(&self, truth: &[usize]) -> usize {
        self.selected_indices.iter().filter(|k| !truth.contains(k)).count()
    }
}

/// `max_k |d_k − c_k| ≤ 1e−4 · max_k |c_k|`.
pub fn is_exact_recovery(recovered: &[Complex64], truth: &[Complex64]) -> bool {
    if recovered.len() != truth.len() {
        return false;
    }
    let scale = truth.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let err = recovered.iter().zip(truth).map(|(d, c)| (d - c).norm()).fold(0.0, f64::max);
    err <= RECOVERY_TOLERANCE * scale
}

fn argmax_excluding(corr: &[Complex64], weights: Option<&[f64]>, excluded: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, c) in corr.iter().enumerate() {
        if excluded[k] {
            continue;
        }
        let v = match weights {
            Some(w) => c.norm_sqr() * w[k],
            None => c.norm_sqr(),
        };
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}

fn check_samples(op: &dyn LinearOperator, samples: &[Complex64]) -> Result<()> {
    if op.rows() == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if samples.len() != op.rows() {
        return Err(Error::LengthMismatch { expected: op.rows(), got: samples.len() });
    }
    Ok(())
}

/// Columns of a parent operator in selection order, applied through the parent.
struct SelectedColumns<'a> {
    parent: &'a dyn LinearOperator,
    indices: &'a [usize],
}

impl LinearOperator for SelectedColumns<'_> {
    fn rows(&self) -> usize {
        self.parent.rows()
    }

    fn cols(&self) -> usize {
        self.indices.len()
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut full = vec![ZERO; self.parent.cols()];
        for (&k, &v) in self.indices.iter().zip(x) {
            full[k] = v;
        }
        self.parent.apply(&full)
    }

    fn adjoint(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        let full = self.parent.adjoint(r)?;
        Ok(self.indices.iter().map(|&k| full[k]).collect())
    }

    fn column(&self, k: usize) -> Vec<Complex64> {
        self.parent.column(self.indices[k])
    }

    fn column_norm_sq(&self, k: usize) -> f64 {
        self.parent.column_norm_sq(self.indices[k])
    }

    fn gram_scale(&self) -> f64 {
        self.parent.gram_scale()
    }

    fn gram_divisor(&self) -> f64 {
        self.parent.gram_divisor()
    }
}

/// Orthogonal matching pursuit.
///
/// Each iteration picks the column most correlated with the residual among
/// those not yet selected, then projects the samples onto the span of all
/// selected columns. Runs at most `N` iterations.
pub fn omp(
    op: &dyn LinearOperator,
    samples: &[Complex64],
    stop: &StoppingRule,
    backend: LsBackend,
) -> Result<RecoveryOutcome> {
    check_samples(op, samples)?;
    stop.validate()?;
    let n = op.rows();
    if let Some(m) = stop.max_sparsity {
        if m > n {
            return Err(Error::InvalidArgument(format!("sparsity {m} exceeds the number of samples {n}")));
        }
    }
    let limit = stop.max_sparsity.unwrap_or(n).min(n).min(op.cols());
    let eps = stop.residual_tolerance.unwrap_or(0.0);

    let mut out = RecoveryOutcome::empty(op.cols());
    let mut selected = vec![false; op.cols()];
    let mut order: Vec<usize> = Vec::new();
    let mut columns: Vec<Vec<Complex64>> = Vec::new();
    let mut qr = IncrementalQr::new(samples.to_vec());
    let mut solution: Vec<Complex64> = Vec::new();
    let mut residual = samples.to_vec();
    let mut rnorm = norm2(&residual);

    while order.len() < limit && rnorm > eps {
        let corr = op.adjoint(&residual)?;
        let k = argmax_excluding(&corr, None, &selected).expect("limit < D leaves a candidate");
        selected[k] = true;
        order.push(k);
        match backend {
            LsBackend::QrUpdate => {
                qr.push(&op.column(k), k)?;
                solution = qr.solve();
                residual = qr.residual();
            }
            LsBackend::Iterative { tol, max_iter, implicit } => {
                solution.push(ZERO);
                let fit = if implicit {
                    let sub = SelectedColumns { parent: op, indices: &order };
                    lsqr(&sub, samples, Some(&solution), tol, max_iter)?
                } else {
                    columns.push(op.column(k));
                    let dense = DenseOperator::from_columns(n, columns.clone(), op.gram_scale())?;
                    lsqr(&dense, samples, Some(&solution), tol, max_iter)?
                };
                if !fit.converged {
                    return Err(Error::NotConverged { iterations: fit.iterations });
                }
                solution = fit.solution;
                let sub = SelectedColumns { parent: op, indices: &order };
                let fitted = if implicit {
                    sub.apply(&solution)?
                } else {
                    let mut acc = vec![ZERO; n];
                    for (col, d) in columns.iter().zip(&solution) {
                        for (a, c) in acc.iter_mut().zip(col) {
                            *a += c * d;
                        }
                    }
                    acc
                };
                residual = samples.iter().zip(&fitted).map(|(f, g)| f - g).collect();
            }
        }
        rnorm = norm2(&residual);
        out.residual_norms.push(rnorm);
        out.selected_indices.push(k);
    }

    for (&k, &d) in order.iter().zip(&solution) {
        out.coefficients[k] = d;
    }
    out.support = order;
    out.support.sort_unstable();
    out.iterations = out.selected_indices.len();
    Ok(out)
}

/// Ordinary matching pursuit on unit-normalized columns `φ_k / ‖φ_k‖`.
///
/// The update `d_k += ⟨r, φ̃_k⟩`, `r −= ⟨r, φ̃_k⟩ φ̃_k` is applied without
/// re-projection, so indices may be chosen repeatedly. Coefficients are
/// reported in the unnormalized column convention. Stops on the residual
/// tolerance, on `max_iterations` (default 1000), or when every correlation
/// vanishes.
pub fn mp(op: &dyn LinearOperator, samples: &[Complex64], stop: &StoppingRule) -> Result<RecoveryOutcome> {
    check_samples(op, samples)?;
    stop.validate()?;
    let max_iter = stop.max_iterations.unwrap_or(DEFAULT_MP_ITERATIONS);
    let eps = stop.residual_tolerance.unwrap_or(0.0);
    let norms: Vec<f64> = (0..op.cols()).map(|k| op.column_norm_sq(k).sqrt()).collect();
    let weights: Vec<f64> = norms.iter().map(|&v| if v > 0.0 { 1.0 / (v * v) } else { 0.0 }).collect();
    let excluded = vec![false; op.cols()];

    let mut out = RecoveryOutcome::empty(op.cols());
    let mut residual = samples.to_vec();
    let mut rnorm = norm2(&residual);
    while out.iterations < max_iter && rnorm > eps {
        let corr = op.adjoint(&residual)?;
        let k = argmax_excluding(&corr, Some(&weights), &excluded).expect("nonempty frequency set");
        let step = corr[k] / norms[k];
        if step.norm() <= f64::EPSILON * rnorm {
            break;
        }
        let column = op.column(k);
        for (r, c) in residual.iter_mut().zip(&column) {
            *r -= step * c / norms[k];
        }
        out.coefficients[k] += step / norms[k];
        rnorm = norm2(&residual);
        out.iterations += 1;
        out.residual_norms.push(rnorm);
        out.selected_indices.push(k);
    }
    out.support = (0..op.cols()).filter(|&k| out.coefficients[k] != ZERO).collect();
    Ok(out)
}

/// Thresholding: keep the `m` largest `|⟨f, φ_k⟩|`, then fit by least squares.
pub fn thresholding(op: &dyn LinearOperator, samples: &[Complex64], m: usize) -> Result<RecoveryOutcome> {
    check_samples(op, samples)?;
    if m == 0 || m > op.rows() || m > op.cols() {
        return Err(Error::InvalidArgument(format!(
            "thresholding needs 1 ≤ M ≤ N; got M = {m}, N = {}",
            op.rows()
        )));
    }
    let corr = op.adjoint(samples)?;
    let mut order: Vec<usize> = (0..op.cols()).collect();
    order.sort_by(|&a, &b| corr[b].norm_sqr().total_cmp(&corr[a].norm_sqr()).then(a.cmp(&b)));
    let mut support = order[..m].to_vec();
    support.sort_unstable();

    let mut qr = IncrementalQr::new(samples.to_vec());
    for &k in &support {
        qr.push(&op.column(k), k)?;
    }
    let mut out = RecoveryOutcome::empty(op.cols());
    for (&k, d) in support.iter().zip(qr.solve()) {
        out.coefficients[k] = d;
    }
    out.residual_norms.push(norm2(&qr.residual()));
    out.selected_indices = support.clone();
    out.support = support;
    out.iterations = 1;
    Ok(out)
}
