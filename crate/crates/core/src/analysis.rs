//! Diagnostics: coherence, uniform-recovery predicates, Gram eigenvalues,
//! brute-force restricted isometry constants and sample-count bounds.

use std::collections::HashMap;
use std::f64::consts::{E, SQRT_2};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::HermitianCholesky;
use crate::measurement::{inner, LinearOperator, MeasurementOperator, SupportOperator};
use crate::spectrum::FrequencySet;

/// Above this support size `gram_eigs` switches to power iteration.
pub const DENSE_EIG_LIMIT: usize = 512;

/// Largest number of subsets `ric_bruteforce` will enumerate.
pub const RIC_SUBSET_BUDGET: u128 = 1_000_000;

const ITERATIVE_EIG_TOL: f64 = 1e-10;

/// Constant of the coherence bound for grid sampling.
pub const COHERENCE_CONSTANT_DISCRETE: f64 = 4.0 + 4.0 / (3.0 * SQRT_2);
/// Constant of the coherence bound for continuous sampling.
pub const COHERENCE_CONSTANT_CONTINUOUS: f64 = 4.0 / 3.0;
pub const THRESHOLDING_CONSTANT: f64 = 17.89;
pub const OMP_CONSTANT: f64 = 32.62;

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceReport {
    pub mu: f64,
    /// First column pair `(j, k)`, `j < k`, attaining `mu`.
    pub argmax_pair: (usize, usize),
    /// Largest `M` with `(2M − 1)·mu < 1`, capped at `D`.
    pub recovery_bound_sparsity: usize,
}

impl CoherenceReport {
    fn new(mu: f64, argmax_pair: (usize, usize), d: usize) -> Self {
        let mut m = if mu > 0.0 { ((1.0 / mu + 1.0) / 2.0).ceil() as usize } else { d };
        while m > 0 && (2 * m - 1) as f64 * mu >= 1.0 {
            m -= 1;
        }
        CoherenceReport { mu, argmax_pair, recovery_bound_sparsity: m.min(d) }
    }

    pub fn csv_header() -> &'static str {
        "mu,j,k,max_sparsity"
    }

    pub fn to_csv_row(&self) -> String {
        format!("{:.16e},{},{},{}", self.mu, self.argmax_pair.0, self.argmax_pair.1, self.recovery_bound_sparsity)
    }
}

impl fmt::Display for CoherenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "coherence {:.6} at columns ({}, {}); uniform recovery for M <= {}",
            self.mu, self.argmax_pair.0, self.argmax_pair.1, self.recovery_bound_sparsity
        )
    }
}

/// Coherence of a Fourier measurement operator.
///
/// `⟨φ_j, φ_k⟩` depends only on `j − k`, so the sum over samples is evaluated
/// once per distinct difference.
pub fn coherence(op: &MeasurementOperator) -> Result<CoherenceReport> {
    let gamma = op.frequencies();
    let d = gamma.len();
    if d < 2 {
        return Err(Error::InvalidArgument("coherence needs at least two frequencies".into()));
    }
    let n = op.sampling().len();
    let dim = gamma.dim();
    let lo: Vec<i64> = (0..dim).map(|a| gamma.iter().map(|k| k.components()[a]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..dim).map(|a| gamma.iter().map(|k| k.components()[a]).max().unwrap()).collect();
    let key = |j: &[i64], k: &[i64]| -> i128 {
        let mut acc = 0i128;
        for a in 0..dim {
            let w = (hi[a] - lo[a]) as i128;
            acc = acc * (2 * w + 1) + (j[a] - k[a]) as i128 + w;
        }
        acc
    };
    let mut cache: HashMap<i128, f64> = HashMap::new();
    let mut best = (-1.0f64, (0, 1));
    for a in 0..d {
        let ja = gamma.get(a).components();
        for b in (a + 1)..d {
            let kb = gamma.get(b).components();
            let v = *cache.entry(key(ja, kb)).or_insert_with(|| {
                let mut s = Complex64::new(0.0, 0.0);
                for l in 0..n {
                    let x = op.sampling().point(l);
                    let phase: f64 = (0..dim).map(|i| (ja[i] - kb[i]) as f64 * x[i]).sum();
                    s += Complex64::from_polar(1.0, phase);
                }
                s.norm() / n as f64
            });
            if v > best.0 {
                best = (v, (a, b));
            }
        }
    }
    Ok(CoherenceReport::new(best.0.min(1.0), best.1, d))
}

/// Coherence of an arbitrary operator by explicit pairwise inner products of
/// normalized columns.
pub fn coherence_pairwise(op: &dyn LinearOperator) -> Result<CoherenceReport> {
    let d = op.cols();
    if d < 2 {
        return Err(Error::InvalidArgument("coherence needs at least two columns".into()));
    }
    let cols: Vec<Vec<Complex64>> = (0..d).map(|k| op.column(k)).collect();
    let norms: Vec<f64> = (0..d).map(|k| op.column_norm_sq(k).sqrt()).collect();
    let mut best = (-1.0f64, (0, 1));
    for a in 0..d {
        for b in (a + 1)..d {
            let v = inner(&cols[a], &cols[b]).norm() / (norms[a] * norms[b]);
            if v > best.0 {
                best = (v, (a, b));
            }
        }
    }
    Ok(CoherenceReport::new(best.0.min(1.0), best.1, d))
}

/// `(2M − 1)·μ < 1`
pub fn check_omp_uniform(coh: &CoherenceReport, m: usize) -> bool {
    m == 0 || (2 * m - 1) as f64 * coh.mu < 1.0
}

/// `(2M − 1)·μ < 1/R`
pub fn check_thresh_uniform(coh: &CoherenceReport, m: usize, r: f64) -> Result<bool> {
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("dynamic range {r} must be at least 1")));
    }
    Ok(m == 0 || (2 * m - 1) as f64 * coh.mu < 1.0 / r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigBoundReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `max(1 − λ_min, λ_max − 1)`
    pub delta: f64,
}

impl EigBoundReport {
    fn new(lambda_min: f64, lambda_max: f64) -> Self {
        let lambda_min = lambda_min.max(0.0);
        EigBoundReport { lambda_min, lambda_max, delta: (1.0 - lambda_min).max(lambda_max - 1.0) }
    }

    pub fn within(&self, delta: f64) -> bool {
        self.lambda_min >= 1.0 - delta && self.lambda_max <= 1.0 + delta
    }

    pub fn csv_header() -> &'static str {
        "lambda_min,lambda_max,delta"
    }

    pub fn to_csv_row(&self) -> String {
        format!("{:.16e},{:.16e},{:.16e}", self.lambda_min, self.lambda_max, self.delta)
    }
}

impl fmt::Display for EigBoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "eigenvalues in [{:.6}, {:.6}], delta {:.6}", self.lambda_min, self.lambda_max, self.delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigMethod {
    Auto,
    Dense,
    Iterative,
}

fn normalized_gram(sub: &SupportOperator) -> Result<DMatrix<Complex64>> {
    let div = sub.gram_divisor();
    Ok(sub.gram()?.map(|v| v / div))
}

/// Extreme eigenvalues of `F_{TX}^* F_{TX}` divided by `N`.
pub fn gram_eigs(sub: &SupportOperator) -> Result<EigBoundReport> {
    gram_eigs_with(sub, EigMethod::Auto)
}

pub fn gram_eigs_with(sub: &SupportOperator, method: EigMethod) -> Result<EigBoundReport> {
    let g = normalized_gram(sub)?;
    let m = g.nrows();
    if m == 1 {
        return Ok(EigBoundReport::new(g[(0, 0)].re, g[(0, 0)].re));
    }
    let dense = match method {
        EigMethod::Auto => m <= DENSE_EIG_LIMIT,
        EigMethod::Dense => true,
        EigMethod::Iterative => false,
    };
    if dense {
        let (lo, hi) = hermitian_extremes(g);
        return Ok(EigBoundReport::new(lo, hi));
    }
    let hi = power_iteration(m, |v| &g * v);
    let lo = match HermitianCholesky::factor(&g, 1e-14) {
        Ok(chol) => {
            let inv = power_iteration(m, |v| DVector::from_vec(chol.solve(v.as_slice())));
            1.0 / inv
        }
        Err(_) => 0.0,
    };
    Ok(EigBoundReport::new(lo, hi))
}

fn hermitian_extremes(g: DMatrix<Complex64>) -> (f64, f64) {
    let eig = g.symmetric_eigenvalues();
    (eig.min(), eig.max())
}

/// Largest eigenvalue of a Hermitian positive semidefinite map by power
/// iteration with a Rayleigh-quotient stopping test.
fn power_iteration(m: usize, apply: impl Fn(&DVector<Complex64>) -> DVector<Complex64>) -> f64 {
    let mut v = DVector::from_fn(m, |i, _| Complex64::new(1.0 + (i as f64 * 0.618_033_988_75).fract(), 0.0));
    v /= Complex64::new(v.norm(), 0.0);
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = apply(&v);
        let next = v.dotc(&w).re;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        v = w / Complex64::new(nw, 0.0);
        if (next - lambda).abs() <= ITERATIVE_EIG_TOL * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[derive(Clone, Debug, PartialEq)]
pub struct RicReport {
    /// `deltas[M − 1] = δ_M` for the matrix `N^{−1/2} F_X`.
    pub deltas: Vec<f64>,
    /// `δ_M + δ_{2M} + δ_{3M} < 1` at the largest `M` with `3M ≤ M_max`.
    pub condition_crt: Option<bool>,
}

impl RicReport {
    pub fn delta(&self, m: usize) -> Option<f64> {
        m.checked_sub(1).and_then(|i| self.deltas.get(i)).copied()
    }

    pub fn crt_holds(&self, m: usize) -> Option<bool> {
        Some(self.delta(m)? + self.delta(2 * m)? + self.delta(3 * m)? < 1.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,delta\n");
        for (i, d) in self.deltas.iter().enumerate() {
            s.push_str(&format!("{},{:.16e}\n", i + 1, d));
        }
        s
    }
}

impl fmt::Display for RicReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.deltas.iter().enumerate() {
            writeln!(f, "delta_{} = {:.6}", i + 1, d)?;
        }
        match self.condition_crt {
            Some(ok) => write!(f, "delta_M + delta_2M + delta_3M < 1: {ok}"),
            None => write!(f, "delta_M + delta_2M + delta_3M < 1: not evaluated"),
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Calls `f` on every sorted `size`-subset of `start..d` that extends `prefix`.
fn for_each_subset(prefix: &mut Vec<usize>, start: usize, d: usize, size: usize, f: &mut impl FnMut(&[usize])) {
    if prefix.len() == size {
        f(prefix);
        return;
    }
    let remaining = size - prefix.len();
    for k in start..=(d - remaining) {
        prefix.push(k);
        for_each_subset(prefix, k + 1, d, size, f);
        prefix.pop();
    }
}

fn subset_delta(gram: &DMatrix<Complex64>, subset: &[usize]) -> f64 {
    if subset.len() == 1 {
        let v = gram[(subset[0], subset[0])].re;
        return (1.0 - v).max(v - 1.0);
    }
    let sub = DMatrix::from_fn(subset.len(), subset.len(), |a, b| gram[(subset[a], subset[b])]);
    let (lo, hi) = hermitian_extremes(sub);
    (1.0 - lo.max(0.0)).max(hi - 1.0)
}

/// Restricted isometry constants `δ_1..δ_{M_max}` by exhaustive enumeration.
pub fn ric_bruteforce(op: &dyn LinearOperator, m_max: usize) -> Result<RicReport> {
    let d = op.cols();
    if m_max == 0 || m_max > d {
        return Err(Error::InvalidArgument(format!("M_max = {m_max} must lie in 1..={d}")));
    }
    let subsets: u128 = (1..=m_max as u128).map(|m| binomial(d as u128, m)).fold(0u128, |a, b| a.saturating_add(b));
    if subsets > RIC_SUBSET_BUDGET {
        return Err(Error::BudgetExceeded { subsets, budget: RIC_SUBSET_BUDGET });
    }
    let all: Vec<usize> = (0..d).collect();
    let gram = normalized_gram(&SupportOperator::new(op, all)?)?;

    let mut deltas = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let per_first = |first: usize| -> f64 {
            let mut best = 0.0f64;
            let mut prefix = vec![first];
            for_each_subset(&mut prefix, first + 1, d, m, &mut |s| best = best.max(subset_delta(&gram, s)));
            best
        };
        let firsts = 0..=(d - m);
        #[cfg(feature = "parallel")]
        let dm = {
            use rayon::prelude::*;
            firsts.into_par_iter().map(per_first).reduce(|| 0.0, f64::max)
        };
        #[cfg(not(feature = "parallel"))]
        let dm = firsts.map(per_first).fold(0.0, f64::max);
        let prev = deltas.last().copied().unwrap_or(0.0);
        deltas.push(dm.max(prev));
    }
    let mut report = RicReport { deltas, condition_crt: None };
    if m_max >= 3 {
        report.condition_crt = report.crt_holds(m_max / 3);
    }
    Ok(report)
}

/// Sampling model entering the coherence bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundModel {
    Continuous,
    /// Samples on the grid `(2π/m) Z_m^d`.
    Discrete { grid: usize },
}

/// Sample counts sufficient for each recovery guarantee, with probability at
/// least `1 − eps`. All logarithms are natural.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBounds {
    pub d: usize,
    pub m: usize,
    pub r: f64,
    pub eps: f64,
    /// Non-uniform recovery by thresholding.
    pub thresholding: u64,
    /// Non-uniform recovery by OMP.
    pub omp: u64,
    /// `(2M − 1)·μ < 1`, hence uniform recovery by OMP and BP.
    pub coherence: u64,
    pub coherence_constant: f64,
    /// Number of distinct nonzero differences of `Γ`.
    pub d_prime: usize,
}

impl SampleBounds {
    pub fn csv_header() -> &'static str {
        "D,M,R,eps,D_prime,N_thresh,N_omp,N_coh"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{},{},{},{}",
            self.d, self.m, self.r, self.eps, self.d_prime, self.thresholding, self.omp, self.coherence
        )
    }
}

impl fmt::Display for SampleBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "D = {}, M = {}, R = {}, eps = {}, D' = {}", self.d, self.m, self.r, self.eps, self.d_prime)?;
        writeln!(f, "  thresholding (non-uniform): N >= {}", self.thresholding)?;
        writeln!(f, "  OMP (non-uniform):          N >= {}", self.omp)?;
        writeln!(f, "  coherence (uniform, C = {:.4}): N >= {}", self.coherence_constant, self.coherence)?;
        write!(f, "  basis pursuit (non-uniform): C*M*log(D/eps), constant not known")
    }
}

fn check_bound_inputs(m: usize, eps: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("sparsity must be positive".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, 1)")));
    }
    Ok(())
}

pub fn sample_bounds(gamma: &FrequencySet, m: usize, r: f64, eps: f64, model: BoundModel) -> Result<SampleBounds> {
    check_bound_inputs(m, eps)?;
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("dynamic range {r} must be at least 1")));
    }
    let d = gamma.len();
    let df = d as f64;
    let mf = m as f64;
    let (periodic, coherence_constant) = match model {
        BoundModel::Continuous => (None, COHERENCE_CONSTANT_CONTINUOUS),
        BoundModel::Discrete { grid } => {
            (gamma.covers_grid(grid).then_some(grid), COHERENCE_CONSTANT_DISCRETE)
        }
    };
    let d_prime = gamma.difference_count(periodic);
    let ceil = |v: f64| v.ceil() as u64;
    Ok(SampleBounds {
        d,
        m,
        r,
        eps,
        thresholding: ceil(THRESHOLDING_CONSTANT * mf * r * r * (4.0 * df / eps).ln()),
        omp: ceil(OMP_CONSTANT * mf * (8.0 * df / eps).ln()),
        coherence: ceil(coherence_constant * (2.0 * mf - 1.0).powi(2) * (4.0 * d_prime.max(1) as f64 / eps).ln()),
        coherence_constant,
        d_prime,
    })
}

/// Smallest `N` with `⌊δ²N / (3eM)⌋ ≥ ln(c(δ)·M/eps)`, `c(δ) = 1/(1 − δ²/e)`.
/// With that many samples the eigenvalues of `N^{−1} F_{TX}^* F_{TX}` lie in
/// `[1 − δ, 1 + δ]` with probability at least `1 − eps`.
pub fn eigenvalue_sample_bound(m: usize, delta: f64, eps: f64) -> Result<u64> {
    check_bound_inputs(m, eps)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must lie in (0, 1)")));
    }
    let mf = m as f64;
    let c = 1.0 / (1.0 - delta * delta / E);
    let needed = (c * mf / eps).ln().max(0.0).ceil();
    let per = 3.0 * E * mf / (delta * delta);
    let mut n = (needed * per).floor().max(1.0) as u64;
    while ((delta * delta * n as f64) / (3.0 * E * mf)).floor() < needed {
        n += 1;
    }
    while n > 1 && ((delta * delta * (n - 1) as f64) / (3.0 * E * mf)).floor() >= needed {
        n -= 1;
    }
    Ok(n)
}

/// Tail bound `4·exp(−N x² / (4‖c‖₂² + (4/(3√2))‖c‖₁ x))` for
/// `|N^{−1}⟨F_{TX} c, φ_j⟩|`, `j ∉ T`.
pub fn concentration_tail(n: usize, x: f64, l2: f64, l1: f64) -> f64 {
    let denom = 4.0 * l2 * l2 + 4.0 / (3.0 * SQRT_2) * l1 * x;
    (4.0 * (-(n as f64) * x * x / denom).exp()).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::DenseOperator;
    use crate::rng::{derive_seed, stream_rng};
    use crate::sampling::{draw_gaussian_matrix, SamplingSet};
    use crate::spectrum::{random_support, CoefficientStyle, SparseCoefficients};
    use proptest::prelude::*;
    use rand::Rng;

    fn op(d: usize, n: usize, discrete: bool, seed: u64) -> MeasurementOperator {
        let g = FrequencySet::centered(d, 1).unwrap().into_shared();
        let s = if discrete {
            SamplingSet::discrete(d, 1, n, seed).unwrap()
        } else {
            SamplingSet::continuous(1, n, seed).unwrap()
        };
        MeasurementOperator::new(s, g).unwrap()
    }

    #[test]
    fn full_grid_is_incoherent() {
        let g = FrequencySet::centered(32, 1).unwrap().into_shared();
        let s = SamplingSet::from_grid_indices(32, 1, (0..32).collect(), 0).unwrap();
        let o = MeasurementOperator::new(s, g).unwrap();
        let c = coherence(&o).unwrap();
        assert!(c.mu <= 1e-13);
        assert_eq!(c.recovery_bound_sparsity, 32);
        assert!(check_omp_uniform(&c, 32));
    }

    #[test]
    fn single_sample_is_fully_coherent() {
        let c = coherence(&op(16, 1, false, 3)).unwrap();
        assert!((c.mu - 1.0).abs() <= 1e-12);
        assert!(!check_omp_uniform(&c, 1));
        assert_eq!(c.recovery_bound_sparsity, 0);
    }

    #[test]
    fn difference_scan_matches_pairwise_scan() {
        for seed in 0..5 {
            for discrete in [false, true] {
                let o = op(32, 8, discrete, seed);
                let a = coherence(&o).unwrap();
                let b = coherence_pairwise(&o).unwrap();
                assert!((a.mu - b.mu).abs() <= 1e-12);
            }
        }
        let g = FrequencySet::cube(2, 2).unwrap().into_shared();
        let o = MeasurementOperator::new(SamplingSet::continuous(2, 7, 1).unwrap(), g).unwrap();
        assert!((coherence(&o).unwrap().mu - coherence_pairwise(&o).unwrap().mu).abs() <= 1e-12);
    }

    #[test]
    fn predicates() {
        let c = CoherenceReport::new(0.1, (0, 1), 100);
        assert_eq!(c.recovery_bound_sparsity, 5);
        assert!(check_omp_uniform(&c, 5) && !check_omp_uniform(&c, 6));
        assert!(!check_thresh_uniform(&c, 2, 4.0).unwrap());
        assert_eq!(check_thresh_uniform(&c, 5, 1.0).unwrap(), check_omp_uniform(&c, 5));
        assert!(check_thresh_uniform(&c, 2, 0.5).is_err());
        let one = CoherenceReport::new(1.0, (0, 1), 4);
        assert!(!check_omp_uniform(&one, 1));
    }

    #[test]
    fn gram_eig_trivial_cases() {
        for n in [7, 49, 93] {
            let o = op(128, n, false, 5);
            let r = gram_eigs(&SupportOperator::new(&o, vec![17]).unwrap()).unwrap();
            assert_eq!((r.lambda_min, r.lambda_max, r.delta), (1.0, 1.0, 0.0));
        }
        let g = FrequencySet::centered(16, 1).unwrap().into_shared();
        let s = SamplingSet::from_grid_indices(16, 1, (0..16).collect(), 0).unwrap();
        let o = MeasurementOperator::new(s, g).unwrap();
        let r = gram_eigs(&SupportOperator::new(&o, vec![1, 4, 9, 15]).unwrap()).unwrap();
        assert!((r.lambda_min - 1.0).abs() <= 1e-12 && (r.lambda_max - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn gram_eigs_match_dense_oracle() {
        let o = op(64, 64, false, 77);
        let support = random_support(64, 8, 1).unwrap();
        let sub = SupportOperator::new(&o, support.clone()).unwrap();
        let r = gram_eigs(&sub).unwrap();
        // Oracle: the real 2M×2M embedding [[Re G, −Im G], [Im G, Re G]] has the
        // same spectrum (each eigenvalue doubled).
        let a = DMatrix::from_fn(64, 8, |j, c| o.entry(j, support[c]));
        let g = a.adjoint() * &a / Complex64::new(64.0, 0.0);
        let emb = DMatrix::from_fn(16, 16, |i, j| {
            let v = g[(i % 8, j % 8)];
            match (i < 8, j < 8) {
                (true, true) | (false, false) => v.re,
                (true, false) => -v.im,
                (false, true) => v.im,
            }
        });
        let ev = emb.symmetric_eigenvalues();
        assert!((r.lambda_min - ev.min()).abs() <= 1e-10);
        assert!((r.lambda_max - ev.max()).abs() <= 1e-10);
        assert!(r.lambda_min <= 1.0 + 1e-12 && r.lambda_max >= 1.0 - 1e-12);
    }

    #[test]
    fn iterative_and_dense_eigs_agree() {
        let o = op(256, 120, true, 4);
        let sub = SupportOperator::new(&o, random_support(256, 30, 2).unwrap()).unwrap();
        let a = gram_eigs_with(&sub, EigMethod::Dense).unwrap();
        let b = gram_eigs_with(&sub, EigMethod::Iterative).unwrap();
        assert!((a.lambda_max - b.lambda_max).abs() <= 1e-8 * a.lambda_max);
        assert!((a.lambda_min - b.lambda_min).abs() <= 1e-7 * a.lambda_max);
    }

    #[test]
    fn ric_matches_per_subset_svd() {
        for seed in 0..3 {
            let o = op(10, 6, false, 40 + seed);
            let rep = ric_bruteforce(&o, 3).unwrap();
            assert_eq!(rep.deltas[0], 0.0);
            let mut want = [0.0f64; 3];
            for m in 1..=3 {
                let mut prefix = Vec::new();
                for_each_subset(&mut prefix, 0, 10, m, &mut |s| {
                    let a = DMatrix::from_fn(6, s.len(), |j, c| o.entry(j, s[c]) / Complex64::new(6f64.sqrt(), 0.0));
                    let sv = a.singular_values();
                    let (lo, hi) = (sv.min().powi(2), sv.max().powi(2));
                    want[m - 1] = want[m - 1].max((1.0 - lo).max(hi - 1.0));
                });
            }
            for m in 0..3 {
                assert!((rep.deltas[m] - want[m]).abs() <= 1e-10, "{:?} vs {:?}", rep.deltas, want);
            }
        }
    }

    #[test]
    fn ric_full_grid_and_budget() {
        let g = FrequencySet::centered(8, 1).unwrap().into_shared();
        let s = SamplingSet::from_grid_indices(8, 1, (0..8).collect(), 0).unwrap();
        let o = MeasurementOperator::new(s, g).unwrap();
        let rep = ric_bruteforce(&o, 8).unwrap();
        assert!(rep.deltas.iter().all(|&d| d <= 1e-12));
        assert_eq!(rep.condition_crt, Some(true));
        let big = op(200, 10, false, 1);
        assert!(matches!(ric_bruteforce(&big, 4), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn sample_bound_values() {
        let g = FrequencySet::centered(100, 1).unwrap();
        let b = sample_bounds(&g, 1, 1.0, 0.1, BoundModel::Continuous).unwrap();
        assert_eq!(b.thresholding, 149);
        let b2 = sample_bounds(&g, 1, 2.0, 0.1, BoundModel::Continuous).unwrap();
        let exact = |r: f64| THRESHOLDING_CONSTANT * r * r * 4000f64.ln();
        assert_eq!(b2.thresholding, exact(2.0).ceil() as u64);
        assert!((exact(2.0) / exact(1.0) - 4.0).abs() < 1e-12);
        assert_eq!(b.omp, b2.omp);
        assert_eq!(b.omp, (OMP_CONSTANT * 8000f64.ln()).ceil() as u64);

        let g16 = FrequencySet::centered(16, 1).unwrap();
        let disc = sample_bounds(&g16, 2, 1.0, 0.1, BoundModel::Discrete { grid: 16 }).unwrap();
        assert_eq!((disc.d_prime, disc.coherence), (15, 285));
        let cont = sample_bounds(&g16, 2, 1.0, 0.1, BoundModel::Continuous).unwrap();
        assert_eq!((cont.d_prime, cont.coherence), (30, 86));
        assert!(sample_bounds(&g16, 2, 1.0, 1.5, BoundModel::Continuous).is_err());
    }

    #[test]
    fn eigenvalue_bound_is_minimal() {
        assert_eq!(eigenvalue_sample_bound(8, 0.5, 0.1).unwrap(), 1305);
        for m in [1, 3, 8, 20] {
            let n = eigenvalue_sample_bound(m, 0.3, 0.05).unwrap();
            let need = ((1.0 / (1.0 - 0.09 / E)) * m as f64 / 0.05).ln();
            let lhs = |n: u64| (0.09 * n as f64 / (3.0 * E * m as f64)).floor();
            assert!(lhs(n) >= need && lhs(n - 1) < need);
        }
    }

    #[test]
    fn gaussian_operator_coherence() {
        let a = DenseOperator::from_real(&draw_gaussian_matrix(40, 20, 3).unwrap());
        let c = coherence_pairwise(&a).unwrap();
        assert!(c.mu > 0.0 && c.mu < 1.0);
    }

    #[test]
    fn concentration_tail_holds_empirically() {
        // Fixed c on T and fixed j outside T; redraw the sampling set.
        let g = FrequencySet::centered(32, 1).unwrap().into_shared();
        let c = SparseCoefficients::random(&g, 3, CoefficientStyle::ComplexGaussian, 9).unwrap();
        let j = (0..32).find(|k| !c.support().contains(k)).unwrap();
        let n = 20;
        let trials = 10_000;
        let xs = [0.3, 0.6, 0.9, 1.2];
        let mut hits = [0usize; 4];
        let mut rng = stream_rng(5);
        for t in 0..trials {
            let s = SamplingSet::continuous(1, n, derive_seed(rng.random(), t, 3)).unwrap();
            let o = MeasurementOperator::new(s, g.clone()).unwrap();
            let v = inner(&o.apply(&c.to_dense()).unwrap(), &o.column(j)).norm() / n as f64;
            for (h, &x) in hits.iter_mut().zip(&xs) {
                *h += (v >= x) as usize;
            }
        }
        for (h, &x) in hits.iter().zip(&xs) {
            let p = *h as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt().max(1.0 / trials as f64);
            assert!(p <= concentration_tail(n, x, c.l2_norm(), c.l1_norm()) + 3.0 * se);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn coherence_in_unit_interval(seed in any::<u64>(), n in 1usize..20) {
            let c = coherence(&op(24, n, seed % 2 == 0, seed)).unwrap();
            prop_assert!(c.mu >= 0.0 && c.mu <= 1.0);
            prop_assert!(c.argmax_pair.0 < c.argmax_pair.1);
        }

        #[test]
        fn ric_is_monotone(seed in any::<u64>()) {
            let rep = ric_bruteforce(&op(8, 5, false, seed), 4).unwrap();
            prop_assert_eq!(rep.deltas[0], 0.0);
            prop_assert!(rep.deltas.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
