//! The measurement operator `F_X` with entries `e^{ik·x_j}`.
//!
//! Two application paths exist. The direct path sums `Σ_k c_k e^{ik·x_j}`
//! explicitly (caching the dense matrix when it is small). When the points lie
//! on the grid `(2π/m) Z_m^d` and `Γ` embeds in `Z_m^d`, the FFT-subset path
//! scatters coefficients onto an `m^d` array, runs a `d`-dimensional FFT and
//! reads out the sampled cells.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::sampling::{SamplingModel, SamplingSet};
use crate::spectrum::FrequencySet;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense caches are built only up to this many entries (64 MiB).
pub const DENSE_CACHE_LIMIT: usize = 1 << 22;

/// Largest support for which Gram matrices are formed explicitly.
pub const MAX_EXPLICIT_GRAM: usize = 4096;

/// A linear map `C^cols → C^rows` with column access.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>>;
    fn adjoint(&self, r: &[Complex64]) -> Result<Vec<Complex64>>;
    fn column(&self, k: usize) -> Vec<Complex64>;
    fn column_norm_sq(&self, k: usize) -> f64;
    /// Factor `s` that makes `s·‖φ_k‖²` equal to one on average (`1/N` for Fourier).
    fn gram_scale(&self) -> f64;
    /// `1 / gram_scale`, exact where the operator knows it (`N` for Fourier).
    fn gram_divisor(&self) -> f64 {
        1.0 / self.gram_scale()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FastPath {
    FftSubset,
    Direct,
}

#[derive(Clone)]
struct GridPlan {
    m: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// flattened grid cell of each sample
    cells: Vec<usize>,
    /// flattened residue of each frequency
    residues: Vec<usize>,
}

impl GridPlan {
    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        let m = self.m;
        if self.dim == 1 {
            fft.process(buf);
            return;
        }
        let mut line = vec![ZERO; m];
        let total = buf.len();
        for axis in 0..self.dim {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let block = stride * m;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (t, v) in line.iter_mut().enumerate() {
                        *v = buf[base + t * stride];
                    }
                    fft.process(&mut line);
                    for (t, v) in line.iter().enumerate() {
                        buf[base + t * stride] = *v;
                    }
                }
            }
        }
    }
}

/// `F_X` for a sampling set and frequency set.
#[derive(Clone)]
pub struct MeasurementOperator {
    sampling: SamplingSet,
    frequencies: Arc<FrequencySet>,
    path: FastPath,
    grid: Option<GridPlan>,
    /// `e^{2πi p/m}` for the discrete model
    roots: Option<Vec<Complex64>>,
    dense: Arc<OnceLock<Vec<Complex64>>>,
}

impl std::fmt::Debug for MeasurementOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasurementOperator")
            .field("rows", &self.sampling.len())
            .field("cols", &self.frequencies.len())
            .field("model", &self.sampling.model())
            .field("path", &self.path)
            .finish()
    }
}

impl MeasurementOperator {
    /// Picks the FFT-subset path whenever it applies.
    pub fn new(sampling: SamplingSet, frequencies: Arc<FrequencySet>) -> Result<Self> {
        let eligible = Self::fft_eligible(&sampling, &frequencies);
        let path = if eligible { FastPath::FftSubset } else { FastPath::Direct };
        Self::with_path(sampling, frequencies, path)
    }

    fn fft_eligible(sampling: &SamplingSet, frequencies: &FrequencySet) -> bool {
        match sampling.model() {
            SamplingModel::Discrete { grid, dim, .. } => {
                dim == frequencies.dim() && frequencies.embeds_in_grid(grid)
            }
            _ => false,
        }
    }

    pub fn with_path(sampling: SamplingSet, frequencies: Arc<FrequencySet>, path: FastPath) -> Result<Self> {
        if sampling.dim() != frequencies.dim() {
            return Err(Error::DimensionMismatch { expected: frequencies.dim(), got: sampling.dim() });
        }
        if path == FastPath::FftSubset && !Self::fft_eligible(&sampling, &frequencies) {
            return Err(Error::InvalidArgument(
                "FFT path needs discrete samples and frequencies distinct modulo the grid".into(),
            ));
        }
        let roots = sampling.grid().map(|m| {
            (0..m)
                .map(|p| Complex64::cis(std::f64::consts::TAU * p as f64 / m as f64))
                .collect()
        });
        let grid = if path == FastPath::FftSubset {
            let m = sampling.grid().expect("discrete model");
            let dim = sampling.dim();
            let mut planner = FftPlanner::new();
            let cells = (0..sampling.len())
                .map(|j| sampling.grid_index(j).expect("grid").iter().fold(0, |acc, &g| acc * m + g))
                .collect();
            let residues = (0..frequencies.len()).map(|i| frequencies.residue_index(i, m)).collect();
            Some(GridPlan {
                m,
                dim,
                forward: planner.plan_fft_forward(m),
                inverse: planner.plan_fft_inverse(m),
                cells,
                residues,
            })
        } else {
            None
        };
        Ok(MeasurementOperator {
            sampling,
            frequencies,
            path,
            grid,
            roots,
            dense: Arc::new(OnceLock::new()),
        })
    }

    pub fn sampling(&self) -> &SamplingSet {
        &self.sampling
    }

    pub fn frequencies(&self) -> &Arc<FrequencySet> {
        &self.frequencies
    }

    pub fn path(&self) -> FastPath {
        self.path
    }

    /// Same operator restricted to the first `n` sampling points.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        Self::with_path(self.sampling.prefix(n)?, self.frequencies.clone(), self.path)
    }

    /// Exponent `p` with `F_jk = e^{2πi p/m}` under the discrete model,
    /// computed in integer arithmetic.
    pub fn phase_index(&self, j: usize, k: usize) -> Option<usize> {
        let m = self.sampling.grid()? as i64;
        let g = self.sampling.grid_index(j)?;
        let phase = self
            .frequencies
            .get(k)
            .components()
            .iter()
            .zip(g)
            .fold(0i64, |acc, (&kk, &gg)| (acc + kk.rem_euclid(m) * gg as i64).rem_euclid(m));
        Some(phase as usize)
    }

    /// `F_jk = e^{ik·x_j}`.
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        match (&self.roots, self.phase_index(j, k)) {
            (Some(roots), Some(p)) => roots[p],
            _ => Complex64::cis(self.frequencies.get(k).dot(self.sampling.point(j))),
        }
    }

    fn dense(&self) -> Option<&[Complex64]> {
        let (n, d) = (self.rows(), self.cols());
        if n.saturating_mul(d) > DENSE_CACHE_LIMIT {
            return None;
        }
        Some(self.dense.get_or_init(|| {
            let mut out = Vec::with_capacity(n * d);
            for j in 0..n {
                out.extend((0..d).map(|k| self.entry(j, k)));
            }
            out
        }))
    }

    /// Direct nonequispaced summation, ignoring the FFT path.
    pub fn apply_direct(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.cols(), c.len())?;
        let d = self.cols();
        let out = match self.dense() {
            Some(a) => a
                .chunks_exact(d)
                .map(|row| row.iter().zip(c).map(|(f, x)| f * x).sum())
                .collect(),
            None => (0..self.rows())
                .map(|j| (0..d).filter(|&k| c[k] != ZERO).map(|k| self.entry(j, k) * c[k]).sum())
                .collect(),
        };
        Ok(out)
    }

    /// Direct adjoint `(Σ_j r_j e^{-ik·x_j})_k`, ignoring the FFT path.
    pub fn adjoint_direct(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.rows(), r.len())?;
        let d = self.cols();
        let mut out = vec![ZERO; d];
        match self.dense() {
            Some(a) => {
                for (row, rj) in a.chunks_exact(d).zip(r) {
                    for (o, f) in out.iter_mut().zip(row) {
                        *o += f.conj() * rj;
                    }
                }
            }
            None => {
                for (j, rj) in r.iter().enumerate() {
                    if *rj == ZERO {
                        continue;
                    }
                    for (k, o) in out.iter_mut().enumerate() {
                        *o += self.entry(j, k).conj() * rj;
                    }
                }
            }
        }
        Ok(out)
    }

    fn apply_fft(&self, plan: &GridPlan, c: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![ZERO; plan.m.pow(plan.dim as u32)];
        for (&cell, &v) in plan.residues.iter().zip(c) {
            buf[cell] = v;
        }
        plan.transform(&mut buf, true);
        plan.cells.iter().map(|&cell| buf[cell]).collect()
    }

    fn adjoint_fft(&self, plan: &GridPlan, r: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![ZERO; plan.m.pow(plan.dim as u32)];
        for (&cell, &v) in plan.cells.iter().zip(r) {
            buf[cell] += v;
        }
        plan.transform(&mut buf, false);
        plan.residues.iter().map(|&cell| buf[cell]).collect()
    }

    /// Explicit `N × D` matrix.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows(), self.cols(), |j, k| self.entry(j, k))
    }
}

impl LinearOperator for MeasurementOperator {
    fn rows(&self) -> usize {
        self.sampling.len()
    }

    fn cols(&self) -> usize {
        self.frequencies.len()
    }

    fn apply(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.cols(), c.len())?;
        match &self.grid {
            Some(plan) => Ok(self.apply_fft(plan, c)),
            None => self.apply_direct(c),
        }
    }

    fn adjoint(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.rows(), r.len())?;
        match &self.grid {
            Some(plan) => Ok(self.adjoint_fft(plan, r)),
            None => self.adjoint_direct(r),
        }
    }

    fn column(&self, k: usize) -> Vec<Complex64> {
        match self.dense() {
            Some(a) => a.iter().skip(k).step_by(self.cols()).copied().collect(),
            None => (0..self.rows()).map(|j| self.entry(j, k)).collect(),
        }
    }

    /// Every entry is unimodular, so this is exactly `N`.
    fn column_norm_sq(&self, _k: usize) -> f64 {
        self.rows() as f64
    }

    fn gram_scale(&self) -> f64 {
        1.0 / self.rows() as f64
    }

    fn gram_divisor(&self) -> f64 {
        self.rows() as f64
    }
}

/// An explicitly stored matrix, column-major.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    scale: f64,
}

impl DenseOperator {
    /// `gram_scale` is taken as one, matching the `N(0, 1/N)` normalization.
    pub fn from_real(matrix: &DMatrix<f64>) -> Self {
        DenseOperator {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
            data: matrix.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            scale: 1.0,
        }
    }

    pub fn from_columns(rows: usize, columns: Vec<Vec<Complex64>>, scale: f64) -> Result<Self> {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            check_len(rows, c.len())?;
            data.extend(c);
        }
        Ok(DenseOperator { rows, cols, data, scale })
    }

    pub fn column_slice(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.rows..(k + 1) * self.rows]
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.cols, x.len())?;
        let mut out = vec![ZERO; self.rows];
        for (k, xk) in x.iter().enumerate() {
            if *xk == ZERO {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.column_slice(k)) {
                *o += a * xk;
            }
        }
        Ok(out)
    }

    fn adjoint(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.rows, r.len())?;
        Ok((0..self.cols)
            .map(|k| self.column_slice(k).iter().zip(r).map(|(a, v)| a.conj() * v).sum())
            .collect())
    }

    fn column(&self, k: usize) -> Vec<Complex64> {
        self.column_slice(k).to_vec()
    }

    fn column_norm_sq(&self, k: usize) -> f64 {
        self.column_slice(k).iter().map(|v| v.norm_sqr()).sum()
    }

    fn gram_scale(&self) -> f64 {
        self.scale
    }
}

/// `F_{TX}`: the columns of a parent operator indexed by a support `T`,
/// kept in canonical (ascending) order.
pub struct SupportOperator<'a> {
    parent: &'a dyn LinearOperator,
    support: Vec<usize>,
}

impl<'a> SupportOperator<'a> {
    pub fn new(parent: &'a dyn LinearOperator, mut support: Vec<usize>) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if let Some(&k) = support.iter().find(|&&k| k >= parent.cols()) {
            return Err(Error::InvalidArgument(format!("support index {k} out of range")));
        }
        Ok(SupportOperator { parent, support })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn parent(&self) -> &dyn LinearOperator {
        self.parent
    }

    /// Copies the selected columns into a dense operator.
    pub fn materialize(&self) -> DenseOperator {
        let columns = self.support.iter().map(|&k| self.parent.column(k)).collect();
        DenseOperator::from_columns(self.parent.rows(), columns, self.parent.gram_scale())
            .expect("parent columns have parent row count")
    }

    /// `F_{TX}^* F_{TX}`, Hermitian with diagonal `‖φ_k‖²`.
    pub fn gram(&self) -> Result<DMatrix<Complex64>> {
        let m = self.support.len();
        if m == 0 {
            return Err(Error::EmptySupport);
        }
        if m > MAX_EXPLICIT_GRAM {
            return Err(Error::InvalidArgument(format!(
                "support of size {m} exceeds the explicit Gram limit {MAX_EXPLICIT_GRAM}"
            )));
        }
        let dense = self.materialize();
        let mut g = DMatrix::from_element(m, m, ZERO);
        for a in 0..m {
            g[(a, a)] = Complex64::new(self.parent.column_norm_sq(self.support[a]), 0.0);
            let ca = dense.column_slice(a);
            for b in (a + 1)..m {
                let v: Complex64 = ca.iter().zip(dense.column_slice(b)).map(|(x, y)| x.conj() * y).sum();
                g[(a, b)] = v;
                g[(b, a)] = v.conj();
            }
        }
        Ok(g)
    }

    fn embed(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut full = vec![ZERO; self.parent.cols()];
        for (&k, &v) in self.support.iter().zip(x) {
            full[k] = v;
        }
        full
    }
}

/// Application goes through the parent operator (the FFT path when available).
impl LinearOperator for SupportOperator<'_> {
    fn rows(&self) -> usize {
        self.parent.rows()
    }

    fn cols(&self) -> usize {
        self.support.len()
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.support.len(), x.len())?;
        self.parent.apply(&self.embed(x))
    }

    fn adjoint(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        let full = self.parent.adjoint(r)?;
        Ok(self.support.iter().map(|&k| full[k]).collect())
    }

    fn column(&self, k: usize) -> Vec<Complex64> {
        self.parent.column(self.support[k])
    }

    fn column_norm_sq(&self, k: usize) -> f64 {
        self.parent.column_norm_sq(self.support[k])
    }

    fn gram_scale(&self) -> f64 {
        self.parent.gram_scale()
    }

    fn gram_divisor(&self) -> f64 {
        self.parent.gram_divisor()
    }
}

/// `⟨u, v⟩ = Σ u_j conj(v_j)`.
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm2(u: &[Complex64]) -> f64 {
    u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::spectrum::{CoefficientStyle, SparseCoefficients};
    use rand::Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = stream_rng(seed);
        (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    /// Independent oracle: Σ_k c_k e^{ik·x_j} with the exponent formed in floating point.
    fn oracle_apply(s: &SamplingSet, g: &FrequencySet, c: &[Complex64]) -> Vec<Complex64> {
        (0..s.len())
            .map(|j| {
                g.iter()
                    .zip(c)
                    .map(|(k, ck)| {
                        let phase: f64 = k.components().iter().zip(s.point(j)).map(|(a, b)| *a as f64 * b).sum();
                        ck * Complex64::new(phase.cos(), phase.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn unit_mass_at_zero_gives_ones() {
        let g = FrequencySet::centered(16, 1).unwrap().into_shared();
        let op = MeasurementOperator::new(SamplingSet::continuous(1, 9, 1).unwrap(), g.clone()).unwrap();
        let mut c = vec![ZERO; 16];
        c[g.index_of(&[0]).unwrap()] = Complex64::new(1.0, 0.0);
        for v in op.apply(&c).unwrap() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let g = FrequencySet::centered(256, 1).unwrap().into_shared();
        let s = SamplingSet::discrete(256, 1, 80, 4).unwrap();
        let op = MeasurementOperator::new(s.clone(), g.clone()).unwrap();
        assert_eq!(op.path(), FastPath::FftSubset);
        let c = random_vec(256, 5);
        assert!(max_diff(&op.apply(&c).unwrap(), &oracle_apply(&s, &g, &c)) <= 1e-10);
        assert!(max_diff(&op.apply(&c).unwrap(), &op.apply_direct(&c).unwrap()) <= 1e-10);
        let r = random_vec(80, 6);
        assert!(max_diff(&op.adjoint(&r).unwrap(), &op.adjoint_direct(&r).unwrap()) <= 1e-10);
    }

    #[test]
    fn fft_path_multivariate() {
        let g = FrequencySet::centered(6, 3).unwrap().into_shared();
        let s = SamplingSet::discrete_distinct(6, 3, 50, 4).unwrap();
        let op = MeasurementOperator::new(s.clone(), g.clone()).unwrap();
        assert_eq!(op.path(), FastPath::FftSubset);
        let c = random_vec(g.len(), 8);
        assert!(max_diff(&op.apply(&c).unwrap(), &oracle_apply(&s, &g, &c)) <= 1e-10);
        let r = random_vec(50, 9);
        assert!(max_diff(&op.adjoint(&r).unwrap(), &op.adjoint_direct(&r).unwrap()) <= 1e-10);
    }

    #[test]
    fn columns_have_norm_sqrt_n() {
        let g = FrequencySet::centered(32, 1).unwrap().into_shared();
        let op = MeasurementOperator::new(SamplingSet::continuous(1, 20, 2).unwrap(), g).unwrap();
        let mut e = vec![ZERO; 32];
        e[7] = Complex64::new(1.0, 0.0);
        let col = op.apply(&e).unwrap();
        assert!((norm2(&col) - 20f64.sqrt()).abs() < 1e-13);
        assert_eq!(op.column_norm_sq(7), 20.0);
        for j in 0..20 {
            for k in 0..32 {
                assert!((op.entry(j, k).norm() - 1.0).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        let g = FrequencySet::centered(40, 1).unwrap().into_shared();
        for (seed, s) in [
            (1u64, SamplingSet::continuous(1, 17, 3).unwrap()),
            (2, SamplingSet::discrete(40, 1, 17, 3).unwrap()),
        ] {
            let op = MeasurementOperator::new(s, g.clone()).unwrap();
            for t in 0..100 {
                let c = random_vec(40, seed * 1000 + t);
                let r = random_vec(17, seed * 1000 + t + 500);
                let lhs = inner(&op.apply(&c).unwrap(), &r);
                let rhs = inner(&c, &op.adjoint(&r).unwrap());
                assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
            }
        }
    }

    #[test]
    fn full_grid_is_orthogonal() {
        let m = 16;
        let g = FrequencySet::centered(m, 1).unwrap().into_shared();
        let s = SamplingSet::from_grid_indices(m, 1, (0..m).collect(), 0).unwrap();
        let op = MeasurementOperator::new(s, g).unwrap();
        let c = random_vec(m, 3);
        let back = op.adjoint(&op.apply(&c).unwrap()).unwrap();
        for (b, x) in back.iter().zip(&c) {
            assert!((b - x * m as f64).norm() < 1e-12);
        }
        assert!(op.adjoint(&vec![ZERO; m]).unwrap().iter().all(|v| *v == ZERO));
        let sub = SupportOperator::new(&op, (0..m).collect()).unwrap();
        let gram = sub.gram().unwrap();
        for a in 0..m {
            for b in 0..m {
                let expect = if a == b { m as f64 } else { 0.0 };
                assert!((gram[(a, b)] - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_matches_pairwise_sums() {
        let g = FrequencySet::centered(64, 1).unwrap().into_shared();
        let s = SamplingSet::continuous(1, 30, 12).unwrap();
        let op = MeasurementOperator::new(s.clone(), g.clone()).unwrap();
        let coeffs = SparseCoefficients::random(&g, 6, CoefficientStyle::ComplexGaussian, 3).unwrap();
        let sub = SupportOperator::new(&op, coeffs.support().to_vec()).unwrap();
        let gram = sub.gram().unwrap();
        for (a, &ka) in sub.support().iter().enumerate() {
            for (b, &kb) in sub.support().iter().enumerate() {
                let d = (g.get(kb).components()[0] - g.get(ka).components()[0]) as f64;
                let direct: Complex64 = (0..30).map(|j| Complex64::cis(d * s.point(j)[0])).sum();
                assert!((gram[(a, b)] - direct).norm() <= 1e-10);
            }
            assert_eq!(gram[(a, a)], Complex64::new(30.0, 0.0));
        }
        let single = SupportOperator::new(&op, vec![5]).unwrap().gram().unwrap();
        assert_eq!(single[(0, 0)], Complex64::new(30.0, 0.0));
        assert_eq!(SupportOperator::new(&op, vec![]).unwrap().gram().unwrap_err(), Error::EmptySupport);
    }

    #[test]
    fn discrete_entries_are_roots_of_unity() {
        let m = 12;
        let g = FrequencySet::centered(m, 2).unwrap().into_shared();
        let op = MeasurementOperator::new(SamplingSet::discrete(m, 2, 20, 3).unwrap(), g).unwrap();
        for j in 0..20 {
            for k in 0..op.cols() {
                let p = op.phase_index(j, k).unwrap();
                let kk = op.frequencies().get(k).components();
                let gj = op.sampling().grid_index(j).unwrap();
                let expect = (kk[0] * gj[0] as i64 + kk[1] * gj[1] as i64).rem_euclid(m as i64);
                assert_eq!(p as i64, expect);
                let z = op.entry(j, k);
                assert_eq!(z, Complex64::cis(std::f64::consts::TAU * p as f64 / m as f64));
                assert!((z.powu(m as u32) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn length_mismatch_is_reported() {
        let g = FrequencySet::centered(8, 1).unwrap().into_shared();
        let op = MeasurementOperator::new(SamplingSet::continuous(1, 4, 1).unwrap(), g).unwrap();
        assert_eq!(op.apply(&[ZERO; 3]).unwrap_err(), Error::LengthMismatch { expected: 8, got: 3 });
        assert_eq!(op.adjoint(&[ZERO; 3]).unwrap_err(), Error::LengthMismatch { expected: 4, got: 3 });
    }

    #[test]
    fn support_operator_routes_through_parent() {
        let g = FrequencySet::centered(64, 1).unwrap().into_shared();
        let op = MeasurementOperator::new(SamplingSet::discrete(64, 1, 20, 3).unwrap(), g).unwrap();
        let sub = SupportOperator::new(&op, vec![9, 3, 40]).unwrap();
        assert_eq!(sub.support(), &[3, 9, 40]);
        let dense = sub.materialize();
        let x = random_vec(3, 1);
        assert!(max_diff(&sub.apply(&x).unwrap(), &dense.apply(&x).unwrap()) < 1e-12);
        let r = random_vec(20, 2);
        assert!(max_diff(&sub.adjoint(&r).unwrap(), &dense.adjoint(&r).unwrap()) < 1e-12);
    }
}
