//! Random sampling sets: the continuous and discrete probability models, and
//! the Gaussian matrix ensemble used for comparison runs.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingModel {
    /// Points i.i.d. uniform on `[0, 2π)^d`.
    Continuous { dim: usize },
    /// Points uniform on the grid `(2π/m) Z_m^d`. With `distinct = false`
    /// draws are independent (duplicates kept); with `distinct = true` an
    /// `N`-subset of the grid is drawn uniformly.
    Discrete { grid: usize, dim: usize, distinct: bool },
    /// Dense `N × D` matrix with i.i.d. `N(0, 1/N)` entries.
    Gaussian { rows: usize, cols: usize },
}

impl SamplingModel {
    pub fn dim(&self) -> Option<usize> {
        match *self {
            SamplingModel::Continuous { dim } | SamplingModel::Discrete { dim, .. } => Some(dim),
            SamplingModel::Gaussian { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SamplingModel::Continuous { .. } => "continuous",
            SamplingModel::Discrete { distinct: false, .. } => "discrete",
            SamplingModel::Discrete { distinct: true, .. } => "discrete-distinct",
            SamplingModel::Gaussian { .. } => "gaussian",
        }
    }
}

/// `N` ordered sampling points in radians, stored row-major (`N × d`).
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingSet {
    points: Vec<f64>,
    grid_indices: Option<Vec<usize>>,
    dim: usize,
    model: SamplingModel,
    seed: u64,
}

impl SamplingSet {
    /// `N` i.i.d. uniform points on `[0, 2π)^d`.
    pub fn continuous(dim: usize, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("number of samples must be positive".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        let mut rng = stream_rng(seed);
        let points = (0..n * dim).map(|_| rng.random::<f64>() * TAU).collect();
        Ok(SamplingSet {
            points,
            grid_indices: None,
            dim,
            model: SamplingModel::Continuous { dim },
            seed,
        })
    }

    /// `N` independent uniform draws from `(2π/m) Z_m^d`.
    pub fn discrete(m: usize, dim: usize, n: usize, seed: u64) -> Result<Self> {
        check_grid(m, dim, n)?;
        let mut rng = stream_rng(seed);
        let indices = (0..n * dim).map(|_| rng.random_range(0..m)).collect();
        Ok(Self::from_grid(m, dim, indices, false, seed))
    }

    /// A uniformly random `N`-subset of `(2π/m) Z_m^d`, in draw order.
    pub fn discrete_distinct(m: usize, dim: usize, n: usize, seed: u64) -> Result<Self> {
        check_grid(m, dim, n)?;
        let total = m
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
        if n > total {
            return Err(Error::InvalidArgument(format!("{n} distinct points requested from a grid of {total}")));
        }
        let mut rng = stream_rng(seed);
        let mut cells: Vec<usize> = (0..total).collect();
        for i in 0..n {
            let j = rng.random_range(i..total);
            cells.swap(i, j);
        }
        let mut indices = Vec::with_capacity(n * dim);
        for &cell in &cells[..n] {
            let start = indices.len();
            let mut rest = cell;
            for _ in 0..dim {
                indices.push(rest % m);
                rest /= m;
            }
            indices[start..].reverse();
        }
        Ok(Self::from_grid(m, dim, indices, true, seed))
    }

    /// Explicit grid points `x_j = 2π g_j / m`; `indices` is row-major `N × d`.
    pub fn from_grid_indices(m: usize, dim: usize, indices: Vec<usize>, seed: u64) -> Result<Self> {
        check_grid(m, dim, indices.len() / dim.max(1))?;
        if !indices.len().is_multiple_of(dim) || indices.iter().any(|&g| g >= m) {
            return Err(Error::InvalidArgument("grid indices must lie in 0..m".into()));
        }
        Ok(Self::from_grid(m, dim, indices, false, seed))
    }

    /// Explicit continuous points, row-major `N × d`.
    pub fn from_points(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument("points must form a nonempty N × d array".into()));
        }
        Ok(SamplingSet {
            points,
            grid_indices: None,
            dim,
            model: SamplingModel::Continuous { dim },
            seed: 0,
        })
    }

    fn from_grid(m: usize, dim: usize, indices: Vec<usize>, distinct: bool, seed: u64) -> Self {
        let step = TAU / m as f64;
        let points = indices.iter().map(|&g| g as f64 * step).collect();
        SamplingSet {
            points,
            grid_indices: Some(indices),
            dim,
            model: SamplingModel::Discrete { grid: m, dim, distinct },
            seed,
        }
    }

    /// The first `n` points of this set (nested prefixes share their points).
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArgument(format!("prefix of {n} points from {}", self.len())));
        }
        Ok(SamplingSet {
            points: self.points[..n * self.dim].to_vec(),
            grid_indices: self.grid_indices.as_ref().map(|g| g[..n * self.dim].to_vec()),
            dim: self.dim,
            model: self.model,
            seed: self.seed,
        })
    }

    /// `N`.
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> SamplingModel {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Grid size `m` under the discrete model.
    pub fn grid(&self) -> Option<usize> {
        match self.model {
            SamplingModel::Discrete { grid, .. } => Some(grid),
            _ => None,
        }
    }

    /// Integer grid coordinates of point `j` under the discrete model.
    pub fn grid_index(&self, j: usize) -> Option<&[usize]> {
        self.grid_indices.as_ref().map(|g| &g[j * self.dim..(j + 1) * self.dim])
    }

    /// One row per point, coordinates in radians with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for j in 0..self.len() {
            let row: Vec<String> = self.point(j).iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Reads the format written by [`SamplingSet::to_csv`] as continuous points.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty sampling CSV".into()))?;
        let dim = header.split(',').count();
        let mut points = Vec::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim {
                return Err(Error::Parse(format!("row {}: expected {dim} fields", n + 1)));
            }
            for f in fields {
                points.push(f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)))?);
            }
        }
        Self::from_points(dim, points)
    }
}

fn check_grid(m: usize, dim: usize, n: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("grid size m = {m} must be at least 2")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("number of samples must be positive".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(())
}

/// `N × D` real matrix with i.i.d. `N(0, 1/N)` entries.
pub fn draw_gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Result<DMatrix<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
    }
    let normal = Normal::new(0.0, 1.0 / (rows as f64).sqrt()).expect("finite std");
    let mut rng = stream_rng(seed);
    // nalgebra fills column-major, so each column is a contiguous run of the stream
    Ok(DMatrix::from_fn(rows, cols, |_, _| normal.sample(&mut rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn continuous_contracts() {
        let s = SamplingSet::continuous(1, 1, 3).unwrap();
        assert_eq!(s.len(), 1);
        assert!((0.0..TAU).contains(&s.point(0)[0]));
        assert_eq!(SamplingSet::continuous(2, 10, 9).unwrap(), SamplingSet::continuous(2, 10, 9).unwrap());
        assert!(SamplingSet::continuous(1, 0, 1).is_err());
    }

    #[test]
    fn continuous_mean() {
        let n = 100_000;
        let s = SamplingSet::continuous(1, n, 17).unwrap();
        let mean = s.points().iter().sum::<f64>() / n as f64;
        let se = TAU / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - PI).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn discrete_grid_membership() {
        let s = SamplingSet::discrete(2, 1, 4, 8).unwrap();
        for j in 0..4 {
            let x = s.point(j)[0];
            assert!(x == 0.0 || x == PI);
        }
        assert!(SamplingSet::discrete(1, 1, 4, 8).is_err());
    }

    #[test]
    fn discrete_proportions() {
        let n = 100_000;
        let s = SamplingSet::discrete(4, 1, n, 23).unwrap();
        let mut counts = [0usize; 4];
        for j in 0..n {
            counts[s.grid_index(j).unwrap()[0]] += 1;
        }
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= 3.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn discrete_duplicates_occur() {
        // P(no collision among 50 draws from 8 cells) = 0 since 50 > 8.
        let p_collision = 1.0 - (1..50).map(|j| (1.0 - j as f64 / 8.0).max(0.0)).product::<f64>();
        assert_eq!(p_collision, 1.0);
        for seed in 0..100 {
            let s = SamplingSet::discrete(8, 1, 50, seed).unwrap();
            let mut seen = std::collections::HashSet::new();
            let dup = (0..50).any(|j| !seen.insert(s.grid_index(j).unwrap()[0]));
            assert!(dup);
        }
    }

    #[test]
    fn distinct_subsets() {
        let s = SamplingSet::discrete_distinct(16, 2, 40, 5).unwrap();
        let mut seen = std::collections::HashSet::new();
        for j in 0..40 {
            assert!(seen.insert(s.grid_index(j).unwrap().to_vec()));
        }
        assert!(SamplingSet::discrete_distinct(4, 1, 5, 5).is_err());
        let full = SamplingSet::discrete_distinct(8, 1, 8, 1).unwrap();
        let mut g: Vec<usize> = (0..8).map(|j| full.grid_index(j).unwrap()[0]).collect();
        g.sort();
        assert_eq!(g, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn grid_coordinates_are_exact_multiples() {
        let s = SamplingSet::discrete(12, 3, 30, 2).unwrap();
        for j in 0..30 {
            for (x, g) in s.point(j).iter().zip(s.grid_index(j).unwrap()) {
                assert_eq!(*x, *g as f64 * (TAU / 12.0));
            }
        }
    }

    #[test]
    fn gaussian_matrix() {
        let a = draw_gaussian_matrix(40, 1000, 4).unwrap();
        let mean_sq: f64 = (0..1000).map(|k| a.column(k).norm_squared()).sum::<f64>() / 1000.0;
        assert!((mean_sq - 1.0).abs() <= 0.05, "{mean_sq}");
        assert_eq!(a, draw_gaussian_matrix(40, 1000, 4).unwrap());
        let one = draw_gaussian_matrix(1, 1, 4).unwrap();
        assert_eq!(one.len(), 1);
        assert!(draw_gaussian_matrix(0, 3, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = SamplingSet::continuous(2, 5, 77).unwrap();
        let back = SamplingSet::from_csv(&s.to_csv()).unwrap();
        assert_eq!(back.points(), s.points());
    }
}
