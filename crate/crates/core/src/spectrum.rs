//! Frequency sets, sparse coefficient vectors and direct polynomial evaluation.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng, substream};

/// An integer frequency vector `k ∈ Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frequency(Vec<i64>);

impl Frequency {
    pub fn new(components: Vec<i64>) -> Self {
        Frequency(components)
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `k·x` for a point `x` of the same dimension.
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum()
    }
}

impl From<Vec<i64>> for Frequency {
    fn from(v: Vec<i64>) -> Self {
        Frequency(v)
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// The index set `Γ ⊂ Z^d`, kept in lexicographic order. Column `i` of every
/// measurement operator corresponds to `frequencies()[i]`.
#[derive(Clone, Debug)]
pub struct FrequencySet {
    dim: usize,
    frequencies: Vec<Frequency>,
    lookup: HashMap<Frequency, usize>,
}

impl PartialEq for FrequencySet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.frequencies == other.frequencies
    }
}

impl FrequencySet {
    /// Builds a set from arbitrary frequencies, sorting them canonically.
    pub fn from_frequencies(dim: usize, mut frequencies: Vec<Frequency>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if frequencies.is_empty() {
            return Err(Error::InvalidArgument("frequency set must be nonempty".into()));
        }
        for k in &frequencies {
            if k.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: k.dim() });
            }
        }
        frequencies.sort();
        if frequencies.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate frequency".into()));
        }
        let lookup = frequencies.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        Ok(FrequencySet { dim, frequencies, lookup })
    }

    /// The cube `{-q, …, q}^d`.
    pub fn cube(q: u32, dim: usize) -> Result<Self> {
        let q = q as i64;
        Self::product(-q, q, dim)
    }

    /// `{-⌊m/2⌋, …, m-1-⌊m/2⌋}^d`; for even `m` and `d = 1` this is
    /// `{-m/2, …, m/2 - 1}`. These are representatives of `Z_m^d`.
    pub fn centered(m: usize, dim: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("grid size must be positive".into()));
        }
        let lo = -((m / 2) as i64);
        Self::product(lo, lo + m as i64 - 1, dim)
    }

    fn product(lo: i64, hi: i64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        let mut out: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..dim {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (lo..=hi).map(move |k| {
                        let mut v = prefix.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        Self::from_frequencies(dim, out.into_iter().map(Frequency).collect())
    }

    pub fn into_shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `D = |Γ|`.
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn get(&self, index: usize) -> &Frequency {
        &self.frequencies[index]
    }

    pub fn frequencies(&self) -> &[Frequency] {
        &self.frequencies
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        self.lookup.get(&Frequency(k.to_vec())).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Frequency> {
        self.frequencies.iter()
    }

    /// Residue of frequency `index` in `Z_m^d`, flattened row-major.
    pub fn residue_index(&self, index: usize, m: usize) -> usize {
        let m_i = m as i64;
        self.frequencies[index]
            .0
            .iter()
            .fold(0usize, |acc, &k| acc * m + k.rem_euclid(m_i) as usize)
    }

    /// True when the frequencies are pairwise distinct modulo `m`, i.e. `Γ` embeds in `Z_m^d`.
    pub fn embeds_in_grid(&self, m: usize) -> bool {
        if m < 2 {
            return false;
        }
        let mut seen = HashSet::with_capacity(self.len());
        (0..self.len()).all(|i| seen.insert(self.residue_index(i, m)))
    }

    /// True when `Γ` is a full set of representatives of `Z_m^d`.
    pub fn covers_grid(&self, m: usize) -> bool {
        m.checked_pow(self.dim as u32) == Some(self.len()) && self.embeds_in_grid(m)
    }

    /// `D' = #{j − k : j, k ∈ Γ, j ≠ k}`. With `periodic = Some(m)` differences
    /// are reduced modulo `m` componentwise.
    pub fn difference_count(&self, periodic: Option<usize>) -> usize {
        let mut diffs: HashSet<Vec<i64>> = HashSet::new();
        for (a, j) in self.frequencies.iter().enumerate() {
            for (b, k) in self.frequencies.iter().enumerate() {
                if a == b {
                    continue;
                }
                let d: Vec<i64> = j
                    .0
                    .iter()
                    .zip(&k.0)
                    .map(|(x, y)| match periodic {
                        Some(m) => (x - y).rem_euclid(m as i64),
                        None => x - y,
                    })
                    .collect();
                if d.iter().any(|&v| v != 0) {
                    diffs.insert(d);
                }
            }
        }
        diffs.len()
    }
}

/// How random coefficient values are drawn on the support.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientStyle {
    /// Real and imaginary parts i.i.d. standard normal.
    ComplexGaussian,
    /// Modulus one, phase uniform on `[0, 2π)`.
    UnimodularPhase,
    /// Real standard normal values (imaginary part zero).
    RealGaussian,
}

/// A coefficient vector on `Γ` with explicit support `T`.
#[derive(Clone, Debug)]
pub struct SparseCoefficients {
    base: Arc<FrequencySet>,
    support: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseCoefficients {
    /// `support` holds indices into `base`; values must be nonzero.
    pub fn new(base: Arc<FrequencySet>, support: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::LengthMismatch { expected: support.len(), got: values.len() });
        }
        if support.len() > base.len() {
            return Err(Error::InvalidArgument("support larger than frequency set".into()));
        }
        let mut pairs: Vec<(usize, Complex64)> = support.into_iter().zip(values).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("duplicate support index".into()));
        }
        for &(i, v) in &pairs {
            if i >= base.len() {
                return Err(Error::InvalidArgument(format!("support index {i} out of range")));
            }
            if v == Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidArgument(format!("zero value at support index {i}")));
            }
        }
        let (support, values) = pairs.into_iter().unzip();
        Ok(SparseCoefficients { base, support, values })
    }

    /// The zero vector on `base`.
    pub fn zero(base: Arc<FrequencySet>) -> Self {
        SparseCoefficients { base, support: Vec::new(), values: Vec::new() }
    }

    /// Nonzero entries of a dense vector.
    pub fn from_dense(base: Arc<FrequencySet>, dense: &[Complex64]) -> Result<Self> {
        if dense.len() != base.len() {
            return Err(Error::LengthMismatch { expected: base.len(), got: dense.len() });
        }
        let (support, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .map(|(i, v)| (i, *v))
            .unzip();
        Ok(SparseCoefficients { base, support, values })
    }

    /// Support drawn uniformly among all `sparsity`-subsets of `Γ`, values per `style`.
    pub fn random(
        base: &Arc<FrequencySet>,
        sparsity: usize,
        style: CoefficientStyle,
        seed: u64,
    ) -> Result<Self> {
        let support = random_support(base.len(), sparsity, substream(seed, stream::SUPPORT))?;
        let mut rng = stream_rng(substream(seed, stream::COEFFICIENTS));
        let mut values = Vec::with_capacity(sparsity);
        while values.len() < sparsity {
            let v = match style {
                CoefficientStyle::ComplexGaussian => {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                }
                CoefficientStyle::UnimodularPhase => {
                    Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
                }
                CoefficientStyle::RealGaussian => {
                    Complex64::new(StandardNormal.sample(&mut rng), 0.0)
                }
            };
            // a draw of exactly zero has probability zero but would break the support invariant
            if v != Complex64::new(0.0, 0.0) {
                values.push(v);
            }
        }
        Self::new(base.clone(), support, values)
    }

    pub fn base(&self) -> &Arc<FrequencySet> {
        &self.base
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `M = |T|`.
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.base.len()];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    /// `R = max|c_k| / min|c_k|` over the support.
    pub fn dynamic_range(&self) -> Result<f64> {
        if self.values.is_empty() {
            return Err(Error::EmptySupport);
        }
        let (lo, hi) = self
            .values
            .iter()
            .map(|v| v.norm())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), a| (lo.min(a), hi.max(a)));
        // unimodular draws have |v| within an ulp of 1; report them as exactly 1
        if (hi - lo) <= 4.0 * f64::EPSILON * hi {
            return Ok(1.0);
        }
        Ok(hi / lo)
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Uniformly random `size`-subset of `0..n` by a partial Fisher–Yates shuffle,
/// returned sorted.
pub fn random_support(n: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size > n {
        return Err(Error::InvalidArgument(format!("sparsity {size} exceeds |Γ| = {n}")));
    }
    let mut rng = stream_rng(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(size);
    idx.sort_unstable();
    Ok(idx)
}

/// `f(x) = Σ_{k∈T} c_k e^{ik·x}`.
#[derive(Clone, Debug)]
pub struct TrigPolynomial {
    coefficients: SparseCoefficients,
}

impl TrigPolynomial {
    pub fn new(coefficients: SparseCoefficients) -> Self {
        TrigPolynomial { coefficients }
    }

    pub fn coefficients(&self) -> &SparseCoefficients {
        &self.coefficients
    }

    /// Direct summation at one point.
    pub fn evaluate(&self, x: &[f64]) -> Result<Complex64> {
        let base = &self.coefficients.base;
        if x.len() != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: x.len() });
        }
        Ok(self
            .coefficients
            .support
            .iter()
            .zip(&self.coefficients.values)
            .map(|(&i, &c)| c * Complex64::cis(base.get(i).dot(x)))
            .sum())
    }
}
