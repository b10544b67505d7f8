//! Seeded Monte-Carlo experiments.
//!
//! Every trial draws its support, coefficients and sampling set from seeds
//! derived from `(seed, trial, M)`, so results do not depend on scheduling.
//! When several algorithms are compared, each sees the same instance.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::analysis::{coherence, eigenvalue_sample_bound, gram_eigs, sample_bounds, BoundModel};
use crate::basis_pursuit::{debias, solve_bp, BpOptions, BpProblem};
use crate::error::{Error, Result};
use crate::greedy::{is_exact_recovery, mp, omp, thresholding, LsBackend, StoppingRule};
use crate::measurement::{norm2, DenseOperator, LinearOperator, MeasurementOperator, SupportOperator};
use crate::rng::{derive_seed, stream, stream_rng, substream, SEED_RULE_VERSION};
use crate::sampling::{draw_gaussian_matrix, SamplingSet};
use crate::spectrum::{random_support, CoefficientStyle, FrequencySet, SparseCoefficients};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Repetitions per timing measurement (after one warm-up run).
pub const TIMING_REPEATS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Distinct grid points, FFT-subset operator.
    Fft,
    /// Continuous uniform points, direct summation.
    Nfft,
    /// Dense `N(0, 1/N)` matrix.
    Gaussian,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Fft => "fft",
            ModelKind::Nfft => "nfft",
            ModelKind::Gaussian => "gaussian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algorithm {
    Omp,
    Mp,
    Thresholding,
    Bp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Omp, Algorithm::Mp, Algorithm::Thresholding, Algorithm::Bp];

    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Omp => "omp",
            Algorithm::Mp => "mp",
            Algorithm::Thresholding => "thresholding",
            Algorithm::Bp => "bp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "omp" => Ok(Algorithm::Omp),
            "mp" => Ok(Algorithm::Mp),
            "thresh" | "thresholding" => Ok(Algorithm::Thresholding),
            "bp" => Ok(Algorithm::Bp),
            other => Err(Error::InvalidArgument(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Optional solver tolerance overrides.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tolerances {
    pub bp_feas: Option<f64>,
    pub bp_gap: Option<f64>,
    pub bp_max_iter: Option<usize>,
    /// Relative residual tolerance for MP (default `1e−8`).
    pub mp_residual: Option<f64>,
    pub mp_max_iter: Option<usize>,
}

impl Tolerances {
    pub fn bp_options(&self) -> BpOptions {
        let d = BpOptions::default();
        BpOptions {
            feas_tol: self.bp_feas.or(d.feas_tol),
            gap_tol: self.bp_gap.unwrap_or(d.gap_tol),
            max_iter: self.bp_max_iter.or(d.max_iter),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    SuccessSweep,
    OversamplingSearch,
    Timing,
    Noise,
    CoherenceAudit,
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::SuccessSweep => "sweep",
            Experiment::OversamplingSearch => "oversample",
            Experiment::Timing => "timing",
            Experiment::Noise => "noise",
            Experiment::CoherenceAudit => "audit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    /// Frequencies per axis; `Γ = {−grid/2, …, grid/2 − 1}^dim`, `D = grid^dim`.
    pub grid: usize,
    /// Grid sizes swept by the oversampling search and the timing run.
    pub grids: Vec<usize>,
    pub samples: usize,
    pub sparsities: Vec<usize>,
    pub trials: usize,
    pub model: ModelKind,
    pub coefficients: CoefficientStyle,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    /// Real coefficients and real-mode basis pursuit.
    pub real: bool,
    pub tolerances: Tolerances,
    /// Noise variances for the noise experiment.
    pub noise_variances: Vec<f64>,
    /// Failure probability for the audit.
    pub eps: f64,
    /// Eigenvalue band half-width for the audit.
    pub delta: f64,
    /// Target success rate for the oversampling search.
    pub target_rate: f64,
    /// Overrides the bound-derived sample count in the eigenvalue audit.
    pub eig_samples: Option<usize>,
    /// Overrides the bound-derived sample count in the coherence audit.
    pub coherence_samples: Option<usize>,
    pub audit_coherence: bool,
    pub audit_eigen: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Adds a mean wall-clock column to sweep output (breaks byte-identity).
    pub with_time: bool,
}

impl ExperimentConfig {
    /// Defaults for the univariate sweep `D = 100`, `N = 40`.
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        ExperimentConfig {
            experiment,
            dim: 1,
            grid: 100,
            grids: vec![64, 256, 1024],
            samples: 40,
            sparsities: (1..=40).collect(),
            trials: 100,
            model: ModelKind::Fft,
            coefficients: CoefficientStyle::ComplexGaussian,
            algorithms: Algorithm::ALL.to_vec(),
            seed,
            real: false,
            tolerances: Tolerances::default(),
            noise_variances: vec![0.0, 0.05, 0.1, 0.2, 0.4],
            eps: 0.1,
            delta: 0.5,
            target_rate: 0.9,
            eig_samples: None,
            coherence_samples: None,
            audit_coherence: true,
            audit_eigen: true,
            threads: None,
            with_time: false,
        }
    }

    pub fn frequency_count(&self) -> usize {
        self.grid.pow(self.dim as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.dim == 0 || self.grid < 2 {
            return bad("need dim ≥ 1 and grid ≥ 2".into());
        }
        if self.dim > 1 && self.model == ModelKind::Gaussian {
            return bad("the gaussian model is univariate only".into());
        }
        if self.grid.checked_pow(self.dim as u32).is_none_or(|d| d > 1 << 24) {
            return bad("frequency set too large".into());
        }
        if matches!(self.experiment, Experiment::SuccessSweep | Experiment::Noise) {
            if self.samples == 0 {
                return bad("samples must be positive".into());
            }
            if self.model == ModelKind::Fft && self.samples > self.frequency_count() {
                return bad(format!("{} distinct grid samples exceed D = {}", self.samples, self.frequency_count()));
            }
        }
        if let Some(&m) = self.sparsities.iter().find(|&&m| m > self.frequency_count()) {
            if matches!(self.experiment, Experiment::SuccessSweep | Experiment::Noise | Experiment::CoherenceAudit) {
                return bad(format!("sparsity {m} exceeds D = {}", self.frequency_count()));
            }
        }
        if self.sparsities.is_empty() {
            return bad("empty sparsity range".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps = {} must lie in (0, 1)", self.eps));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if !(self.target_rate > 0.0 && self.target_rate <= 1.0) {
            return bad("target rate must lie in (0, 1]".into());
        }
        if self.noise_variances.iter().any(|&v| !(v >= 0.0)) {
            return bad("noise variances must be nonnegative".into());
        }
        if self.grids.iter().any(|&g| g < 2) {
            return bad("swept grid sizes must be at least 2".into());
        }
        if self.real && self.coefficients != CoefficientStyle::RealGaussian {
            return bad("real mode needs real coefficients".into());
        }
        if self.threads == Some(0) {
            return bad("thread count must be positive".into());
        }
        Ok(())
    }

    /// Stable text form of every field that affects results.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "experiment={};dim={};grid={};grids={:?};samples={};sparsities={:?};trials={};model={};coeff={:?};algorithms={:?};seed={};real={};tol={:?};noise={:?};eps={:e};delta={:e};target={:e};eig_samples={:?};coh_samples={:?};audit={},{};seed_rule={}",
            self.experiment.label(),
            self.dim,
            self.grid,
            self.grids,
            self.samples,
            self.sparsities,
            self.trials,
            self.model.label(),
            self.coefficients,
            self.algorithms.iter().map(|a| a.label()).collect::<Vec<_>>(),
            self.seed,
            self.real,
            self.tolerances,
            self.noise_variances,
            self.eps,
            self.delta,
            self.target_rate,
            self.eig_samples,
            self.coherence_samples,
            self.audit_coherence,
            self.audit_eigen,
            SEED_RULE_VERSION,
        );
        s
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(&digest[..8])
    }

    fn instance_spec(&self, grid: usize) -> InstanceSpec {
        InstanceSpec {
            dim: self.dim,
            grid,
            model: self.model,
            coefficients: self.coefficients,
            seed: self.seed,
        }
    }

    fn run_parallel<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let work = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
            match self.threads {
                Some(t) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(t)
                        .build()
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    Ok(pool.install(work))
                }
                None => Ok(work()),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok((0..n).map(f).collect())
        }
    }
}

/// What one random instance is drawn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceSpec {
    pub dim: usize,
    pub grid: usize,
    pub model: ModelKind,
    pub coefficients: CoefficientStyle,
    pub seed: u64,
}

/// One drawn problem: operator, ground truth and exact samples.
pub struct TrialInstance {
    pub op: Box<dyn LinearOperator>,
    pub gamma: Arc<FrequencySet>,
    pub truth: SparseCoefficients,
    pub samples: Vec<Complex64>,
    pub trial_seed: u64,
}

/// Draws trial `trial` at sparsity `m` with `n` samples. Sampling sets for
/// the same `(trial, m)` are nested in `n`.
pub fn draw_instance(spec: &InstanceSpec, trial: u64, m: usize, n: usize) -> Result<TrialInstance> {
    let gamma = FrequencySet::centered(spec.grid, spec.dim)?.into_shared();
    let trial_seed = derive_seed(spec.seed, trial, m as u64);
    let truth = SparseCoefficients::random(&gamma, m, spec.coefficients, trial_seed)?;
    let point_seed = substream(trial_seed, stream::POINTS);
    let op: Box<dyn LinearOperator> = match spec.model {
        ModelKind::Fft => Box::new(MeasurementOperator::new(
            SamplingSet::discrete_distinct(spec.grid, spec.dim, n, point_seed)?,
            gamma.clone(),
        )?),
        ModelKind::Nfft => Box::new(MeasurementOperator::new(
            SamplingSet::continuous(spec.dim, n, point_seed)?,
            gamma.clone(),
        )?),
        ModelKind::Gaussian => Box::new(DenseOperator::from_real(&draw_gaussian_matrix(n, gamma.len(), point_seed)?)),
    };
    let samples = op.apply(&truth.to_dense())?;
    Ok(TrialInstance { op, gamma, truth, samples, trial_seed })
}

/// Outcome of one solver run on one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrialOutcome {
    Success,
    Failure,
    /// The solver aborted on a degenerate system; counted as a failure.
    Degenerate,
    /// The configuration does not apply (e.g. `M > N` for OMP).
    Skipped,
}

/// Runs `alg` on `inst` and applies the exact-recovery criterion.
pub fn run_algorithm(
    alg: Algorithm,
    inst: &TrialInstance,
    real: bool,
    tol: &Tolerances,
) -> Result<(TrialOutcome, Vec<Complex64>)> {
    let op = inst.op.as_ref();
    let m = inst.truth.sparsity();
    let n = op.rows();
    let result = match alg {
        Algorithm::Omp | Algorithm::Thresholding if m > n => return Ok((TrialOutcome::Skipped, Vec::new())),
        Algorithm::Omp => omp(op, &inst.samples, &StoppingRule::sparsity(m), LsBackend::QrUpdate).map(|o| o.coefficients),
        Algorithm::Thresholding if m == 0 => Ok(vec![ZERO; op.cols()]),
        Algorithm::Thresholding => thresholding(op, &inst.samples, m).map(|o| o.coefficients),
        Algorithm::Mp => {
            let rel = tol.mp_residual.unwrap_or(1e-8);
            let mut rule = StoppingRule::tolerance(rel * norm2(&inst.samples));
            rule.max_iterations = tol.mp_max_iter;
            mp(op, &inst.samples, &rule).map(|o| o.coefficients)
        }
        Algorithm::Bp => {
            let problem = BpProblem { op, samples: &inst.samples, real_mode: real };
            solve_bp(&problem, &tol.bp_options()).map(|s| debias(op, &inst.samples, &s.coefficients, real))
        }
    };
    match result {
        Ok(d) => {
            let ok = is_exact_recovery(&d, &inst.truth.to_dense());
            Ok((if ok { TrialOutcome::Success } else { TrialOutcome::Failure }, d))
        }
        Err(e) if e.is_degeneracy() => Ok((TrialOutcome::Degenerate, Vec::new())),
        Err(e) => Err(e),
    }
}

fn format_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub degenerate: usize,
    pub skipped: bool,
    pub mean_time_seconds: Option<f64>,
}

impl SweepRow {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub config_hash: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, alg: Algorithm, m: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.algorithm == alg && r.m == m)
    }

    pub fn to_csv(&self) -> String {
        let timed = self.rows.iter().any(|r| r.mean_time_seconds.is_some());
        let mut s = String::from("config_hash,seed_rule,algorithm,D,N,M,trials,successes,degenerate,rate,status");
        if timed {
            s.push_str(",mean_time_s");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.config_hash,
                SEED_RULE_VERSION,
                r.algorithm.label(),
                r.d,
                r.n,
                r.m,
                r.trials,
                r.successes,
                r.degenerate,
                format_float(r.rate()),
                if r.skipped { "skipped" } else { "ok" }
            );
            if timed {
                let _ = write!(s, ",{}", r.mean_time_seconds.map(format_float).unwrap_or_default());
            }
            s.push('\n');
        }
        s
    }

    /// Gnuplot blocks, one per algorithm: `M rate`.
    pub fn to_dat(&self) -> String {
        let mut s = String::new();
        let mut algs: Vec<Algorithm> = self.rows.iter().map(|r| r.algorithm).collect();
        algs.dedup();
        for alg in algs {
            let _ = writeln!(s, "# {}\n# M rate", alg.label());
            for r in self.rows.iter().filter(|r| r.algorithm == alg && !r.skipped) {
                let _ = writeln!(s, "{} {}", r.m, format_float(r.rate()));
            }
            s.push_str("\n\n");
        }
        s
    }
}

/// Success rate of each algorithm for every sparsity in the range.
pub fn run_success_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let spec = cfg.instance_spec(cfg.grid);
    let d = cfg.frequency_count();
    let mut rows = Vec::new();
    for &m in &cfg.sparsities {
        let per_trial = cfg.run_parallel(cfg.trials, |t| -> Result<Vec<(TrialOutcome, f64)>> {
            let inst = draw_instance(&spec, t as u64, m, cfg.samples)?;
            cfg.algorithms
                .iter()
                .map(|&alg| {
                    let start = Instant::now();
                    let (out, _) = run_algorithm(alg, &inst, cfg.real, &cfg.tolerances)?;
                    Ok((out, start.elapsed().as_secs_f64()))
                })
                .collect()
        })?;
        let per_trial: Vec<Vec<(TrialOutcome, f64)>> = per_trial.into_iter().collect::<Result<_>>()?;
        for (a, &alg) in cfg.algorithms.iter().enumerate() {
            let outcomes: Vec<(TrialOutcome, f64)> = per_trial.iter().map(|v| v[a]).collect();
            let skipped = outcomes.iter().any(|o| o.0 == TrialOutcome::Skipped);
            rows.push(SweepRow {
                algorithm: alg,
                d,
                n: cfg.samples,
                m,
                trials: cfg.trials,
                successes: outcomes.iter().filter(|o| o.0 == TrialOutcome::Success).count(),
                degenerate: outcomes.iter().filter(|o| o.0 == TrialOutcome::Degenerate).count(),
                skipped,
                mean_time_seconds: cfg
                    .with_time
                    .then(|| outcomes.iter().map(|o| o.1).sum::<f64>() / cfg.trials as f64),
            });
        }
    }
    Ok(SweepResult { config_hash: cfg.hash(), rows })
}

/// Fraction of `trials` seeded instances that `alg` recovers exactly.
pub fn success_rate(cfg: &ExperimentConfig, alg: Algorithm, grid: usize, m: usize, n: usize) -> Result<f64> {
    let spec = cfg.instance_spec(grid);
    let outcomes = cfg.run_parallel(cfg.trials, |t| -> Result<TrialOutcome> {
        let inst = draw_instance(&spec, t as u64, m, n)?;
        Ok(run_algorithm(alg, &inst, cfg.real, &cfg.tolerances)?.0)
    })?;
    let mut ok = 0;
    for o in outcomes {
        ok += (o? == TrialOutcome::Success) as usize;
    }
    Ok(ok as f64 / cfg.trials as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OversamplingRow {
    pub algorithm: Algorithm,
    pub d: usize,
    pub m: usize,
    /// Smallest `N` reaching the target rate; `None` when even `N = D` misses it.
    pub n_star: Option<usize>,
    /// Probed `(N, rate)` pairs in probe order.
    pub trace: Vec<(usize, f64)>,
}

impl OversamplingRow {
    pub fn theta(&self) -> Option<f64> {
        self.n_star.map(|n| n as f64 / self.m as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OversamplingResult {
    pub config_hash: String,
    pub rows: Vec<OversamplingRow>,
}

impl OversamplingResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("config_hash,seed_rule,algorithm,D,M,N_star,theta,status\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                self.config_hash,
                SEED_RULE_VERSION,
                r.algorithm.label(),
                r.d,
                r.m,
                r.n_star.map(|n| n.to_string()).unwrap_or_default(),
                r.theta().map(format_float).unwrap_or_default(),
                if r.n_star.is_some() { "ok" } else { "saturated" }
            );
        }
        s
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("config_hash,seed_rule,algorithm,D,M,N,rate\n");
        for r in &self.rows {
            for &(n, rate) in &r.trace {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    self.config_hash,
                    SEED_RULE_VERSION,
                    r.algorithm.label(),
                    r.d,
                    r.m,
                    n,
                    format_float(rate)
                );
            }
        }
        s
    }

    pub fn to_dat(&self) -> String {
        let mut s = String::from("# D theta\n");
        for r in self.rows.iter().filter(|r| r.n_star.is_some()) {
            let _ = writeln!(s, "{} {}", r.d, format_float(r.theta().unwrap()));
        }
        s
    }
}

/// Binary search, per grid size, for the smallest `N` whose success rate
/// reaches the target. Uses `sparsities[0]` as `M` and the first algorithm.
pub fn run_oversampling_search(cfg: &ExperimentConfig) -> Result<OversamplingResult> {
    cfg.validate()?;
    let m = cfg.sparsities[0];
    let alg = cfg.algorithms[0];
    let mut rows = Vec::new();
    for &grid in &cfg.grids {
        let d = grid.pow(cfg.dim as u32);
        if m > d {
            return Err(Error::InvalidArgument(format!("sparsity {m} exceeds D = {d}")));
        }
        let mut trace = Vec::new();
        let mut probe = |n: usize| -> Result<bool> {
            let rate = success_rate(cfg, alg, grid, m, n)?;
            trace.push((n, rate));
            Ok(rate >= cfg.target_rate)
        };
        let (mut lo, mut hi) = (m.max(1), d);
        let n_star = if !probe(hi)? {
            None
        } else {
            // invariant: rate(hi) meets the target, rate(n) misses it for n < lo
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if probe(mid)? {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            Some(hi)
        };
        rows.push(OversamplingRow { algorithm: alg, d, m, n_star, trace });
    }
    Ok(OversamplingResult { config_hash: cfg.hash(), rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimingVariant {
    /// OMP with QR updates and FFT-based correlations.
    OmpQr,
    /// OMP with LSQR on explicitly stored selected columns.
    OmpLsqrExplicit,
    /// OMP with LSQR applied through the FFT operator only.
    OmpLsqrOperator,
    Bp,
}

impl TimingVariant {
    pub const ALL: [TimingVariant; 4] =
        [TimingVariant::OmpQr, TimingVariant::OmpLsqrExplicit, TimingVariant::OmpLsqrOperator, TimingVariant::Bp];

    pub fn label(&self) -> &'static str {
        match self {
            TimingVariant::OmpQr => "omp",
            TimingVariant::OmpLsqrExplicit => "omp-lsqr-explicit",
            TimingVariant::OmpLsqrOperator => "omp-lsqr-operator",
            TimingVariant::Bp => "bp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub variant: TimingVariant,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub median_seconds: f64,
    pub recovered: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingResult {
    pub config_hash: String,
    pub rows: Vec<TimingRow>,
}

impl TimingResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("config_hash,seed_rule,algorithm,D,N,M,median_s,recovered\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                self.config_hash,
                SEED_RULE_VERSION,
                r.variant.label(),
                r.d,
                r.n,
                r.m,
                format_float(r.median_seconds),
                r.recovered
            );
        }
        s
    }

    pub fn to_dat(&self) -> String {
        let mut s = String::new();
        for v in TimingVariant::ALL {
            let _ = writeln!(s, "# {}\n# D seconds", v.label());
            for r in self.rows.iter().filter(|r| r.variant == v) {
                let _ = writeln!(s, "{} {}", r.d, format_float(r.median_seconds));
            }
            s.push_str("\n\n");
        }
        s
    }

    /// Least-squares slope of `log t` against `log D` for one variant.
    pub fn loglog_slope(&self, variant: TimingVariant) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.variant == variant)
            .map(|r| ((r.d as f64).ln(), r.median_seconds.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

/// `M = max(1, ⌊√D/8⌋)` and `N = 2M·log₂ D` (capped at `D`).
pub fn timing_shape(d: usize) -> (usize, usize) {
    let m = ((d as f64).sqrt() / 8.0).floor().max(1.0) as usize;
    let n = (2.0 * m as f64 * (d as f64).log2()).round() as usize;
    (m, n.min(d))
}

/// Median wall-clock time of `f` over [`TIMING_REPEATS`] measurements after a
/// warm-up call. Fast calls are looped until each measurement spans at least
/// `min_span` seconds.
fn median_time(mut f: impl FnMut() -> Result<()>, min_span: f64) -> Result<f64> {
    let start = Instant::now();
    f()?;
    let once = start.elapsed().as_secs_f64().max(1e-9);
    let reps = ((min_span / once).ceil() as usize).clamp(1, 100_000);
    let mut times = Vec::with_capacity(TIMING_REPEATS);
    for _ in 0..TIMING_REPEATS {
        let start = Instant::now();
        for _ in 0..reps {
            f()?;
        }
        times.push(start.elapsed().as_secs_f64() / reps as f64);
    }
    times.sort_by(f64::total_cmp);
    Ok(times[TIMING_REPEATS / 2])
}

/// Solver wall-clock time versus `D` on the grid model, single-threaded.
/// Basis pursuit uses at most `tolerances.bp_max_iter` iterations (default 2000).
pub fn run_timing(cfg: &ExperimentConfig, variants: &[TimingVariant]) -> Result<TimingResult> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let tol = Tolerances { bp_max_iter: cfg.tolerances.bp_max_iter.or(Some(2000)), ..cfg.tolerances };
    for &grid in &cfg.grids {
        let d = grid;
        let (m, n) = timing_shape(d);
        let spec = InstanceSpec { dim: 1, grid, model: ModelKind::Fft, coefficients: cfg.coefficients, seed: cfg.seed };
        let inst = draw_instance(&spec, 0, m, n)?;
        let op = inst.op.as_ref();
        let truth = inst.truth.to_dense();
        for &variant in variants {
            let rule = StoppingRule::sparsity(m);
            let solve = || -> Result<Vec<Complex64>> {
                Ok(match variant {
                    TimingVariant::OmpQr => omp(op, &inst.samples, &rule, LsBackend::QrUpdate)?.coefficients,
                    TimingVariant::OmpLsqrExplicit => omp(op, &inst.samples, &rule, LsBackend::iterative())?.coefficients,
                    TimingVariant::OmpLsqrOperator => {
                        omp(op, &inst.samples, &rule, LsBackend::iterative_implicit())?.coefficients
                    }
                    TimingVariant::Bp => {
                        let s = solve_bp(&BpProblem::new(op, &inst.samples), &tol.bp_options())?;
                        debias(op, &inst.samples, &s.coefficients, false)
                    }
                })
            };
            let recovered = is_exact_recovery(&solve()?, &truth);
            let median_seconds = median_time(|| solve().map(|_| ()), 0.02)?;
            rows.push(TimingRow { variant, d, n, m, median_seconds, recovered });
        }
    }
    Ok(TimingResult { config_hash: cfg.hash(), rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRow {
    pub variance: f64,
    pub support_recovered: bool,
    pub max_coefficient_error: f64,
    pub psnr_db: f64,
    /// Fraction of `trials` independent instances with the support recovered.
    pub support_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseResult {
    pub config_hash: String,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub rows: Vec<NoiseRow>,
}

impl NoiseResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "config_hash,seed_rule,D,N,M,variance,support_recovered,max_coeff_error,psnr_db,support_rate\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                self.config_hash,
                SEED_RULE_VERSION,
                self.d,
                self.n,
                self.m,
                format_float(r.variance),
                r.support_recovered,
                format_float(r.max_coefficient_error),
                format_float(r.psnr_db),
                format_float(r.support_rate)
            );
        }
        s
    }
}

/// Unit-variance complex Gaussian noise (variance split evenly).
pub fn standard_complex_noise(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = stream_rng(substream(seed, stream::NOISE));
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * scale, im * scale)
        })
        .collect()
}

/// `10·log10(max_j |f(x_j)|² / mean_j |e_j|²)`; infinite for zero noise.
pub fn psnr(clean: &[Complex64], noise: &[Complex64]) -> f64 {
    let peak = clean.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let mse = noise.iter().map(|v| v.norm_sqr()).sum::<f64>() / noise.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak / mse).log10()
    }
}

struct NoisyRun {
    support_ok: bool,
    max_err: f64,
    psnr: f64,
}

fn noisy_omp(inst: &TrialInstance, variance: f64) -> Result<NoisyRun> {
    let m = inst.truth.sparsity();
    let z = standard_complex_noise(inst.samples.len(), inst.trial_seed);
    let sigma = variance.sqrt();
    let noise: Vec<Complex64> = z.iter().map(|v| v * sigma).collect();
    let noisy: Vec<Complex64> = inst.samples.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let out = omp(inst.op.as_ref(), &noisy, &StoppingRule::sparsity(m), LsBackend::QrUpdate)?;
    let truth = inst.truth.to_dense();
    Ok(NoisyRun {
        support_ok: out.support == inst.truth.support(),
        max_err: out.coefficients.iter().zip(&truth).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max),
        psnr: psnr(&inst.samples, &noise),
    })
}

/// OMP with `s = M` on samples with added complex Gaussian noise. The headline
/// instance is trial 0; `support_rate` averages over `trials` instances.
pub fn run_noise(cfg: &ExperimentConfig) -> Result<NoiseResult> {
    cfg.validate()?;
    let m = cfg.sparsities[0];
    let spec = cfg.instance_spec(cfg.grid);
    let headline = draw_instance(&spec, 0, m, cfg.samples)?;
    let mut rows = Vec::new();
    for &variance in &cfg.noise_variances {
        let run = noisy_omp(&headline, variance)?;
        let hits = cfg.run_parallel(cfg.trials, |t| -> Result<bool> {
            let inst = draw_instance(&spec, t as u64, m, cfg.samples)?;
            Ok(noisy_omp(&inst, variance)?.support_ok)
        })?;
        let mut ok = 0;
        for h in hits {
            ok += h? as usize;
        }
        rows.push(NoiseRow {
            variance,
            support_recovered: run.support_ok,
            max_coefficient_error: run.max_err,
            psnr_db: run.psnr,
            support_rate: ok as f64 / cfg.trials as f64,
        });
    }
    Ok(NoiseResult { config_hash: cfg.hash(), d: cfg.frequency_count(), n: cfg.samples, m, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuditKind {
    /// `(2M − 1)·μ ≥ 1`
    Coherence,
    /// Eigenvalues of `N^{−1} F_{TX}^* F_{TX}` outside `[1 − δ, 1 + δ]`
    Eigenvalue,
}

impl AuditKind {
    pub fn label(&self) -> &'static str {
        match self {
            AuditKind::Coherence => "coherence",
            AuditKind::Eigenvalue => "eigenvalue",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub kind: AuditKind,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub eps: f64,
    pub trials: usize,
    pub violations: usize,
}

impl AuditRow {
    pub fn fraction(&self) -> f64 {
        self.violations as f64 / self.trials as f64
    }

    pub fn within_bound(&self) -> bool {
        self.fraction() <= self.eps
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditResult {
    pub config_hash: String,
    pub rows: Vec<AuditRow>,
}

impl AuditResult {
    pub fn row(&self, kind: AuditKind) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("config_hash,seed_rule,check,D,M,N,eps,trials,violations,fraction,within_bound\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.config_hash,
                SEED_RULE_VERSION,
                r.kind.label(),
                r.d,
                r.m,
                r.n,
                format_float(r.eps),
                r.trials,
                r.violations,
                format_float(r.fraction()),
                r.within_bound()
            );
        }
        s
    }
}

fn audit_sampling(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<SamplingSet> {
    match cfg.model {
        ModelKind::Fft if n <= cfg.frequency_count() => SamplingSet::discrete_distinct(cfg.grid, cfg.dim, n, seed),
        ModelKind::Fft => SamplingSet::discrete(cfg.grid, cfg.dim, n, seed),
        ModelKind::Nfft => SamplingSet::continuous(cfg.dim, n, seed),
        ModelKind::Gaussian => Err(Error::InvalidArgument("the audit needs a Fourier model".into())),
    }
}

/// Draws sampling sets of the size the bounds prescribe and counts how often
/// the guaranteed property fails. Grid draws are distinct while `N ≤ D` and
/// with replacement beyond that.
pub fn run_coherence_audit(cfg: &ExperimentConfig) -> Result<AuditResult> {
    cfg.validate()?;
    let m = cfg.sparsities[0];
    let gamma = FrequencySet::centered(cfg.grid, cfg.dim)?.into_shared();
    let d = gamma.len();
    let mut rows = Vec::new();
    if cfg.audit_coherence {
        let model = match cfg.model {
            ModelKind::Fft => BoundModel::Discrete { grid: cfg.grid },
            _ => BoundModel::Continuous,
        };
        let n = match cfg.coherence_samples {
            Some(n) => n,
            None => sample_bounds(&gamma, m, 1.0, cfg.eps, model)?.coherence as usize,
        };
        let bad = cfg.run_parallel(cfg.trials, |t| -> Result<bool> {
            let seed = substream(derive_seed(cfg.seed, t as u64, m as u64), stream::POINTS);
            let op = MeasurementOperator::new(audit_sampling(cfg, n, seed)?, gamma.clone())?;
            Ok((2 * m - 1) as f64 * coherence(&op)?.mu >= 1.0)
        })?;
        let violations = bad.into_iter().collect::<Result<Vec<bool>>>()?.into_iter().filter(|&b| b).count();
        rows.push(AuditRow { kind: AuditKind::Coherence, d, m, n, eps: cfg.eps, trials: cfg.trials, violations });
    }
    if cfg.audit_eigen {
        let n = match cfg.eig_samples {
            Some(n) => n,
            None => eigenvalue_sample_bound(m, cfg.delta, cfg.eps)? as usize,
        };
        let bad = cfg.run_parallel(cfg.trials, |t| -> Result<bool> {
            let trial_seed = derive_seed(cfg.seed, t as u64, m as u64);
            let op = MeasurementOperator::new(
                audit_sampling(cfg, n, substream(trial_seed, stream::POINTS))?,
                gamma.clone(),
            )?;
            let support = random_support(d, m, substream(trial_seed, stream::SUPPORT))?;
            Ok(!gram_eigs(&SupportOperator::new(&op, support)?)?.within(cfg.delta))
        })?;
        let violations = bad.into_iter().collect::<Result<Vec<bool>>>()?.into_iter().filter(|&b| b).count();
        rows.push(AuditRow { kind: AuditKind::Eigenvalue, d, m, n, eps: cfg.eps, trials: cfg.trials, violations });
    }
    Ok(AuditResult { config_hash: cfg.hash(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sweep() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(Experiment::SuccessSweep, 42);
        cfg.grid = 32;
        cfg.samples = 12;
        cfg.sparsities = vec![0, 1, 2, 6, 13];
        cfg.trials = 8;
        cfg
    }

    #[test]
    fn zero_sparsity_always_succeeds() {
        let r = run_success_sweep(&small_sweep()).unwrap();
        for alg in Algorithm::ALL {
            assert_eq!(r.row(alg, 0).unwrap().successes, 8, "{alg:?}");
        }
        assert!(r.row(Algorithm::Omp, 13).unwrap().skipped);
        assert!(r.row(Algorithm::Thresholding, 13).unwrap().skipped);
        assert!(!r.row(Algorithm::Bp, 13).unwrap().skipped);
    }

    #[test]
    fn sweep_is_reproducible_across_thread_counts() {
        let mut cfg = small_sweep();
        let a = run_success_sweep(&cfg).unwrap().to_csv();
        cfg.threads = Some(1);
        let b = run_success_sweep(&cfg).unwrap().to_csv();
        cfg.threads = Some(3);
        let c = run_success_sweep(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn instances_are_paired_and_nested() {
        let spec = InstanceSpec {
            dim: 1,
            grid: 64,
            model: ModelKind::Fft,
            coefficients: CoefficientStyle::ComplexGaussian,
            seed: 9,
        };
        let a = draw_instance(&spec, 3, 4, 20).unwrap();
        let b = draw_instance(&spec, 3, 4, 30).unwrap();
        assert_eq!(a.truth.to_dense(), b.truth.to_dense());
        assert_eq!(a.samples[..], b.samples[..20]);
        let c = draw_instance(&spec, 4, 4, 20).unwrap();
        assert_ne!(a.truth.to_dense(), c.truth.to_dense());
    }

    #[test]
    fn config_hash_tracks_fields() {
        let a = small_sweep();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_sweep();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_sweep();
        cfg.samples = 33;
        assert!(cfg.validate().is_err());
        let mut cfg = small_sweep();
        cfg.real = true;
        assert!(cfg.validate().is_err());
        cfg.coefficients = CoefficientStyle::RealGaussian;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn psnr_formula() {
        let clean = vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)];
        let noise = vec![Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.1)];
        assert!((psnr(&clean, &noise) - 10.0 * (4.0f64 / 0.01).log10()).abs() < 1e-12);
        assert_eq!(psnr(&clean, &[Complex64::new(0.0, 0.0); 2]), f64::INFINITY);
        let z = standard_complex_noise(20_000, 5);
        let var = z.iter().map(|v| v.norm_sqr()).sum::<f64>() / 20_000.0;
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn timing_shape_values() {
        assert_eq!(timing_shape(128), (1, 14));
        assert_eq!(timing_shape(1024), (4, 80));
        assert_eq!(timing_shape(8192), (11, 286));
    }

    #[test]
    fn full_grid_audit_has_no_violations() {
        let mut cfg = ExperimentConfig::new(Experiment::CoherenceAudit, 3);
        cfg.grid = 16;
        cfg.sparsities = vec![2];
        cfg.trials = 10;
        cfg.coherence_samples = Some(16);
        cfg.eig_samples = Some(16);
        let r = run_coherence_audit(&cfg).unwrap();
        assert_eq!(r.row(AuditKind::Coherence).unwrap().violations, 0);
        assert_eq!(r.row(AuditKind::Eigenvalue).unwrap().violations, 0);
    }
}
