//! Browser bindings for the univariate recovery demo.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no generated TypeScript glue beyond `wasm-bindgen`'s own. The
//! `*_report` functions are the native entry points used by the tests.

use serde::Serialize;
use sparse_trig::harness::{
    draw_instance, run_algorithm, standard_complex_noise, success_rate, Algorithm, Experiment,
    ExperimentConfig, InstanceSpec, ModelKind, Tolerances, TrialOutcome,
};
use sparse_trig::prelude::*;
use sparse_trig::rng::{stream, substream};
use std::f64::consts::TAU;
use wasm_bindgen::prelude::*;

/// Points used to draw the continuous curves.
pub const CURVE_POINTS: usize = 512;

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub k: i64,
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize, Debug, Clone)]
pub struct Reconstruction {
    pub algorithm: String,
    pub grid: usize,
    pub sparsity: usize,
    pub samples: usize,
    pub truth: Vec<Coefficient>,
    pub recovered: Vec<Coefficient>,
    /// Sample locations in `[0, 2π)` and the real part of the observed values.
    pub sample_x: Vec<f64>,
    pub sample_re: Vec<f64>,
    /// `Re f` and `Re f̂` on an even grid of `CURVE_POINTS` points.
    pub curve_x: Vec<f64>,
    pub truth_re: Vec<f64>,
    pub recovered_re: Vec<f64>,
    pub max_error: f64,
    pub exact: bool,
    pub coherence: f64,
    pub coherence_sparsity: usize,
}

#[derive(Serialize, Debug, Clone)]
pub struct SuccessCurve {
    pub sparsities: Vec<usize>,
    /// One series per requested algorithm, in request order.
    pub series: Vec<Series>,
}

#[derive(Serialize, Debug, Clone)]
pub struct Series {
    pub algorithm: String,
    pub rates: Vec<f64>,
}

fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    let algs = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Algorithm::parse)
        .collect::<Result<Vec<_>>>()?;
    if algs.is_empty() {
        return Err(Error::InvalidArgument("no algorithm given".into()));
    }
    Ok(algs)
}

fn nonzero(gamma: &FrequencySet, dense: &[Complex64]) -> Vec<Coefficient> {
    dense
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 1e-12)
        .map(|(i, v)| Coefficient { k: gamma.get(i).components()[0], re: v.re, im: v.im })
        .collect()
}

fn real_curve(gamma: &FrequencySet, dense: &[Complex64], xs: &[f64]) -> Vec<f64> {
    let terms: Vec<(f64, Complex64)> = dense
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(i, v)| (gamma.get(i).components()[0] as f64, *v))
        .collect();
    xs.iter()
        .map(|&x| terms.iter().map(|(k, c)| (c * Complex64::from_polar(1.0, k * x)).re).sum())
        .collect()
}

/// Draws one univariate instance on `grid` frequencies with continuous
/// sampling, adds complex noise of the given variance and recovers it.
pub fn reconstruct_report(
    grid: usize,
    sparsity: usize,
    samples: usize,
    algorithm: &str,
    noise_variance: f64,
    seed: u64,
) -> Result<Reconstruction> {
    let alg = Algorithm::parse(algorithm)?;
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(Error::InvalidArgument("noise variance must be finite and non-negative".into()));
    }
    let spec = InstanceSpec {
        dim: 1,
        grid,
        model: ModelKind::Nfft,
        coefficients: CoefficientStyle::ComplexGaussian,
        seed,
    };
    let mut inst = draw_instance(&spec, 0, sparsity, samples)?;
    if noise_variance > 0.0 {
        let sigma = noise_variance.sqrt();
        let z = standard_complex_noise(samples, inst.trial_seed);
        for (s, e) in inst.samples.iter_mut().zip(&z) {
            *s += e * sigma;
        }
    }
    let (outcome, recovered) = run_algorithm(alg, &inst, false, &Tolerances::default())?;
    let recovered = match outcome {
        TrialOutcome::Skipped | TrialOutcome::Degenerate => vec![Complex64::new(0.0, 0.0); grid],
        _ => recovered,
    };
    let truth = inst.truth.to_dense();
    let max_error = truth.iter().zip(&recovered).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);

    // The operator is type-erased inside the instance; rebuild the sampling
    // set from the same stream to read the points back.
    let points = SamplingSet::continuous(1, samples, substream(inst.trial_seed, stream::POINTS))?;
    let op = MeasurementOperator::new(points.clone(), inst.gamma.clone())?;
    let coh = coherence(&op)?;

    let curve_x: Vec<f64> = (0..CURVE_POINTS).map(|i| i as f64 * TAU / CURVE_POINTS as f64).collect();
    Ok(Reconstruction {
        algorithm: alg.label().to_string(),
        grid,
        sparsity,
        samples,
        truth: nonzero(&inst.gamma, &truth),
        recovered: nonzero(&inst.gamma, &recovered),
        sample_x: points.points().to_vec(),
        sample_re: inst.samples.iter().map(|v| v.re).collect(),
        truth_re: real_curve(&inst.gamma, &truth, &curve_x),
        recovered_re: real_curve(&inst.gamma, &recovered, &curve_x),
        curve_x,
        max_error,
        exact: outcome == TrialOutcome::Success,
        coherence: coh.mu,
        coherence_sparsity: coh.recovery_bound_sparsity,
    })
}

/// Empirical exact-recovery rate for `M = 1..=max_sparsity` at fixed `N`.
pub fn success_curve_report(
    grid: usize,
    samples: usize,
    max_sparsity: usize,
    trials: usize,
    algorithms: &str,
    seed: u64,
) -> Result<SuccessCurve> {
    let mut cfg = ExperimentConfig::new(Experiment::SuccessSweep, seed);
    cfg.grid = grid;
    cfg.samples = samples;
    cfg.trials = trials;
    cfg.sparsities = (1..=max_sparsity).collect();
    cfg.algorithms = parse_algorithms(algorithms)?;
    cfg.validate()?;
    let mut series = Vec::new();
    for &alg in &cfg.algorithms {
        let rates = cfg
            .sparsities
            .iter()
            .map(|&m| success_rate(&cfg, alg, grid, m, samples))
            .collect::<Result<Vec<_>>>()?;
        series.push(Series { algorithm: alg.label().to_string(), rates });
    }
    Ok(SuccessCurve { sparsities: cfg.sparsities.clone(), series })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn reconstruct(
    grid: usize,
    sparsity: usize,
    samples: usize,
    algorithm: &str,
    noise_variance: f64,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(reconstruct_report(grid, sparsity, samples, algorithm, noise_variance, seed as u64))
}

#[wasm_bindgen(js_name = successCurve)]
pub fn success_curve(
    grid: usize,
    samples: usize,
    max_sparsity: usize,
    trials: usize,
    algorithms: &str,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(success_curve_report(grid, samples, max_sparsity, trials, algorithms, seed as u64))
}
