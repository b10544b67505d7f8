use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sparse_trig::basis_pursuit::{debias, solve_bp, BpProblem};
use sparse_trig::greedy::{mp, omp, thresholding, LsBackend, StoppingRule};
use sparse_trig::harness::{
    draw_instance, run_coherence_audit, run_noise, run_oversampling_search, run_success_sweep, run_timing,
    Algorithm, Experiment, ExperimentConfig, InstanceSpec, ModelKind, TimingVariant, Tolerances,
};
use sparse_trig::measurement::{norm2, LinearOperator, MeasurementOperator};
use sparse_trig::sampling::SamplingSet;
use sparse_trig::spectrum::{CoefficientStyle, FrequencySet, SparseCoefficients};
use sparse_trig::{Complex64, Error};

#[derive(Parser)]
#[command(name = "sparse-trig", version, about = "Sparse trigonometric polynomial recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Success rate versus sparsity for each algorithm
    Sweep(Common),
    /// Smallest N reaching the target success rate, per grid size
    Oversample {
        #[command(flatten)]
        common: Common,
        /// Grid sizes to sweep
        #[arg(long, value_delimiter = ',', default_value = "64,256,1024")]
        grids: Vec<usize>,
        #[arg(long, default_value_t = 0.9)]
        target: f64,
        /// Also write the probe trace to this CSV
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Solver wall-clock time versus D
    Timing {
        #[command(flatten)]
        common: Common,
        /// log2 of the smallest and largest D
        #[arg(long, default_value = "7:13")]
        log2_range: String,
    },
    /// OMP on noisy samples
    Noise {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2,0.4")]
        variances: Vec<f64>,
    },
    /// Empirical check of the coherence and eigenvalue sample bounds
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Fix N for the coherence check instead of using the bound
        #[arg(long)]
        coherence_samples: Option<usize>,
        /// Fix N for the eigenvalue check instead of using the bound
        #[arg(long)]
        eig_samples: Option<usize>,
    },
    /// Recover coefficients from a sample or coefficient CSV
    Recover {
        #[command(flatten)]
        common: Common,
        /// `x1..xd,re,im` (samples) or `k1..kd,re,im` (coefficients to sample)
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Fft,
    Nfft,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoeffArg {
    Gaussian,
    Unimodular,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Frequencies per axis (D = grid^dim)
    #[arg(long, default_value_t = 100)]
    grid: usize,
    #[arg(long, value_enum, default_value = "fft")]
    model: ModelArg,
    /// Comma-separated subset of omp, mp, thresholding, bp
    #[arg(long, value_delimiter = ',', default_value = "omp,mp,thresholding,bp")]
    alg: Vec<String>,
    /// Sparsities: `a:b`, `a:b:step` or a comma list (default 1:40)
    #[arg(long)]
    mrange: Option<String>,
    #[arg(long, default_value_t = 40)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gaussian")]
    coeff: CoeffArg,
    /// Real coefficients; basis pursuit in real mode
    #[arg(long)]
    real: bool,
    /// Output CSV (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write gnuplot data next to `--out`
    #[arg(long)]
    dat: bool,
    /// `key=value` with key in bp-feas, bp-gap, bp-iter, mp-res, mp-iter
    #[arg(long)]
    tol: Vec<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// Add a mean wall-clock column to sweep output
    #[arg(long)]
    time: bool,
}

enum Failure {
    Config(String),
    Degenerate(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_degeneracy() {
            Failure::Degenerate(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Config(msg.into()))
}

fn parse_mrange(s: &str) -> Result<Vec<usize>, Failure> {
    let num = |t: &str| t.trim().parse::<usize>().or_else(|_| config_err(format!("bad --mrange value '{t}'")));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let (a, b, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return config_err(format!("bad --mrange '{s}'")),
        };
        if step == 0 || a > b {
            return config_err(format!("empty --mrange '{s}'"));
        }
        Ok((a..=b).step_by(step).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

fn parse_tolerances(items: &[String]) -> Result<Tolerances, Failure> {
    let mut t = Tolerances::default();
    for item in items {
        let Some((k, v)) = item.split_once('=') else {
            return config_err(format!("--tol expects key=value, got '{item}'"));
        };
        let f = || v.parse::<f64>().or_else(|_| config_err(format!("bad --tol value '{v}'")));
        let u = || v.parse::<usize>().or_else(|_| config_err(format!("bad --tol value '{v}'")));
        match k {
            "bp-feas" => t.bp_feas = Some(f()?),
            "bp-gap" => t.bp_gap = Some(f()?),
            "bp-iter" => t.bp_max_iter = Some(u()?),
            "mp-res" => t.mp_residual = Some(f()?),
            "mp-iter" => t.mp_max_iter = Some(u()?),
            _ => return config_err(format!("unknown --tol key '{k}'")),
        }
    }
    Ok(t)
}

fn build_config(c: &Common, experiment: Experiment) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::new(experiment, c.seed);
    cfg.dim = c.dim;
    cfg.grid = c.grid;
    cfg.samples = c.samples;
    cfg.trials = c.trials;
    cfg.sparsities = parse_mrange(c.mrange.as_deref().unwrap_or("1:40"))?;
    cfg.model = match c.model {
        ModelArg::Fft => ModelKind::Fft,
        ModelArg::Nfft => ModelKind::Nfft,
        ModelArg::Gaussian => ModelKind::Gaussian,
    };
    cfg.real = c.real;
    cfg.coefficients = match (c.coeff, c.real) {
        (_, true) => CoefficientStyle::RealGaussian,
        (CoeffArg::Gaussian, false) => CoefficientStyle::ComplexGaussian,
        (CoeffArg::Unimodular, false) => CoefficientStyle::UnimodularPhase,
    };
    cfg.algorithms = c.alg.iter().map(|a| Algorithm::parse(a)).collect::<Result<_, _>>()?;
    cfg.tolerances = parse_tolerances(&c.tol)?;
    cfg.threads = c.threads;
    cfg.with_time = c.time;
    Ok(cfg)
}

fn emit(c: &Common, csv: &str, dat: Option<String>) -> Result<(), Failure> {
    match &c.out {
        Some(path) => {
            fs::write(path, csv).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            if let (true, Some(dat)) = (c.dat, dat) {
                let p = path.with_extension("dat");
                fs::write(&p, dat).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            }
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

struct TableCsv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<TableCsv, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let Some(header) = lines.next() else {
        return config_err("empty input CSV");
    };
    let header: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .or_else(|e| config_err(format!("row {}: {e}", i + 1)))?;
        if row.len() != header.len() {
            return config_err(format!("row {}: expected {} fields", i + 1, header.len()));
        }
        rows.push(row);
    }
    Ok(TableCsv { header, rows })
}

fn solve_one(
    alg: Algorithm,
    op: &dyn LinearOperator,
    samples: &[Complex64],
    m: usize,
    real: bool,
    tol: &Tolerances,
) -> Result<Vec<Complex64>, Error> {
    Ok(match alg {
        Algorithm::Omp => omp(op, samples, &StoppingRule::sparsity(m), LsBackend::QrUpdate)?.coefficients,
        Algorithm::Thresholding => thresholding(op, samples, m)?.coefficients,
        Algorithm::Mp => {
            let mut rule = StoppingRule::tolerance(tol.mp_residual.unwrap_or(1e-8) * norm2(samples));
            rule.max_iterations = tol.mp_max_iter;
            mp(op, samples, &rule)?.coefficients
        }
        Algorithm::Bp => {
            let problem = BpProblem { op, samples, real_mode: real };
            let sol = solve_bp(&problem, &tol.bp_options())?;
            debias(op, samples, &sol.coefficients, real)
        }
    })
}

fn recover(c: &Common, input: &Path) -> Result<(), Failure> {
    let cfg = build_config(c, Experiment::SuccessSweep)?;
    let table = read_table(input)?;
    let d = c.dim;
    let expect = |prefix: char| {
        table.header.len() == d + 2
            && table.header[..d].iter().enumerate().all(|(i, h)| *h == format!("{prefix}{}", i + 1))
            && table.header[d] == "re"
            && table.header[d + 1] == "im"
    };
    let gamma = FrequencySet::centered(c.grid, d)?.into_shared();
    let explicit_m = c.mrange.as_ref().map(|_| cfg.sparsities[0]);
    let alg = cfg.algorithms[0];
    let coefficients = if expect('x') {
        let points: Vec<f64> = table.rows.iter().flat_map(|r| r[..d].to_vec()).collect();
        let samples: Vec<Complex64> = table.rows.iter().map(|r| Complex64::new(r[d], r[d + 1])).collect();
        let op = MeasurementOperator::new(SamplingSet::from_points(d, points)?, gamma.clone())?;
        let m = match (alg, explicit_m) {
            (Algorithm::Omp | Algorithm::Thresholding, None) => return config_err("--mrange is needed for this algorithm"),
            (_, m) => m.unwrap_or(0),
        };
        solve_one(alg, &op, &samples, m, c.real, &cfg.tolerances)?
    } else if expect('k') {
        let mut support = Vec::new();
        let mut values = Vec::new();
        for r in &table.rows {
            let k: Vec<i64> = r[..d].iter().map(|&v| v.round() as i64).collect();
            let Some(i) = gamma.index_of(&k) else {
                return config_err(format!("frequency {k:?} lies outside the grid"));
            };
            support.push(i);
            values.push(Complex64::new(r[d], r[d + 1]));
        }
        let truth = SparseCoefficients::new(gamma.clone(), support, values)?;
        let spec = InstanceSpec { dim: d, grid: c.grid, model: cfg.model, coefficients: cfg.coefficients, seed: c.seed };
        // reuse the operator of a seeded instance, then sample the given polynomial
        let inst = draw_instance(&spec, 0, truth.sparsity().max(1), c.samples)?;
        let samples = inst.op.apply(&truth.to_dense())?;
        let m = explicit_m.unwrap_or(truth.sparsity());
        solve_one(alg, inst.op.as_ref(), &samples, m, c.real, &cfg.tolerances)?
    } else {
        let want = |p: char| (1..=d).map(|i| format!("{p}{i}")).collect::<Vec<_>>().join(",");
        return config_err(format!("input header must be '{},re,im' or '{},re,im'", want('x'), want('k')));
    };
    let mut out: String = (1..=d).map(|i| format!("k{i},")).collect();
    out.push_str("re,im\n");
    for (i, v) in coefficients.iter().enumerate() {
        if *v == Complex64::new(0.0, 0.0) {
            continue;
        }
        for k in gamma.get(i).components() {
            out.push_str(&format!("{k},"));
        }
        out.push_str(&format!("{:.16e},{:.16e}\n", v.re, v.im));
    }
    emit(c, &out, None)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sweep(c) => {
            let r = run_success_sweep(&build_config(&c, Experiment::SuccessSweep)?)?;
            emit(&c, &r.to_csv(), Some(r.to_dat()))
        }
        Command::Oversample { common, grids, target, trace } => {
            let mut cfg = build_config(&common, Experiment::OversamplingSearch)?;
            cfg.grids = grids;
            cfg.target_rate = target;
            let r = run_oversampling_search(&cfg)?;
            if let Some(p) = trace {
                write_file(&p, &r.trace_csv())?;
            }
            emit(&common, &r.to_csv(), Some(r.to_dat()))
        }
        Command::Timing { common, log2_range } => {
            let mut cfg = build_config(&common, Experiment::Timing)?;
            let range = parse_mrange(&log2_range)?;
            if range.iter().any(|&p| !(1..=24).contains(&p)) {
                return config_err("--log2-range must lie in 1..=24");
            }
            cfg.grids = range.iter().map(|&p| 1usize << p).collect();
            let variants: Vec<TimingVariant> = TimingVariant::ALL
                .into_iter()
                .filter(|v| match v {
                    TimingVariant::Bp => cfg.algorithms.contains(&Algorithm::Bp),
                    _ => cfg.algorithms.contains(&Algorithm::Omp),
                })
                .collect();
            // single-threaded by construction: trials are not used here
            let r = run_timing(&cfg, &variants)?;
            emit(&common, &r.to_csv(), Some(r.to_dat()))
        }
        Command::Noise { common, variances } => {
            let mut cfg = build_config(&common, Experiment::Noise)?;
            cfg.noise_variances = variances;
            let r = run_noise(&cfg)?;
            emit(&common, &r.to_csv(), None)
        }
        Command::Audit { common, eps, delta, coherence_samples, eig_samples } => {
            let mut cfg = build_config(&common, Experiment::CoherenceAudit)?;
            cfg.eps = eps;
            cfg.delta = delta;
            cfg.coherence_samples = coherence_samples;
            cfg.eig_samples = eig_samples;
            let r = run_coherence_audit(&cfg)?;
            emit(&common, &r.to_csv(), None)
        }
        Command::Recover { common, input } => recover(&common, &input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Degenerate(m)) => {
            eprintln!("solver aborted: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
