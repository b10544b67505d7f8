//! Recovery of sparse multivariate trigonometric polynomials from random samples.
//!
//! A polynomial `f(x) = Σ_{k∈Γ} c_k e^{ik·x}` with only `M` nonzero coefficients is
//! observed at `N` random points. The crate provides the measurement operator
//! `F_X` (with an FFT path for grid-aligned samples), four reconstruction
//! methods (orthogonal matching pursuit, matching pursuit, thresholding and
//! basis pursuit), diagnostics (coherence, Gram eigenvalues, restricted
//! isometry constants, sample-count bounds) and a seeded Monte-Carlo harness.
//!
//! ```
//! use sparse_trig::prelude::*;
//!
//! let gamma = FrequencySet::centered(64, 1).unwrap().into_shared();
//! let coeffs = SparseCoefficients::random(&gamma, 3, CoefficientStyle::ComplexGaussian, 7).unwrap();
//! let points = SamplingSet::continuous(1, 24, 11).unwrap();
//! let op = MeasurementOperator::new(points, gamma.clone()).unwrap();
//! let samples = op.apply(&coeffs.to_dense()).unwrap();
//! let out = omp(&op, &samples, &StoppingRule::sparsity(3), LsBackend::QrUpdate).unwrap();
//! assert!(is_exact_recovery(&out.coefficients, &coeffs.to_dense()));
//! ```

pub mod analysis;
pub mod basis_pursuit;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod linalg;
pub mod measurement;
pub mod rng;
pub mod sampling;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub mod prelude {
    pub use crate::analysis::{
        check_omp_uniform, check_thresh_uniform, coherence, gram_eigs, ric_bruteforce,
        sample_bounds, BoundModel, CoherenceReport, EigBoundReport, RicReport, SampleBounds,
    };
    pub use crate::basis_pursuit::{
        check_dual_certificate, solve_bp, BpOptions, BpProblem, BpSolution, Certificate,
    };
    pub use crate::error::{Error, Result};
    pub use crate::greedy::{
        is_exact_recovery, mp, omp, thresholding, LsBackend, RecoveryOutcome, StoppingRule,
    };
    pub use crate::measurement::{
        DenseOperator, FastPath, LinearOperator, MeasurementOperator, SupportOperator,
    };
    pub use crate::sampling::{SamplingModel, SamplingSet};
    pub use crate::spectrum::{
        CoefficientStyle, Frequency, FrequencySet, SparseCoefficients, TrigPolynomial,
    };
    pub use num_complex::Complex64;
}
