//! Kernel angle dependence measures and independence tests.
//!
//! The library measures dependence between paired samples of complex objects
//! (Euclidean vectors, high-dimensional vectors, symmetric positive definite
//! matrices) by embedding them through a kernel and comparing angles between
//! the embedded points. Three related statistics are provided, indexed by
//! how many sample points anchor each angle:
//!
//! - m = 1: angles at a fixed lifted vertex (cheapest, O(n^2)),
//! - m = 2: angles at one data vertex shared by both sides (O(n^3)),
//! - m = 3: angles at independently chosen data vertices (O(n^4)).
//!
//! Each statistic is an unbiased U-statistic that is zero in expectation
//! exactly under independence (for kernels with the required structure), and
//! comes with two inference routes: a moment-matched gamma approximation of
//! the null distribution and a seeded permutation test. A generalized
//! distance covariance on kernel-induced distances is included for
//! comparison.
//!
//! Pipeline: [`SampleSet`] -> [`gram`] -> angle matrices -> estimator ->
//! inference, wrapped end to end by [`run_test`]. The [`simulation`] module
//! adds seeded scenario generators and an empirical size/power harness.
//!
//! Everything is deterministic given seeds: random draws come from
//! explicitly streamed ChaCha generators and parallel reductions are ordered,
//! so results are bit-identical across worker counts.

pub mod angles;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod kernels;
pub mod mat;
pub mod rng;
pub mod samples;
pub mod simulation;
pub mod special;

pub use angles::{
    angle_prime_matrix, angle_vertex_matrix, orthant_prob_closed, orthant_prob_shifted_closed,
    vertex_family, PrimeAngleMatrix, VertexAngleMatrix, VertexFamily,
};
pub use error::{Error, Result};
pub use estimators::{
    gdcov, kac, kacov1, kacov2, kacov2_from_family, kacov3, kacov3_from_family, kacov3_with_cap,
    kacov_oracle, KacovValue, Method, KACOV3_MEMO_CAP,
};
pub use inference::{
    estimate_gamma_params, gamma_pvalue, permutation_pvalue, run_test, run_test_on_grams, AngleData,
    GammaParams, Inference, TestResult, DEFAULT_PERMUTATIONS,
};
pub use kernels::{
    gram, kernel_eval, matrix_log, median_heuristic, DistanceMetric, GramMatrix, KernelFamily,
    KernelSpec,
};
pub use mat::SquareMat;
pub use rng::{rng_stream, StreamRng};
pub use samples::{validate_spd, Point, SampleKind, SampleSet};
pub use simulation::{
    default_kernels, empirical_rate, empirical_rate_with, generate_scenario, mc_orthant_probability,
    NoiseFamily, ScenarioId, ScenarioSpec, SimResult,
};
pub use special::{ln_gamma, regularized_lower_gamma, regularized_upper_gamma};

// Callers constructing matrix-valued samples need the same nalgebra the
// sample types are built from.
pub use nalgebra;
