//! `kacov`: independence tests from kernel angle dependence measures.
//!
//! Three subcommands:
//! - `test`      run one independence test on data files
//! - `simulate`  estimate empirical rejection rates over built-in scenarios
//! - `gram`      dump a kernel Gram matrix or an angle matrix derived from it
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 numerical
//! failure (degenerate data, non-convergence). Output is deterministic for a
//! fixed seed regardless of the `KACOV_THREADS` worker count.

mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use kacov::{
    angle_prime_matrix, angle_vertex_matrix, default_kernels, empirical_rate_with, gram,
    run_test_on_grams, GramMatrix, Inference, KernelFamily, KernelSpec, Method, NoiseFamily,
    SampleSet, ScenarioId, ScenarioSpec, SquareMat, DEFAULT_PERMUTATIONS,
};
use serde::Serialize;

/// Errors at the CLI boundary, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration (exit 2).
    Input(String),
    /// Numerical failure inside the computation (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<kacov::Error> for CliError {
    fn from(e: kacov::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "kacov", version, about = "Kernel angle dependence measures and independence tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test independence between two samples read from files.
    Test(TestArgs),
    /// Estimate empirical size or power over a built-in scenario.
    Simulate(SimulateArgs),
    /// Dump a Gram matrix or an angle matrix for one sample.
    Gram(GramArgs),
}

#[derive(Args)]
struct TestArgs {
    /// CSV of X samples, one observation per row (or a Gram matrix with --gram-x)
    #[arg(long)]
    x: PathBuf,
    /// CSV of Y samples, one observation per row (or a Gram matrix with --gram-y)
    #[arg(long)]
    y: PathBuf,
    /// Treat --x as a precomputed n-by-n Gram matrix
    #[arg(long)]
    gram_x: bool,
    /// Treat --y as a precomputed n-by-n Gram matrix
    #[arg(long)]
    gram_y: bool,
    /// Read each X row as a dxd matrix in row-major order, e.g. 3x3
    #[arg(long)]
    shape_x: Option<String>,
    /// Read each Y row as a dxd matrix in row-major order
    #[arg(long)]
    shape_y: Option<String>,
    /// Kernel for X: gaussian, laplacian, distance, linear, l1norm, log_euclidean
    /// (default gaussian; log_euclidean when --shape-x is set)
    #[arg(long)]
    kernel_x: Option<String>,
    /// Kernel for Y (same choices and defaults as --kernel-x)
    #[arg(long)]
    kernel_y: Option<String>,
    /// Bandwidth for a gaussian or laplacian X kernel (default: median heuristic)
    #[arg(long)]
    bandwidth_x: Option<f64>,
    /// Bandwidth for a gaussian or laplacian Y kernel
    #[arg(long)]
    bandwidth_y: Option<f64>,
    /// Exponent for a distance X kernel, in (0, 2] (default 1)
    #[arg(long)]
    alpha_x: Option<f64>,
    /// Exponent for a distance Y kernel
    #[arg(long)]
    alpha_y: Option<f64>,
    /// Statistic: kacov1, kacov2, kacov3, or gdcov
    #[arg(long, default_value = "kacov1")]
    method: String,
    /// Inference: gamma or permutation
    #[arg(long, default_value = "gamma")]
    inference: String,
    /// Permutation count for permutation inference
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permutations: usize,
    /// Seed for the permutation stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario: linear, log, quadratic, circle, two_parabola, sinusoidal,
    /// matrix_matrix, block_matrix, matrix_vector
    #[arg(long)]
    scenario: String,
    /// Sample size per replicate
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of replicates per cell
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Noise scale for the vector scenarios (default 1)
    #[arg(long)]
    lambda: Option<f64>,
    /// Latent correlation for the matrix scenarios, in [0, 1) (default 0.5)
    #[arg(long)]
    rho: Option<f64>,
    /// Sweep of noise scales as start:end:step, e.g. 0.1:1.0:0.1
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Sweep of latent correlations as start:end:step
    #[arg(long)]
    rho_grid: Option<String>,
    /// Comma-separated statistics to run (kacov1, kacov2, kacov3, gdcov)
    #[arg(long, value_delimiter = ',', default_value = "kacov1")]
    method: Vec<String>,
    /// Kernel for both marginals (default: per-scenario kernels)
    #[arg(long)]
    kernel: Option<String>,
    /// Kernel for X, overriding --kernel
    #[arg(long)]
    kernel_x: Option<String>,
    /// Kernel for Y, overriding --kernel
    #[arg(long)]
    kernel_y: Option<String>,
    /// Exponent for a distance kernel, in (0, 2] (default 1)
    #[arg(long)]
    alpha: Option<f64>,
    /// Inference: gamma or permutation
    #[arg(long, default_value = "gamma")]
    inference: String,
    /// Noise family: normal or t3
    #[arg(long, default_value = "normal")]
    noise: String,
    /// Nominal test level
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Permutation count for permutation inference
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permutations: usize,
    /// Break the dependence: pair X with an independently drawn Y
    #[arg(long)]
    independent: bool,
    /// Harness seed; replicate r of every cell derives from stream r of it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report measured wall time per cell (off by default so output is
    /// byte-reproducible)
    #[arg(long)]
    timing: bool,
    /// Write the CSV report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GramArgs {
    /// CSV of samples, one observation per row
    #[arg(long)]
    x: PathBuf,
    /// Read each row as a dxd matrix in row-major order
    #[arg(long)]
    shape: Option<String>,
    /// Kernel: gaussian, laplacian, distance, linear, l1norm, log_euclidean
    /// (default gaussian; log_euclidean when --shape is set)
    #[arg(long)]
    kernel: Option<String>,
    /// Bandwidth for a gaussian or laplacian kernel (default: median heuristic)
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Exponent for a distance kernel, in (0, 2] (default 1)
    #[arg(long)]
    alpha: Option<f64>,
    /// Which matrix to dump: gram, angle_prime, or angle_vertex
    #[arg(long, default_value = "gram")]
    matrix: String,
    /// Vertex index k for --matrix angle_vertex (default 0)
    #[arg(long)]
    vertex: Option<usize>,
    /// Write the CSV matrix here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

/// JSON report of one test. Field order is the declaration order.
#[derive(Serialize)]
struct TestOutput {
    method: &'static str,
    inference: &'static str,
    kernel_x: String,
    kernel_y: String,
    bandwidth_x: Option<f64>,
    bandwidth_y: Option<f64>,
    n: usize,
    statistic: f64,
    scaled_statistic: f64,
    p_value: f64,
    gamma_shape: Option<f64>,
    gamma_rate: Option<f64>,
    permutations: Option<usize>,
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = setup_threads().and_then(|()| match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Gram(args) => cmd_gram(args),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Honor KACOV_THREADS strictly before any computation: it must be a
/// positive integer when set.
fn setup_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("KACOV_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            CliError::Input(format!("KACOV_THREADS must be a positive integer, got '{}'", raw))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot configure thread pool: {}", e)))
}

fn parse_with<T: FromStr<Err = kacov::Error>>(s: &str) -> Result<T, CliError> {
    s.parse::<T>().map_err(|e| CliError::Input(e.to_string()))
}

/// Build a kernel spec from CLI fragments. `spd` switches the default family
/// to the one defined for matrix samples.
fn build_kernel(
    name: Option<&str>,
    bandwidth: Option<f64>,
    alpha: Option<f64>,
    spd: bool,
) -> Result<KernelSpec, CliError> {
    let family = match name {
        Some(s) => parse_with::<KernelFamily>(s)?,
        None if spd => KernelFamily::LogEuclidean,
        None => KernelFamily::Gaussian,
    };
    let alpha = match (family, alpha) {
        (KernelFamily::Distance, a) => Some(a.unwrap_or(1.0)),
        (_, None) => None,
        (f, Some(_)) => {
            return Err(CliError::Input(format!(
                "alpha only applies to the distance kernel, not {}",
                f.name()
            )));
        }
    };
    let spec = KernelSpec { family, bandwidth, alpha };
    spec.validate()?;
    Ok(spec)
}

/// One side of the `test` command: either a precomputed Gram matrix or raw
/// samples plus a kernel. Returns the Gram, the kernel name, and the
/// bandwidth actually used.
#[allow(clippy::too_many_arguments)]
fn load_side(
    label: &str,
    path: &std::path::Path,
    is_gram: bool,
    shape: Option<&str>,
    kernel: Option<&str>,
    bandwidth: Option<f64>,
    alpha: Option<f64>,
) -> Result<(GramMatrix, String, Option<f64>), CliError> {
    let rows = io::read_csv(path)?;
    if is_gram {
        for opt in [
            (kernel.is_some(), "kernel"),
            (bandwidth.is_some(), "bandwidth"),
            (alpha.is_some(), "alpha"),
            (shape.is_some(), "shape"),
        ] {
            if opt.0 {
                return Err(CliError::Input(format!(
                    "--{0}-{1} does not apply when --gram-{1} is set",
                    opt.1, label
                )));
            }
        }
        let n = rows.len();
        if rows[0].len() != n {
            return Err(CliError::Input(format!(
                "{}: a Gram matrix must be square, got {} rows of {} fields",
                path.display(),
                n,
                rows[0].len()
            )));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let g = GramMatrix::from_entries(SquareMat::from_flat(n, flat))?;
        return Ok((g, "precomputed".to_string(), None));
    }
    let samples = build_samples(rows, shape)?;
    let spec = build_kernel(kernel, bandwidth, alpha, samples.kind() == kacov::SampleKind::SpdMatrix)?;
    let g = gram(&samples, &spec).map_err(|e| e.context(format!("{} marginal", label)))?;
    let resolved = g.resolved_bandwidth();
    Ok((g, spec.family.name().to_string(), resolved))
}

fn build_samples(rows: Vec<Vec<f64>>, shape: Option<&str>) -> Result<SampleSet, CliError> {
    match shape {
        None => Ok(SampleSet::from_vectors(rows)?),
        Some(s) => {
            let d = io::parse_shape(s)?;
            let mut mats = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                if row.len() != d * d {
                    return Err(CliError::Input(format!(
                        "row {} has {} fields, but shape {}x{} needs {}",
                        i + 1,
                        row.len(),
                        d,
                        d,
                        d * d
                    )));
                }
                mats.push(nalgebra_matrix(d, row));
            }
            Ok(SampleSet::from_matrices(mats)?)
        }
    }
}

fn nalgebra_matrix(d: usize, row: &[f64]) -> kacov::nalgebra::DMatrix<f64> {
    kacov::nalgebra::DMatrix::from_row_slice(d, d, row)
}

fn cmd_test(args: TestArgs) -> Result<(), CliError> {
    let method = parse_with::<Method>(&args.method)?;
    let inference = parse_with::<Inference>(&args.inference)?;
    let (gx, kernel_x, bandwidth_x) = load_side(
        "x",
        &args.x,
        args.gram_x,
        args.shape_x.as_deref(),
        args.kernel_x.as_deref(),
        args.bandwidth_x,
        args.alpha_x,
    )?;
    let (gy, kernel_y, bandwidth_y) = load_side(
        "y",
        &args.y,
        args.gram_y,
        args.shape_y.as_deref(),
        args.kernel_y.as_deref(),
        args.bandwidth_y,
        args.alpha_y,
    )?;
    let result = run_test_on_grams(&gx, &gy, method, inference, args.permutations, args.seed)?;
    let report = TestOutput {
        method: result.method.name(),
        inference: result.inference.name(),
        kernel_x,
        kernel_y,
        bandwidth_x,
        bandwidth_y,
        n: result.n,
        statistic: result.statistic,
        scaled_statistic: result.scaled_statistic,
        p_value: result.p_value,
        gamma_shape: result.gamma_params.as_ref().map(|g| g.shape),
        gamma_rate: result.gamma_params.as_ref().map(|g| g.rate),
        permutations: result.permutations,
        seed: args.seed,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Input(format!("cannot serialize report: {}", e)))?;
    io::write_output(args.output.as_deref(), &format!("{}\n", json))
}

/// Parse `start:end:step` into inclusive grid values, each rounded to ten
/// decimal places so accumulated step error does not leak into output.
fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let err = || {
        CliError::Input(format!(
            "invalid grid '{}': expected start:end:step with step > 0 and start <= end",
            s
        ))
    };
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(err());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| err())?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !start.is_finite() || !end.is_finite() || !step.is_finite() || step <= 0.0 || start > end {
        return Err(err());
    }
    let mut vals = Vec::new();
    let tol = 1e-9 * step.max(1.0);
    let mut k = 0u32;
    loop {
        let v = start + f64::from(k) * step;
        if v > end + tol {
            break;
        }
        vals.push((v * 1e10).round() / 1e10);
        k += 1;
    }
    Ok(vals)
}

/// Resolve the scenario parameter values from the lambda/rho flags, checking
/// that the flag kind matches what the scenario is parameterized by.
fn resolve_params(args: &SimulateArgs, id: ScenarioId) -> Result<Vec<f64>, CliError> {
    let is_rho = id.param_is_rho();
    let (wrong_scalar, wrong_grid) = if is_rho {
        (args.lambda.is_some(), args.lambda_grid.is_some())
    } else {
        (args.rho.is_some(), args.rho_grid.is_some())
    };
    if wrong_scalar || wrong_grid {
        let (have, want) = if is_rho { ("lambda", "rho") } else { ("rho", "lambda") };
        return Err(CliError::Input(format!(
            "scenario '{}' is parameterized by {}, not {}",
            id.name(),
            want,
            have
        )));
    }
    let (scalar, grid, default) = if is_rho {
        (args.rho, args.rho_grid.as_deref(), 0.5)
    } else {
        (args.lambda, args.lambda_grid.as_deref(), 1.0)
    };
    match (scalar, grid) {
        (Some(_), Some(_)) => Err(CliError::Input(
            "give either a scalar parameter or a grid, not both".to_string(),
        )),
        (Some(v), None) => Ok(vec![v]),
        (None, Some(g)) => parse_grid(g),
        (None, None) => Ok(vec![default]),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let id = parse_with::<ScenarioId>(&args.scenario)?;
    let noise = parse_with::<NoiseFamily>(&args.noise)?;
    let inference = parse_with::<Inference>(&args.inference)?;
    let methods: Vec<Method> =
        args.method.iter().map(|m| parse_with::<Method>(m)).collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(CliError::Input("need at least one method".to_string()));
    }
    let params = resolve_params(&args, id)?;
    let (default_x, default_y) = default_kernels(id);
    let spd_x = default_x.family == KernelFamily::LogEuclidean;
    let spd_y = default_y.family == KernelFamily::LogEuclidean;
    let pick_x = args.kernel_x.as_deref().or(args.kernel.as_deref());
    let pick_y = args.kernel_y.as_deref().or(args.kernel.as_deref());
    let kernel_x = match pick_x {
        Some(name) => build_kernel(Some(name), None, args.alpha, spd_x)?,
        None => default_x,
    };
    let kernel_y = match pick_y {
        Some(name) => build_kernel(Some(name), None, args.alpha, spd_y)?,
        None => default_y,
    };
    if args.alpha.is_some()
        && kernel_x.family != KernelFamily::Distance
        && kernel_y.family != KernelFamily::Distance
    {
        return Err(CliError::Input(
            "alpha only applies to the distance kernel".to_string(),
        ));
    }

    let mut out = String::from(
        "scenario,method,kernel_x,kernel_y,inference,n,param,noise,reps,level,rejection_rate,seed,wall_time_s\n",
    );
    for &param in &params {
        for &method in &methods {
            let spec = ScenarioSpec {
                id,
                n: args.n,
                param,
                noise,
                independent: args.independent,
                seed: 0,
            };
            let result = empirical_rate_with(
                &spec,
                &kernel_x,
                &kernel_y,
                method,
                inference,
                args.permutations,
                args.level,
                args.reps,
                args.seed,
            )?;
            let wall = if args.timing {
                format!("{:.3}", result.wall_time)
            } else {
                "0.000".to_string()
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                id.name(),
                method.name(),
                kernel_x.family.name(),
                kernel_y.family.name(),
                inference.name(),
                args.n,
                param,
                noise.name(),
                args.reps,
                args.level,
                result.rejection_rate,
                args.seed,
                wall
            ));
        }
    }
    io::write_output(args.output.as_deref(), &out)
}

fn cmd_gram(args: GramArgs) -> Result<(), CliError> {
    let rows = io::read_csv(&args.x)?;
    let samples = build_samples(rows, args.shape.as_deref())?;
    let spec = build_kernel(
        args.kernel.as_deref(),
        args.bandwidth,
        args.alpha,
        samples.kind() == kacov::SampleKind::SpdMatrix,
    )?;
    let g = gram(&samples, &spec)?;
    if args.vertex.is_some() && args.matrix != "angle_vertex" {
        return Err(CliError::Input(
            "--vertex only applies to --matrix angle_vertex".to_string(),
        ));
    }
    let text = match args.matrix.as_str() {
        "gram" => io::format_square(g.n(), |i, j| g.at(i, j)),
        "angle_prime" => {
            let a = angle_prime_matrix(&g)?;
            io::format_square(a.n(), |i, j| a.at(i, j))
        }
        "angle_vertex" => {
            let k = args.vertex.unwrap_or(0);
            if k >= g.n() {
                return Err(CliError::Input(format!(
                    "vertex index {} out of range for n = {}",
                    k,
                    g.n()
                )));
            }
            let a = angle_vertex_matrix(&g, k)?;
            io::format_square(a.n(), |i, j| a.at(i, j))
        }
        other => {
            return Err(CliError::Input(format!(
                "unknown matrix kind '{}': expected gram, angle_prime, or angle_vertex",
                other
            )));
        }
    };
    io::write_output(args.output.as_deref(), &text)
}
