//! From statistic to p-value: moment-matched gamma approximation of the null
//! distribution, and a seeded permutation baseline.
//!
//! Gamma route: under independence, n times the statistic converges to a
//! centered weighted chi-square law. Matching its first two moments with
//! Gamma(shape, rate) - mean gives shape = a^2/b and rate = a/b, where a is
//! the product of the two mean angles and b twice the product of the
//! self-covariances. The p-value is the upper gamma tail at the re-shifted,
//! re-scaled statistic.
//!
//! Permutation route: B relabelings of the Y side drawn from per-replicate
//! substreams, p = (1 + #{permuted >= observed}) / (B + 1). Permutations act
//! on precomputed angle or distance structures by index relabeling; kernels
//! are never re-evaluated.

use rayon::prelude::*;

use crate::angles::{angle_prime_matrix, vertex_family, PrimeAngleMatrix, VertexFamily};
use crate::error::{Error, Result, ResultExt};
use crate::estimators::{kacov1, kacov2_from_family, kacov3_from_family, rho_matrix, KacovValue, Method};
use crate::kernels::{gram, GramMatrix, KernelSpec};
use crate::mat::SquareMat;
use crate::rng::rng_stream;
use crate::samples::SampleSet;
use crate::special::regularized_upper_gamma;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inference {
    Gamma,
    Permutation,
}

impl Inference {
    pub fn name(self) -> &'static str {
        match self {
            Inference::Gamma => "gamma",
            Inference::Permutation => "permutation",
        }
    }
}

impl std::str::FromStr for Inference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(Inference::Gamma),
            "permutation" => Ok(Inference::Permutation),
            other => Err(Error::InvalidSpec(format!("unknown inference mode '{}'", other))),
        }
    }
}

/// Moment-matched gamma parameters for n times the statistic.
#[derive(Clone, Copy, Debug)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
    pub m: u8,
}

/// Everything needed to report and reproduce one test.
#[derive(Clone, Debug)]
pub struct TestResult {
    pub method: Method,
    pub inference: Inference,
    pub statistic: f64,
    pub scaled_statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub gamma_params: Option<GammaParams>,
    pub permutations: Option<usize>,
    pub seed: Option<u64>,
}

/// Angle structures for one marginal: the prime matrix for m = 1, the full
/// vertex family for m in {2, 3}.
pub enum AngleData<'a> {
    Prime(&'a PrimeAngleMatrix),
    Family(&'a VertexFamily),
}

/// Default permutation count.
pub const DEFAULT_PERMUTATIONS: usize = 199;

// ---------------------------------------------------------------------------
// gamma approximation
// ---------------------------------------------------------------------------

fn mean_angle(m: u8, data: &AngleData<'_>, side: &str) -> Result<f64> {
    match (m, data) {
        (1, AngleData::Prime(a)) => {
            let n = a.n() as f64;
            // diagonal is exactly zero, so the full sum is the off-diagonal sum
            Ok(a.entries().total() / (n * (n - 1.0)))
        }
        (2 | 3, AngleData::Family(f)) => {
            let n = f.n() as f64;
            let total: f64 = f.mats().iter().map(|m| m.entries().total()).sum();
            Ok(total / (n * (n - 1.0) * (n - 2.0)))
        }
        _ => Err(Error::InvalidSpec(format!(
            "angle data for the {} marginal does not match m = {}",
            side, m
        ))),
    }
}

/// Plug-in moment matching. `self_x`/`self_y` are the self-covariances that
/// estimate the variance term: the m = 1 self-measure for m = 1 and the
/// m = 3 self-measure for both m = 2 and m = 3.
pub fn estimate_gamma_params(
    m: u8,
    a: &AngleData<'_>,
    b: &AngleData<'_>,
    self_x: &KacovValue,
    self_y: &KacovValue,
) -> Result<GammaParams> {
    if !matches!(m, 1..=3) {
        return Err(Error::InvalidSpec(format!("m must be 1, 2 or 3, got {}", m)));
    }
    let expected_self = if m == 1 { 1 } else { 3 };
    if self_x.m != expected_self || self_y.m != expected_self {
        return Err(Error::InvalidSpec(format!(
            "self-covariances for m = {} must come from the m = {} estimator",
            m, expected_self
        )));
    }
    if self_x.value <= 1e-14 {
        return Err(Error::DegenerateMarginal(format!(
            "x self-covariance {:.3e} is not above 1e-14",
            self_x.value
        )));
    }
    if self_y.value <= 1e-14 {
        return Err(Error::DegenerateMarginal(format!(
            "y self-covariance {:.3e} is not above 1e-14",
            self_y.value
        )));
    }
    let a_hat = mean_angle(m, a, "x")? * mean_angle(m, b, "y")?;
    if a_hat.is_nan() || a_hat <= 0.0 {
        return Err(Error::NonPositiveMoment(a_hat));
    }
    let b_hat = 2.0 * self_x.value * self_y.value;
    let shape = a_hat * a_hat / b_hat;
    let rate = a_hat / b_hat;
    if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(Error::NonPositiveMoment(shape.min(rate)));
    }
    Ok(GammaParams { shape, rate, m })
}

/// Upper tail of Gamma(shape, rate) at rate * max(0, n * stat + shape/rate).
/// The shift recenters the approximation (its support starts at minus the
/// mean); statistics at or below that point get p = 1.
pub fn gamma_pvalue(stat: &KacovValue, params: &GammaParams) -> Result<f64> {
    let shifted = stat.n as f64 * stat.value + params.shape / params.rate;
    let x = params.rate * shifted.max(0.0);
    regularized_upper_gamma(params.shape, x)
}

// ---------------------------------------------------------------------------
// permutation baseline
// ---------------------------------------------------------------------------

/// Statistic of the m = 1 combination with the second matrix relabeled by
/// `perm` (entry (i, j) read as b[perm i, perm j]). Row sums and totals are
/// permutation-invariant, so only the trace term and the row-dot term need
/// index translation.
fn m1_stat_permuted(a: &SquareMat, ra: &[f64], b: &SquareMat, rb: &[f64], perm: &[usize]) -> f64 {
    let n = a.n();
    let nf = n as f64;
    let mut t = 0.0;
    let mut u = 0.0;
    for i in 0..n {
        let arow = a.row(i);
        let brow = b.row(perm[i]);
        let mut dot = 0.0;
        for (j, &av) in arow.iter().enumerate() {
            dot += av * brow[perm[j]];
        }
        t += dot;
        u += ra[i] * rb[perm[i]];
    }
    let s = ra.iter().sum::<f64>() * rb.iter().sum::<f64>();
    (t - 2.0 * u / (nf - 2.0) + s / ((nf - 1.0) * (nf - 2.0))) / (nf * (nf - 3.0))
}

struct FamilyView<'a> {
    mats: Vec<&'a SquareMat>,
    row_sums: Vec<Vec<f64>>,
    totals: Vec<f64>,
}

fn family_view(f: &VertexFamily) -> FamilyView<'_> {
    let mats: Vec<&SquareMat> = f.mats().iter().map(|m| m.entries()).collect();
    let row_sums: Vec<Vec<f64>> = mats.iter().map(|m| m.row_sums()).collect();
    let totals: Vec<f64> = row_sums.iter().map(|r| r.iter().sum()).collect();
    FamilyView { mats, row_sums, totals }
}

/// m = 2 statistic under relabeling: vertex r of the X side pairs with
/// vertex perm[r] of the Y side, entries read through the permutation.
fn m2_stat_permuted(fa: &FamilyView<'_>, fb: &FamilyView<'_>, perm: &[usize]) -> f64 {
    let n = perm.len();
    let nf = n as f64;
    let mut sum = 0.0;
    for r in 0..n {
        let a = fa.mats[r];
        let b = fb.mats[perm[r]];
        let rb = &fb.row_sums[perm[r]];
        let mut t = 0.0;
        let mut u = 0.0;
        for i in 0..n {
            let arow = a.row(i);
            let brow = b.row(perm[i]);
            let mut dot = 0.0;
            for (j, &av) in arow.iter().enumerate() {
                dot += av * brow[perm[j]];
            }
            t += dot;
            u += fa.row_sums[r][i] * rb[perm[i]];
        }
        let s = fa.totals[r] * fb.totals[perm[r]];
        sum += t - 2.0 * u / (nf - 3.0) + s / ((nf - 2.0) * (nf - 3.0));
    }
    sum / (nf * (nf - 1.0) * (nf - 4.0))
}

/// m = 3 statistic under relabeling: X vertex r against Y vertex perm[t].
fn m3_stat_permuted(fa: &FamilyView<'_>, fb: &FamilyView<'_>, perm: &[usize]) -> f64 {
    let n = perm.len();
    let nf = n as f64;
    let mut sum = 0.0;
    for r in 0..n {
        let a = fa.mats[r];
        let ra = &fa.row_sums[r];
        for t_idx in 0..n {
            if t_idx == r {
                continue;
            }
            let pb = perm[t_idx];
            let b = fb.mats[pb];
            let rb = &fb.row_sums[pb];
            let mut tt = 0.0;
            let mut u = 0.0;
            for i in 0..n {
                let arow = a.row(i);
                let brow = b.row(perm[i]);
                let mut dot = 0.0;
                for (j, &av) in arow.iter().enumerate() {
                    dot += av * brow[perm[j]];
                }
                tt += dot;
                u += (ra[i] - arow[t_idx]) * (rb[perm[i]] - brow[perm[r]]);
            }
            let s = (fa.totals[r] - 2.0 * ra[t_idx]) * (fb.totals[pb] - 2.0 * rb[perm[r]]);
            sum += tt - 2.0 * u / (nf - 4.0) + s / ((nf - 3.0) * (nf - 4.0));
        }
    }
    sum / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 5.0))
}

/// Permutation test. Replicate b draws its permutation from substream
/// (seed, b), so the p-value is reproducible for any worker count.
pub fn permutation_pvalue(
    method: Method,
    g1: &GramMatrix,
    g2: &GramMatrix,
    b: usize,
    seed: u64,
) -> Result<TestResult> {
    if b < 1 {
        return Err(Error::InvalidSpec("permutation count must be at least 1".into()));
    }
    let n = g1.n();
    if g2.n() != n {
        return Err(Error::KindMismatch(format!("sample counts differ: {} vs {}", n, g2.n())));
    }
    if n < method.min_n() {
        return Err(Error::SampleTooSmall { need: method.min_n(), got: n });
    }
    let nf = n as f64;

    enum Prepared<'a> {
        M1 { a: SquareMat, ra: Vec<f64>, b: SquareMat, rb: Vec<f64> },
        Family { fa: FamilyView<'a>, fb: FamilyView<'a>, m: u8 },
    }

    // structures the permutations relabel; owned families must outlive views
    let families;
    let prepared = match method {
        Method::Kacov1 => {
            let ap = angle_prime_matrix(g1).context("x marginal")?;
            let bp = angle_prime_matrix(g2).context("y marginal")?;
            let a = ap.entries().clone();
            let b = bp.entries().clone();
            let ra = a.row_sums();
            let rb = b.row_sums();
            Prepared::M1 { a, ra, b, rb }
        }
        Method::Gdcov => {
            let a = rho_matrix(g1).context("x marginal")?;
            let b = rho_matrix(g2).context("y marginal")?;
            let ra = a.row_sums();
            let rb = b.row_sums();
            Prepared::M1 { a, ra, b, rb }
        }
        Method::Kacov2 | Method::Kacov3 => {
            let fa = vertex_family(g1).context("x marginal")?;
            let fb = vertex_family(g2).context("y marginal")?;
            families = (fa, fb);
            let m = if method == Method::Kacov2 { 2 } else { 3 };
            Prepared::Family {
                fa: family_view(&families.0),
                fb: family_view(&families.1),
                m,
            }
        }
    };

    let identity: Vec<usize> = (0..n).collect();
    let stat_for = |perm: &[usize]| -> f64 {
        match &prepared {
            Prepared::M1 { a, ra, b, rb } => m1_stat_permuted(a, ra, b, rb, perm),
            Prepared::Family { fa, fb, m: 2 } => m2_stat_permuted(fa, fb, perm),
            Prepared::Family { fa, fb, .. } => m3_stat_permuted(fa, fb, perm),
        }
    };
    let observed = stat_for(&identity);

    let permuted: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut perm: Vec<usize> = (0..n).collect();
            rng_stream(seed, rep as u64).shuffle(&mut perm);
            stat_for(&perm)
        })
        .collect();
    let exceed = permuted.iter().filter(|&&s| s >= observed).count();
    let p_value = (1 + exceed) as f64 / (b + 1) as f64;

    Ok(TestResult {
        method,
        inference: Inference::Permutation,
        statistic: observed,
        scaled_statistic: nf * observed,
        p_value,
        n,
        gamma_params: None,
        permutations: Some(b),
        seed: Some(seed),
    })
}

// ---------------------------------------------------------------------------
// orchestration
// ---------------------------------------------------------------------------

/// Full pipeline from Gram matrices. The gamma route needs the self-angle
/// structures of both marginals; they are built here once and shared between
/// the statistic and the moment estimates.
pub fn run_test_on_grams(
    g1: &GramMatrix,
    g2: &GramMatrix,
    method: Method,
    inference: Inference,
    b: usize,
    seed: u64,
) -> Result<TestResult> {
    let n = g1.n();
    if g2.n() != n {
        return Err(Error::KindMismatch(format!("sample counts differ: {} vs {}", n, g2.n())));
    }
    if n < method.min_n() {
        return Err(Error::SampleTooSmall { need: method.min_n(), got: n });
    }
    match inference {
        Inference::Permutation => {
            let mut result = permutation_pvalue(method, g1, g2, b, seed)?;
            result.seed = Some(seed);
            Ok(result)
        }
        Inference::Gamma => {
            let (stat, params) = match method {
                Method::Gdcov => {
                    return Err(Error::InvalidSpec(
                        "gamma inference is not defined for gdcov; use permutation".into(),
                    ))
                }
                Method::Kacov1 => {
                    let ap = angle_prime_matrix(g1).context("x marginal")?;
                    let bp = angle_prime_matrix(g2).context("y marginal")?;
                    let stat = kacov1(&ap, &bp)?;
                    let self_x = kacov1(&ap, &ap).context("x marginal")?;
                    let self_y = kacov1(&bp, &bp).context("y marginal")?;
                    let params = estimate_gamma_params(
                        1,
                        &AngleData::Prime(&ap),
                        &AngleData::Prime(&bp),
                        &self_x,
                        &self_y,
                    )
                    .context("estimating gamma parameters")?;
                    (stat, params)
                }
                Method::Kacov2 | Method::Kacov3 => {
                    // the variance estimate uses the m = 3 self-measure, so
                    // both paths need n >= 6
                    if n < 6 {
                        return Err(Error::SampleTooSmall { need: 6, got: n });
                    }
                    let fa = vertex_family(g1).context("x marginal")?;
                    let fb = vertex_family(g2).context("y marginal")?;
                    let stat = if method == Method::Kacov2 {
                        kacov2_from_family(&fa, &fb)?
                    } else {
                        kacov3_from_family(&fa, &fb)?
                    };
                    let self_x = kacov3_from_family(&fa, &fa).context("x marginal")?;
                    let self_y = kacov3_from_family(&fb, &fb).context("y marginal")?;
                    let m = if method == Method::Kacov2 { 2 } else { 3 };
                    let params = estimate_gamma_params(
                        m,
                        &AngleData::Family(&fa),
                        &AngleData::Family(&fb),
                        &self_x,
                        &self_y,
                    )
                    .context("estimating gamma parameters")?;
                    (stat, params)
                }
            };
            let p_value = gamma_pvalue(&stat, &params).context("evaluating gamma tail")?;
            Ok(TestResult {
                method,
                inference,
                statistic: stat.value,
                scaled_statistic: n as f64 * stat.value,
                p_value,
                n,
                gamma_params: Some(params),
                permutations: None,
                seed: Some(seed),
            })
        }
    }
}

/// Full pipeline from raw samples and kernel specs.
#[allow(clippy::too_many_arguments)]
pub fn run_test(
    x: &SampleSet,
    y: &SampleSet,
    spec_x: &KernelSpec,
    spec_y: &KernelSpec,
    method: Method,
    inference: Inference,
    b: usize,
    seed: u64,
) -> Result<TestResult> {
    if x.n() != y.n() {
        return Err(Error::KindMismatch(format!(
            "sample counts differ: x has {}, y has {}",
            x.n(),
            y.n()
        )));
    }
    let g1 = gram(x, spec_x).context("x marginal")?;
    let g2 = gram(y, spec_y).context("y marginal")?;
    run_test_on_grams(&g1, &g2, method, inference, b, seed)
}
