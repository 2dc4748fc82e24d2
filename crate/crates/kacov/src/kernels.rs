//! Kernel families and Gram construction.
//!
//! Six families are supported. Vector data: `gaussian`, `laplacian`,
//! `distance(alpha)`, `linear`, `l1norm`. SPD-matrix data: `log_euclidean`,
//! which maps each matrix through its principal logarithm and applies
//! Frobenius inner-product geometry. Gaussian and Laplacian bandwidths
//! default to the median pairwise distance of the sample when not given
//! explicitly.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result, ResultExt};
use crate::mat::SquareMat;
use crate::samples::{validate_spd, Point, SampleKind, SampleSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    Laplacian,
    Distance,
    Linear,
    L1Norm,
    LogEuclidean,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Distance => "distance",
            KernelFamily::Linear => "linear",
            KernelFamily::L1Norm => "l1norm",
            KernelFamily::LogEuclidean => "log_euclidean",
        }
    }

    /// Families that take a bandwidth parameter.
    pub fn uses_bandwidth(self) -> bool {
        matches!(self, KernelFamily::Gaussian | KernelFamily::Laplacian)
    }

    pub fn required_kind(self) -> SampleKind {
        match self {
            KernelFamily::LogEuclidean => SampleKind::SpdMatrix,
            _ => SampleKind::Vector,
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "laplacian" => Ok(KernelFamily::Laplacian),
            "distance" => Ok(KernelFamily::Distance),
            "linear" => Ok(KernelFamily::Linear),
            "l1norm" => Ok(KernelFamily::L1Norm),
            "log_euclidean" | "log-euclidean" => Ok(KernelFamily::LogEuclidean),
            other => Err(Error::InvalidKernel(format!("unknown kernel family '{}'", other))),
        }
    }
}

/// A kernel choice plus its parameters. `bandwidth = None` on a
/// bandwidth-using family means "resolve via the median heuristic at Gram
/// time"; `alpha` is the distance-kernel exponent and must be absent for
/// every other family.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Option<f64>,
    pub alpha: Option<f64>,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: Option<f64>) -> Self {
        KernelSpec { family: KernelFamily::Gaussian, bandwidth, alpha: None }
    }

    pub fn laplacian(bandwidth: Option<f64>) -> Self {
        KernelSpec { family: KernelFamily::Laplacian, bandwidth, alpha: None }
    }

    pub fn distance(alpha: f64) -> Self {
        KernelSpec { family: KernelFamily::Distance, bandwidth: None, alpha: Some(alpha) }
    }

    pub fn linear() -> Self {
        KernelSpec { family: KernelFamily::Linear, bandwidth: None, alpha: None }
    }

    pub fn l1norm() -> Self {
        KernelSpec { family: KernelFamily::L1Norm, bandwidth: None, alpha: None }
    }

    pub fn log_euclidean() -> Self {
        KernelSpec { family: KernelFamily::LogEuclidean, bandwidth: None, alpha: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Distance => match self.alpha {
                None => {
                    return Err(Error::InvalidKernel("distance kernel requires alpha in (0, 2]".into()))
                }
                Some(a) => {
                    if !(a > 0.0 && a <= 2.0) {
                        return Err(Error::InvalidKernel(format!(
                            "distance kernel alpha must be in (0, 2], got {}",
                            a
                        )));
                    }
                }
            },
            _ => {
                if self.alpha.is_some() {
                    return Err(Error::InvalidKernel(format!(
                        "alpha only applies to the distance kernel, not {}",
                        self.family.name()
                    )));
                }
            }
        }
        if let Some(b) = self.bandwidth {
            if !self.family.uses_bandwidth() {
                return Err(Error::InvalidKernel(format!(
                    "bandwidth only applies to gaussian and laplacian kernels, not {}",
                    self.family.name()
                )));
            }
            if !b.is_finite() || b <= 0.0 {
                return Err(Error::InvalidKernel(format!("bandwidth must be strictly positive, got {}", b)));
            }
        }
        Ok(())
    }
}

/// n x n matrix of pairwise kernel evaluations, exactly symmetric (the upper
/// triangle is computed once and mirrored). Carries the spec that produced it
/// and the bandwidth actually used, when any; both are absent for externally
/// supplied matrices.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    entries: SquareMat,
    spec: Option<KernelSpec>,
    resolved_bandwidth: Option<f64>,
}

pub const GRAM_SYMMETRY_TOL: f64 = 1e-10;

impl GramMatrix {
    /// Wrap an externally supplied matrix: validated symmetric within 1e-10,
    /// then mirrored so symmetry becomes exact.
    pub fn from_entries(mut entries: SquareMat) -> Result<Self> {
        for &v in entries.data() {
            if !v.is_finite() {
                return Err(Error::NumericalDomain("gram matrix contains a non-finite entry".into()));
            }
        }
        let asym = entries.max_asymmetry();
        if asym > GRAM_SYMMETRY_TOL {
            return Err(Error::NumericalDomain(format!(
                "gram matrix asymmetry {:.3e} exceeds {:.0e}",
                asym, GRAM_SYMMETRY_TOL
            )));
        }
        entries.mirror_upper();
        Ok(GramMatrix { entries, spec: None, resolved_bandwidth: None })
    }

    pub fn n(&self) -> usize {
        self.entries.n()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries.at(i, j)
    }

    pub fn entries(&self) -> &SquareMat {
        &self.entries
    }

    pub fn spec(&self) -> Option<&KernelSpec> {
        self.spec.as_ref()
    }

    pub fn resolved_bandwidth(&self) -> Option<f64> {
        self.resolved_bandwidth
    }
}

/// Distance used by the median heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMetric {
    Euclidean,
    LogEuclideanFrobenius,
}

// ---------------------------------------------------------------------------
// small vector helpers
// ---------------------------------------------------------------------------

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn l1_sum(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

#[inline]
fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn frob_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn frob_sq_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

/// Median of the n(n-1)/2 pairwise distances; an even-length list yields the
/// mean of the two central order statistics. A median at or below 1e-12 is an
/// error: all points effectively coincide and no data-driven bandwidth exists.
pub fn median_heuristic(samples: &SampleSet, metric: DistanceMetric) -> Result<f64> {
    let n = samples.n();
    if n < 2 {
        return Err(Error::InvalidSpec("median heuristic needs at least 2 samples".into()));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    match metric {
        DistanceMetric::Euclidean => {
            if samples.kind() != SampleKind::Vector {
                return Err(Error::KindMismatch("euclidean median heuristic requires vector samples".into()));
            }
            for i in 0..n {
                let a = samples.vector(i).unwrap();
                for j in (i + 1)..n {
                    dists.push(sq_dist(a, samples.vector(j).unwrap()).sqrt());
                }
            }
        }
        DistanceMetric::LogEuclideanFrobenius => {
            if samples.kind() != SampleKind::SpdMatrix {
                return Err(Error::KindMismatch(
                    "log-euclidean median heuristic requires spd_matrix samples".into(),
                ));
            }
            let logs = matrix_logs(samples)?;
            for i in 0..n {
                for j in (i + 1)..n {
                    dists.push(frob_sq_diff(&logs[i], &logs[j]).sqrt());
                }
            }
        }
    }
    dists.sort_unstable_by(f64::total_cmp);
    let k = dists.len();
    let median = if k % 2 == 1 {
        dists[k / 2]
    } else {
        0.5 * (dists[k / 2 - 1] + dists[k / 2])
    };
    if median <= 1e-12 {
        return Err(Error::DegenerateBandwidth(median));
    }
    Ok(median)
}

/// Principal logarithm of an SPD matrix via symmetric eigendecomposition:
/// V diag(log lambda) V', computed on the symmetrized input and symmetrized
/// again on the way out so roundoff cannot leave a skew part.
pub fn matrix_log(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    validate_spd(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let logs = eig.eigenvalues.map(f64::ln);
    let l = &eig.eigenvectors * DMatrix::from_diagonal(&logs) * eig.eigenvectors.transpose();
    Ok((&l + l.transpose()) * 0.5)
}

fn matrix_logs(samples: &SampleSet) -> Result<Vec<DMatrix<f64>>> {
    (0..samples.n())
        .into_par_iter()
        .map(|i| matrix_log(samples.matrix(i).unwrap()).context(format!("sample {}", i)))
        .collect()
}

/// Evaluate one kernel entry. `bandwidth` is the already-resolved gamma and
/// is required for the Gaussian and Laplacian families.
pub fn kernel_eval(z1: Point<'_>, z2: Point<'_>, spec: &KernelSpec, bandwidth: Option<f64>) -> Result<f64> {
    spec.validate()?;
    match spec.family {
        KernelFamily::Gaussian | KernelFamily::Laplacian => {
            let gamma = bandwidth.ok_or_else(|| {
                Error::InvalidKernel(format!("{} kernel requires a resolved bandwidth", spec.family.name()))
            })?;
            if !gamma.is_finite() || gamma <= 0.0 {
                return Err(Error::InvalidKernel(format!("bandwidth must be strictly positive, got {}", gamma)));
            }
            let (a, b) = both_vectors(z1, z2, spec.family)?;
            let sq = sq_dist(a, b);
            Ok(match spec.family {
                KernelFamily::Gaussian => (-sq / (gamma * gamma)).exp(),
                _ => (-sq.sqrt() / gamma).exp(),
            })
        }
        KernelFamily::Distance => {
            let alpha = spec.alpha.expect("validated above");
            let (a, b) = both_vectors(z1, z2, spec.family)?;
            let na = dot(a, a).sqrt();
            let nb = dot(b, b).sqrt();
            let nd = sq_dist(a, b).sqrt();
            Ok(0.5 * (na.powf(alpha) + nb.powf(alpha) - nd.powf(alpha)))
        }
        KernelFamily::Linear => {
            let (a, b) = both_vectors(z1, z2, spec.family)?;
            Ok(dot(a, b))
        }
        KernelFamily::L1Norm => {
            let (a, b) = both_vectors(z1, z2, spec.family)?;
            let sa = l1_sum(a);
            let sb = l1_sum(b);
            let d = l1_dist(a, b);
            Ok(0.5 * (sa * sa + sb * sb - d * d))
        }
        KernelFamily::LogEuclidean => {
            let (ma, mb) = both_matrices(z1, z2)?;
            let la = matrix_log(ma)?;
            let lb = matrix_log(mb)?;
            Ok(0.5 * (frob_sq(&la) + frob_sq(&lb) - frob_sq_diff(&la, &lb)))
        }
    }
}

fn both_vectors<'a>(z1: Point<'a>, z2: Point<'a>, family: KernelFamily) -> Result<(&'a [f64], &'a [f64])> {
    match (z1, z2) {
        (Point::Vector(a), Point::Vector(b)) => {
            if a.len() != b.len() {
                return Err(Error::KindMismatch(format!(
                    "vector dimensions differ: {} vs {}",
                    a.len(),
                    b.len()
                )));
            }
            Ok((a, b))
        }
        _ => Err(Error::KindMismatch(format!(
            "{} kernel requires vector samples",
            family.name()
        ))),
    }
}

fn both_matrices<'a>(z1: Point<'a>, z2: Point<'a>) -> Result<(&'a DMatrix<f64>, &'a DMatrix<f64>)> {
    match (z1, z2) {
        (Point::Matrix(a), Point::Matrix(b)) => {
            if a.nrows() != b.nrows() {
                return Err(Error::KindMismatch(format!(
                    "matrix dimensions differ: {} vs {}",
                    a.nrows(),
                    b.nrows()
                )));
            }
            Ok((a, b))
        }
        _ => Err(Error::KindMismatch("log_euclidean kernel requires spd_matrix samples".into())),
    }
}

/// Build the full Gram matrix. Rows are computed in parallel and the upper
/// triangle is mirrored, so output is exactly symmetric and bit-identical for
/// any worker count. Gaussian and Laplacian diagonals are written as exactly
/// 1; the log-Euclidean path takes each matrix logarithm once.
pub fn gram(samples: &SampleSet, spec: &KernelSpec) -> Result<GramMatrix> {
    spec.validate()?;
    let n = samples.n();
    let required = spec.family.required_kind();
    if samples.kind() != required {
        return Err(Error::KindMismatch(format!(
            "{} kernel requires {} samples, got {}",
            spec.family.name(),
            required.name(),
            samples.kind().name()
        )));
    }

    let resolved = if spec.family.uses_bandwidth() {
        Some(match spec.bandwidth {
            Some(b) => b,
            None => median_heuristic(samples, DistanceMetric::Euclidean)?,
        })
    } else {
        None
    };

    // Upper-triangle rows in parallel; each task owns the tail of one row.
    let rows: Vec<Vec<f64>> = match spec.family {
        KernelFamily::LogEuclidean => {
            let logs = matrix_logs(samples)?;
            let norms: Vec<f64> = logs.iter().map(frob_sq).collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    (i..n)
                        .map(|j| {
                            if i == j {
                                norms[i]
                            } else {
                                0.5 * (norms[i] + norms[j] - frob_sq_diff(&logs[i], &logs[j]))
                            }
                        })
                        .collect()
                })
                .collect()
        }
        _ => (0..n)
            .into_par_iter()
            .map(|i| {
                let zi = samples.point(i);
                (i..n)
                    .map(|j| {
                        if i == j && spec.family.uses_bandwidth() {
                            Ok(1.0)
                        } else {
                            kernel_eval(zi, samples.point(j), spec, resolved)
                        }
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let mut entries = SquareMat::zeros(n);
    for (i, tail) in rows.iter().enumerate() {
        for (off, &v) in tail.iter().enumerate() {
            entries.set(i, i + off, v);
        }
    }
    entries.mirror_upper();
    Ok(GramMatrix {
        entries,
        spec: Some(spec.clone()),
        resolved_bandwidth: resolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    fn vecs(rows: &[&[f64]]) -> SampleSet {
        SampleSet::from_vectors(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn random_vecs(n: usize, p: usize, seed: u64) -> SampleSet {
        let mut rng = rng_stream(seed, 0);
        SampleSet::from_vectors((0..n).map(|_| (0..p).map(|_| rng.normal()).collect()).collect()).unwrap()
    }

    fn random_spd(d: usize, rng: &mut crate::rng::StreamRng) -> DMatrix<f64> {
        let r = DMatrix::from_fn(d, d, |_, _| rng.normal());
        &r * r.transpose() + DMatrix::identity(d, d) * 0.5
    }

    // ---- median heuristic ----

    #[test]
    fn median_single_pair() {
        let s = vecs(&[&[0.0], &[2.0]]);
        assert_eq!(median_heuristic(&s, DistanceMetric::Euclidean).unwrap(), 2.0);
    }

    #[test]
    fn median_three_points_hand_enumerated() {
        // pairwise distances {1, 3, 2}, sorted {1, 2, 3}, median 2
        let s = vecs(&[&[0.0], &[1.0], &[3.0]]);
        assert_eq!(median_heuristic(&s, DistanceMetric::Euclidean).unwrap(), 2.0);
    }

    #[test]
    fn median_even_count_averages_central_pair() {
        // points {0,1,2,7}: distances {1,2,7,1,6,5} sorted {1,1,2,5,6,7},
        // median = (2+5)/2 = 3.5
        let s = vecs(&[&[0.0], &[1.0], &[2.0], &[7.0]]);
        assert_eq!(median_heuristic(&s, DistanceMetric::Euclidean).unwrap(), 3.5);
    }

    #[test]
    fn median_identical_points_degenerate() {
        let s = vecs(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        let err = median_heuristic(&s, DistanceMetric::Euclidean).unwrap_err();
        assert!(matches!(err, Error::DegenerateBandwidth(_)));
    }

    // ---- matrix_log ----

    #[test]
    fn log_of_identity_is_zero() {
        let l = matrix_log(&DMatrix::identity(3, 3)).unwrap();
        for v in l.iter() {
            assert!(v.abs() <= 1e-14);
        }
    }

    #[test]
    fn log_of_scaled_identity() {
        let e = std::f64::consts::E;
        let l = matrix_log(&(DMatrix::identity(2, 2) * e)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((l[(i, j)] - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn log_matches_hand_eigendecomposition() {
        // [[2,1],[1,2]] has eigenpairs (3, (1,1)/sqrt2) and (1, (1,-1)/sqrt2),
        // so log M = ln3 * vv' with v = (1,1)/sqrt2: every entry ln(3)/2.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let l = matrix_log(&m).unwrap();
        let want = 3.0_f64.ln() / 2.0;
        for v in l.iter() {
            assert!((v - want).abs() <= 1e-10, "entry {} vs {}", v, want);
        }
    }

    #[test]
    fn log_eigenvalues_track_input_spectrum() {
        let mut rng = rng_stream(7, 0);
        for _ in 0..10 {
            let d = 4;
            // random orthogonal Q from QR of a random matrix
            let a = DMatrix::from_fn(d, d, |_, _| rng.normal());
            let q = a.qr().q();
            let mut lambda: Vec<f64> = (0..d).map(|_| 0.1 + 9.9 * rng.uniform()).collect();
            let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone())) * q.transpose();
            let l = matrix_log(&m).unwrap();
            let mut got: Vec<f64> = l.symmetric_eigen().eigenvalues.iter().cloned().collect();
            lambda.sort_unstable_by(f64::total_cmp);
            got.sort_unstable_by(f64::total_cmp);
            for (g, lam) in got.iter().zip(&lambda) {
                assert!((g - lam.ln()).abs() <= 1e-9, "{} vs ln {}", g, lam);
            }
        }
    }

    #[test]
    fn log_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(matrix_log(&m).unwrap_err().root(), Error::NotSpd(_)));
    }

    // ---- kernel_eval ----

    #[test]
    fn gaussian_at_identical_points_is_one() {
        let z = [1.0, -2.0, 3.0];
        let v = kernel_eval(Point::Vector(&z), Point::Vector(&z), &KernelSpec::gaussian(Some(1.7)), Some(1.7))
            .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn distance_alpha2_is_inner_product() {
        let a = [1.0, 2.0];
        let b = [3.0, 4.0];
        let v = kernel_eval(Point::Vector(&a), Point::Vector(&b), &KernelSpec::distance(2.0), None).unwrap();
        assert!((v - 11.0).abs() <= 1e-12);
    }

    #[test]
    fn l1norm_scalar_hand_value() {
        // ((1)^2 + (2)^2 - (1)^2) / 2 = 2
        let a = [1.0];
        let b = [2.0];
        let v = kernel_eval(Point::Vector(&a), Point::Vector(&b), &KernelSpec::l1norm(), None).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn bandwidth_required_for_gaussian() {
        let a = [0.0];
        let err =
            kernel_eval(Point::Vector(&a), Point::Vector(&a), &KernelSpec::gaussian(None), None).unwrap_err();
        assert!(matches!(err, Error::InvalidKernel(_)));
    }

    #[test]
    fn kind_mismatch_detected() {
        let a = [0.0];
        let m = DMatrix::identity(2, 2);
        let err =
            kernel_eval(Point::Vector(&a), Point::Matrix(&m), &KernelSpec::linear(), None).unwrap_err();
        assert!(matches!(err, Error::KindMismatch(_)));
    }

    #[test]
    fn spec_validation_rules() {
        assert!(KernelSpec::distance(0.0).validate().is_err());
        assert!(KernelSpec::distance(2.1).validate().is_err());
        assert!(KernelSpec::distance(2.0).validate().is_ok());
        assert!(KernelSpec { family: KernelFamily::Linear, bandwidth: Some(1.0), alpha: None }
            .validate()
            .is_err());
        assert!(KernelSpec { family: KernelFamily::Linear, bandwidth: None, alpha: Some(1.0) }
            .validate()
            .is_err());
        assert!(KernelSpec::gaussian(Some(-1.0)).validate().is_err());
    }

    // ---- gram ----

    #[test]
    fn gram_gaussian_diagonal_exactly_one() {
        let s = random_vecs(8, 3, 11);
        let g = gram(&s, &KernelSpec::gaussian(None)).unwrap();
        for i in 0..8 {
            assert_eq!(g.at(i, i), 1.0);
        }
        assert!(g.resolved_bandwidth().unwrap() > 0.0);
    }

    #[test]
    fn gram_single_sample() {
        let s = vecs(&[&[2.0, 1.0]]);
        let g = gram(&s, &KernelSpec::linear()).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.at(0, 0), 5.0);
    }

    #[test]
    fn gram_linear_matches_direct_product() {
        let s = random_vecs(5, 3, 13);
        let g = gram(&s, &KernelSpec::linear()).unwrap();
        let x = DMatrix::from_fn(5, 3, |i, j| s.vector(i).unwrap()[j]);
        let xxt = &x * x.transpose();
        for i in 0..5 {
            for j in 0..5 {
                assert!((g.at(i, j) - xxt[(i, j)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gram_exactly_symmetric_every_family() {
        let s = random_vecs(9, 4, 17);
        let specs = [
            KernelSpec::gaussian(None),
            KernelSpec::laplacian(None),
            KernelSpec::distance(1.0),
            KernelSpec::linear(),
            KernelSpec::l1norm(),
        ];
        for spec in &specs {
            let g = gram(&s, spec).unwrap();
            assert_eq!(g.entries().max_asymmetry(), 0.0, "family {}", spec.family.name());
        }
        let mut rng = rng_stream(18, 0);
        let mats = SampleSet::from_matrices((0..7).map(|_| random_spd(3, &mut rng)).collect()).unwrap();
        let g = gram(&mats, &KernelSpec::log_euclidean()).unwrap();
        assert_eq!(g.entries().max_asymmetry(), 0.0);
    }

    #[test]
    fn gram_distance_alpha2_equals_linear() {
        let s = random_vecs(10, 3, 19);
        let gd = gram(&s, &KernelSpec::distance(2.0)).unwrap();
        let gl = gram(&s, &KernelSpec::linear()).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert!((gd.at(i, j) - gl.at(i, j)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gram_bounded_families_stay_in_unit_interval_and_near_psd() {
        for seed in [23, 29, 31] {
            let s = random_vecs(14, 3, seed);
            for spec in [KernelSpec::gaussian(None), KernelSpec::laplacian(None)] {
                let g = gram(&s, &spec).unwrap();
                let mut flat = Vec::with_capacity(14 * 14);
                for i in 0..14 {
                    for j in 0..14 {
                        let v = g.at(i, j);
                        assert!((0.0..=1.0).contains(&v));
                        flat.push(v);
                    }
                }
                let m = DMatrix::from_row_slice(14, 14, &flat);
                let min_eig = m
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                assert!(min_eig >= -1e-8, "min eigenvalue {}", min_eig);
            }
        }
    }

    #[test]
    fn gram_kind_checks() {
        let s = random_vecs(4, 2, 37);
        assert!(matches!(
            gram(&s, &KernelSpec::log_euclidean()).unwrap_err(),
            Error::KindMismatch(_)
        ));
        let mut rng = rng_stream(38, 0);
        let mats = SampleSet::from_matrices((0..4).map(|_| random_spd(2, &mut rng)).collect()).unwrap();
        assert!(matches!(gram(&mats, &KernelSpec::linear()).unwrap_err(), Error::KindMismatch(_)));
    }

    #[test]
    fn from_entries_validates_and_mirrors() {
        let m = SquareMat::from_flat(2, vec![1.0, 0.5, 0.5 + 2e-11, 1.0]);
        let g = GramMatrix::from_entries(m).unwrap();
        assert_eq!(g.at(0, 1), g.at(1, 0));
        let bad = SquareMat::from_flat(2, vec![1.0, 0.5, 0.7, 1.0]);
        assert!(GramMatrix::from_entries(bad).is_err());
    }
}
