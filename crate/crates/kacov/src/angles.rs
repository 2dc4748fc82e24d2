//! Angle matrices derived from Gram matrices, and the closed-form two
//! half-space Gaussian orthant probabilities used to validate them.
//!
//! Two constructions, both law-of-cosines expressions in kernel geometry:
//!
//! * prime angles: the angle at an auxiliary point obtained by appending a
//!   unit coordinate to every embedded sample, a'_ij =
//!   arccos[(K_ij + 1) / sqrt((K_ii + 1)(K_jj + 1))];
//! * vertex angles: the angle subtended at sample k, a_ijk =
//!   arccos[(K_ij - K_ik - K_jk + K_kk) / (d_i d_j)] with
//!   d_i = sqrt(K_ii - 2 K_ik + K_kk), defined as 0 when i or j equals k.
//!
//! Diagonals (and row/column k for vertex matrices) are written as exact
//! zeros rather than computed: arccos amplifies a one-ulp cosine error to
//! ~1.5e-8, which would leak into the estimator trace sums.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::mat::SquareMat;

/// Tolerated excursion of a cosine beyond [-1, 1] before the Gram matrix is
/// declared corrupt rather than merely rounded.
pub const COS_CLAMP_TOL: f64 = 1e-8;

/// Squared kernel distance at or below this marks a duplicate of the vertex
/// point; the affected entries are zero by continuity with the index rule.
pub const DUPLICATE_SQ_DIST_TOL: f64 = 1e-14;

/// Angles at the lifted auxiliary vertex. Symmetric, diagonal exactly 0,
/// entries in [0, pi].
#[derive(Clone, Debug)]
pub struct PrimeAngleMatrix {
    entries: SquareMat,
}

impl PrimeAngleMatrix {
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
}

/// Angles at sample `vertex`. Symmetric in (i, j), row and column `vertex`
/// exactly 0, entries in [0, pi].
#[derive(Clone, Debug)]
pub struct VertexAngleMatrix {
    vertex: usize,
    entries: SquareMat,
}

impl VertexAngleMatrix {
    pub fn n(&self) -> usize {
        self.entries.n()
    }

    pub fn vertex(&self) -> usize {
        self.vertex
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries.at(i, j)
    }

    pub fn entries(&self) -> &SquareMat {
        &self.entries
    }
}

/// All n vertex-angle matrices of one Gram matrix.
pub struct VertexFamily {
    mats: Vec<VertexAngleMatrix>,
}

impl VertexFamily {
    pub fn n(&self) -> usize {
        self.mats.len()
    }

    pub fn mat(&self, k: usize) -> &VertexAngleMatrix {
        &self.mats[k]
    }

    pub fn mats(&self) -> &[VertexAngleMatrix] {
        &self.mats
    }
}

fn checked_cos(c: f64, i: usize, j: usize) -> Result<f64> {
    if !c.is_finite() || !(-1.0 - COS_CLAMP_TOL..=1.0 + COS_CLAMP_TOL).contains(&c) {
        return Err(Error::NumericalDomain(format!(
            "cosine {:.6e} at entry ({}, {}) is outside [-1, 1] beyond tolerance {:.0e}; the gram matrix is not consistent with any inner product",
            c, i, j, COS_CLAMP_TOL
        )));
    }
    Ok(c.clamp(-1.0, 1.0))
}

pub fn angle_prime_matrix(g: &GramMatrix) -> Result<PrimeAngleMatrix> {
    let n = g.n();
    let mut lift = vec![0.0; n];
    for (i, l) in lift.iter_mut().enumerate() {
        let d = g.at(i, i) + 1.0;
        if d <= 0.0 {
            return Err(Error::InvalidKernel(format!(
                "K({i}, {i}) + 1 = {d:.6e} is not positive; lifted norm undefined"
            )));
        }
        *l = d.sqrt();
    }
    let mut entries = SquareMat::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let c = checked_cos((g.at(i, j) + 1.0) / (lift[i] * lift[j]), i, j)?;
            entries.set(i, j, c.acos());
        }
    }
    entries.mirror_upper();
    Ok(PrimeAngleMatrix { entries })
}

pub fn angle_vertex_matrix(g: &GramMatrix, k: usize) -> Result<VertexAngleMatrix> {
    let n = g.n();
    if k >= n {
        return Err(Error::InvalidSpec(format!("vertex index {} out of range for n = {}", k, n)));
    }
    let kk = g.at(k, k);
    // sqrt of the squared kernel distance to the vertex; 0 marks "skip row"
    // (the vertex itself, or a point duplicating it).
    let mut den = vec![0.0; n];
    for (i, d) in den.iter_mut().enumerate() {
        if i == k {
            continue;
        }
        let sq = g.at(i, i) - 2.0 * g.at(i, k) + kk;
        if sq > DUPLICATE_SQ_DIST_TOL {
            *d = sq.sqrt();
        }
    }
    let mut entries = SquareMat::zeros(n);
    for i in 0..n {
        if den[i] == 0.0 {
            continue;
        }
        for j in (i + 1)..n {
            if den[j] == 0.0 {
                continue;
            }
            let num = g.at(i, j) - g.at(i, k) - g.at(j, k) + kk;
            let c = checked_cos(num / (den[i] * den[j]), i, j)?;
            entries.set(i, j, c.acos());
        }
    }
    entries.mirror_upper();
    Ok(VertexAngleMatrix { vertex: k, entries })
}

/// Vertex matrices for every k, computed in parallel. Each matrix is a pure
/// function of (G, k), so the family is bit-identical for any worker count.
pub fn vertex_family(g: &GramMatrix) -> Result<VertexFamily> {
    let mats: Vec<VertexAngleMatrix> = (0..g.n())
        .into_par_iter()
        .map(|k| angle_vertex_matrix(g, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(VertexFamily { mats })
}

/// P(s1.h <= 0 and s2.h <= 0) for standard normal h:
/// 1/2 - arccos(<s1,s2>/(|s1||s2|)) / (2 pi).
pub fn orthant_prob_closed(inner: f64, norm1: f64, norm2: f64) -> Result<f64> {
    if !(norm1 > 0.0 && norm2 > 0.0) || !inner.is_finite() {
        return Err(Error::InvalidSpec("orthant probability requires positive norms and finite inner product".into()));
    }
    let bound = norm1 * norm2;
    if inner.abs() > bound * (1.0 + 1e-12) {
        return Err(Error::NumericalDomain(format!(
            "inner product {:.6e} exceeds |s1||s2| = {:.6e}",
            inner, bound
        )));
    }
    let c = (inner / bound).clamp(-1.0, 1.0);
    Ok(0.5 - c.acos() / (2.0 * std::f64::consts::PI))
}

/// P(s1.h <= U and s2.h <= U) for standard normal h and an independent
/// standard normal U:
/// 1/2 - arccos[(1 + <s1,s2>) / sqrt((1 + |s1|^2)(1 + |s2|^2))] / (2 pi).
/// The argument cannot leave [-1, 1] for genuine inner products; the clamp
/// only absorbs roundoff.
pub fn orthant_prob_shifted_closed(inner: f64, norm1: f64, norm2: f64) -> Result<f64> {
    if !inner.is_finite() || !norm1.is_finite() || !norm2.is_finite() || norm1 < 0.0 || norm2 < 0.0 {
        return Err(Error::InvalidSpec("orthant probability requires finite inputs and nonnegative norms".into()));
    }
    let c = ((1.0 + inner) / ((1.0 + norm1 * norm1) * (1.0 + norm2 * norm2)).sqrt()).clamp(-1.0, 1.0);
    Ok(0.5 - c.acos() / (2.0 * std::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, KernelSpec};
    use crate::rng::rng_stream;
    use crate::samples::SampleSet;
    use std::f64::consts::PI;

    fn linear_gram(rows: &[&[f64]]) -> GramMatrix {
        let s = SampleSet::from_vectors(rows.iter().map(|r| r.to_vec()).collect()).unwrap();
        gram(&s, &KernelSpec::linear()).unwrap()
    }

    fn random_gram(n: usize, p: usize, seed: u64, spec: &KernelSpec) -> GramMatrix {
        let mut rng = rng_stream(seed, 0);
        let s = SampleSet::from_vectors((0..n).map(|_| (0..p).map(|_| rng.normal()).collect()).collect())
            .unwrap();
        gram(&s, spec).unwrap()
    }

    // ---- prime angles ----

    #[test]
    fn prime_scalar_opposites_give_right_angle() {
        // K = [[1,-1],[-1,1]]: cos = (-1+1)/sqrt(2*2) = 0
        let a = angle_prime_matrix(&linear_gram(&[&[1.0], &[-1.0]])).unwrap();
        assert!((a.at(0, 1) - PI / 2.0).abs() <= 1e-15);
    }

    #[test]
    fn prime_orthonormal_vectors_give_pi_over_3() {
        // cos = (0+1)/sqrt(2*2) = 1/2
        let a = angle_prime_matrix(&linear_gram(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert!((a.at(0, 1) - PI / 3.0).abs() <= 1e-15);
    }

    #[test]
    fn prime_diagonal_is_exact_zero() {
        let g = random_gram(10, 3, 51, &KernelSpec::gaussian(None));
        let a = angle_prime_matrix(&g).unwrap();
        for i in 0..10 {
            assert_eq!(a.at(i, i), 0.0);
        }
        assert_eq!(a.entries().max_asymmetry(), 0.0);
        for i in 0..10 {
            for j in 0..10 {
                assert!((0.0..=PI).contains(&a.at(i, j)));
            }
        }
    }

    #[test]
    fn prime_rejects_corrupt_gram() {
        use crate::mat::SquareMat;
        // symmetric but wildly non-PSD: cos = (5+1)/sqrt(2*2) = 3
        let m = SquareMat::from_flat(2, vec![1.0, 5.0, 5.0, 1.0]);
        let g = GramMatrix::from_entries(m).unwrap();
        assert!(matches!(
            angle_prime_matrix(&g).unwrap_err(),
            Error::NumericalDomain(_)
        ));
    }

    #[test]
    fn prime_rejects_negative_lifted_norm() {
        use crate::mat::SquareMat;
        let m = SquareMat::from_flat(2, vec![-2.0, 0.0, 0.0, 1.0]);
        let g = GramMatrix::from_entries(m).unwrap();
        assert!(matches!(angle_prime_matrix(&g).unwrap_err(), Error::InvalidKernel(_)));
    }

    // ---- vertex angles ----

    #[test]
    fn vertex_right_angle_at_origin() {
        let g = linear_gram(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let a = angle_vertex_matrix(&g, 0).unwrap();
        assert!((a.at(1, 2) - PI / 2.0).abs() <= 1e-15);
    }

    #[test]
    fn vertex_row_and_column_k_exact_zero() {
        let g = random_gram(9, 2, 53, &KernelSpec::laplacian(None));
        for k in 0..9 {
            let a = angle_vertex_matrix(&g, k).unwrap();
            for i in 0..9 {
                assert_eq!(a.at(i, k), 0.0);
                assert_eq!(a.at(k, i), 0.0);
                assert_eq!(a.at(i, i), 0.0);
            }
            assert_eq!(a.entries().max_asymmetry(), 0.0);
            for i in 0..9 {
                for j in 0..9 {
                    assert!((0.0..=PI).contains(&a.at(i, j)));
                }
            }
        }
    }

    #[test]
    fn vertex_duplicate_of_vertex_zeroes_its_row() {
        // sample 1 duplicates sample 0 (the vertex)
        let g = linear_gram(&[&[1.0, 2.0], &[1.0, 2.0], &[3.0, 0.0], &[0.0, 4.0]]);
        let a = angle_vertex_matrix(&g, 0).unwrap();
        for j in 0..4 {
            assert_eq!(a.at(1, j), 0.0);
            assert_eq!(a.at(j, 1), 0.0);
        }
        // untouched pair still has a real angle
        assert!(a.at(2, 3) > 0.1);
    }

    #[test]
    fn vertex_coincident_rays_near_zero() {
        // samples 1 and 2 coincide (both differ from the vertex), so the rays
        // from the vertex are identical; arccos roundoff may leave ~1e-8.
        let g = linear_gram(&[&[0.0, 0.0], &[1.0, 2.0], &[1.0, 2.0], &[5.0, -1.0]]);
        let a = angle_vertex_matrix(&g, 0).unwrap();
        assert!(a.at(1, 2).abs() <= 3e-8, "got {}", a.at(1, 2));
    }

    #[test]
    fn vertex_linear_kernel_matches_euclidean_angles() {
        // independent implementation straight from coordinates
        let mut rng = rng_stream(57, 0);
        let n = 8;
        let p = 3;
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.normal()).collect()).collect();
        let s = SampleSet::from_vectors(xs.clone()).unwrap();
        let g = gram(&s, &KernelSpec::linear()).unwrap();
        for k in 0..n {
            let a = angle_vertex_matrix(&g, k).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if i == k || j == k || i == j {
                        continue;
                    }
                    let u: Vec<f64> = (0..p).map(|t| xs[i][t] - xs[k][t]).collect();
                    let v: Vec<f64> = (0..p).map(|t| xs[j][t] - xs[k][t]).collect();
                    let du = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let dv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let c = u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / (du * dv);
                    let want = c.clamp(-1.0, 1.0).acos();
                    assert!(
                        (a.at(i, j) - want).abs() <= 1e-10,
                        "k={} i={} j={}: {} vs {}",
                        k,
                        i,
                        j,
                        a.at(i, j),
                        want
                    );
                }
            }
        }
    }

    #[test]
    fn vertex_index_out_of_range() {
        let g = linear_gram(&[&[0.0], &[1.0]]);
        assert!(matches!(angle_vertex_matrix(&g, 2).unwrap_err(), Error::InvalidSpec(_)));
    }

    // ---- negative-type quadratic forms for kernels with a feature map ----

    fn quad_form(m: &SquareMat, w: &[f64]) -> f64 {
        let n = m.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += w[i] * m.at(i, j) * w[j];
            }
        }
        s
    }

    #[test]
    fn zero_sum_quadratic_forms_nonpositive_for_psd_kernels() {
        let specs = [KernelSpec::gaussian(None), KernelSpec::laplacian(None), KernelSpec::linear()];
        let mut rng = rng_stream(59, 0);
        let mut trials = 0;
        for round in 0..12 {
            for (si, spec) in specs.iter().enumerate() {
                let n = 5 + ((round + si) % 8); // 5..12
                let p = 2 + (round % 3);
                let s = SampleSet::from_vectors(
                    (0..n).map(|_| (0..p).map(|_| rng.normal()).collect()).collect(),
                )
                .unwrap();
                let g = gram(&s, spec).unwrap();

                let a = angle_prime_matrix(&g).unwrap();
                let raw: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
                let mean = raw.iter().sum::<f64>() / n as f64;
                let w: Vec<f64> = raw.iter().map(|v| v - mean).collect();
                assert!(
                    quad_form(a.entries(), &w) <= 1e-8,
                    "prime form positive for {}",
                    spec.family.name()
                );

                for k in 0..n {
                    let ak = angle_vertex_matrix(&g, k).unwrap();
                    // weights sum to zero over the non-vertex indices; w[k]
                    // is arbitrary because row/column k vanish
                    let raw: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
                    let m = raw.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| v).sum::<f64>()
                        / (n - 1) as f64;
                    let wk: Vec<f64> =
                        raw.iter().enumerate().map(|(i, v)| if i == k { *v } else { v - m }).collect();
                    let q = quad_form(ak.entries(), &wk);
                    assert!(q <= 1e-8, "vertex form {} at k={} for {}", q, k, spec.family.name());
                }
                trials += 1;
            }
        }
        assert!(trials >= 36);
    }

    // ---- orthant probabilities ----

    #[test]
    fn orthant_identical_directions() {
        assert!((orthant_prob_closed(6.0, 2.0, 3.0).unwrap() - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn orthant_orthogonal_quarter() {
        assert!((orthant_prob_closed(0.0, 1.0, 5.0).unwrap() - 0.25).abs() <= 1e-15);
    }

    #[test]
    fn orthant_antipodal_zero() {
        assert!(orthant_prob_closed(-6.0, 2.0, 3.0).unwrap().abs() <= 1e-15);
    }

    #[test]
    fn orthant_rejects_impossible_inner() {
        assert!(matches!(
            orthant_prob_closed(7.0, 2.0, 3.0).unwrap_err(),
            Error::NumericalDomain(_)
        ));
    }

    #[test]
    fn shifted_orthant_degenerate_half() {
        assert!((orthant_prob_shifted_closed(0.0, 0.0, 0.0).unwrap() - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn shifted_orthant_identical_unit_functionals() {
        assert!((orthant_prob_shifted_closed(1.0, 1.0, 1.0).unwrap() - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn shifted_orthant_orthogonal_units_one_third() {
        let p = orthant_prob_shifted_closed(0.0, 1.0, 1.0).unwrap();
        assert!((p - 1.0 / 3.0).abs() <= 1e-15);
    }
}
