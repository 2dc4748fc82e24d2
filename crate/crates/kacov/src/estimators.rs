//! The three kernel angle covariance estimators, their brute-force tuple
//! oracles, the normalized correlations, and the generalized distance
//! covariance.
//!
//! Fast forms never build a matrix product: with T = sum_ij a_ij b_ij,
//! U = sum_i rowsum(a)_i rowsum(b)_i and S = total(a) total(b), each bracket
//! is T - 2U/(m-2) + S/((m-1)(m-2)) for the effective index-set size m. The
//! prime-angle version runs in O(n^2), the per-vertex version in O(n^3), and
//! the two-vertex version in O(n^4), against O(n^4)/O(n^5)/O(n^6) for the
//! literal tuple sums.
//!
//! Summation order is pinned: vertices ascending, vertex pairs lexicographic.
//! Parallel workers fill per-index slots that are reduced sequentially, so
//! results are bit-identical for any worker count.

use rayon::prelude::*;

use crate::angles::{angle_prime_matrix, angle_vertex_matrix, vertex_family, PrimeAngleMatrix, VertexFamily};
use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::mat::SquareMat;

/// Which statistic a test runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Kacov1,
    Kacov2,
    Kacov3,
    Gdcov,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Kacov1 => "kacov1",
            Method::Kacov2 => "kacov2",
            Method::Kacov3 => "kacov3",
            Method::Gdcov => "gdcov",
        }
    }

    /// Smallest n for which the estimator's tuple denominators are positive.
    pub fn min_n(self) -> usize {
        match self {
            Method::Kacov1 | Method::Gdcov => 4,
            Method::Kacov2 => 5,
            Method::Kacov3 => 6,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kacov1" => Ok(Method::Kacov1),
            "kacov2" => Ok(Method::Kacov2),
            "kacov3" => Ok(Method::Kacov3),
            "gdcov" => Ok(Method::Gdcov),
            other => Err(Error::InvalidSpec(format!("unknown method '{}'", other))),
        }
    }
}

/// A computed angle covariance: which index m, the value, and the n it was
/// computed from (needed later to scale the test statistic).
#[derive(Clone, Copy, Debug)]
pub struct KacovValue {
    pub m: u8,
    pub value: f64,
    pub n: usize,
}

/// Vertex matrices above this n are recomputed per pair instead of being
/// held in memory all at once (the family costs O(n^3) floats).
pub const KACOV3_MEMO_CAP: usize = 256;

fn check_n(n: usize, other: usize, need: usize) -> Result<()> {
    if n != other {
        return Err(Error::KindMismatch(format!("sample counts differ: {} vs {}", n, other)));
    }
    if n < need {
        return Err(Error::SampleTooSmall { need, got: n });
    }
    Ok(())
}

/// T - 2U/(m-2) + S/((m-1)(m-2)) over full matrices; `m_eff` is the size of
/// the live index set (rows/columns that are identically zero drop out of
/// every sum, so restricted matrices never need to be materialized).
pub(crate) fn bracket(a: &SquareMat, b: &SquareMat, m_eff: f64) -> f64 {
    let t: f64 = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
    let ra = a.row_sums();
    let rb = b.row_sums();
    let u: f64 = ra.iter().zip(&rb).map(|(x, y)| x * y).sum();
    let s = ra.iter().sum::<f64>() * rb.iter().sum::<f64>();
    t - 2.0 * u / (m_eff - 2.0) + s / ((m_eff - 1.0) * (m_eff - 2.0))
}

// ---------------------------------------------------------------------------
// kacov1
// ---------------------------------------------------------------------------

/// Lifted-vertex estimator: bracket over the prime-angle matrices divided by
/// n(n-3). O(n^2).
pub fn kacov1(ap: &PrimeAngleMatrix, bp: &PrimeAngleMatrix) -> Result<KacovValue> {
    let n = ap.n();
    check_n(n, bp.n(), 4)?;
    let nf = n as f64;
    let value = bracket(ap.entries(), bp.entries(), nf) / (nf * (nf - 3.0));
    Ok(KacovValue { m: 1, value, n })
}

// ---------------------------------------------------------------------------
// kacov2
// ---------------------------------------------------------------------------

/// Shared-vertex estimator from precomputed vertex families.
pub fn kacov2_from_family(fa: &VertexFamily, fb: &VertexFamily) -> Result<KacovValue> {
    let n = fa.n();
    check_n(n, fb.n(), 5)?;
    let nf = n as f64;
    // one bracket per vertex; the live index set excludes the vertex itself
    let per_vertex: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|r| bracket(fa.mat(r).entries(), fb.mat(r).entries(), nf - 1.0))
        .collect();
    let total: f64 = per_vertex.iter().sum();
    Ok(KacovValue { m: 2, value: total / (nf * (nf - 1.0) * (nf - 4.0)), n })
}

/// Shared-vertex estimator: for each vertex r, the bracket over the angle
/// matrices at r, summed in ascending r and divided by n(n-1)(n-4). O(n^3).
pub fn kacov2(g1: &GramMatrix, g2: &GramMatrix) -> Result<KacovValue> {
    check_n(g1.n(), g2.n(), 5)?;
    let fa = vertex_family(g1)?;
    let fb = vertex_family(g2)?;
    kacov2_from_family(&fa, &fb)
}

// ---------------------------------------------------------------------------
// kacov3
// ---------------------------------------------------------------------------

struct FamilySums {
    row_sums: Vec<Vec<f64>>,
    totals: Vec<f64>,
}

fn family_sums(f: &VertexFamily) -> FamilySums {
    let row_sums: Vec<Vec<f64>> = f.mats().iter().map(|m| m.entries().row_sums()).collect();
    let totals = row_sums.iter().map(|r| r.iter().sum()).collect();
    FamilySums { row_sums, totals }
}

/// Bracket for the ordered vertex pair (r, t): X angles at r, Y angles at t,
/// both restricted to indices outside {r, t}. Row/column r of A_r and t of
/// B_t are already zero, so only the t-column of A_r and r-column of B_t need
/// explicit removal from the sums.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pair_bracket(
    a: &SquareMat,
    ra: &[f64],
    sa: f64,
    b: &SquareMat,
    rb: &[f64],
    sb: f64,
    r: usize,
    t: usize,
    nf: f64,
) -> f64 {
    let n = a.n();
    let mut tt = 0.0;
    let mut u = 0.0;
    for i in 0..n {
        let arow = a.row(i);
        let brow = b.row(i);
        let mut dot = 0.0;
        for (x, y) in arow.iter().zip(brow) {
            dot += x * y;
        }
        tt += dot;
        u += (ra[i] - arow[t]) * (rb[i] - brow[r]);
    }
    let s = (sa - 2.0 * ra[t]) * (sb - 2.0 * rb[r]);
    tt - 2.0 * u / (nf - 4.0) + s / ((nf - 3.0) * (nf - 4.0))
}

/// Two-vertex estimator from precomputed families. O(n^4).
pub fn kacov3_from_family(fa: &VertexFamily, fb: &VertexFamily) -> Result<KacovValue> {
    let n = fa.n();
    check_n(n, fb.n(), 6)?;
    let nf = n as f64;
    let sa = family_sums(fa);
    let sb = family_sums(fb);
    // per-r slots over unordered pairs {r, t}; the two orientations of a
    // pair are added adjacently, and each orientation's term commutes
    // termwise under an argument swap, so the reduction order (hence the
    // result's bit pattern) is the same for (fa, fb) and (fb, fa)
    let per_r: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|r| {
            let ar = fa.mat(r).entries();
            let br = fb.mat(r).entries();
            let mut acc = 0.0;
            for t in (r + 1)..n {
                acc += pair_bracket(
                    ar,
                    &sa.row_sums[r],
                    sa.totals[r],
                    fb.mat(t).entries(),
                    &sb.row_sums[t],
                    sb.totals[t],
                    r,
                    t,
                    nf,
                ) + pair_bracket(
                    fa.mat(t).entries(),
                    &sa.row_sums[t],
                    sa.totals[t],
                    br,
                    &sb.row_sums[r],
                    sb.totals[r],
                    t,
                    r,
                    nf,
                );
            }
            acc
        })
        .collect();
    let total: f64 = per_r.iter().sum();
    Ok(KacovValue {
        m: 3,
        value: total / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 5.0)),
        n,
    })
}

/// Two-vertex estimator over ordered vertex pairs (r, t), divided by
/// n(n-1)(n-2)(n-5). Holds both vertex families in memory up to
/// `KACOV3_MEMO_CAP` samples and recomputes per pair above it.
pub fn kacov3(g1: &GramMatrix, g2: &GramMatrix) -> Result<KacovValue> {
    kacov3_with_cap(g1, g2, KACOV3_MEMO_CAP)
}

pub fn kacov3_with_cap(g1: &GramMatrix, g2: &GramMatrix, cap: usize) -> Result<KacovValue> {
    let n = g1.n();
    check_n(n, g2.n(), 6)?;
    if n <= cap {
        let fa = vertex_family(g1)?;
        let fb = vertex_family(g2)?;
        return kacov3_from_family(&fa, &fb);
    }
    let nf = n as f64;
    // same pair grouping as the memoized path above, so the two paths stay
    // bit-identical
    let per_r: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let ar = angle_vertex_matrix(g1, r)?;
            let rar = ar.entries().row_sums();
            let sar: f64 = rar.iter().sum();
            let br = angle_vertex_matrix(g2, r)?;
            let rbr = br.entries().row_sums();
            let sbr: f64 = rbr.iter().sum();
            let mut acc = 0.0;
            for t in (r + 1)..n {
                let at = angle_vertex_matrix(g1, t)?;
                let rat = at.entries().row_sums();
                let sat: f64 = rat.iter().sum();
                let bt = angle_vertex_matrix(g2, t)?;
                let rbt = bt.entries().row_sums();
                let sbt: f64 = rbt.iter().sum();
                acc += pair_bracket(ar.entries(), &rar, sar, bt.entries(), &rbt, sbt, r, t, nf)
                    + pair_bracket(at.entries(), &rat, sat, br.entries(), &rbr, sbr, t, r, nf);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = per_r.iter().sum();
    Ok(KacovValue {
        m: 3,
        value: total / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 5.0)),
        n,
    })
}

// ---------------------------------------------------------------------------
// brute-force oracle
// ---------------------------------------------------------------------------

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// Literal tuple-sum definitions, enumerated over all ordered tuples of
/// pairwise distinct indices. Exponential in m; guarded at n <= 12.
pub fn kacov_oracle(m: u8, g1: &GramMatrix, g2: &GramMatrix) -> Result<KacovValue> {
    let n = g1.n();
    let need = match m {
        1 => 4,
        2 => 5,
        3 => 6,
        _ => return Err(Error::InvalidSpec(format!("oracle index m must be 1, 2 or 3, got {}", m))),
    };
    check_n(n, g2.n(), need)?;
    if n > 12 {
        return Err(Error::OracleTooLarge(n));
    }
    let value = match m {
        1 => {
            let a = angle_prime_matrix(g1)?;
            let b = angle_prime_matrix(g2)?;
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    for k in 0..n {
                        if k == i || k == j {
                            continue;
                        }
                        for l in 0..n {
                            if l == i || l == j || l == k {
                                continue;
                            }
                            sum += a.at(i, j) * (b.at(i, j) - 2.0 * b.at(i, k) + b.at(k, l));
                        }
                    }
                }
            }
            sum / falling(n, 4)
        }
        2 => {
            let fa = vertex_family(g1)?;
            let fb = vertex_family(g2)?;
            let mut sum = 0.0;
            for r in 0..n {
                let a = fa.mat(r);
                let b = fb.mat(r);
                for i in 0..n {
                    if i == r {
                        continue;
                    }
                    for j in 0..n {
                        if j == i || j == r {
                            continue;
                        }
                        for k in 0..n {
                            if k == i || k == j || k == r {
                                continue;
                            }
                            for l in 0..n {
                                if l == i || l == j || l == k || l == r {
                                    continue;
                                }
                                sum += a.at(i, j) * (b.at(i, j) - 2.0 * b.at(i, k) + b.at(k, l));
                            }
                        }
                    }
                }
            }
            sum / falling(n, 5)
        }
        _ => {
            let fa = vertex_family(g1)?;
            let fb = vertex_family(g2)?;
            let mut sum = 0.0;
            for r in 0..n {
                let a = fa.mat(r);
                for t in 0..n {
                    if t == r {
                        continue;
                    }
                    let b = fb.mat(t);
                    for i in 0..n {
                        if i == r || i == t {
                            continue;
                        }
                        for j in 0..n {
                            if j == i || j == r || j == t {
                                continue;
                            }
                            for k in 0..n {
                                if k == i || k == j || k == r || k == t {
                                    continue;
                                }
                                for l in 0..n {
                                    if l == i || l == j || l == k || l == r || l == t {
                                        continue;
                                    }
                                    sum += a.at(i, j) * (b.at(i, j) - 2.0 * b.at(i, k) + b.at(k, l));
                                }
                            }
                        }
                    }
                }
            }
            sum / falling(n, 6)
        }
    };
    Ok(KacovValue { m, value, n })
}

// ---------------------------------------------------------------------------
// normalized correlation
// ---------------------------------------------------------------------------

fn kacov_by_m(m: u8, g1: &GramMatrix, g2: &GramMatrix) -> Result<KacovValue> {
    match m {
        1 => {
            let a = angle_prime_matrix(g1)?;
            let b = angle_prime_matrix(g2)?;
            kacov1(&a, &b)
        }
        2 => kacov2(g1, g2),
        3 => kacov3(g1, g2),
        _ => Err(Error::InvalidSpec(format!("m must be 1, 2 or 3, got {}", m))),
    }
}

/// kacov_m(X, Y) / sqrt(kacov_m(X, X) kacov_m(Y, Y)). Computed as
/// sign(v) * sqrt(v^2 / (sx sy)) so that a sample tested against itself
/// yields exactly 1.
pub fn kac(m: u8, g1: &GramMatrix, g2: &GramMatrix) -> Result<f64> {
    let v = kacov_by_m(m, g1, g2)?.value;
    let sx = kacov_by_m(m, g1, g1)?.value;
    let sy = kacov_by_m(m, g2, g2)?.value;
    if sx <= 1e-14 {
        return Err(Error::DegenerateMarginal(format!(
            "self-covariance of the first sample is {:.3e}; correlation undefined",
            sx
        )));
    }
    if sy <= 1e-14 {
        return Err(Error::DegenerateMarginal(format!(
            "self-covariance of the second sample is {:.3e}; correlation undefined",
            sy
        )));
    }
    Ok(v.signum() * ((v * v) / (sx * sy)).sqrt())
}

// ---------------------------------------------------------------------------
// generalized distance covariance
// ---------------------------------------------------------------------------

/// Kernel-induced distances rho_ij = sqrt(K_ii - 2 K_ij + K_jj). Squared
/// distances in [-1e-10, 0] are treated as roundoff and clamped to zero;
/// anything lower means the matrix is not a Gram matrix.
pub(crate) fn rho_matrix(g: &GramMatrix) -> Result<SquareMat> {
    let n = g.n();
    let mut m = SquareMat::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let sq = g.at(i, i) - 2.0 * g.at(i, j) + g.at(j, j);
            if sq < -1e-10 {
                return Err(Error::NumericalDomain(format!(
                    "squared kernel distance {:.6e} at ({}, {}) is negative beyond roundoff",
                    sq, i, j
                )));
            }
            m.set(i, j, sq.max(0.0).sqrt());
        }
    }
    m.mirror_upper();
    Ok(m)
}

/// Unbiased generalized distance covariance: the kacov1 combination applied
/// to the kernel-induced distance matrices instead of angle matrices.
pub fn gdcov(g1: &GramMatrix, g2: &GramMatrix) -> Result<f64> {
    let n = g1.n();
    check_n(n, g2.n(), 4)?;
    let r1 = rho_matrix(g1)?;
    let r2 = rho_matrix(g2)?;
    let nf = n as f64;
    Ok(bracket(&r1, &r2, nf) / (nf * (nf - 3.0)))
}
