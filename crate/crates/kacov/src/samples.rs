use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// What the observations are: flat real vectors or symmetric
/// positive-definite matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Vector,
    SpdMatrix,
}

impl SampleKind {
    pub fn name(self) -> &'static str {
        match self {
            SampleKind::Vector => "vector",
            SampleKind::SpdMatrix => "spd_matrix",
        }
    }
}

/// Borrowed view of a single observation.
#[derive(Clone, Copy, Debug)]
pub enum Point<'a> {
    Vector(&'a [f64]),
    Matrix(&'a DMatrix<f64>),
}

#[derive(Clone, Debug)]
enum Data {
    /// n rows of length p, stored contiguously.
    Vectors { p: usize, flat: Vec<f64> },
    /// n matrices of side d, each validated SPD on construction.
    Matrices { d: usize, mats: Vec<DMatrix<f64>> },
}

/// Homogeneous collection of observations. Invariants enforced at
/// construction: n >= 1, every sample has the same kind and dimension, all
/// entries finite, and matrix samples are symmetric within 1e-10 with
/// smallest eigenvalue above 1e-12.
#[derive(Clone, Debug)]
pub struct SampleSet {
    n: usize,
    data: Data,
}

pub const SPD_SYMMETRY_TOL: f64 = 1e-10;
pub const SPD_EIGEN_FLOOR: f64 = 1e-12;

impl SampleSet {
    pub fn from_vectors(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidSpec("sample set must contain at least one observation".into()));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::InvalidSpec("vector observations must have dimension >= 1".into()));
        }
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::KindMismatch(format!(
                    "row {} has {} coordinates, expected {}",
                    i,
                    row.len(),
                    p
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::InvalidSpec(format!("row {} contains a non-finite value", i)));
                }
            }
            flat.extend_from_slice(row);
        }
        Ok(SampleSet {
            n,
            data: Data::Vectors { p, flat },
        })
    }

    pub fn from_matrices(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::InvalidSpec("sample set must contain at least one observation".into()));
        }
        let d = mats[0].nrows();
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::KindMismatch(format!(
                    "matrix {} is {}x{}, expected {}x{}",
                    i,
                    m.nrows(),
                    m.ncols(),
                    d,
                    d
                )));
            }
            validate_spd(m).map_err(|e| e.context(format!("matrix {}", i)))?;
        }
        Ok(SampleSet {
            n: mats.len(),
            data: Data::Matrices { d, mats },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// p for vectors, d for matrices.
    pub fn dim(&self) -> usize {
        match &self.data {
            Data::Vectors { p, .. } => *p,
            Data::Matrices { d, .. } => *d,
        }
    }

    pub fn kind(&self) -> SampleKind {
        match &self.data {
            Data::Vectors { .. } => SampleKind::Vector,
            Data::Matrices { .. } => SampleKind::SpdMatrix,
        }
    }

    pub fn point(&self, i: usize) -> Point<'_> {
        match &self.data {
            Data::Vectors { p, flat } => Point::Vector(&flat[i * p..(i + 1) * p]),
            Data::Matrices { mats, .. } => Point::Matrix(&mats[i]),
        }
    }

    pub fn vector(&self, i: usize) -> Option<&[f64]> {
        match &self.data {
            Data::Vectors { p, flat } => Some(&flat[i * p..(i + 1) * p]),
            Data::Matrices { .. } => None,
        }
    }

    pub fn matrix(&self, i: usize) -> Option<&DMatrix<f64>> {
        match &self.data {
            Data::Matrices { mats, .. } => Some(&mats[i]),
            Data::Vectors { .. } => None,
        }
    }
}

/// Symmetry within 1e-10 and all eigenvalues above 1e-12. Fails loudly
/// instead of clamping: projecting a bad input back onto the SPD cone would
/// silently change the kernel being tested.
pub fn validate_spd(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSpd(format!("not square: {}x{}", m.nrows(), m.ncols())));
    }
    for v in m.iter() {
        if !v.is_finite() {
            return Err(Error::NotSpd("contains a non-finite entry".into()));
        }
    }
    let mut asym = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > SPD_SYMMETRY_TOL {
        return Err(Error::NotSpd(format!("asymmetry {:.3e} exceeds {:.0e}", asym, SPD_SYMMETRY_TOL)));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig.is_nan() || min_eig <= SPD_EIGEN_FLOOR {
        return Err(Error::NotSpd(format!(
            "smallest eigenvalue {:.3e} is not above {:.0e}",
            min_eig, SPD_EIGEN_FLOOR
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_construction_and_access() {
        let s = SampleSet::from_vectors(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.kind(), SampleKind::Vector);
        assert_eq!(s.vector(1).unwrap(), &[3.0, 4.0]);
        assert!(s.matrix(0).is_none());
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = SampleSet::from_vectors(vec![vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::KindMismatch(_)));
    }

    #[test]
    fn non_finite_rejected() {
        let err = SampleSet::from_vectors(vec![vec![f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
    }

    #[test]
    fn spd_validation_accepts_diagonally_dominant() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let s = SampleSet::from_matrices(vec![m]).unwrap();
        assert_eq!(s.kind(), SampleKind::SpdMatrix);
        assert_eq!(s.dim(), 2);
    }

    #[test]
    fn spd_validation_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        let err = SampleSet::from_matrices(vec![m]).unwrap_err();
        assert!(matches!(err.root(), Error::NotSpd(_)));
    }

    #[test]
    fn spd_validation_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = SampleSet::from_matrices(vec![m]).unwrap_err();
        assert!(matches!(err.root(), Error::NotSpd(_)));
    }

    #[test]
    fn spd_validation_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(SampleSet::from_matrices(vec![m]).is_err());
    }
}
