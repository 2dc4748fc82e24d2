/// Dense square matrix, row-major, the common currency of Gram and angle
/// computations. Deliberately tiny: the estimators only ever need entrywise
/// access, row slices, row sums and totals.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMat {
    n: usize,
    data: Vec<f64>,
}

impl SquareMat {
    pub fn zeros(n: usize) -> Self {
        SquareMat {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "flat length must be n*n");
        SquareMat { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Largest |m[i][j] - m[j][i]|.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.at(i, j) - self.at(j, i)).abs());
            }
        }
        worst
    }

    /// Copy the upper triangle onto the lower so equality across the diagonal
    /// is exact, not merely within tolerance.
    pub fn mirror_upper(&mut self) {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let v = self.at(i, j);
                self.set(j, i, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_sums_and_total() {
        let m = SquareMat::from_flat(2, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.row_sums(), vec![3.0, 7.0]);
        assert_eq!(m.total(), 10.0);
        assert_eq!(m.at(1, 0), 3.0);
        assert_eq!(m.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn mirror_makes_symmetry_exact() {
        let mut m = SquareMat::from_flat(2, vec![0.0, 0.3, 0.2999999, 0.0]);
        assert!(m.max_asymmetry() > 0.0);
        m.mirror_upper();
        assert_eq!(m.max_asymmetry(), 0.0);
        assert_eq!(m.at(1, 0), 0.3);
    }
}
