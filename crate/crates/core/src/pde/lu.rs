//! Doolittle LU without pivoting.
//!
//! No row exchanges are performed so the factorization coincides step by step
//! with the unrolled solver circuit in [`crate::circuits`].

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Pivots below this fraction of `max |a_ij|` are rejected.
pub const PIVOT_RELATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors {
    /// Unit lower-triangular.
    pub lower: Matrix,
    pub upper: Matrix,
}

pub fn lu_factor(a: &Matrix) -> Result<LuFactors> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    let n = a.rows();
    let threshold = PIVOT_RELATIVE_TOLERANCE * a.max_abs();
    let mut lower = Matrix::identity(n);
    let mut upper = Matrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let mut s = a[(j, k)];
            for i in 0..j {
                s -= lower[(j, i)] * upper[(i, k)];
            }
            upper[(j, k)] = s;
        }
        let pivot = upper[(j, j)];
        if !(pivot.abs() >= threshold) || pivot == 0.0 {
            return Err(Error::NearZeroPivot {
                index: j,
                value: pivot,
            });
        }
        for k in j + 1..n {
            let mut s = a[(k, j)];
            for i in 0..j {
                s -= lower[(k, i)] * upper[(i, j)];
            }
            lower[(k, j)] = s / pivot;
        }
    }
    Ok(LuFactors { lower, upper })
}

pub fn lu_solve(factors: &LuFactors, b: &[f64]) -> Result<Vec<f64>> {
    let n = factors.lower.rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let (l, u) = (&factors.lower, &factors.upper);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= u[(i, j)] * x[j];
        }
        x[i] = s / u[(i, i)];
    }
    Ok(x)
}

impl LuFactors {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        lu_solve(self, b)
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }
}

pub fn solve_dense(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    lu_factor(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factors() {
        let f = lu_factor(&Matrix::identity(4)).unwrap();
        assert_eq!(f.lower, Matrix::identity(4));
        assert_eq!(f.upper, Matrix::identity(4));
        let b = [1.0, -2.0, 3.0, 0.5];
        assert_eq!(f.solve(&b).unwrap(), b.to_vec());
    }

    #[test]
    fn two_by_two_by_hand() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let f = lu_factor(&a).unwrap();
        assert_eq!(
            f.lower,
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.25, 1.0]]).unwrap()
        );
        assert_eq!(
            f.upper,
            Matrix::from_rows(&[vec![4.0, 1.0], vec![0.0, 2.75]]).unwrap()
        );
    }

    #[test]
    fn zero_leading_pivot() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            lu_factor(&a),
            Err(Error::NearZeroPivot { index: 0, .. })
        ));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = Matrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 5.0]]).unwrap();
        let x = solve_dense(&a, &[0.0, 0.0]).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn wrong_rhs_length() {
        let f = lu_factor(&Matrix::identity(3)).unwrap();
        assert!(matches!(
            f.solve(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
