use std::f64::consts::PI;

use super::grid::{Field, Grid1D};
use super::matrix::Matrix;

/// Eigenpairs of the discrete Dirichlet `-Δh`, orthonormal under `<u, v>_h = h Σ u_i v_i`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    grid: Grid1D,
    eigenvalues: Vec<f64>,
    /// Column `k` holds mode `k + 1`.
    eigenvectors: Matrix,
}

pub fn eigensystem(grid: &Grid1D) -> EigenSystem {
    let d = grid.d();
    let h = grid.h();
    let len = grid.length();
    let norm = (2.0 / len).sqrt();
    let eigenvalues = (1..=d)
        .map(|k| 2.0 / (h * h) * (1.0 - (k as f64 * PI * h / len).cos()))
        .collect();
    let eigenvectors = Matrix::from_fn(d, d, |i, k| {
        let x = grid.node(i + 1);
        norm * ((k + 1) as f64 * PI * (x - grid.a()) / len).sin()
    });
    EigenSystem {
        grid: *grid,
        eigenvalues,
        eigenvectors,
    }
}

impl EigenSystem {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Ascending, strictly positive.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    /// Normalized mode `k` (1-based).
    pub fn mode(&self, k: usize) -> Field {
        assert!(k >= 1 && k <= self.grid.d(), "mode index out of range");
        Field::from_raw(self.grid, self.eigenvectors.column(k - 1))
    }

    /// First `count` coefficients `<u, φ_k>_h`.
    pub fn coefficients(&self, u: &[f64], count: usize) -> Vec<f64> {
        let h = self.grid.h();
        (0..count)
            .map(|k| {
                h * (0..self.grid.d())
                    .map(|i| self.eigenvectors[(i, k)] * u[i])
                    .sum::<f64>()
            })
            .collect()
    }

    /// `Σ_k c_k φ_k` over the given leading coefficients.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        (0..self.grid.d())
            .map(|i| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * self.eigenvectors[(i, k)])
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{make_grid, neg_laplacian};

    #[test]
    fn residual_per_mode() {
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let es = eigensystem(&g);
        let a = neg_laplacian(&g);
        for k in 1..=8 {
            let phi = es.mode(k);
            let av = a.apply(&phi);
            let lam = es.eigenvalues()[k - 1];
            let res = av.axpy(-lam, &phi);
            assert!(res.values().iter().all(|r| r.abs() < 1e-10));
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        for &(a, b, d) in &[(0.0, 1.0, 8), (-1.0, 2.0, 13)] {
            let g = make_grid(a, b, d).unwrap();
            let es = eigensystem(&g);
            let v = es.eigenvectors();
            let gram = v.transpose().matmul(v);
            let scaled = Matrix::from_fn(d, d, |i, j| g.h() * gram[(i, j)]);
            assert!(scaled.max_abs_diff(&Matrix::identity(d)) < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_ascending_positive() {
        let g = make_grid(0.0, 3.0, 20).unwrap();
        let ev = eigensystem(&g).eigenvalues().to_vec();
        assert!(ev[0] > 0.0);
        assert!(ev.windows(2).all(|w| w[0] < w[1]));
    }
}
