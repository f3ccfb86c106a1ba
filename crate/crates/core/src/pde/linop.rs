use serde::{Deserialize, Serialize};

use super::grid::{Field, Grid1D};
use super::matrix::{solve_tridiagonal, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinOpKind {
    Tridiagonal,
    Dense,
}

/// Square linear operator on grid functions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOp {
    kind: LinOpKind,
    entries: Matrix,
    symmetric: bool,
}

impl LinOp {
    pub fn new(kind: LinOpKind, entries: Matrix, symmetric: bool) -> Self {
        assert!(entries.is_square(), "linear operator must be square");
        if kind == LinOpKind::Tridiagonal {
            let n = entries.rows();
            for i in 0..n {
                for j in 0..n {
                    debug_assert!(i.abs_diff(j) <= 1 || entries[(i, j)] == 0.0);
                }
            }
        }
        LinOp {
            kind,
            entries,
            symmetric,
        }
    }

    pub fn kind(&self) -> LinOpKind {
        self.kind
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            LinOpKind::Dense => self.entries.matvec(x),
            LinOpKind::Tridiagonal => {
                let n = self.dim();
                assert_eq!(x.len(), n, "operator dimension mismatch");
                (0..n)
                    .map(|i| {
                        let mut s = self.entries[(i, i)] * x[i];
                        if i > 0 {
                            s += self.entries[(i, i - 1)] * x[i - 1];
                        }
                        if i + 1 < n {
                            s += self.entries[(i, i + 1)] * x[i + 1];
                        }
                        s
                    })
                    .collect()
            }
        }
    }

    pub fn apply(&self, u: &Field) -> Field {
        Field::from_raw(*u.grid(), self.apply_slice(u.values()))
    }
}

/// Second-order centered discretization of `-d²/dx²` with homogeneous Dirichlet values.
pub fn neg_laplacian(grid: &Grid1D) -> LinOp {
    let d = grid.d();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let m = Matrix::from_fn(d, d, |i, j| {
        if i == j {
            2.0 * inv_h2
        } else if i.abs_diff(j) == 1 {
            -inv_h2
        } else {
            0.0
        }
    });
    LinOp::new(LinOpKind::Tridiagonal, m, true)
}

/// Tridiagonal coefficients of `I + tau * (-Δh)`.
pub(crate) fn shifted_laplacian_bands(grid: &Grid1D, tau: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = grid.d();
    let s = tau / (grid.h() * grid.h());
    let sub = vec![-s; d];
    let diag = vec![1.0 + 2.0 * s; d];
    let sup = vec![-s; d];
    (sub, diag, sup)
}

/// Solve `(I + tau * (-Δh)) x = rhs` without forming the inverse.
pub(crate) fn solve_shifted(grid: &Grid1D, tau: f64, rhs: &[f64]) -> Vec<f64> {
    let (sub, diag, sup) = shifted_laplacian_bands(grid, tau);
    solve_tridiagonal(&sub, &diag, &sup, rhs)
}

/// Dense inverse of `I + tau * (-Δh)`, the discrete `[1 - tau Δ]^{-1}`.
///
/// The shifted operator is a symmetric M-matrix, so the inverse is entrywise
/// nonnegative with row sums at most one: it is non-expansive in the sup norm.
pub fn resolvent(grid: &Grid1D, tau: f64) -> LinOp {
    assert!(tau >= 0.0 && tau.is_finite(), "resolvent needs tau >= 0");
    let d = grid.d();
    if tau == 0.0 {
        return LinOp::new(LinOpKind::Dense, Matrix::identity(d), true);
    }
    let (sub, diag, sup) = shifted_laplacian_bands(grid, tau);
    let mut inv = Matrix::zeros(d, d);
    let mut e = vec![0.0; d];
    for j in 0..d {
        e[j] = 1.0;
        let col = solve_tridiagonal(&sub, &diag, &sup, &e);
        e[j] = 0.0;
        for (i, v) in col.into_iter().enumerate() {
            inv[(i, j)] = v;
        }
    }
    // Symmetrize to remove rounding asymmetry of the column solves.
    let sym = Matrix::from_fn(d, d, |i, j| 0.5 * (inv[(i, j)] + inv[(j, i)]));
    LinOp::new(LinOpKind::Dense, sym, true)
}

/// Centered first derivative with zero Dirichlet ghost values: `(u[i+1] - u[i-1]) / 2h`.
pub fn derivative_op(grid: &Grid1D) -> LinOp {
    let d = grid.d();
    let c = 1.0 / (2.0 * grid.h());
    let m = Matrix::from_fn(d, d, |i, j| {
        if j == i + 1 {
            c
        } else if i == j + 1 {
            -c
        } else {
            0.0
        }
    });
    LinOp::new(LinOpKind::Tridiagonal, m, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::make_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laplacian_stencil_values() {
        let g = make_grid(0.0, 1.0, 3).unwrap();
        let a = neg_laplacian(&g);
        let m = a.entries();
        for i in 0..3 {
            assert_eq!(m[(i, i)], 32.0);
        }
        assert_eq!(m[(0, 1)], -16.0);
        assert_eq!(m[(1, 0)], -16.0);
        assert_eq!(m[(0, 2)], 0.0);
        assert!(a.is_symmetric());
        assert_eq!(*m, m.transpose());
    }

    #[test]
    fn laplacian_sine_eigenvector() {
        let g = make_grid(0.0, 1.0, 10).unwrap();
        let a = neg_laplacian(&g);
        let h = g.h();
        for k in 1..=10 {
            let kf = k as f64;
            let v: Vec<f64> = g
                .nodes()
                .iter()
                .map(|x| (kf * std::f64::consts::PI * x).sin())
                .collect();
            let lam = 2.0 / (h * h) * (1.0 - (kf * std::f64::consts::PI * h).cos());
            let av = a.apply_slice(&v);
            for (x, y) in av.iter().zip(&v) {
                assert!((x - lam * y).abs() < 1e-9 * lam.max(1.0));
            }
        }
    }

    #[test]
    fn resolvent_zero_tau_is_identity() {
        let g = make_grid(0.0, 1.0, 6).unwrap();
        assert_eq!(*resolvent(&g, 0.0).entries(), Matrix::identity(6));
    }

    #[test]
    fn resolvent_inverts_shifted_operator() {
        let g = make_grid(0.0, 2.0, 9).unwrap();
        let tau = 0.03;
        let r = resolvent(&g, tau);
        let a = neg_laplacian(&g);
        let shifted = Matrix::from_fn(9, 9, |i, j| {
            f64::from(u8::from(i == j)) + tau * a.entries()[(i, j)]
        });
        let prod = shifted.matmul(r.entries());
        assert!(prod.max_abs_diff(&Matrix::identity(9)) < 1e-12);
        assert!(r.entries().inf_norm() <= 1.0 + 1e-14);
        assert!(r.entries().as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn resolvent_sup_norm_nonexpansive() {
        let g = make_grid(0.0, 1.0, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &tau in &[0.001, 0.01, 0.1, 1.0] {
            let r = resolvent(&g, tau);
            for _ in 0..50 {
                let w: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
                let rw = r.apply_slice(&w);
                let num = rw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                let den = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                assert!(num <= den * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn derivative_of_ones_and_linear() {
        let g = make_grid(0.0, 1.0, 5).unwrap();
        let t = derivative_op(&g);
        let h = g.h();
        let ones = t.apply_slice(&[1.0; 5]);
        assert!((ones[0] - 1.0 / (2.0 * h)).abs() < 1e-12);
        assert!((ones[4] + 1.0 / (2.0 * h)).abs() < 1e-12);
        for v in &ones[1..4] {
            assert_eq!(*v, 0.0);
        }
        let lin = t.apply_slice(&g.nodes());
        for v in &lin[1..4] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(t.apply_slice(&[0.0; 5]), vec![0.0; 5]);
    }
}
