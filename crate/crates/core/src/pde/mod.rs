//! Grids, finite-difference operators, LU, spectral data and discrete norms.

mod eigen;
mod grid;
mod linop;
mod lu;
mod matrix;
mod norms;

pub use eigen::{eigensystem, EigenSystem};
pub use grid::{make_grid, Field, Grid1D};
pub use linop::{derivative_op, neg_laplacian, resolvent, LinOp, LinOpKind};
pub use lu::{lu_factor, lu_solve, solve_dense, LuFactors, PIVOT_RELATIVE_TOLERANCE};
pub use matrix::Matrix;
pub use norms::{h1_norm, l2_norm, sup_norm, NormKind};

pub(crate) use linop::solve_shifted;
pub(crate) use norms::sup_norm_slice;
