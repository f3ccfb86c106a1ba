use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[a, b]` with `d` interior nodes; boundary values are implicitly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    a: f64,
    b: f64,
    d: usize,
    h: f64,
}

pub fn make_grid(a: f64, b: f64, d: usize) -> Result<Grid1D> {
    Grid1D::new(a, b, d)
}

impl Grid1D {
    pub fn new(a: f64, b: f64, d: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a || d < 2 {
            return Err(Error::InvalidBounds { a, b, d });
        }
        let h = (b - a) / (d as f64 + 1.0);
        Ok(Grid1D { a, b, d, h })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of interior nodes.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Interior node `i` for `i = 1..=d`.
    pub fn node(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.d).map(|i| self.node(i)).collect()
    }
}

/// Grid function with homogeneous Dirichlet boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.d() {
            return Err(Error::DimensionMismatch {
                expected: grid.d(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "field value {i} is not finite"
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.d()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Field {
            grid,
            values: grid.nodes().into_iter().map(f).collect(),
        }
    }

    /// Construction without the finiteness scan, for values produced by library operators.
    pub(crate) fn from_raw(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.d());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        self.zip_with(other, |x, y| x + s * y)
    }

    fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        )
    }

    /// Largest absolute pointwise difference.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_three_nodes() {
        let g = make_grid(0.0, 1.0, 3).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.nodes(), vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn symmetric_interval() {
        let g = make_grid(-1.0, 1.0, 7).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.node(1), -0.75);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(matches!(
            make_grid(0.0, 1.0, 1),
            Err(Error::InvalidBounds { .. })
        ));
        assert!(make_grid(1.0, 1.0, 4).is_err());
        assert!(make_grid(2.0, 1.0, 4).is_err());
    }

    #[test]
    fn field_rejects_wrong_length_and_nan() {
        let g = make_grid(0.0, 1.0, 3).unwrap();
        assert!(Field::new(g, vec![1.0, 2.0]).is_err());
        assert!(Field::new(g, vec![1.0, f64::NAN, 0.0]).is_err());
        assert!(Field::new(g, vec![1.0, 2.0, 3.0]).is_ok());
    }
}
