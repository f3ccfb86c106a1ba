use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::encoding::BasisKind;
use crate::error::{Error, Result};
use crate::pde::Matrix;
use crate::schemes::{FluxSpec, ReactionSpec};

/// Denominators below this magnitude make a ratio unit fail.
pub const RATIO_SINGULAR_THRESHOLD: f64 = 1e-14;

/// Scalar nonlinearity `g` of a unit, applied to its projected arguments `(x[, y])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// `x`
    Identity,
    /// `δ - x`
    AffineFlip { delta: f64 },
    /// `x + offset`
    Shift { offset: f64 },
    /// `x y`
    Product,
    /// `x / y`
    Ratio,
    /// `y T_k(x)`
    BasisTerm { basis: BasisKind, k: usize },
    /// `scale f(x)`
    Reaction { spec: Arc<ReactionSpec>, scale: f64 },
    /// `scale f'(x)`
    ReactionDeriv { spec: Arc<ReactionSpec>, scale: f64 },
    /// `f'(x) y`
    FluxDerivProduct { flux: Arc<FluxSpec> },
}

impl Nonlinearity {
    pub fn arity(&self) -> usize {
        match self {
            Nonlinearity::Identity
            | Nonlinearity::AffineFlip { .. }
            | Nonlinearity::Shift { .. }
            | Nonlinearity::Reaction { .. }
            | Nonlinearity::ReactionDeriv { .. } => 1,
            Nonlinearity::Product
            | Nonlinearity::Ratio
            | Nonlinearity::BasisTerm { .. }
            | Nonlinearity::FluxDerivProduct { .. } => 2,
        }
    }

    /// `None` signals a singular ratio.
    pub fn apply(&self, args: &[f64]) -> Option<f64> {
        let x = args[0];
        Some(match self {
            Nonlinearity::Identity => x,
            Nonlinearity::AffineFlip { delta } => delta - x,
            Nonlinearity::Shift { offset } => x + offset,
            Nonlinearity::Product => x * args[1],
            Nonlinearity::Ratio => {
                if !(args[1].abs() >= RATIO_SINGULAR_THRESHOLD) {
                    return None;
                }
                x / args[1]
            }
            Nonlinearity::BasisTerm { basis, k } => args[1] * basis.term(*k, x),
            Nonlinearity::Reaction { spec, scale } => scale * spec.eval(x),
            Nonlinearity::ReactionDeriv { spec, scale } => scale * spec.deriv(x),
            Nonlinearity::FluxDerivProduct { flux } => flux.deriv(x) * args[1],
        })
    }
}

/// One layer `G^i`, stored with sparse projection rows.
///
/// Unit `j` owns rows `first_row[j] .. first_row[j] + arity`, and row `r` owns
/// the terms `terms[row_start[r] .. row_start[r + 1]]` as `(column, weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitLayer {
    in_width: usize,
    nonlinearities: Vec<Nonlinearity>,
    first_row: Vec<u32>,
    row_start: Vec<u32>,
    terms: Vec<(u32, f64)>,
}

/// Borrowed view of a single unit: its projection rows and nonlinearity.
#[derive(Debug, Clone, Copy)]
pub struct UnitView<'a> {
    layer: &'a CircuitLayer,
    index: usize,
}

impl<'a> UnitView<'a> {
    pub fn nonlinearity(&self) -> &'a Nonlinearity {
        &self.layer.nonlinearities[self.index]
    }

    pub fn arity(&self) -> usize {
        self.nonlinearity().arity()
    }

    /// Sparse row `r` of the projection `V`.
    pub fn row(&self, r: usize) -> &'a [(u32, f64)] {
        let row = self.layer.first_row[self.index] as usize + r;
        let lo = self.layer.row_start[row] as usize;
        let hi = self.layer.row_start[row + 1] as usize;
        &self.layer.terms[lo..hi]
    }

    /// The projection as a dense `arity × in_width` matrix.
    pub fn projection(&self) -> Matrix {
        let mut m = Matrix::zeros(self.arity(), self.layer.in_width);
        for r in 0..self.arity() {
            for &(c, w) in self.row(r) {
                m[(r, c as usize)] += w;
            }
        }
        m
    }
}

/// Accumulates units into a [`CircuitLayer`].
#[derive(Debug, Clone)]
pub struct LayerBuilder {
    layer: CircuitLayer,
}

impl LayerBuilder {
    pub fn new(in_width: usize) -> Self {
        LayerBuilder {
            layer: CircuitLayer {
                in_width,
                nonlinearities: Vec::new(),
                first_row: Vec::new(),
                row_start: vec![0],
                terms: Vec::new(),
            },
        }
    }

    /// Adds a unit; exact-zero weights are dropped.
    pub fn unit<R>(&mut self, nonlinearity: Nonlinearity, rows: R) -> Result<&mut Self>
    where
        R: IntoIterator,
        R::Item: IntoIterator<Item = (usize, f64)>,
    {
        let l = &mut self.layer;
        let first = (l.row_start.len() - 1) as u32;
        let mut count = 0;
        for row in rows {
            for (c, w) in row {
                if c >= l.in_width {
                    return Err(Error::InvalidCircuit(format!(
                        "projection column {c} outside incoming width {}",
                        l.in_width
                    )));
                }
                if w != 0.0 {
                    l.terms.push((c as u32, w));
                }
            }
            l.row_start.push(l.terms.len() as u32);
            count += 1;
        }
        if count != nonlinearity.arity() {
            return Err(Error::InvalidCircuit(format!(
                "unit with {count} projection rows for a nonlinearity of arity {}",
                nonlinearity.arity()
            )));
        }
        l.first_row.push(first);
        l.nonlinearities.push(nonlinearity);
        Ok(self)
    }

    pub fn finish(self) -> Result<CircuitLayer> {
        if self.layer.nonlinearities.is_empty() {
            return Err(Error::InvalidCircuit("layer without units".into()));
        }
        Ok(self.layer)
    }
}

impl CircuitLayer {
    pub fn in_width(&self) -> usize {
        self.in_width
    }

    /// `ℓ_i`
    pub fn width(&self) -> usize {
        self.nonlinearities.len()
    }

    pub fn unit(&self, j: usize) -> UnitView<'_> {
        assert!(j < self.width(), "unit index out of range");
        UnitView {
            layer: self,
            index: j,
        }
    }

    pub fn units(&self) -> impl Iterator<Item = UnitView<'_>> {
        (0..self.width()).map(move |j| self.unit(j))
    }

    pub fn max_arity(&self) -> usize {
        self.nonlinearities
            .iter()
            .map(Nonlinearity::arity)
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn nonzeros(&self) -> usize {
        self.terms.len()
    }

    pub(crate) fn eval(&self, x: &[f64], layer_index: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.width());
        let mut args = [0.0; 2];
        for (j, g) in self.nonlinearities.iter().enumerate() {
            let first = self.first_row[j] as usize;
            for (r, arg) in args.iter_mut().enumerate().take(g.arity()) {
                let lo = self.row_start[first + r] as usize;
                let hi = self.row_start[first + r + 1] as usize;
                *arg = self.terms[lo..hi]
                    .iter()
                    .fold(0.0, |acc, &(c, w)| acc + w * x[c as usize]);
            }
            match g.apply(&args[..g.arity()]) {
                Some(v) => out.push(v),
                None => {
                    return Err(Error::SingularUnit {
                        layer: layer_index,
                        unit: j,
                        denominator: args[1],
                    })
                }
            }
        }
        Ok(out)
    }
}

/// `(k, d_max, ℓ_max)` of a layered circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub depth_k: usize,
    pub d_max: usize,
    pub l_max: usize,
}

/// `G^k ∘ ... ∘ G^1` acting on encoded vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    input_dim: usize,
    layers: Vec<CircuitLayer>,
    stats: CircuitStats,
}

impl Circuit {
    pub fn new(input_dim: usize, layers: Vec<CircuitLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidCircuit("circuit without layers".into()));
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_width != width {
                return Err(Error::InvalidCircuit(format!(
                    "layer {i} expects width {} but receives {width}",
                    layer.in_width
                )));
            }
            if layer.width() == 0 {
                return Err(Error::InvalidCircuit(format!("layer {i} has no units")));
            }
            width = layer.width();
        }
        let stats = compute_stats(&layers);
        Ok(Circuit {
            input_dim,
            layers,
            stats,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, CircuitLayer::width)
    }

    pub fn layers(&self) -> &[CircuitLayer] {
        &self.layers
    }

    pub fn stats(&self) -> CircuitStats {
        self.stats
    }

    /// Widths `ℓ_0, ℓ_1, ..., ℓ_k`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(CircuitLayer::width))
            .collect()
    }

    pub fn nonzeros(&self) -> usize {
        self.layers.iter().map(CircuitLayer::nonzeros).sum()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval_layers(x, 0, self.layers.len())
    }

    /// Applies layers `start..end` to `x`, which must have width `ℓ_start`.
    pub fn eval_layers(&self, x: &[f64], start: usize, end: usize) -> Result<Vec<f64>> {
        if start > end || end > self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "layer range {start}..{end} outside 0..{}",
                self.layers.len()
            )));
        }
        let expected = if start == 0 {
            self.input_dim
        } else {
            self.layers[start - 1].width()
        };
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        let mut v = x.to_vec();
        for i in start..end {
            v = self.layers[i].eval(&v, i)?;
        }
        Ok(v)
    }

    /// Splits into the first `j` layers and the remaining ones.
    pub fn split_at(&self, j: usize) -> Result<(Circuit, Circuit)> {
        if j == 0 || j >= self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "split point {j} must lie in 1..{}",
                self.layers.len()
            )));
        }
        let head = Circuit::new(self.input_dim, self.layers[..j].to_vec())?;
        let tail = Circuit::new(self.layers[j - 1].width(), self.layers[j..].to_vec())?;
        Ok((head, tail))
    }
}

fn compute_stats(layers: &[CircuitLayer]) -> CircuitStats {
    CircuitStats {
        depth_k: layers.len(),
        d_max: layers.iter().map(CircuitLayer::max_arity).max().unwrap_or(0),
        l_max: layers.iter().map(CircuitLayer::width).max().unwrap_or(0),
    }
}

/// Recomputes the structural parameters from the layers.
pub fn circuit_stats(c: &Circuit) -> CircuitStats {
    compute_stats(&c.layers)
}

pub fn eval_circuit(c: &Circuit, x: &[f64]) -> Result<Vec<f64>> {
    c.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn selector(cols: &[usize]) -> Vec<Vec<(usize, f64)>> {
        cols.iter().map(|&c| vec![(c, 1.0)]).collect()
    }

    #[test]
    fn identity_layer() {
        let mut b = LayerBuilder::new(3);
        for j in 0..3 {
            b.unit(Nonlinearity::Identity, selector(&[j])).unwrap();
        }
        let c = Circuit::new(3, vec![b.finish().unwrap()]).unwrap();
        assert_eq!(c.eval(&[1.0, -2.0, 5.0]).unwrap(), vec![1.0, -2.0, 5.0]);
        assert_eq!(
            c.stats(),
            CircuitStats {
                depth_k: 1,
                d_max: 1,
                l_max: 3
            }
        );
    }

    #[test]
    fn product_and_ratio() {
        let mut b = LayerBuilder::new(2);
        b.unit(Nonlinearity::Product, selector(&[0, 1])).unwrap();
        b.unit(Nonlinearity::Ratio, selector(&[0, 1])).unwrap();
        let c = Circuit::new(2, vec![b.finish().unwrap()]).unwrap();
        assert_eq!(c.eval(&[3.0, 4.0]).unwrap(), vec![12.0, 0.75]);
        assert!(matches!(
            c.eval(&[3.0, 0.0]),
            Err(Error::SingularUnit {
                layer: 0,
                unit: 1,
                ..
            })
        ));
    }

    #[test]
    fn arity_and_width_checks() {
        let mut b = LayerBuilder::new(2);
        assert!(b.unit(Nonlinearity::Product, selector(&[0])).is_err());
        assert!(b.unit(Nonlinearity::Identity, selector(&[2])).is_err());
        assert!(LayerBuilder::new(2).finish().is_err());
        assert!(Circuit::new(2, Vec::new()).is_err());
    }

    #[test]
    fn dense_projection_view() {
        let mut b = LayerBuilder::new(3);
        b.unit(Nonlinearity::Product, vec![vec![(0, 2.0), (2, 1.0)], vec![(1, -1.0)]])
            .unwrap();
        let layer = b.finish().unwrap();
        let p = layer.unit(0).projection();
        assert_eq!(p.as_slice(), &[2.0, 0.0, 1.0, 0.0, -1.0, 0.0]);
    }
}
