use rayon::prelude::*;

use super::fnn::FnnModel;
use crate::circuits::Circuit;
use crate::encoding::{decode_field, EncoderSpec};
use crate::error::{Error, Result};
use crate::pde::{Field, Grid1D, NormKind};

/// Anything mapping encoded inputs to encoded outputs: trained networks or exact circuits.
pub trait Surrogate: Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Surrogate for FnnModel {
    fn in_dim(&self) -> usize {
        FnnModel::in_dim(self)
    }

    fn out_dim(&self) -> usize {
        FnnModel::out_dim(self)
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x)
    }
}

impl Surrogate for Circuit {
    fn in_dim(&self) -> usize {
        self.input_dim()
    }

    fn out_dim(&self) -> usize {
        self.output_dim()
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval(x)
    }
}

/// Encoded input together with the exact stepper output on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPair {
    pub input: Vec<f64>,
    pub target: Field,
}

/// Monte-Carlo estimate of `E ‖D(model(x)) - S(u)‖²` over held-out pairs.
pub fn estimate_generalization_error(
    model: &dyn Surrogate,
    decoder: &EncoderSpec,
    grid: &Grid1D,
    test: &[TestPair],
    norm: NormKind,
) -> Result<f64> {
    if test.is_empty() {
        return Ok(0.0);
    }
    let errs = squared_errors(model, decoder, grid, test, norm)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Per-pair squared errors in the order of `test`.
pub fn squared_errors(
    model: &dyn Surrogate,
    decoder: &EncoderSpec,
    grid: &Grid1D,
    test: &[TestPair],
    norm: NormKind,
) -> Result<Vec<f64>> {
    test.par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let out = model.predict(&pair.input).map_err(|e| Error::at_sample(i, e))?;
            let u = decode_field(&out, decoder, grid).map_err(|e| Error::at_sample(i, e))?;
            let e = norm.eval(&u.sub(&pair.target));
            Ok(e * e)
        })
        .collect()
}
