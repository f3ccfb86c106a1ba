//! Encoders and decoders between grid functions, reaction functions and vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{eigensystem, Field, Grid1D, NormKind};
use crate::schemes::{ReactionSpec, ScalarFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// Grid values at `dim` evenly spaced nodes; vectors measured in the sup norm.
    PointSampling,
    /// Leading coefficients in the discrete sine eigenbasis; vectors measured in the Euclidean norm.
    SineSpectral,
    /// Basis coefficients of a scalar function.
    PolynomialBasis,
}

/// An encoder/decoder pair with its declared Lipschitz constants.
///
/// For field encoders `lip_e` and `lip_d` are measured against the sup norm on fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub dim: usize,
    pub lip_e: f64,
    pub lip_d: f64,
    pub bound_r: f64,
}

impl EncoderSpec {
    pub fn point_sampling(grid: &Grid1D, dim: usize, bound_r: f64) -> Result<Self> {
        check_dim(dim, grid.d())?;
        Ok(EncoderSpec {
            kind: EncoderKind::PointSampling,
            dim,
            lip_e: 1.0,
            lip_d: 1.0,
            bound_r,
        })
    }

    /// `‖c‖₂ ≤ ‖u‖_l2 ≤ √ℓ ‖u‖∞` and `‖Σ c_k φ_k‖∞ ≤ √(2 dim / ℓ) ‖c‖₂`.
    pub fn sine_spectral(grid: &Grid1D, dim: usize, bound_r: f64) -> Result<Self> {
        check_dim(dim, grid.d())?;
        let len = grid.length();
        Ok(EncoderSpec {
            kind: EncoderKind::SineSpectral,
            dim,
            lip_e: len.sqrt(),
            lip_d: (2.0 * dim as f64 / len).sqrt(),
            bound_r,
        })
    }

    pub fn polynomial_basis(dim: usize, bound_r: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("encoder dim must be >= 1".into()));
        }
        Ok(EncoderSpec {
            kind: EncoderKind::PolynomialBasis,
            dim,
            lip_e: 1.0,
            lip_d: 1.0,
            bound_r,
        })
    }

    /// Norm the encoded vectors are measured in.
    pub fn vector_norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            EncoderKind::PointSampling => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            EncoderKind::SineSpectral | EncoderKind::PolynomialBasis => {
                v.iter().map(|x| x * x).sum::<f64>().sqrt()
            }
        }
    }
}

fn check_dim(dim: usize, max: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("encoder dim must be >= 1".into()));
    }
    if dim > max {
        return Err(Error::DimTooLarge { dim, max });
    }
    Ok(())
}

/// Zero-based node indices used by point sampling of `dim` values out of `d`.
pub fn sample_indices(d: usize, dim: usize) -> Vec<usize> {
    let stride = (d + 1) as f64 / (dim + 1) as f64;
    (1..=dim)
        .map(|j| (j as f64 * stride).round() as usize - 1)
        .collect()
}

pub fn encode_field(u: &Field, spec: &EncoderSpec) -> Result<Vec<f64>> {
    let d = u.grid().d();
    match spec.kind {
        EncoderKind::PointSampling => {
            check_dim(spec.dim, d)?;
            if spec.dim == d {
                return Ok(u.values().to_vec());
            }
            Ok(sample_indices(d, spec.dim)
                .into_iter()
                .map(|i| u.values()[i])
                .collect())
        }
        EncoderKind::SineSpectral => {
            check_dim(spec.dim, d)?;
            Ok(eigensystem(u.grid()).coefficients(u.values(), spec.dim))
        }
        EncoderKind::PolynomialBasis => Err(Error::InvalidArgument(
            "polynomial-basis encoders act on scalar functions, not fields".into(),
        )),
    }
}

pub fn decode_field(v: &[f64], spec: &EncoderSpec, grid: &Grid1D) -> Result<Field> {
    if v.len() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            got: v.len(),
        });
    }
    let d = grid.d();
    match spec.kind {
        EncoderKind::PointSampling => {
            check_dim(spec.dim, d)?;
            if spec.dim == d {
                return Field::new(*grid, v.to_vec());
            }
            // Knots in node-index units, padded with the zero boundary values.
            let mut knots = vec![(0.0, 0.0)];
            knots.extend(
                sample_indices(d, spec.dim)
                    .into_iter()
                    .zip(v)
                    .map(|(i, y)| ((i + 1) as f64, *y)),
            );
            knots.push(((d + 1) as f64, 0.0));
            let values = (1..=d)
                .map(|i| {
                    let x = i as f64;
                    let seg = knots.windows(2).find(|w| x <= w[1].0).unwrap_or(&knots[..2]);
                    let (x0, y0) = seg[0];
                    let (x1, y1) = seg[1];
                    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                })
                .collect();
            Field::new(*grid, values)
        }
        EncoderKind::SineSpectral => {
            check_dim(spec.dim, d)?;
            Field::new(*grid, eigensystem(grid).synthesize(v))
        }
        EncoderKind::PolynomialBasis => Err(Error::InvalidArgument(
            "polynomial-basis decoders produce scalar functions, not fields".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// `T_k(x) = x^k`
    Monomial,
    /// `T_0 = 1/2`, `T_{2p-1}(x) = sin(pπx)`, `T_{2p}(x) = cos(pπx)`
    Trigonometric,
}

impl BasisKind {
    pub fn term(self, k: usize, x: f64) -> f64 {
        match self {
            BasisKind::Monomial => x.powi(k as i32),
            BasisKind::Trigonometric => {
                if k == 0 {
                    return 0.5;
                }
                let arg = std::f64::consts::PI * k.div_ceil(2) as f64 * x;
                if k % 2 == 1 {
                    arg.sin()
                } else {
                    arg.cos()
                }
            }
        }
    }
}

/// The coefficient encoding `a_0..a_{p-1}` of a reaction function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisCoeffs {
    pub coeffs: Vec<f64>,
    pub basis: BasisKind,
}

impl BasisCoeffs {
    pub fn monomial(coeffs: impl Into<Vec<f64>>) -> Self {
        BasisCoeffs {
            coeffs: coeffs.into(),
            basis: BasisKind::Monomial,
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * self.basis.term(k, x))
            .sum()
    }

    pub fn to_scalar_fn(&self) -> ScalarFn {
        match self.basis {
            BasisKind::Monomial => ScalarFn::polynomial(self.coeffs.clone()),
            BasisKind::Trigonometric => ScalarFn::Trigonometric {
                coeffs: self.coeffs.clone(),
            },
        }
    }

    /// Decodes back into a reaction with metadata over `[-range, range]`.
    pub fn to_reaction(&self, range: f64) -> Result<ReactionSpec> {
        ReactionSpec::new(self.to_scalar_fn(), range)
    }
}

/// Monomial (truncated Taylor) encoding with `p` coefficients.
pub fn encode_reaction(f: &ReactionSpec, p: usize) -> BasisCoeffs {
    BasisCoeffs::monomial(f.form().taylor(p))
}

/// Encoding in an explicit basis; the trigonometric variant projects onto `[-1, 1]`.
pub fn encode_reaction_in(f: &ReactionSpec, p: usize, basis: BasisKind) -> BasisCoeffs {
    match basis {
        BasisKind::Monomial => encode_reaction(f, p),
        BasisKind::Trigonometric => {
            if let ScalarFn::Trigonometric { coeffs } = f.form() {
                let mut c = vec![0.0; p];
                for (o, a) in c.iter_mut().zip(coeffs) {
                    *o = *a;
                }
                return BasisCoeffs {
                    coeffs: c,
                    basis,
                };
            }
            let coeffs = (0..p)
                .map(|k| {
                    let weight = if k == 0 { 2.0 } else { 1.0 };
                    simpson(|x| f.eval(x) * weight * basis.term(k, x), -1.0, 1.0, 2048)
                })
                .collect();
            BasisCoeffs { coeffs, basis }
        }
    }
}

fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = g(a) + g(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `[E_1(u0); a]` with the field block first.
pub fn concat_encode(u0: &Field, f_coeffs: &BasisCoeffs, field_spec: &EncoderSpec) -> Result<Vec<f64>> {
    let mut v = encode_field(u0, field_spec)?;
    v.extend_from_slice(&f_coeffs.coeffs);
    Ok(v)
}

/// Inverse of [`concat_encode`] at the block level.
pub fn split_concat(v: &[f64], field_dim: usize) -> Result<(&[f64], &[f64])> {
    if field_dim > v.len() {
        return Err(Error::DimensionMismatch {
            expected: field_dim,
            got: v.len(),
        });
    }
    Ok(v.split_at(field_dim))
}

/// Monte-Carlo estimate of `E ‖D(E(u)) - u‖²` over `n_mc` draws of `sampler(index)`.
pub fn projection_error_estimate(
    sampler: impl Fn(u64) -> Field,
    spec: &EncoderSpec,
    n_mc: usize,
    norm: NormKind,
) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be >= 1".into()));
    }
    let mut total = 0.0;
    for i in 0..n_mc {
        let u = sampler(i as u64);
        let back = decode_field(&encode_field(&u, spec)?, spec, u.grid())?;
        let e = norm.eval(&back.sub(&u));
        total += e * e;
    }
    Ok(total / n_mc as f64)
}
