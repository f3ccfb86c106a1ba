use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::Matrix;

/// ReLU network `x -> clamp_M(W_L σ(... σ(W_1 x + β_1) ...) + β_L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    clip: f64,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnGradient {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl FnnGradient {
    fn zeros_like(model: &FnnModel) -> Self {
        FnnGradient {
            weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// All entries flattened in layer order, weights before biases per layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

/// `L` affine layers of width `p`, hidden activations ReLU, outputs clamped to `[-M, M]`.
pub fn init_fnn(d_in: usize, d_out: usize, depth: usize, width: usize, clip: f64, seed: u64) -> Result<FnnModel> {
    if depth < 2 {
        return Err(Error::InvalidArchitecture(format!("depth must be >= 2, got {depth}")));
    }
    if width == 0 || d_in == 0 || d_out == 0 {
        return Err(Error::InvalidArchitecture("widths must be >= 1".into()));
    }
    if !(clip > 0.0) {
        return Err(Error::InvalidArchitecture(format!("clip bound must be positive, got {clip}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(depth);
    let mut biases = Vec::with_capacity(depth);
    for l in 0..depth {
        let fan_in = if l == 0 { d_in } else { width };
        let fan_out = if l + 1 == depth { d_out } else { width };
        // He scaling ahead of ReLUs; unit-variance-preserving scaling for the affine output.
        let gain = if l + 1 == depth { 1.0 } else { 2.0 };
        let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("finite std");
        let data = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
        weights.push(Matrix::from_row_major(fan_out, fan_in, data)?);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(FnnModel {
        weights,
        biases,
        clip,
    })
}

impl FnnModel {
    pub fn from_parts(weights: Vec<Matrix>, biases: Vec<Vec<f64>>, clip: f64) -> Result<Self> {
        if weights.len() < 2 || weights.len() != biases.len() {
            return Err(Error::InvalidArchitecture(
                "need at least two layers with one bias vector each".into(),
            ));
        }
        for l in 0..weights.len() {
            if biases[l].len() != weights[l].rows() {
                return Err(Error::InvalidArchitecture(format!("bias {l} has wrong length")));
            }
            if l > 0 && weights[l].cols() != weights[l - 1].rows() {
                return Err(Error::InvalidArchitecture(format!("layer {l} does not chain")));
            }
            let finite = weights[l].as_slice().iter().chain(&biases[l]).all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidArchitecture(format!("layer {l} has non-finite parameters")));
            }
        }
        if !(clip > 0.0) {
            return Err(Error::InvalidArchitecture("clip bound must be positive".into()));
        }
        Ok(FnnModel {
            weights,
            biases,
            clip,
        })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// Hidden width `p` (the widest hidden layer).
    pub fn width(&self) -> usize {
        self.weights[..self.depth() - 1]
            .iter()
            .map(Matrix::rows)
            .max()
            .unwrap_or(0)
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights[self.depth() - 1].rows()
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.as_slice().len() + b.len())
            .sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        let mut a = x.to_vec();
        let last = self.depth() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.matvec(&a);
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
                *zi = if l == last {
                    zi.clamp(-self.clip, self.clip)
                } else {
                    zi.max(0.0)
                };
            }
            a = z;
        }
        Ok(a)
    }

    /// Mean over samples of `‖f(x) - y‖²` together with its gradient.
    pub fn loss_and_gradient(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<(f64, FnnGradient)> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::InvalidArgument("gradient batch must be nonempty with matching targets".into()));
        }
        let depth = self.depth();
        let mut grad = FnnGradient::zeros_like(self);
        let mut loss = 0.0;
        let mut pre: Vec<Vec<f64>> = vec![Vec::new(); depth];
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); depth];
        for (x, y) in inputs.iter().zip(targets) {
            if x.len() != self.in_dim() || y.len() != self.out_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.in_dim(),
                    got: x.len(),
                });
            }
            acts[0] = x.to_vec();
            for l in 0..depth {
                let mut z = self.weights[l].matvec(&acts[l]);
                for (zi, bi) in z.iter_mut().zip(&self.biases[l]) {
                    *zi += bi;
                }
                if l + 1 < depth {
                    acts[l + 1] = z.iter().map(|v| v.max(0.0)).collect();
                }
                pre[l] = z;
            }
            let z = &pre[depth - 1];
            let mut delta: Vec<f64> = Vec::with_capacity(z.len());
            for (zi, yi) in z.iter().zip(y.iter()) {
                let out = zi.clamp(-self.clip, self.clip);
                let r = out - yi;
                loss += r * r;
                let inside = zi.abs() < self.clip;
                delta.push(if inside { 2.0 * r } else { 0.0 });
            }
            for l in (0..depth).rev() {
                let a = &acts[l];
                let gw = &mut grad.weights[l];
                for (i, di) in delta.iter().enumerate() {
                    if *di == 0.0 {
                        continue;
                    }
                    grad.biases[l][i] += di;
                    for (j, aj) in a.iter().enumerate() {
                        gw[(i, j)] += di * aj;
                    }
                }
                if l == 0 {
                    break;
                }
                let w = &self.weights[l];
                let mut back = vec![0.0; w.cols()];
                for (i, di) in delta.iter().enumerate() {
                    if *di == 0.0 {
                        continue;
                    }
                    for (j, bj) in w.row(i).iter().zip(back.iter_mut()) {
                        *bj += di * j;
                    }
                }
                for (bj, zj) in back.iter_mut().zip(&pre[l - 1]) {
                    if *zj <= 0.0 {
                        *bj = 0.0;
                    }
                }
                delta = back;
            }
        }
        let scale = 1.0 / inputs.len() as f64;
        for (w, b) in grad.weights.iter_mut().zip(grad.biases.iter_mut()) {
            *w = Matrix::from_fn(w.rows(), w.cols(), |i, j| w[(i, j)] * scale);
            b.iter_mut().for_each(|v| *v *= scale);
        }
        Ok((loss * scale, grad))
    }

    /// Mean squared error without the gradient.
    pub fn loss(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            let out = self.forward(x)?;
            total += out.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / inputs.len().max(1) as f64)
    }

    /// Flat parameter vector in the order of [`FnnGradient::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    /// Inverse of [`FnnModel::flatten`] for a model of the same shape.
    pub fn with_parameters(&self, params: &[f64]) -> Result<FnnModel> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        let mut weights = Vec::with_capacity(self.depth());
        let mut biases = Vec::with_capacity(self.depth());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let n = w.as_slice().len();
            weights.push(Matrix::from_row_major(w.rows(), w.cols(), params[offset..offset + n].to_vec())?);
            offset += n;
            biases.push(params[offset..offset + b.len()].to_vec());
            offset += b.len();
        }
        FnnModel::from_parts(weights, biases, self.clip)
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Matrix], &mut [Vec<f64>]) {
        (&mut self.weights, &mut self.biases)
    }
}

pub fn fnn_forward(model: &FnnModel, x: &[f64]) -> Result<Vec<f64>> {
    model.forward(x)
}

pub fn fnn_gradient(model: &FnnModel, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<FnnGradient> {
    Ok(model.loss_and_gradient(inputs, targets)?.1)
}

const MODEL_FORMAT: &str = "opstep-fnn";

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    in_dim: usize,
    out_dim: usize,
    depth: usize,
    width: usize,
    clip: f64,
    layer_shapes: Vec<(usize, usize)>,
    seed: Option<u64>,
    task: Option<String>,
}

/// Provenance recorded in model files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelMeta {
    pub seed: Option<u64>,
    pub task: Option<String>,
}

/// Writes a JSON header line followed by little-endian weights and biases in layer order.
pub fn write_model<W: Write>(model: &FnnModel, meta: &ModelMeta, mut w: W) -> Result<()> {
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        version: 1,
        in_dim: model.in_dim(),
        out_dim: model.out_dim(),
        depth: model.depth(),
        width: model.width(),
        clip: model.clip,
        layer_shapes: model.weights.iter().map(|m| (m.rows(), m.cols())).collect(),
        seed: meta.seed,
        task: meta.task.clone(),
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(model.parameter_count() * 8);
    for v in model.flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_model<R: BufRead>(mut r: R) -> Result<(FnnModel, ModelMeta)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h: ModelHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("model header: {e}")))?;
    if h.format != MODEL_FORMAT || h.version != 1 {
        return Err(Error::Format(format!("unsupported model format {} v{}", h.format, h.version)));
    }
    let mut weights = Vec::with_capacity(h.depth);
    let mut biases = Vec::with_capacity(h.depth);
    let mut read = |n: usize| -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format("model blob truncated".into()))?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    };
    for &(rows, cols) in &h.layer_shapes {
        weights.push(Matrix::from_row_major(rows, cols, read(rows * cols)?)?);
        biases.push(read(rows)?);
    }
    let model = FnnModel::from_parts(weights, biases, h.clip)?;
    if model.in_dim() != h.in_dim || model.out_dim() != h.out_dim || model.depth() != h.depth {
        return Err(Error::Format("model header disagrees with layer shapes".into()));
    }
    Ok((
        model,
        ModelMeta {
            seed: h.seed,
            task: h.task,
        },
    ))
}
