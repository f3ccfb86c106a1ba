use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fnn::{init_fnn, FnnGradient, FnnModel};
use crate::error::{Error, Result};
use crate::pde::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    /// Plain gradient descent on the whole training set each epoch.
    FullBatchGd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Ignored by full-batch descent.
    pub batch_size: usize,
    pub seed: u64,
    pub clip: f64,
    pub depth: usize,
    pub width: usize,
    pub optimizer: Optimizer,
    /// Cosine decay of the step size down to `learning_rate * lr_floor` by the final epoch.
    #[serde(default)]
    pub lr_floor: Option<f64>,
}

impl TrainConfig {
    pub fn new(depth: usize, width: usize, clip: f64) -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            clip,
            depth,
            width,
            optimizer: Optimizer::adam(),
            lr_floor: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{what} must be positive")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate");
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if !(self.clip > 0.0) {
            return bad("clip");
        }
        if let Some(f) = self.lr_floor {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig("lr_floor must lie in (0, 1]".into()));
            }
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::InvalidConfig("Adam moments must lie in [0, 1) with eps > 0".into()));
            }
        }
        Ok(())
    }

    fn rate_at(&self, epoch: usize) -> f64 {
        match self.lr_floor {
            None => self.learning_rate,
            Some(floor) => {
                let t = epoch as f64 / (self.epochs.max(2) - 1) as f64;
                let c = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
                self.learning_rate * (floor + (1.0 - floor) * c)
            }
        }
    }
}

/// Training pairs stored row-major, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub outputs: Matrix,
    pub manifest: Option<crate::harness::Manifest>,
}

impl Dataset {
    pub fn new(inputs: Matrix, outputs: Matrix) -> Result<Self> {
        if inputs.rows() != outputs.rows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                got: outputs.rows(),
            });
        }
        if !inputs.as_slice().iter().chain(outputs.as_slice()).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("dataset entries must be finite".into()));
        }
        Ok(Dataset {
            inputs,
            outputs,
            manifest: None,
        })
    }

    pub fn from_pairs(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::InvalidArgument("from_pairs needs at least one pair".into()))?;
        let (dx, dy) = (first.0.len(), first.1.len());
        let mut x = Vec::with_capacity(pairs.len() * dx);
        let mut y = Vec::with_capacity(pairs.len() * dy);
        for (a, b) in pairs {
            if a.len() != dx || b.len() != dy {
                return Err(Error::DimensionMismatch {
                    expected: dx,
                    got: a.len(),
                });
            }
            x.extend_from_slice(a);
            y.extend_from_slice(b);
        }
        Dataset::new(
            Matrix::from_row_major(pairs.len(), dx, x)?,
            Matrix::from_row_major(pairs.len(), dy, y)?,
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn in_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.outputs.cols()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    pub fn output(&self, i: usize) -> &[f64] {
        self.outputs.row(i)
    }
}

/// Per-epoch training losses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossHistory {
    pub epoch_loss: Vec<f64>,
}

impl LossHistory {
    /// Running minimum of the epoch losses.
    pub fn smoothed(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.epoch_loss
            .iter()
            .map(|&l| {
                best = best.min(l);
                best
            })
            .collect()
    }

    pub fn last(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Empirical risk minimisation of the mean squared loss.
///
/// Minibatches come from a seeded shuffle, and gradients are reduced in sample
/// order, so a run is bitwise reproducible from `config.seed`.
pub fn train_erm(data: &Dataset, config: &TrainConfig) -> Result<(FnnModel, LossHistory)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let model = init_fnn(
        data.in_dim(),
        data.out_dim(),
        config.depth,
        config.width,
        config.clip,
        config.seed,
    )?;
    train_from(model, data, config)
}

/// Continues training an existing model.
pub fn train_from(mut model: FnnModel, data: &Dataset, config: &TrainConfig) -> Result<(FnnModel, LossHistory)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let n = data.len();
    let inputs: Vec<&[f64]> = (0..n).map(|i| data.input(i)).collect();
    let targets: Vec<&[f64]> = (0..n).map(|i| data.output(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = AdamState {
        m: vec![0.0; model.parameter_count()],
        v: vec![0.0; model.parameter_count()],
        t: 0,
    };
    let mut history = LossHistory::default();
    let mut bx: Vec<&[f64]> = Vec::with_capacity(config.batch_size);
    let mut by: Vec<&[f64]> = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        let lr = config.rate_at(epoch);
        let loss = match config.optimizer {
            Optimizer::FullBatchGd => {
                let (loss, grad) = model.loss_and_gradient(&inputs, &targets)?;
                check_loss(loss, epoch, &grad)?;
                descend(&mut model, &grad, lr);
                loss
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                order.shuffle(&mut rng);
                let mut total = 0.0;
                for chunk in order.chunks(config.batch_size) {
                    bx.clear();
                    by.clear();
                    bx.extend(chunk.iter().map(|&i| inputs[i]));
                    by.extend(chunk.iter().map(|&i| targets[i]));
                    let (loss, grad) = model.loss_and_gradient(&bx, &by)?;
                    check_loss(loss, epoch, &grad)?;
                    total += loss * chunk.len() as f64;
                    adam_step(&mut model, &grad, &mut adam, lr, beta1, beta2, eps);
                }
                total / n as f64
            }
        };
        history.epoch_loss.push(loss);
    }
    Ok((model, history))
}

fn check_loss(loss: f64, epoch: usize, grad: &FnnGradient) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::NanLoss {
            epoch,
            diagnostic: format!("minibatch loss is {loss}"),
        });
    }
    let gmax = grad.flatten().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !gmax.is_finite() {
        return Err(Error::NanLoss {
            epoch,
            diagnostic: "non-finite gradient entry".into(),
        });
    }
    Ok(())
}

fn descend(model: &mut FnnModel, grad: &FnnGradient, lr: f64) {
    let (ws, bs) = model.params_mut();
    for (l, (w, b)) in ws.iter_mut().zip(bs.iter_mut()).enumerate() {
        let gw = &grad.weights[l];
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                w[(i, j)] -= lr * gw[(i, j)];
            }
        }
        for (bi, gi) in b.iter_mut().zip(&grad.biases[l]) {
            *bi -= lr * gi;
        }
    }
}

fn adam_step(
    model: &mut FnnModel,
    grad: &FnnGradient,
    st: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    st.t += 1;
    let c1 = 1.0 - beta1.powi(st.t);
    let c2 = 1.0 - beta2.powi(st.t);
    let mut k = 0;
    let mut update = |p: &mut f64, g: f64| {
        st.m[k] = beta1 * st.m[k] + (1.0 - beta1) * g;
        st.v[k] = beta2 * st.v[k] + (1.0 - beta2) * g * g;
        let mh = st.m[k] / c1;
        let vh = st.v[k] / c2;
        *p -= lr * mh / (vh.sqrt() + eps);
        k += 1;
    };
    let (ws, bs) = model.params_mut();
    for (l, (w, b)) in ws.iter_mut().zip(bs.iter_mut()).enumerate() {
        let gw = &grad.weights[l];
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                update(&mut w[(i, j)], gw[(i, j)]);
            }
        }
        for (bi, gi) in b.iter_mut().zip(&grad.biases[l]) {
            update(bi, *gi);
        }
    }
}
