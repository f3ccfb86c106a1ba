//! ReLU networks, empirical risk minimisation and error estimates.

mod arch;
mod eval;
mod fnn;
mod train;

pub use arch::{
    architecture_from_theorem, depth_multiplier, rate_exponents, task_l_max, ArchOptions, Architecture, TaskDims,
};
pub use eval::{estimate_generalization_error, squared_errors, Surrogate, TestPair};
pub use fnn::{fnn_forward, fnn_gradient, init_fnn, read_model, write_model, FnnGradient, FnnModel, ModelMeta};
pub use train::{train_erm, train_from, Dataset, LossHistory, Optimizer, TrainConfig};
