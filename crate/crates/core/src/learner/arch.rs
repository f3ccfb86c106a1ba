use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::TaskId;

/// Encoded input sizes of a task: field dimension and, for multi-input tasks,
/// the coefficient dimension of the reaction/forcing/flux encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDims {
    pub d_x: usize,
    pub d_p: usize,
}

impl TaskDims {
    pub fn single(d_x: usize) -> Self {
        TaskDims { d_x, d_p: 0 }
    }

    pub fn multi(d_x: usize, d_p: usize) -> Self {
        TaskDims { d_x, d_p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchOptions {
    /// Constant hidden in the Ω(·) of the size prescriptions.
    pub c: f64,
    /// Depth per circuit block; `L = l_base · multiplier`.
    pub l_base: usize,
    /// Fixed-point or Newton iterations of the scheme.
    pub m: usize,
    /// Lipschitz constant of the output encoder.
    pub l_ey: f64,
    /// Bound on output norms.
    pub r_y: f64,
}

impl Default for ArchOptions {
    fn default() -> Self {
        ArchOptions {
            c: 4.0,
            l_base: 2,
            m: 1,
            l_ey: 1.0,
            r_y: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub depth: usize,
    pub width: usize,
    pub clip: f64,
    /// `ceil(C · rate)`; `depth · width` is the smallest multiple of `depth` at or above it.
    pub lp_target: usize,
    pub l_max: usize,
}

/// Size exponents `(a, b)` of the prescription `Lp = Ω(d^a n^b)` per task.
pub fn rate_exponents(task: TaskId) -> (f64, f64) {
    match task {
        TaskId::RdPicardMi | TaskId::RdNewton | TaskId::ClawPicard | TaskId::ClawPicardMi => (0.25, 0.25),
        TaskId::RdPicard | TaskId::BeParabolic | TaskId::BeParabolicMi | TaskId::CnParabolic | TaskId::Heat => {
            (0.5, 1.0 / 6.0)
        }
    }
}

/// Widest layer of the explicit circuit realising the task's stepper.
pub fn task_l_max(task: TaskId, dims: TaskDims) -> usize {
    let d = dims.d_x;
    match task {
        TaskId::RdPicardMi => (dims.d_p + 1) * d + dims.d_p,
        TaskId::RdPicard => 2 * d,
        TaskId::RdNewton => 3 * d * (d + 1) / 2,
        TaskId::BeParabolic | TaskId::BeParabolicMi | TaskId::CnParabolic | TaskId::Heat => d,
        TaskId::ClawPicard | TaskId::ClawPicardMi => 3 * d,
    }
}

/// Circuit depth of the task in blocks.
pub fn depth_multiplier(task: TaskId, dims: TaskDims, m: usize) -> usize {
    match task {
        TaskId::RdPicard | TaskId::RdPicardMi | TaskId::ClawPicard | TaskId::ClawPicardMi => 2 * m,
        TaskId::RdNewton => m * (6 * dims.d_x + 3),
        TaskId::BeParabolic | TaskId::BeParabolicMi | TaskId::CnParabolic | TaskId::Heat => 1,
    }
}

/// Network size prescribed for `n` training samples.
///
/// The dimension in the rate is `d_x + d_p` for multi-input tasks.
pub fn architecture_from_theorem(task: TaskId, n: usize, dims: TaskDims, opts: &ArchOptions) -> Result<Architecture> {
    if n == 0 {
        return Err(Error::InvalidArgument("architecture needs n >= 1".into()));
    }
    if dims.d_x == 0 || opts.l_base == 0 || opts.m == 0 {
        return Err(Error::InvalidArgument("dimensions and multipliers must be >= 1".into()));
    }
    if !(opts.c > 0.0 && opts.l_ey > 0.0 && opts.r_y > 0.0) {
        return Err(Error::InvalidArgument("C, L_EY and R_Y must be positive".into()));
    }
    let (a, b) = rate_exponents(task);
    let d = (dims.d_x + dims.d_p) as f64;
    let rate = opts.c * d.powf(a) * (n as f64).powf(b);
    // Guard against 63.99999 style rounding of exact powers.
    let lp_target = ((rate - 1e-9 * rate).ceil() as usize).max(1);
    let depth = (opts.l_base * depth_multiplier(task, dims, opts.m)).max(2);
    let width = lp_target.div_ceil(depth).max(1);
    let l_max = task_l_max(task, dims);
    let clip = (l_max as f64).sqrt() * opts.l_ey * opts.r_y;
    Ok(Architecture {
        depth,
        width,
        clip,
        lp_target,
        l_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn be_target() {
        let a = architecture_from_theorem(TaskId::BeParabolic, 4096, TaskDims::single(16), &ArchOptions::default())
            .unwrap();
        assert_eq!(a.lp_target, 64);
        assert_eq!((a.depth, a.width), (2, 32));
        assert_eq!(a.clip, 4.0);
    }

    #[test]
    fn picard_mi_target() {
        let a = architecture_from_theorem(TaskId::RdPicardMi, 256, TaskDims::multi(12, 4), &ArchOptions::default())
            .unwrap();
        assert_eq!(a.lp_target, 32);
        assert_eq!(a.l_max, 5 * 12 + 4);
    }
}
