//! Implicit time-stepping operators for reaction-diffusion, forced parabolic and
//! viscous conservation-law problems, plus rollout and a reference solver.

mod problem;
mod rollout;
mod steppers;

pub use problem::{
    c1_distance, ClosedForm, FluxSpec, ForcingSpec, ReactionSpec, ScalarFn, SchemeId,
    SchemeParams, StepReport, SCAN_POINTS,
};
pub use rollout::{reference_solution, rollout, ReferenceConfig, ReferenceProblem, Stepper};
pub use steppers::{
    be_residual, claw_lipschitz_base, claw_picard_step, claw_picard_step_mi,
    cn_amplification_factors, kantorovich_margin, parabolic_be_step, parabolic_be_step_mi,
    parabolic_cn_step, parabolic_cn_step_spectral, rd_newton_step, rd_picard_step,
    rd_picard_step_mi, KANTOROVICH_LIMIT,
};

