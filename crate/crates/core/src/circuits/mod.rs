//! Layered circuits of linear projections and low-dimensional nonlinearities,
//! with explicit constructions of the implicit steppers.

mod build;
mod io;
mod types;

pub use build::{
    build_claw_picard_circuit, build_lu_solver_circuit, build_newton_rd_circuit,
    build_parabolic_be_circuit, build_picard_rd_circuit,
};
pub use io::{read_circuit, write_circuit, CircuitStorage};
pub use types::{
    circuit_stats, eval_circuit, Circuit, CircuitLayer, CircuitStats, LayerBuilder,
    Nonlinearity, UnitView, RATIO_SINGULAR_THRESHOLD,
};
