//! Learning implicit PDE time-stepping operators.
//!
//! The crate collects discrete operators and solvers ([`pde`]), the implicit
//! steppers being learned ([`schemes`]), encoders between grid functions and
//! vectors ([`encoding`]), explicit layered constructions of the steppers
//! ([`circuits`]), a small ReLU network trainer ([`learner`]) and the
//! experiment drivers that tie them together ([`harness`]).

pub mod error;
pub mod pde;
pub mod circuits;
pub mod encoding;
pub mod schemes;
pub mod learner;
pub mod harness;

pub use error::{Error, Result};
pub use pde::{Field, Grid1D, NormKind};
