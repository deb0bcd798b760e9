//! Averaging-theory analysis of periodic orbits in a perturbed double
//! pendulum: symbolic perturbations, bifurcation functions, their zeros, and
//! numerical continuation of the predicted orbits.

pub mod averaging;
pub mod continuation;
pub mod error;
pub mod expr;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod zeros;

pub use error::Error;
pub use expr::{EvalEnv, Expr};
pub use model::{Mode, PerturbationSpec, Resonance, State4};
