//! Analysis of input-output Hamiltonian systems with dissipation (IOHD).
//!
//! Linear models `x' = (J - R)(Q x - C^T u)`, `y = C x + D u` are checked,
//! converted to and from state-space form, interconnected by positive feedback
//! or over networks, and decomposed back into IOHD components. Nonlinear
//! models are supplied as evaluator bundles and can be simulated.

pub mod cli;
pub mod converse;
pub mod error;
pub mod interconnect;
pub mod linalg;
pub mod linear;
pub mod nonlinear;
pub mod random;

pub use error::{IohdError, Result};
pub use linalg::{Mat, Tolerances, Vector};
pub use linear::{LinearIohd, StateSpace};
pub use nonlinear::NonlinearIohd;
