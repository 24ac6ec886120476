//! Extended tensor calculus on velocity and momentum phase spaces, and
//! numerical checks of the normality equations for Newtonian dynamical
//! systems under a generalized Legendre transformation.

pub mod calculus;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod jet;
pub mod linalg;
pub mod normality;
pub mod ode;
pub mod phase;
pub mod system;

pub use error::{Error, EvalError, ParseError, Result};
pub use jet::{Dual, Jet2, Scalar};
pub use phase::{PhasePoint, Rep};
