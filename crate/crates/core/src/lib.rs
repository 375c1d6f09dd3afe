//! A posteriori error certificates for physics-informed neural network
//! approximations of linear evolution equations.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod certifier;
pub mod cli;
pub mod heat1d;
pub mod linalg;
pub mod meshboundary;
pub mod pinn;
