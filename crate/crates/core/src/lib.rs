//! Space-time neural solver for the advection-diffusion equation.
//!
//! A small fully connected network `u(x, y, t)` is trained on a regular
//! collocation lattice, either with the plain strong-form loss or with the
//! robust loss `r(u)ᵀ G⁻¹ r(u)`, where `r` is the finite-difference residual
//! and `G` the Gram stencil of the discrete H¹ inner product.

pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod loss;
pub mod net;
pub mod problem;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Axis, Grid, GridField};
pub use net::Mlp;
pub use problem::Problem;
pub use train::{train, LossMode, TrainConfig};
