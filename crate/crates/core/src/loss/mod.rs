//! Collocation losses: the strong-form PINN loss and the Gram-weighted robust
//! loss `r(u)ᵀ G⁻¹ r(u)`.

pub mod crvpinn;
pub mod gram;
pub mod pinn;
pub mod residual;

pub use crvpinn::{crvpinn_loss, crvpinn_loss_field, CrvpinnEval, CrvpinnObjective};
pub use gram::{solve_dense, CgSolution, GramOperator, DENSE_LIMIT};
pub use pinn::{PinnEval, PinnSystem, Sampler};
pub use residual::{classify, PointClass, ResidualSystem};
