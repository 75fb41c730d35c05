//! Linear-algebra and distribution primitives shared by the predictors.

pub mod linalg;
mod projector;
pub mod student_t;

pub use linalg::{Cholesky, Matrix};
pub use projector::{residual_decomposition, ridge_residuals, ResidualDecomposition, RidgeProjector};
pub use student_t::{t_quantile, StudentT};
