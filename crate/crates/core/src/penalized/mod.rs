//! Penalized least squares on the screened design.

pub mod fit;
pub mod lasso;
pub mod lla;
pub mod path;
pub mod scad;

pub use fit::{fit_model, FitOptions, PenalizedFit};
pub use lasso::{weighted_lasso, CdOptions, Design, LassoSolution};
pub use lla::{lla_fit, LlaFit};
pub use path::{bic_select, BicPoint, PathFit};
pub use scad::{scad_derivative, scad_penalty, LambdaGrid, PenaltyKind, PenaltySpec, DEFAULT_SCAD_A};
