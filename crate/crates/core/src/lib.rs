//! Numerical toolkit for multi-order fractional differential systems:
//! order-indexed matrix algebra, Mittag-Leffler functions, fractional
//! integral and derivative operators on graded grids, Picard solvers for
//! initial value problems, and state-transition tableaus with Duhamel
//! reconstruction and left/right duality checks.

pub mod algebra;
pub mod calculus;
pub mod error;
pub mod grid;
pub mod solver;
pub mod special;
pub mod transition;

pub use algebra::{col_lift, hadamard, row_lift, Matrix, MatrixOrder, OrderProvenance, VectorOrder};
pub use calculus::{
    caputo_derivative_left, caputo_derivative_right, frac_integral_left,
    frac_integral_left_singular, frac_integral_right, rl_derivative_left, rl_derivative_right,
    FirstInterval,
};
pub use error::{FracError, Result};
pub use grid::{pow0, GridFunction, SingularGridFunction, TimeGrid};
pub use solver::{
    bielecki_norm_l1, bielecki_norm_sup, choose_k, extend_maximal, picard_caputo, picard_rl,
    Dynamic, ExtendOptions, MaximalVerdict, SolveOptions, SolveReport,
};
pub use special::{gamma, ln_gamma, ml_matrix, ml_scalar, MLParams, ML_Z_MAX};
pub use transition::{
    check_theta, duality_residual_caputo, duality_residual_rl, duhamel_caputo, duhamel_rl,
    mixed_duhamel, theta_bound, transition_caputo, transition_rl, MixedKind, TableauKind,
    TableauOptions, ThetaBound, TransitionTableau,
};
