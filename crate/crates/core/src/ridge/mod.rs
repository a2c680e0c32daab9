//! Ridge kernel: SVD-accelerated penalized solves, IRLS for the logistic
//! model, the linear-response fit, first-order moments and the Hadamard
//! computation of group cross-sums.

mod alpha;
mod fit;
mod moments;
mod solve;

pub use alpha::{alpha_matrix, hadamard_alpha};
pub use fit::{
    binary_penalized_loglik, expit, fit_binary, fit_continuous, fit_ridge, irls_fit, linear_fit, logit, FitOptions,
    RidgeFit, PROB_CLIP,
};
pub use moments::{
    fit_moments, moment_factors, moment_factors_scaled, MomentFactors, WorkingPoint, VARIANCE_FLOOR_REL,
};
pub use solve::{ridge_solve, ridge_solve_with_intercept, InterceptSolve, PenaltyConfig, MAX_CORE_CONDITION};
