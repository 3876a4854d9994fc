//! Foundational numerics: Lambert W, Gauss–Hermite quadrature and Gaussian laws.

mod lambert;
mod quadrature;

pub use lambert::{lambert_w0, lambert_w0_exp, ln_lambert_w0_exp, BRANCH_POINT, DOMAIN_SLACK};
pub use quadrature::{
    log_sum_exp, tilted_gaussian, GaussianLaw, QuadratureRule, TiltedNodes, DEFAULT_ORDER,
    PIECEWISE_HALF_WIDTH, REFERENCE_ORDER,
};
