//! Scalar special functions.

mod bessel;
mod expint;
mod extgamma;
mod gamma;

pub use bessel::{bessel_j0, bessel_j1, bessel_k, bessel_k_scaled};
pub use expint::{ein, exp_integral_ei, sine_integral, EULER_GAMMA};
pub use extgamma::{ext_inc_gamma, ext_inc_gamma_quadrature};
pub use gamma::{
    gamma_fn, ln_gamma, lower_inc_gamma_regularized, upper_inc_gamma, upper_inc_gamma_regularized,
};

pub(crate) use bessel::j01;
pub(crate) use expint::si;
pub(crate) use extgamma::{ext_gamma_pair, ln_ext_inc_gamma_origin};
pub(crate) use gamma::gamma_ratio;
