//! Slow, direct reference implementations used to check the fast paths.
//!
//! Nothing here shares code with the production routines it is compared
//! against: integrals use adaptive Gauss–Kronrod quadrature and correlation
//! maps are literal loops over frames, pixels and lags.

mod naive;
mod quad;

pub use naive::{
    autocorrelation_naive, dgi_naive, ghost_image_naive, pixel_correlation_naive,
    pixel_correlation_two_pass,
};
pub use quad::{bessel_k_integral, bessel_k_scaled_integral, integrate, integrate_semi_infinite};
