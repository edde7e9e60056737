//! Shared numerical kernel: normal distribution functions, adaptive
//! quadrature, one-dimensional maximization and seeded random streams.

pub mod normal;
pub mod optimize;
pub mod quadrature;
pub mod rng;

pub use normal::{std_normal_cdf, std_normal_quantile};
pub use optimize::maximize_1d;
pub use quadrature::{integrate, Integral, Quadrature};
pub use rng::RngContract;
