//! Numerical verification toolkit for the second Malliavin derivative of the
//! running maximum `M = sup_{t <= T} W_t` of a Brownian motion.
//!
//! The crate is organised by topic:
//!
//! * [`path`]: grids, discrete paths, segment maxima, directions, cylindrical
//!   test functionals and the Skorokhod adjoint.
//! * [`sampling`]: seeded walks, Brownian paths, Gaussian bridges and the
//!   deterministic block-parallel Monte Carlo driver.
//! * [`fluctuation`]: exact and sampled half-line and bridge stay
//!   probabilities.
//! * [`gaussian_bv`]: Gaussian perimeters of halfspaces and level-set
//!   concentration.
//! * [`malliavin`]: finite-difference derivatives of path functionals and
//!   integration-by-parts estimators of `D^2 M`.
//! * [`density`]: reflection-principle densities, the total-variation bound
//!   for the discretized maximum and its limit integral.
//! * [`concentration`]: Monte Carlo witnesses that the second derivative lives
//!   on paths with two maxima.
//! * [`report`]: experiment configs, manifests, reports and the verification
//!   suites behind the `bvmax` binary.

pub mod concentration;
pub mod density;
pub mod error;
pub mod fluctuation;
pub mod gaussian_bv;
pub mod malliavin;
pub mod path;
pub mod quadrature;
pub mod rational;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
pub use path::{DiscretePath, Direction, DirectionKind, TimeGrid};
pub use sampling::{MCEstimate, SeedSpec};

/// `(2 pi)^{-1/2}`, the Gaussian perimeter of a halfspace through the origin.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}
