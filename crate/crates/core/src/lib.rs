//! Numerical core for passive scattering tomography of cloud fields.
//!
//! The crate is `no_std` (with `alloc`) by default when the `std` feature is
//! disabled. It contains the differentiable radiative-transfer forward model,
//! its reverse-mode gradient, a small dense autodiff kernel, the per-voxel
//! posterior neural field, training loops, brute-force Bayesian oracles and the
//! downstream climate/energy products. File formats, configuration and the
//! command-line front end live in the companion `sct` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod adjoint;
pub mod error;
pub mod math;
pub mod nn;
pub mod oracle;
pub mod par;
pub mod probct;
pub mod products;
pub mod rt;
pub mod scene;
pub mod training;

pub use error::{Error, Result};

/// Float methods for `no_std` builds. With `std` the inherent methods win and
/// this import is unused.
#[allow(unused_imports)]
pub(crate) mod prelude {
    pub use num_traits::Float;
}
