//! Minimal dense reverse-mode autodiff with Adam.
//!
//! Values are row-major matrices; a batch of queries occupies rows. The tape is
//! generic over [`Real`] so the same model code runs in `f32` for training and
//! in `f64` for finite-difference checks.

mod gather;
mod params;
mod real;
mod tape;
mod tensor;

pub use gather::GatherPlan;
pub use params::{AdamConfig, Group, Init, ParamBlock, ParamId, ParamStore};
pub use real::Real;
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
