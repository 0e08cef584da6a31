//! Two-dimensional Stern-Gerlach interferometer for a spinning nanodiamond
//! carrying a single NV centre: spin model, coupled centre-of-mass and
//! Euler-angle dynamics, closed-form small-angle results and the spin
//! contrast bound.

pub mod analytic;
pub mod contrast;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod hermitian;
pub mod params;
pub mod spin_model;

pub use error::{Error, Result};
