//! Numerical calculus on warped products and Riemannian submersions, with
//! verifiers for comparison-type curvature estimates on immersed
//! submanifolds.

pub mod comparison;
pub mod error;
pub mod estimates;
pub mod geometry;
pub mod immersion;
pub mod omori_yau;
pub mod optimize;
pub mod otsuki;
pub mod sampling;
pub mod submersion;
pub mod warped;

pub use error::{GeoError, Result};
