//! Numerical laboratory for the constructive side of higher-dimensional
//! fractal uncertainty principles.
//!
//! Modules:
//! - [`regular_sets`]: Cantor-type grid sets, regularity and porosity checks.
//! - [`conformal`]: the disk-to-thin-rectangle map built from elliptic integrals.
//! - [`potential_theory`]: Cartan covers, Riesz bounds, Cartan-2 sets.
//! - [`localization`]: L² localization of band-limited functions.
//! - [`damping`]: modified Hilbert transform, multipliers, damping functions.
//! - [`fup_operator`]: discrete localization operators and their norms.
//! - [`constants`]: the explicit constant chain evaluated in log-space.
//! - [`spectral`]: centered discrete Fourier transforms on uniform grids.

pub mod constants;
pub mod conformal;
pub mod damping;
pub mod error;
pub mod fup_operator;
pub mod localization;
pub mod potential_theory;
pub mod quad;
pub mod regular_sets;
pub mod spectral;

pub use error::{Error, Result};
