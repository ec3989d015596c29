//! Small-cap square function geometry for the parabola and the cone.
//!
//! The crate builds the cap families, their dual boxes and wave envelopes,
//! the sharp extremal examples (both as FFT-sampled functions and as the
//! idealized indicator model), the slice incidence engine for the cone, and a
//! sweep harness that fits growth exponents of the square-function constants.

pub mod boxgeom;
pub mod caps;
pub mod coneoverlap;
pub mod envelope;
pub mod error;
pub mod extremals;
pub mod harness;
pub mod signal;

pub use error::{Error, Result};
