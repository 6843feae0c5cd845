//! Phase retrieval of coherent diffraction patterns and in-line holograms
//! with missing intensity samples.
//!
//! The crate simulates noise-free far-field diffraction patterns and
//! angular-spectrum holograms, removes a controlled fraction of samples, and
//! recovers both the object and the missing samples iteratively:
//! hybrid input-output for diffraction patterns ([`cdi`]) and
//! back-and-forth propagation with an absorption constraint for holograms
//! ([`holo`]). [`metrics`] holds the error measures and the missing-fraction
//! feasibility bounds.

pub mod cdi;
pub mod config;
pub mod degrade;
pub mod error;
pub mod field;
pub mod forward;
pub mod holo;
pub mod io;
pub mod metrics;
pub mod objects;
pub mod pattern;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
pub use field::{ComplexField, GridGeometry, RealImage};
pub use pattern::{MeasuredPattern, PatternKind};

/// Version string embedded in output provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
