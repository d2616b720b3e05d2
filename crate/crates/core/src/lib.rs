//! Deterministic kinetic solver for the Boltzmann equation with Haldane
//! (fractional exclusion) statistics on a periodic slab with two velocity
//! dimensions.

pub mod cli_io;
pub mod collision;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod haldane;
pub mod presets;
pub mod solver;

pub use error::{Error, Result};
