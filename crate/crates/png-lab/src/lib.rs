//! Monte Carlo lab for the polynuclear growth model: experiment drivers,
//! config parsing, result tables with manifests, and the threshold constants
//! the acceptance checks pin against. The simulation and analysis kernels
//! live in `png-core`; this crate owns everything about running studies and
//! writing artifacts.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod plot;
pub mod table;
pub mod thresholds;

pub use error::{LabError, LabResult};
