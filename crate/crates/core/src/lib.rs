//! Simulation and analysis of two-party quantum private information
//! retrieval protocols.

pub mod adversary;
pub mod bounds;
pub mod error;
pub mod quantum;
pub mod privacy;
pub mod protocols;
pub mod runtime;

pub use error::{QpirError, Result};
