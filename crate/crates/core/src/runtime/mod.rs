//! Two-party protocol representation and execution.
//!
//! Messages are ownership relabelling: a sent register is marked in transit
//! and flips owner when the receiving party moves. No amplitudes move.

pub mod execute;
pub mod spec;

pub use execute::{execute, execute_pure, ExecutionTranscript, Retention};
pub use spec::{Communication, Move, Ownership, Party, ProtocolSpec, Side, Structure};
