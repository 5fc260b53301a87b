//! Dense state-vector primitives.
//!
//! Basis convention: the amplitude index of a basis state is the big-endian
//! concatenation of the register labels in declaration order, and qubit `j`
//! of a register is bit `j` counted from the most significant end of its
//! label. Trace distance is always the halved trace norm `½‖ρ − σ‖₁`.

pub mod channel;
pub mod density;
pub mod gates;
pub mod layout;
pub mod linalg;
pub mod ops;
pub mod random;
pub mod state;

pub use channel::{apply_channel, apply_channel_ensemble, ChannelOp};
pub use density::{pure_trace_distance, trace_distance, DensityOperator, ReducedState};
pub use gates::{Control, Gate, Mask, MatrixData, Qubit, SingleQubitOp, Slice};
pub use layout::{Register, RegisterLayout};
pub use linalg::{CMatrix, C64};
pub use ops::{hadamard_transform, inner_product_cnot, purify, trace_in_extraction, uhlmann_unitary, TraceIn};
pub use state::{Ensemble, PureState};
