//! Dense quantum state simulation over named registers.
//!
//! The first register in a layout is the most significant part of the basis
//! index; inside a register the first qubit is the most significant bit.

mod kernel;
mod layout;
pub mod linalg;
pub mod metrics;
mod operator;
pub mod random;
mod state;

pub type C64 = num_complex::Complex64;

pub use kernel::Operator;
pub use layout::{NodeId, Register, RegisterLayout};
pub use metrics::{fidelity, trace_distance};
pub use operator::{gates, Effect, Povm, Unitary, ALGEBRAIC_TOL, OPTIMUM_TOL, PSD_TOL};
pub use state::{
    sample_index, MeasurementBranch, QuantumState, Repr, BRANCH_EPS, MAX_MIXED_QUBITS,
    MAX_PURE_QUBITS,
};
pub(crate) use state::check_cap;
