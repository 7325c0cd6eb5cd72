//! Simulation and verification harness for distributed quantum Merlin-Arthur
//! (dQMA) protocols on small networks.
//!
//! The crate is layered bottom-up:
//!
//! * [`qcore`]: dense states over named multi-qubit registers, unitaries,
//!   POVMs, partial traces, fidelity and trace distance.
//! * [`primitives`]: the SWAP test, teleportation, the local Pauli-basis
//!   EPR tests and block permutations.
//! * [`ff`]: prime-field arithmetic, list polynomials, fingerprint states,
//!   the flag-counting permutation unitaries and the reduction encoders.
//! * [`netsim`]: topologies, register ownership, the one-round verification
//!   engine with exact branch enumeration and sampled trajectories.
//! * [`adversary`]: certificate strategies, honest and malicious.
//! * [`protocols`]: the state-generation, set-equality and EPR-verification
//!   protocols, the LOCC conversion and the parameter planner.

pub mod adversary;
pub mod error;
pub mod ff;
pub mod netsim;
pub mod primitives;
pub mod protocols;
pub mod qcore;

pub use error::{Error, Result};
