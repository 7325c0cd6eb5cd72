//! The protocols: state generation (one column and the full permuted
//! version), Set Equality by fingerprints and its classical counterparts,
//! EPR-pair verification by local measurements, the LOCC conversion and the
//! parameter planner.

mod classical;
mod line;
mod locc;
mod planner;
mod seteq;
mod sgdi;
mod sgdiv;
mod zh;

pub use sgdi::{run_sgdi, run_sgdi_monolithic, sgdi_descriptor, sgdi_factorized, SgdiBranch, SgdiBranches};
pub use sgdiv::{run_sgdiv, sgdiv_descriptor, sgdiv_diagnostics, SgdiInput, SgdivDiagnostics};
pub use seteq::{
    repeated_acceptance, run_seteq, run_seteq_joint, run_seteq_split, seteq_bounds, seteq_joint_input,
    seteq_side_input, seteq_side_qubits, SeteqBounds,
};
pub use zh::{run_zh_engine, run_zh_locc, zh_classical_bits, zh_descriptor};
pub use locc::{locc_convert, swap_equality_base, BaseProtocol, LoccAccounting, LoccProtocol};
pub use classical::{
    count_bits, element_bits, fuzz_counting, honest_counting, honest_lists, run_classical_seteq_counting,
    run_classical_seteq_trivial, ClassicalOutcome, CountCertificate, ListCertificate,
};
pub use planner::{
    de_finetti_term, epr_copies, locc_epsilon, plan_k, plan_m, plan_parameters, PlanRequest, PlannerOutput,
};
