//! One-round distributed verification: topologies, certificate
//! distribution, the round engine (exact and sampled) and Monte Carlo
//! estimation.

mod engine;
mod estimate;
mod store;
mod topology;
mod transcript;

pub use engine::{Decision, Mode, NodeCtx, NodeProgram, OutputSpec, Round};
pub use estimate::{estimate_acceptance, trial_seed, wilson_interval, Estimate, WILSON_Z};
pub use store::{distribute_certificates, StateStore};
pub use topology::Topology;
pub use transcript::{
    Acceptance, Accounting, BitField, ClassicalMessage, CoinRecord, MeasurementRecord,
    MessageKind, MessageRecord, ProtocolOutcome, Transcript,
};
