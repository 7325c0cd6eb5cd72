use serde::{Deserialize, Serialize};

use super::engine::Decision;
use crate::error::{Error, Result};
use crate::qcore::QuantumState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitField {
    pub name: String,
    pub value: u64,
    pub bits: usize,
}

/// A classical message: named fixed-width fields.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub label: String,
    pub fields: Vec<BitField>,
}

impl ClassicalMessage {
    pub fn new(label: impl Into<String>) -> Self {
        ClassicalMessage {
            label: label.into(),
            fields: Vec::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: u64, bits: usize) -> Self {
        self.fields.push(BitField {
            name: name.into(),
            value,
            bits,
        });
        self
    }

    pub fn bits(&self) -> usize {
        self.fields.iter().map(|f| f.bits).sum()
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.fields.iter().find(|f| f.name == name).map(|f| f.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinRecord {
    pub node: usize,
    pub label: String,
    pub value: usize,
    pub arity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Quantum,
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub from: usize,
    pub to: usize,
    pub kind: MessageKind,
    pub registers: Vec<String>,
    pub qubits: usize,
    pub payload: Option<ClassicalMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub node: usize,
    pub label: String,
    pub outcome: usize,
    pub probability: f64,
}

/// One execution path of a round.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub seed: Option<u64>,
    /// Probability of this path (exact mode) or 1 (sampled mode).
    pub weight: f64,
    pub coins: Vec<CoinRecord>,
    pub messages: Vec<MessageRecord>,
    pub measurements: Vec<MeasurementRecord>,
    /// Per node; `None` for nodes not reached after an earlier rejection.
    pub decisions: Vec<Option<Decision>>,
    pub accepted: bool,
}

/// Resource counts; maxima are taken over all explored paths.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Accounting {
    /// Largest certificate (qubits) received by one node.
    pub certificate_size: usize,
    pub certificate_per_node: Vec<usize>,
    /// Largest number of qubits crossing one edge.
    pub message_size: usize,
    /// Largest total number of qubits sent in one execution.
    pub total_qubits_sent: usize,
    /// Largest number of classical bits crossing one edge.
    pub classical_bits_per_edge: usize,
    /// Largest total number of classical bits in one execution.
    pub total_classical_bits: usize,
    /// Total quantum messages over every explored path.
    pub quantum_messages: usize,
}

impl Accounting {
    pub(crate) fn absorb(&mut self, leaf: &Accounting) {
        self.message_size = self.message_size.max(leaf.message_size);
        self.total_qubits_sent = self.total_qubits_sent.max(leaf.total_qubits_sent);
        self.classical_bits_per_edge = self.classical_bits_per_edge.max(leaf.classical_bits_per_edge);
        self.total_classical_bits = self.total_classical_bits.max(leaf.total_classical_bits);
        self.quantum_messages += leaf.quantum_messages;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Acceptance {
    Exact { probability: f64 },
    Estimate { p_hat: f64, ci_low: f64, ci_high: f64, trials: usize, accepted: usize },
}

impl Acceptance {
    pub fn value(&self) -> f64 {
        match self {
            Acceptance::Exact { probability } => *probability,
            Acceptance::Estimate { p_hat, .. } => *p_hat,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub acceptance: Acceptance,
    /// Output conditioned on acceptance; `None` when nothing was accepted
    /// or no output was requested.
    pub output: Option<QuantumState>,
    pub output_requested: bool,
    pub transcripts: Vec<Transcript>,
    pub accounting: Accounting,
    pub leaves: usize,
}

impl ProtocolOutcome {
    pub fn accept_probability(&self) -> f64 {
        self.acceptance.value()
    }

    /// The conditional output; a degenerate-branch error when acceptance is zero.
    pub fn output_state(&self) -> Result<&QuantumState> {
        match &self.output {
            Some(s) => Ok(s),
            None if self.output_requested => Err(Error::DegenerateBranch(self.accept_probability())),
            None => Err(Error::Argument("this run has no output register".into())),
        }
    }
}
