use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::store::StateStore;
use super::topology::Topology;
use super::transcript::{
    Acceptance, Accounting, ClassicalMessage, CoinRecord, MeasurementRecord, MessageKind,
    MessageRecord, ProtocolOutcome, Transcript,
};
use crate::error::{Error, Result};
use crate::primitives::{bell_povm, BellOutcome};
use crate::qcore::linalg::c;
use crate::qcore::{sample_index, NodeId, Operator, Povm, QuantumState, Unitary, BRANCH_EPS, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn from_bool(accept: bool) -> Decision {
        if accept {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Enumerate every coin and measurement branch.
    Exact,
    /// One trajectory; node `u` draws from stream `u + 1` of the seed.
    Sampled { seed: u64 },
}

/// Local behaviour of one node. `send` runs for every node before any
/// message is delivered; `decide` runs after delivery.
pub trait NodeProgram: Send + Sync {
    fn send(&self, _ctx: &mut NodeCtx<'_>) -> Result<()> {
        Ok(())
    }

    fn decide(&self, ctx: &mut NodeCtx<'_>) -> Result<Decision>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSpec {
    /// `(owner, register)` pairs; the output may span several nodes.
    pub parts: Vec<(NodeId, String)>,
}

/// A one-round verification: topology, node programs and the initial state.
#[derive(Clone)]
pub struct Round {
    topology: Topology,
    programs: Vec<Arc<dyn NodeProgram>>,
    initial: StateStore,
    certificate_per_node: Vec<usize>,
    output: Option<OutputSpec>,
    classical_only: bool,
    keep_transcripts: usize,
    record: bool,
    context: String,
}

impl Round {
    /// `certificates` is the prover's state; every register must sit on a node.
    pub fn new(topology: Topology, programs: Vec<Arc<dyn NodeProgram>>, certificates: StateStore) -> Result<Self> {
        if programs.len() != topology.len() {
            return Err(Error::Argument(format!(
                "{} programs for {} nodes",
                programs.len(),
                topology.len()
            )));
        }
        let mut per_node = vec![0; topology.len()];
        for (name, q, owner) in certificates.registers() {
            if owner.0 >= topology.len() {
                return Err(Error::Layout(format!("register `{name}` owned by missing node {owner}")));
            }
            per_node[owner.0] += q;
        }
        Ok(Round {
            topology,
            programs,
            initial: certificates,
            certificate_per_node: per_node,
            output: None,
            classical_only: false,
            keep_transcripts: 1,
            record: true,
            context: String::new(),
        })
    }

    /// Adds states the nodes prepare themselves (not part of the certificate).
    pub fn with_local(mut self, states: Vec<QuantumState>) -> Result<Self> {
        for s in states {
            self.initial.push(s)?;
        }
        Ok(self)
    }

    pub fn with_output(self, node: NodeId, registers: &[&str]) -> Self {
        let parts: Vec<(NodeId, &str)> = registers.iter().map(|r| (node, *r)).collect();
        self.with_outputs(&parts)
    }

    pub fn with_outputs(mut self, parts: &[(NodeId, &str)]) -> Self {
        self.output = Some(OutputSpec {
            parts: parts.iter().map(|(n, r)| (*n, r.to_string())).collect(),
        });
        self
    }

    pub fn classical_only(mut self, flag: bool) -> Self {
        self.classical_only = flag;
        self
    }

    /// Number of transcripts kept in the outcome (exact mode keeps the first ones).
    pub fn keep_transcripts(mut self, n: usize) -> Self {
        self.keep_transcripts = n;
        self.record = n > 0;
        self
    }

    /// Protocol parameters quoted in capacity errors.
    pub fn context(mut self, ctx: impl Into<String>) -> Self {
        self.context = ctx.into();
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn initial(&self) -> &StateStore {
        &self.initial
    }

    pub fn run(&self, mode: Mode) -> Result<ProtocolOutcome> {
        let out = match mode {
            Mode::Exact => self.run_exact(),
            Mode::Sampled { seed } => self.run_sampled(seed),
        };
        out.map_err(|e| e.with_context(self.context.clone()))
    }

    fn base_accounting(&self) -> Accounting {
        Accounting {
            certificate_size: self.certificate_per_node.iter().copied().max().unwrap_or(0),
            certificate_per_node: self.certificate_per_node.clone(),
            ..Accounting::default()
        }
    }

    fn run_exact(&self) -> Result<ProtocolOutcome> {
        let mut tape: Vec<(usize, usize)> = Vec::new();
        let mut accounting = self.base_accounting();
        let mut transcripts = Vec::new();
        let mut p_acc = 0.0;
        let mut out_acc: Option<DMatrix<C64>> = None;
        let mut out_layout = None;
        let mut leaves = 0;
        loop {
            let record = self.record && transcripts.len() < self.keep_transcripts;
            let (leaf, chooser) = self.execute(Chooser::Replay { tape, cursor: 0 }, record, true)?;
            tape = match chooser {
                Chooser::Replay { tape, .. } => tape,
                Chooser::Sample { .. } => unreachable!(),
            };
            leaves += 1;
            accounting.absorb(&leaf.accounting);
            if leaf.accepted {
                p_acc += leaf.weight;
                if let Some(o) = leaf.output {
                    let d = o.density().into_owned() * c(leaf.weight, 0.0);
                    out_acc = Some(match out_acc {
                        Some(acc) => acc + d,
                        None => d,
                    });
                    out_layout.get_or_insert_with(|| o.layout().clone());
                }
            }
            if let Some(mut t) = leaf.transcript {
                t.weight = leaf.weight;
                transcripts.push(t);
            }
            while let Some((i, n)) = tape.pop() {
                if i + 1 < n {
                    tape.push((i + 1, n));
                    break;
                }
            }
            if tape.is_empty() {
                break;
            }
        }
        let p_acc = p_acc.clamp(0.0, 1.0);
        let output = match (out_acc, out_layout) {
            (Some(m), Some(l)) if p_acc > BRANCH_EPS => {
                let m = m / c(p_acc, 0.0);
                let m = (&m + m.adjoint()) * c(0.5, 0.0);
                Some(QuantumState::mixed_unchecked(l, m)?)
            }
            _ => None,
        };
        Ok(ProtocolOutcome {
            acceptance: Acceptance::Exact { probability: p_acc },
            output,
            output_requested: self.output.is_some(),
            transcripts,
            accounting,
            leaves,
        })
    }

    fn run_sampled(&self, seed: u64) -> Result<ProtocolOutcome> {
        let rngs = (0..self.topology.len())
            .map(|u| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(u as u64 + 1);
                r
            })
            .collect();
        let (leaf, _) = self.execute(Chooser::Sample { rngs }, self.record, false)?;
        let mut accounting = self.base_accounting();
        accounting.absorb(&leaf.accounting);
        let accepted = usize::from(leaf.accepted);
        let (lo, hi) = super::estimate::wilson_interval(accepted, 1);
        Ok(ProtocolOutcome {
            acceptance: Acceptance::Estimate {
                p_hat: accepted as f64,
                ci_low: lo,
                ci_high: hi,
                trials: 1,
                accepted,
            },
            output: if leaf.accepted { leaf.output } else { None },
            output_requested: self.output.is_some(),
            transcripts: leaf
                .transcript
                .map(|mut t| {
                    t.seed = Some(seed);
                    t.weight = 1.0;
                    vec![t]
                })
                .unwrap_or_default(),
            accounting,
            leaves: 1,
        })
    }

    fn execute(&self, chooser: Chooser, record: bool, prune: bool) -> Result<(Leaf, Chooser)> {
        let n = self.topology.len();
        let mut st = RunState {
            store: self.initial.clone(),
            in_transit: Vec::new(),
            pending: Vec::new(),
            inbox_q: vec![Vec::new(); n],
            inbox_c: vec![Vec::new(); n],
            memo: vec![BTreeMap::new(); n],
            capture: vec![false; n],
            captured: vec![Vec::new(); n],
            chooser,
            weight: 1.0,
            record,
            transcript: Transcript {
                decisions: vec![None; n],
                ..Transcript::default()
            },
            edge_q: BTreeMap::new(),
            edge_c: BTreeMap::new(),
            total_q: 0,
            total_c: 0,
            quantum_messages: 0,
        };
        for u in 0..n {
            let mut ctx = NodeCtx {
                node: NodeId(u),
                round: self,
                st: &mut st,
                phase: Phase::Send,
            };
            self.programs[u].send(&mut ctx)?;
        }
        st.deliver(self)?;
        let mut accepted = true;
        for u in 0..n {
            let mut ctx = NodeCtx {
                node: NodeId(u),
                round: self,
                st: &mut st,
                phase: Phase::Decide,
            };
            let d = self.programs[u].decide(&mut ctx)?;
            st.transcript.decisions[u] = Some(d);
            if d == Decision::Reject {
                accepted = false;
                if prune {
                    break;
                }
            }
        }
        let output = match (&self.output, accepted) {
            (Some(spec), true) if st.weight > 0.0 => {
                for (node, r) in &spec.parts {
                    if st.store.owner(r)? != *node || st.in_transit.contains(r) {
                        return Err(Error::Locality {
                            node: node.0,
                            register: r.clone(),
                        });
                    }
                }
                let refs: Vec<&str> = spec.parts.iter().map(|(_, r)| r.as_str()).collect();
                Some(st.store.reduced(&refs)?)
            }
            _ => None,
        };
        let accounting = Accounting {
            message_size: st.edge_q.values().copied().max().unwrap_or(0),
            total_qubits_sent: st.total_q,
            classical_bits_per_edge: st.edge_c.values().copied().max().unwrap_or(0),
            total_classical_bits: st.total_c,
            quantum_messages: st.quantum_messages,
            ..Accounting::default()
        };
        st.transcript.accepted = accepted;
        Ok((
            Leaf {
                accepted,
                weight: st.weight,
                output,
                transcript: record.then_some(st.transcript),
                accounting,
            },
            st.chooser,
        ))
    }
}

struct Leaf {
    accepted: bool,
    weight: f64,
    output: Option<QuantumState>,
    transcript: Option<Transcript>,
    accounting: Accounting,
}

enum Chooser {
    Replay { tape: Vec<(usize, usize)>, cursor: usize },
    Sample { rngs: Vec<ChaCha8Rng> },
}

impl Chooser {
    /// Picks an index with probability proportional to `weights`.
    fn choose(&mut self, node: NodeId, weights: &[f64]) -> Result<usize> {
        match self {
            Chooser::Replay { tape, cursor } => {
                let valid: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > BRANCH_EPS).collect();
                if valid.is_empty() {
                    return Err(Error::DegenerateBranch(0.0));
                }
                let idx = if *cursor < tape.len() {
                    tape[*cursor].0
                } else {
                    tape.push((0, valid.len()));
                    0
                };
                *cursor += 1;
                Ok(valid[idx])
            }
            Chooser::Sample { rngs } => Ok(sample_index(weights, &mut rngs[node.0])),
        }
    }
}

enum Pending {
    Quantum { from: NodeId, to: NodeId, register: String },
    Classical { from: NodeId, to: NodeId, msg: ClassicalMessage },
}

struct RunState {
    store: StateStore,
    in_transit: Vec<String>,
    pending: Vec<Pending>,
    inbox_q: Vec<Vec<(NodeId, String)>>,
    inbox_c: Vec<Vec<(NodeId, ClassicalMessage)>>,
    memo: Vec<BTreeMap<String, u64>>,
    capture: Vec<bool>,
    captured: Vec<Vec<(NodeId, String)>>,
    chooser: Chooser,
    weight: f64,
    record: bool,
    transcript: Transcript,
    edge_q: BTreeMap<(usize, usize), usize>,
    edge_c: BTreeMap<(usize, usize), usize>,
    total_q: usize,
    total_c: usize,
    quantum_messages: usize,
}

impl RunState {
    fn deliver(&mut self, round: &Round) -> Result<()> {
        for p in std::mem::take(&mut self.pending) {
            match p {
                Pending::Quantum { from, to, register } => {
                    self.store.set_owner(&register, to)?;
                    self.in_transit.retain(|r| r != &register);
                    self.inbox_q[to.0].push((from, register));
                }
                Pending::Classical { from, to, msg } => self.inbox_c[to.0].push((from, msg)),
            }
        }
        let _ = round;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Send,
    Decide,
}

/// A node's view of the run. Every operation checks that the node owns the
/// registers it touches.
pub struct NodeCtx<'a> {
    node: NodeId,
    round: &'a Round,
    st: &'a mut RunState,
    phase: Phase,
}

fn edge_key(a: NodeId, b: NodeId) -> (usize, usize) {
    (a.0.min(b.0), a.0.max(b.0))
}

impl NodeCtx<'_> {
    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn neighbors(&self) -> Vec<NodeId> {
        self.round.topology.neighbors(self.node)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.st.chooser, Chooser::Replay { .. })
    }

    fn check_owned(&self, name: &str) -> Result<()> {
        let owner = self.st.store.owner(name).map_err(|_| Error::Locality {
            node: self.node.0,
            register: name.to_string(),
        })?;
        if owner != self.node || self.st.in_transit.iter().any(|r| r == name) {
            return Err(Error::Locality {
                node: self.node.0,
                register: name.to_string(),
            });
        }
        Ok(())
    }

    pub fn owns(&self, name: &str) -> bool {
        self.check_owned(name).is_ok()
    }

    /// Registers currently held by this node.
    pub fn registers(&self) -> Vec<String> {
        self.st
            .store
            .registers()
            .into_iter()
            .filter(|(n, _, o)| *o == self.node && !self.st.in_transit.contains(n))
            .map(|(n, _, _)| n)
            .collect()
    }

    pub fn qubits_of(&self, name: &str) -> Result<usize> {
        self.check_owned(name)?;
        self.st.store.qubits_of(name)
    }

    /// Uniform private coin with `arity` outcomes.
    pub fn coin(&mut self, label: &str, arity: usize) -> Result<usize> {
        if arity == 0 {
            return Err(Error::Argument("coin with no outcomes".into()));
        }
        let w = vec![1.0; arity];
        let v = self.st.chooser.choose(self.node, &w)?;
        self.st.weight /= arity as f64;
        if self.st.record {
            self.st.transcript.coins.push(CoinRecord {
                node: self.node.0,
                label: label.to_string(),
                value: v,
                arity,
            });
        }
        Ok(v)
    }

    pub fn apply(&mut self, u: &Unitary) -> Result<()> {
        for t in u.targets() {
            self.check_owned(t)?;
        }
        self.st.store.apply(u)
    }

    pub fn apply_operator(&mut self, targets: &[&str], op: &Operator) -> Result<()> {
        for t in targets {
            self.check_owned(t)?;
        }
        self.st.store.apply_operator(targets, op)
    }

    fn record_measurement(&mut self, label: &str, outcome: usize, p: f64) {
        if self.st.record {
            self.st.transcript.measurements.push(MeasurementRecord {
                node: self.node.0,
                label: label.to_string(),
                outcome,
                probability: p,
            });
        }
    }

    /// Measures a POVM on owned registers and returns the outcome index.
    pub fn measure(&mut self, label: &str, povm: &Povm) -> Result<usize> {
        for t in povm.targets() {
            self.check_owned(t)?;
        }
        let probs = self.st.store.outcome_probabilities(povm)?;
        let k = self.st.chooser.choose(self.node, &probs)?;
        let p = self.st.store.condition(povm, k)?;
        self.st.weight *= p;
        self.record_measurement(label, k, p);
        Ok(k)
    }

    /// Symmetric-subspace measurement; `true` on the symmetric outcome.
    pub fn swap_test(&mut self, a: &str, b: &str) -> Result<bool> {
        self.check_owned(a)?;
        self.check_owned(b)?;
        let pa = self.st.store.swap_accept_prob(a, b)?;
        let k = self.st.chooser.choose(self.node, &[pa, 1.0 - pa])?;
        let accept = k == 0;
        let p = self.st.store.swap_condition(a, b, accept)?;
        self.st.weight *= p;
        self.record_measurement(&format!("swap({a},{b})"), k, p);
        Ok(accept)
    }

    pub fn bell_measure(&mut self, a: &str, b: &str) -> Result<BellOutcome> {
        let povm = bell_povm(a, b)?;
        let k = self.measure(&format!("bell({a},{b})"), &povm)?;
        Ok(BellOutcome::from_index(k))
    }

    pub fn rename(&mut self, from: &str, to: &str) -> Result<()> {
        self.check_owned(from)?;
        self.st.store.rename(from, to)
    }

    /// Exchanges the contents of two owned registers of equal size.
    pub fn swap_registers(&mut self, a: &str, b: &str) -> Result<()> {
        self.check_owned(a)?;
        self.check_owned(b)?;
        self.st.store.swap_registers(a, b)
    }

    /// Block `j` afterwards holds what block `pi[j]` held.
    pub fn permute_blocks(&mut self, blocks: &[Vec<String>], pi: &[usize]) -> Result<()> {
        crate::primitives::check_permutation(pi, blocks.len())?;
        for b in blocks {
            for r in b {
                self.check_owned(r)?;
            }
        }
        let mut renames = Vec::new();
        for (j, &src) in pi.iter().enumerate() {
            if src != j {
                for (from, to) in blocks[src].iter().zip(&blocks[j]) {
                    if self.st.store.qubits_of(from)? != self.st.store.qubits_of(to)? {
                        return Err(Error::Argument("blocks must have equal register shapes".into()));
                    }
                    renames.push((from.clone(), format!("{from}#perm"), to.clone()));
                }
            }
        }
        for (from, tmp, _) in &renames {
            self.st.store.rename(from, tmp)?;
        }
        for (_, tmp, to) in &renames {
            self.st.store.rename(tmp, to)?;
        }
        Ok(())
    }

    pub fn split_register(&mut self, name: &str, parts: &[(&str, usize)]) -> Result<()> {
        self.check_owned(name)?;
        self.st.store.split_register(name, parts)
    }

    pub fn join_registers(&mut self, parts: &[&str], name: &str) -> Result<()> {
        for p in parts {
            self.check_owned(p)?;
        }
        self.st.store.join_registers(parts, name)
    }

    fn check_edge(&self, to: NodeId) -> Result<()> {
        if !self.round.topology.has_edge(self.node, to) {
            return Err(Error::Argument(format!("no edge between {} and {to}", self.node)));
        }
        if self.phase != Phase::Send {
            return Err(Error::Argument("messages can only be sent in the send phase".into()));
        }
        Ok(())
    }

    /// Hands an owned register to a neighbour; it arrives after the send phase.
    pub fn send_quantum(&mut self, to: NodeId, register: &str) -> Result<()> {
        self.check_owned(register)?;
        self.check_edge(to)?;
        if self.st.capture[self.node.0] {
            self.st.captured[self.node.0].push((to, register.to_string()));
            return Ok(());
        }
        if self.round.classical_only {
            return Err(Error::QuantumMessage {
                from: self.node.0,
                to: to.0,
                register: register.to_string(),
            });
        }
        let q = self.st.store.qubits_of(register)?;
        *self.st.edge_q.entry(edge_key(self.node, to)).or_insert(0) += q;
        self.st.total_q += q;
        self.st.quantum_messages += 1;
        self.st.in_transit.push(register.to_string());
        if self.st.record {
            self.st.transcript.messages.push(MessageRecord {
                from: self.node.0,
                to: to.0,
                kind: MessageKind::Quantum,
                registers: vec![register.to_string()],
                qubits: q,
                payload: None,
            });
        }
        self.st.pending.push(Pending::Quantum {
            from: self.node,
            to,
            register: register.to_string(),
        });
        Ok(())
    }

    pub fn send_classical(&mut self, to: NodeId, msg: ClassicalMessage) -> Result<()> {
        self.check_edge(to)?;
        let bits = msg.bits();
        *self.st.edge_c.entry(edge_key(self.node, to)).or_insert(0) += bits;
        self.st.total_c += bits;
        if self.st.record {
            self.st.transcript.messages.push(MessageRecord {
                from: self.node.0,
                to: to.0,
                kind: MessageKind::Classical,
                registers: Vec::new(),
                qubits: 0,
                payload: Some(msg.clone()),
            });
        }
        self.st.pending.push(Pending::Classical {
            from: self.node,
            to,
            msg,
        });
        Ok(())
    }

    /// Quantum registers delivered to this node, in arrival order.
    pub fn received_quantum(&self) -> Vec<(NodeId, String)> {
        self.st.inbox_q[self.node.0].clone()
    }

    pub fn received_from(&self, from: NodeId) -> Vec<String> {
        self.st.inbox_q[self.node.0]
            .iter()
            .filter(|(f, _)| *f == from)
            .map(|(_, r)| r.clone())
            .collect()
    }

    pub fn received_classical(&self) -> Vec<(NodeId, ClassicalMessage)> {
        self.st.inbox_c[self.node.0].clone()
    }

    /// Node-local scratch values that persist from `send` to `decide`.
    pub fn set(&mut self, key: &str, value: u64) {
        self.st.memo[self.node.0].insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<u64> {
        self.st.memo[self.node.0].get(key).copied()
    }

    /// While capturing, `send_quantum` records the request instead of sending.
    pub fn set_capture(&mut self, on: bool) {
        self.st.capture[self.node.0] = on;
    }

    pub fn take_captured(&mut self) -> Vec<(NodeId, String)> {
        std::mem::take(&mut self.st.captured[self.node.0])
    }

    /// Makes an owned register look as if it had arrived from `from`.
    pub fn inject_delivery(&mut self, from: NodeId, register: &str) -> Result<()> {
        self.check_owned(register)?;
        self.st.inbox_q[self.node.0].push((from, register.to_string()));
        Ok(())
    }

    /// Debug view of the reduced state of owned registers.
    pub fn reduced(&self, names: &[&str]) -> Result<QuantumState> {
        for n in names {
            self.check_owned(n)?;
        }
        self.st.store.reduced(names)
    }
}
