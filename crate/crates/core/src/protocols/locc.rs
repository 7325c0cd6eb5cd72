use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;

use super::zh::{zh_classical_bits, ZhBlock};
use crate::adversary::{epr_pair_state, CertSlot, ProtocolDescriptor, ProverStrategy};
use crate::error::{Error, Result};
use crate::netsim::{
    BitField, ClassicalMessage, Decision, Mode, NodeCtx, NodeProgram, ProtocolOutcome, Round, StateStore, Topology,
};
use crate::primitives::{pauli_correction, BellOutcome};
use crate::qcore::{NodeId, QuantumState, RegisterLayout, Unitary, C64};

/// A protocol to be converted: programs, honest certificate and the number
/// of qubits `C_uv` each directed edge carries.
#[derive(Clone)]
pub struct BaseProtocol {
    pub topology: Topology,
    pub programs: Vec<Arc<dyn NodeProgram>>,
    pub certificates: Vec<QuantumState>,
    pub local: Vec<QuantumState>,
    pub channels: BTreeMap<(usize, usize), usize>,
    pub outputs: Vec<(NodeId, String)>,
    pub label: String,
}

impl BaseProtocol {
    /// `s_tm`: qubits sent over all edges.
    pub fn total_qubits(&self) -> usize {
        self.channels.values().sum()
    }

    pub fn descriptor(&self) -> Result<ProtocolDescriptor> {
        let slots = self
            .certificates
            .iter()
            .flat_map(|f| f.layout().registers().to_vec())
            .map(|r| CertSlot {
                register: r.name.clone(),
                node: r.owner.0,
                column: 0,
                qubits: r.qubits,
            })
            .collect();
        ProtocolDescriptor::new(slots, self.certificates.clone())
    }

    fn round(&self, programs: Vec<Arc<dyn NodeProgram>>, store: StateStore) -> Result<Round> {
        let parts: Vec<(NodeId, &str)> = self.outputs.iter().map(|(n, r)| (*n, r.as_str())).collect();
        let mut round = Round::new(self.topology.clone(), programs, store)?.with_local(self.local.clone())?;
        if !parts.is_empty() {
            round = round.with_outputs(&parts);
        }
        Ok(round)
    }

    /// The unconverted protocol on a certificate.
    pub fn run(&self, strategy: &ProverStrategy, mode: Mode) -> Result<ProtocolOutcome> {
        self.descriptor()?.check_layout(&strategy.factors)?;
        self.round(self.programs.clone(), strategy.store()?)?
            .context(self.label.clone())
            .run(mode)
    }
}

struct SwapEquality;

impl NodeProgram for SwapEquality {
    fn send(&self, ctx: &mut NodeCtx<'_>) -> Result<()> {
        if ctx.node() == NodeId(0) {
            ctx.send_quantum(NodeId(1), "M0")?;
        }
        Ok(())
    }

    fn decide(&self, ctx: &mut NodeCtx<'_>) -> Result<Decision> {
        if ctx.node() == NodeId(1) && ctx.received_from(NodeId(0)).iter().any(|r| r == "M0") {
            return Ok(Decision::from_bool(ctx.swap_test("M0", "M1")?));
        }
        Ok(Decision::Accept)
    }
}

/// Two nodes holding one-qubit certificates `M0`, `M1`; `v_0` sends its
/// qubit and `v_1` SWAP-tests the two.
pub fn swap_equality_base(m0: DVector<C64>, m1: DVector<C64>) -> Result<BaseProtocol> {
    let prog: Arc<dyn NodeProgram> = Arc::new(SwapEquality);
    Ok(BaseProtocol {
        topology: Topology::line(1),
        programs: vec![prog.clone(), prog],
        certificates: vec![
            QuantumState::pure(RegisterLayout::single("M0", 1, NodeId(0)), m0)?,
            QuantumState::pure(RegisterLayout::single("M1", 1, NodeId(1)), m1)?,
        ],
        local: Vec::new(),
        channels: BTreeMap::from([((0, 1), 1)]),
        outputs: Vec::new(),
        label: "swap-equality".into(),
    })
}

/// Counts the converted protocol should produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoccAccounting {
    pub certificate_per_node: Vec<usize>,
    pub classical_bits_per_edge: usize,
    pub quantum_messages: usize,
}

/// The base protocol with every qubit message replaced by teleportation over
/// an EPR pair certified by local measurements.
#[derive(Clone)]
pub struct LoccProtocol {
    pub base: BaseProtocol,
    /// Tested pairs per block.
    pub n: usize,
    pub gamma: f64,
    /// `γ² / s_tm`.
    pub epsilon: f64,
}

pub fn locc_convert(base: BaseProtocol, gamma: f64, n: usize) -> Result<LoccProtocol> {
    if !(gamma > 0.0) {
        return Err(Error::Argument(format!("gamma must be positive, got {gamma}")));
    }
    for &(u, v) in base.channels.keys() {
        if !base.topology.has_edge(NodeId(u), NodeId(v)) {
            return Err(Error::Argument(format!("channel v{u}->v{v} is not an edge")));
        }
    }
    let s_tm = base.total_qubits().max(1);
    Ok(LoccProtocol {
        epsilon: gamma * gamma / s_tm as f64,
        base,
        n,
        gamma,
    })
}

fn block(u: usize, v: usize, b: usize, n: usize) -> ZhBlock {
    ZhBlock::named(&format!("Q{u}>{v}.{b}."), n)
}

struct LoccNode {
    base: Arc<dyn NodeProgram>,
    n: usize,
    outgoing: Vec<(usize, usize)>,
    incoming: Vec<(usize, usize)>,
}

impl NodeProgram for LoccNode {
    fn send(&self, ctx: &mut NodeCtx<'_>) -> Result<()> {
        let u = ctx.node().0;
        let mut fields: BTreeMap<usize, Vec<BitField>> = BTreeMap::new();
        let mut labels: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for &(v, c) in &self.outgoing {
            let f = fields.entry(v).or_default();
            for b in 0..c {
                f.extend(block(u, v, b, self.n).v1(ctx, &format!("z{b}."))?);
            }
        }
        ctx.set_capture(true);
        let sent = self.base.send(ctx);
        ctx.set_capture(false);
        sent?;
        let mut used: BTreeMap<usize, usize> = BTreeMap::new();
        for (to, reg) in ctx.take_captured() {
            let v = to.0;
            let cap = self.outgoing.iter().find(|(w, _)| *w == v).map_or(0, |x| x.1);
            let q = ctx.qubits_of(&reg)?;
            let parts: Vec<String> = if q == 1 {
                vec![reg.clone()]
            } else {
                let names: Vec<String> = (0..q).map(|i| format!("{reg}#{i}")).collect();
                let spec: Vec<(&str, usize)> = names.iter().map(|s| (s.as_str(), 1)).collect();
                ctx.split_register(&reg, &spec)?;
                names
            };
            for part in parts {
                let b = used.entry(v).or_insert(0);
                if *b >= cap {
                    return Err(Error::Argument(format!("v{u} sends more than the declared {cap} qubits to v{v}")));
                }
                let blk = block(u, v, *b, self.n);
                let (oa, _) = blk.output();
                let o = ctx.bell_measure(&part, oa)?;
                fields.entry(v).or_default().push(BitField {
                    name: format!("t{b}"),
                    value: o.index() as u64,
                    bits: 2,
                });
                ctx.rename(&part, &format!("{part}~{u}"))?;
                *b += 1;
            }
            labels.entry(v).or_default().push(format!("{reg}:{q}"));
        }
        for (v, f) in fields {
            let label = labels.remove(&v).unwrap_or_default().join(",");
            ctx.send_classical(NodeId(v), ClassicalMessage { label, fields: f })?;
        }
        Ok(())
    }

    fn decide(&self, ctx: &mut NodeCtx<'_>) -> Result<Decision> {
        let v = ctx.node().0;
        for &(u, c) in &self.incoming {
            let msg = ctx
                .received_classical()
                .into_iter()
                .find(|(f, _)| f.0 == u)
                .map(|(_, m)| m)
                .ok_or_else(|| Error::Argument(format!("v{v} got nothing from v{u}")))?;
            for b in 0..c {
                if !block(u, v, b, self.n).v2(ctx, &msg, &format!("z{b}."))? {
                    return Ok(Decision::Reject);
                }
            }
            let mut idx = 0;
            for entry in msg.label.split(',').filter(|s| !s.is_empty()) {
                let (reg, q) = entry
                    .rsplit_once(':')
                    .and_then(|(r, q)| Some((r.to_string(), q.parse::<usize>().ok()?)))
                    .ok_or_else(|| Error::Argument(format!("bad teleport label `{entry}`")))?;
                let parts: Vec<String> = if q == 1 {
                    vec![reg.clone()]
                } else {
                    (0..q).map(|i| format!("{reg}#{i}")).collect()
                };
                for part in &parts {
                    let t = msg
                        .get(&format!("t{idx}"))
                        .ok_or_else(|| Error::Argument(format!("missing teleport bits t{idx}")))?;
                    let blk = block(u, v, idx, self.n);
                    let (_, ob) = blk.output();
                    let fix = Unitary::new(&[ob], pauli_correction(BellOutcome::from_index(t as usize)))?;
                    ctx.apply(&fix)?;
                    ctx.rename(ob, part)?;
                    idx += 1;
                }
                if q > 1 {
                    let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
                    ctx.join_registers(&refs, &reg)?;
                }
                ctx.inject_delivery(NodeId(u), &reg)?;
            }
        }
        self.base.decide(ctx)
    }
}

impl LoccProtocol {
    fn directed(&self) -> Vec<(usize, usize, usize)> {
        self.base
            .channels
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&(u, v), &c)| (u, v, c))
            .collect()
    }

    /// Base certificate slots followed by the EPR blocks, `V₁` at the sender.
    pub fn descriptor(&self) -> Result<ProtocolDescriptor> {
        let base = self.base.descriptor()?;
        let mut slots = base.slots;
        let mut honest = base.honest;
        let mut pairs = Vec::new();
        for (u, v, c) in self.directed() {
            for b in 0..c {
                let blk = block(u, v, b, self.n);
                for (i, (a, bb)) in blk.a.iter().zip(&blk.b).enumerate() {
                    slots.push(CertSlot { register: a.clone(), node: u, column: i + 1, qubits: 1 });
                    slots.push(CertSlot { register: bb.clone(), node: v, column: i + 1, qubits: 1 });
                    honest.push(epr_pair_state(a, NodeId(u), bb, NodeId(v))?);
                    pairs.push((a.clone(), bb.clone()));
                }
            }
        }
        Ok(ProtocolDescriptor::new(slots, honest)?.with_pairs(pairs))
    }

    pub fn run(&self, strategy: &ProverStrategy, mode: Mode) -> Result<ProtocolOutcome> {
        self.descriptor()?.check_layout(&strategy.factors)?;
        let nodes = self.base.topology.len();
        let dir = self.directed();
        let programs = (0..nodes)
            .map(|w| {
                Arc::new(LoccNode {
                    base: self.base.programs[w].clone(),
                    n: self.n,
                    outgoing: dir.iter().filter(|x| x.0 == w).map(|x| (x.1, x.2)).collect(),
                    incoming: dir.iter().filter(|x| x.1 == w).map(|x| (x.0, x.2)).collect(),
                }) as Arc<dyn NodeProgram>
            })
            .collect();
        self.base
            .round(programs, strategy.store()?)?
            .classical_only(true)
            .context(format!("locc({}) N={}", self.base.label, self.n))
            .run(mode)
    }

    /// `s_c = s_c^base + Σ_v (C_uv + C_vu)(N+1)` per node, and per edge
    /// `(C_uv + C_vu)(2 + bits of one verification block)` classical bits.
    pub fn declared(&self) -> Result<LoccAccounting> {
        let nodes = self.base.topology.len();
        let mut per_node = vec![0; nodes];
        for f in &self.base.certificates {
            for r in f.layout().registers() {
                per_node[r.owner.0] += r.qubits;
            }
        }
        let mut per_edge: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (u, v, c) in self.directed() {
            per_node[u] += c * (self.n + 1);
            per_node[v] += c * (self.n + 1);
            *per_edge.entry((u.min(v), u.max(v))).or_insert(0) += c * (2 + zh_classical_bits(self.n));
        }
        Ok(LoccAccounting {
            certificate_per_node: per_node,
            classical_bits_per_edge: per_edge.values().copied().max().unwrap_or(0),
            quantum_messages: 0,
        })
    }
}
