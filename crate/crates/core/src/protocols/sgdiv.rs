use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::line::{reg, LineNode};
use crate::adversary::{CertSlot, ProtocolDescriptor, ProverStrategy};
use crate::error::{Error, Representation, Result};
use crate::netsim::{Mode, NodeProgram, ProtocolOutcome, Round, StateStore, Topology};
use crate::primitives::swap_test_accept_prob;
use crate::qcore::random::{haar_unitary, haar_vector};
use crate::qcore::{
    check_cap, trace_distance, NodeId, Operator, QuantumState, RegisterLayout, Unitary, ALGEBRAIC_TOL, C64,
};

/// One column of the line must fit in a pure state.
fn check_line(n: usize, r: usize) -> Result<()> {
    check_cap(n * (r + 1), Representation::Pure).map_err(|e| e.with_context(format!("one column at n = {n}, r = {r}")))
}

/// State generation on the line `v_0 … v_r`: `|ψ⟩` at `v_0`, `U_j` at `v_j`.
#[derive(Debug, Clone)]
pub struct SgdiInput {
    pub r: usize,
    pub n: usize,
    pub psi: DVector<C64>,
    unitaries: Vec<Unitary>,
    pub k: usize,
    pub m: usize,
    /// `v_r` flips its own coin instead of always testing.
    pub v_r_flips: bool,
}

impl SgdiInput {
    pub fn new(psi: DVector<C64>, unitaries: Vec<Operator>) -> Result<Self> {
        let dim = psi.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Argument(format!("|ψ⟩ has dimension {dim}")));
        }
        if (psi.norm() - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::Argument("|ψ⟩ is not normalized".into()));
        }
        if unitaries.is_empty() {
            return Err(Error::Argument("need r >= 1 unitaries".into()));
        }
        check_line(dim.trailing_zeros() as usize, unitaries.len())?;
        let us = unitaries
            .into_iter()
            .map(|op| {
                if op.dim() != dim {
                    return Err(Error::Argument(format!("unitary of dimension {} for |ψ⟩ of {dim}", op.dim())));
                }
                match op {
                    Operator::Dense(m) => Unitary::new(&["x"], m),
                    Operator::Permutation(p) => Unitary::permutation(&["x"], p),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SgdiInput {
            r: us.len(),
            n: dim.trailing_zeros() as usize,
            psi,
            unitaries: us,
            k: 1,
            m: 0,
            v_r_flips: false,
        })
    }

    /// Haar-random `|ψ⟩` and `U_1 … U_r`.
    pub fn random<R: Rng + ?Sized>(r: usize, n: usize, rng: &mut R) -> Result<Self> {
        if r == 0 || n == 0 {
            return Err(Error::Argument(format!("need r >= 1 and n >= 1, got r = {r}, n = {n}")));
        }
        check_line(n, r)?;
        let d = 1 << n;
        let psi = haar_vector(d, rng);
        let us = (0..r).map(|_| Operator::Dense(haar_unitary(d, rng))).collect();
        SgdiInput::new(psi, us)
    }

    pub fn with_columns(mut self, k: usize, m: usize) -> Self {
        self.k = k;
        self.m = m;
        self
    }

    pub fn with_v_r_flips(mut self, flips: bool) -> Self {
        self.v_r_flips = flips;
        self
    }

    /// `m + k + 1`.
    pub fn columns(&self) -> usize {
        self.m + self.k + 1
    }

    /// `U_j` for `1 ≤ j ≤ r`, acting on a register named `x`.
    pub fn unitary(&self, j: usize) -> &Unitary {
        &self.unitaries[j - 1]
    }

    /// `|φ_l⟩ = U_l ⋯ U_1 |ψ⟩` for `l = 0 … r`.
    pub fn honest_chain(&self) -> Result<Vec<DVector<C64>>> {
        let mut s = QuantumState::pure(RegisterLayout::single("x", self.n, NodeId(0)), self.psi.clone())?;
        let mut out = vec![self.psi.clone()];
        for u in &self.unitaries {
            s = s.apply_unitary(u)?;
            out.push(s.amplitudes().expect("pure stays pure").clone());
        }
        Ok(out)
    }

    /// `|φ_r⟩`.
    pub fn target(&self) -> Result<DVector<C64>> {
        Ok(self.honest_chain()?.pop().expect("chain is non-empty"))
    }

    pub(crate) fn context(&self) -> String {
        format!("r={} n={} k={} m={}", self.r, self.n, self.k, self.m)
    }
}

/// Certificate slots `R_1 … R_r` with the honest `|φ_l⟩`.
pub fn sgdiv_descriptor(input: &SgdiInput) -> Result<ProtocolDescriptor> {
    let chain = input.honest_chain()?;
    let mut slots = Vec::new();
    let mut honest = Vec::new();
    for l in 1..=input.r {
        let name = reg(false, l, 1);
        honest.push(QuantumState::pure(
            RegisterLayout::single(name.clone(), input.n, NodeId(l)),
            chain[l].clone(),
        )?);
        slots.push(CertSlot {
            register: name,
            node: l,
            column: 1,
            qubits: input.n,
        });
    }
    ProtocolDescriptor::new(slots, honest)
}

pub(crate) fn line_programs(input: &SgdiInput, columns: bool, tested: Vec<usize>, final_swap: Option<usize>) -> Vec<Arc<dyn NodeProgram>> {
    let total = if columns { input.columns() } else { 1 };
    (0..=input.r)
        .map(|l| {
            Arc::new(LineNode {
                r: input.r,
                columns,
                total,
                tested: tested.clone(),
                unitary: (l >= 1).then(|| input.unitary(l).clone()),
                v_r_flips: input.v_r_flips,
                final_swap,
            }) as Arc<dyn NodeProgram>
        })
        .collect()
}

/// One column of the state-generation protocol. The output is `v_r`'s `R_r`.
pub fn run_sgdiv(input: &SgdiInput, strategy: &ProverStrategy, mode: Mode) -> Result<ProtocolOutcome> {
    sgdiv_descriptor(input)?.check_layout(&strategy.factors)?;
    let psi = QuantumState::pure(RegisterLayout::single("R0", input.n, NodeId(0)), input.psi.clone())?;
    let out = reg(false, input.r, 1);
    Round::new(
        Topology::line(input.r),
        line_programs(input, false, vec![1], None),
        strategy.store()?,
    )?
    .with_local(vec![psi])?
    .with_output(NodeId(input.r), &[out.as_str()])
    .context(format!("sgdiv {}", input.context()))
    .run(mode)
}

/// Per-run quantities entering the soundness analysis of one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdivDiagnostics {
    /// `α_j`: rejection probability of the SWAP test between `U_j R_{j−1}`
    /// and `R_j` on the initial state, `j = 1 … r`.
    pub alphas: Vec<f64>,
    /// `D(|φ_ν⟩⟨φ_ν|, ρ_ν)` for `ν = 1 … r`.
    pub distances: Vec<f64>,
    /// `⟨φ_r|ρ_r|φ_r⟩`.
    pub overlap: f64,
}

impl SgdivDiagnostics {
    /// `(1 − ⟨φ_r|ρ_r|φ_r⟩)² / (72 r²)`.
    pub fn rejection_bound(&self) -> f64 {
        let r = self.alphas.len() as f64;
        (1.0 - self.overlap).powi(2) / (72.0 * r * r)
    }

    /// `3 Σ_{j ≤ ν} √α_j` for `ν = 1 … r`.
    pub fn chain_bounds(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.alphas
            .iter()
            .map(|a| {
                acc += 3.0 * a.max(0.0).sqrt();
                acc
            })
            .collect()
    }

    /// Largest `D_ν − 3 Σ √α_j`; non-positive when the chain inequality holds.
    pub fn chain_slack(&self) -> f64 {
        self.distances
            .iter()
            .zip(self.chain_bounds())
            .map(|(d, b)| d - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn sgdiv_diagnostics(input: &SgdiInput, strategy: &ProverStrategy) -> Result<SgdivDiagnostics> {
    let chain = input.honest_chain()?;
    let store: StateStore = strategy.store()?;
    let mut alphas = Vec::new();
    let mut distances = Vec::new();
    let mut overlap = 0.0;
    for j in 1..=input.r {
        let cur = reg(false, j, 1);
        let rho_j = store.reduced(&[cur.as_str()])?;
        let prev_state = if j == 1 {
            QuantumState::pure(RegisterLayout::single("R0", input.n, NodeId(0)), input.psi.clone())?
                .tensor(&rho_j)?
        } else {
            let prev = reg(false, j - 1, 1);
            store.reduced(&[prev.as_str(), cur.as_str()])?
        };
        let prev_name = prev_state.layout().registers()[0].name.clone();
        let moved = prev_state.apply_unitary(&input.unitary(j).retarget(&[prev_name.as_str()]))?;
        alphas.push(1.0 - swap_test_accept_prob(&moved, &prev_name, &cur)?);
        let phi = QuantumState::pure(rho_j.layout().clone(), chain[j].clone())?;
        distances.push(trace_distance(&phi, &rho_j)?);
        if j == input.r {
            overlap = rho_j.overlap_with_pure(&chain[j]);
        }
    }
    Ok(SgdivDiagnostics {
        alphas,
        distances,
        overlap,
    })
}
