use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::line::reg;
use super::sgdiv::{line_programs, run_sgdiv, SgdiInput};
use crate::adversary::{AdversaryFamily, CertSlot, ProtocolDescriptor, ProverStrategy};
use crate::error::{Error, Representation, Result};
use crate::netsim::{
    trial_seed, wilson_interval, Acceptance, Accounting, Mode, ProtocolOutcome, Round, Topology,
};
use crate::qcore::linalg::c;
use crate::qcore::{check_cap, NodeId, QuantumState, RegisterLayout, BRANCH_EPS, C64};
use rand::Rng;

/// Certificate slots `R_{l,c}` for `l = 1 … r`, `c = 1 … m+k+1`.
pub fn sgdi_descriptor(input: &SgdiInput) -> Result<ProtocolDescriptor> {
    let chain = input.honest_chain()?;
    let mut slots = Vec::new();
    let mut honest = Vec::new();
    for l in 1..=input.r {
        for col in 1..=input.columns() {
            let name = reg(true, l, col);
            honest.push(QuantumState::pure(
                RegisterLayout::single(name.clone(), input.n, NodeId(l)),
                chain[l].clone(),
            )?);
            slots.push(CertSlot {
                register: name,
                node: l,
                column: col,
                qubits: input.n,
            });
        }
    }
    ProtocolDescriptor::new(slots, honest)
}

fn local_copies(input: &SgdiInput) -> Result<Vec<QuantumState>> {
    (1..=input.columns())
        .map(|col| {
            QuantumState::pure(
                RegisterLayout::single(reg(true, 0, col), input.n, NodeId(0)),
                input.psi.clone(),
            )
        })
        .collect()
}

/// Full protocol over every column at once. The output is `v_r`'s column 1.
pub fn run_sgdi_monolithic(input: &SgdiInput, strategy: &ProverStrategy, mode: Mode) -> Result<ProtocolOutcome> {
    run_columns(input, strategy, mode, None)
}

pub(crate) fn run_columns(
    input: &SgdiInput,
    strategy: &ProverStrategy,
    mode: Mode,
    final_swap: Option<usize>,
) -> Result<ProtocolOutcome> {
    sgdi_descriptor(input)?.check_layout(&strategy.factors)?;
    let out = reg(true, input.r, 1);
    let mut round = Round::new(
        Topology::line(input.r),
        line_programs(input, true, (2..=input.k + 1).collect(), final_swap),
        strategy.store()?,
    )?
    .with_local(local_copies(input)?)?
    .context(format!("sgdi {}", input.context()));
    if final_swap.is_none() {
        round = round.with_output(NodeId(input.r), &[out.as_str()]);
    }
    round.run(mode)
}

/// Runs the protocol, factorizing over columns when every certificate
/// register is its own tensor factor.
pub fn run_sgdi(input: &SgdiInput, strategy: &ProverStrategy, mode: Mode) -> Result<ProtocolOutcome> {
    if !strategy.is_register_product() {
        return run_sgdi_monolithic(input, strategy, mode);
    }
    match mode {
        Mode::Exact => sgdi_factorized(input, strategy)?.outcome(),
        Mode::Sampled { seed } => sgdi_sampled(input, strategy, seed),
    }
}

/// Output class reached by the permutations, with the joint probability of
/// that class and acceptance of every tested column.
#[derive(Debug, Clone)]
pub struct SgdiBranch {
    pub weight: f64,
    pub output: QuantumState,
}

/// Exact result of the column-factorized evaluation.
#[derive(Debug, Clone)]
pub struct SgdiBranches {
    pub branches: Vec<SgdiBranch>,
    pub acceptance: f64,
    pub accounting: Accounting,
    pub leaves: usize,
}

impl SgdiBranches {
    /// Conditional output `Σ w ρ / P_acc`.
    pub fn output(&self) -> Result<Option<QuantumState>> {
        if self.acceptance <= BRANCH_EPS {
            return Ok(None);
        }
        let live: Vec<&SgdiBranch> = self.branches.iter().filter(|b| b.weight > 0.0).collect();
        if live.len() == 1 {
            return Ok(Some(live[0].output.clone()));
        }
        let layout = live[0].output.layout().clone();
        check_cap(layout.total_qubits(), Representation::Mixed)?;
        let mut rho = DMatrix::<C64>::zeros(layout.dim(), layout.dim());
        for b in &live {
            rho += b.output.density().into_owned() * c(b.weight / self.acceptance, 0.0);
        }
        Ok(Some(QuantumState::mixed(layout, rho)?))
    }

    pub fn outcome(&self) -> Result<ProtocolOutcome> {
        Ok(ProtocolOutcome {
            acceptance: Acceptance::Exact {
                probability: self.acceptance.clamp(0.0, 1.0),
            },
            output: self.output()?,
            output_requested: true,
            transcripts: Vec::new(),
            accounting: self.accounting.clone(),
            leaves: self.leaves,
        })
    }
}

/// Identical register states of one node, grouped.
struct NodeClasses {
    states: Vec<QuantumState>,
    /// Class of each column, 0-based column index.
    of_column: Vec<usize>,
    counts: Vec<usize>,
}

fn same(a: &QuantumState, b: &QuantumState) -> bool {
    match (a.amplitudes(), b.amplitudes()) {
        (Some(x), Some(y)) => (x - y).camax() < 1e-13,
        (None, None) => (a.density().into_owned() - b.density().into_owned()).camax() < 1e-13,
        _ => false,
    }
}

fn classes(input: &SgdiInput, strategy: &ProverStrategy, l: usize) -> Result<NodeClasses> {
    let mut states: Vec<QuantumState> = Vec::new();
    let mut of_column = Vec::new();
    let mut counts = Vec::new();
    for col in 1..=input.columns() {
        let name = reg(true, l, col);
        let s = strategy
            .register_state(&name)
            .ok_or_else(|| Error::Layout(format!("`{name}` is not a standalone factor")))?;
        let s = s.rename_register(&name, "x")?;
        match states.iter().position(|t| same(t, &s)) {
            Some(i) => {
                of_column.push(i);
                counts[i] += 1;
            }
            None => {
                of_column.push(states.len());
                counts.push(1);
                states.push(s);
            }
        }
    }
    Ok(NodeClasses {
        states,
        of_column,
        counts,
    })
}

/// Distinct class sequences for slots `1 … len` with their probabilities
/// under a uniform permutation.
fn arrangements(counts: &[usize], len: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(counts: &mut Vec<usize>, left: usize, len: usize, cur: &mut Vec<usize>, p: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if cur.len() == len {
            out.push((cur.clone(), p));
            return;
        }
        for cls in 0..counts.len() {
            if counts[cls] == 0 {
                continue;
            }
            let q = counts[cls] as f64 / left as f64;
            counts[cls] -= 1;
            cur.push(cls);
            rec(counts, left - 1, len, cur, p * q, out);
            cur.pop();
            counts[cls] += 1;
        }
    }
    let total = counts.iter().sum();
    let mut out = Vec::new();
    rec(&mut counts.to_vec(), total, len, &mut Vec::new(), 1.0, &mut out);
    out
}

/// A single-column certificate from one class per node.
fn column_strategy(input: &SgdiInput, node_classes: &[NodeClasses], tuple: &[usize]) -> Result<ProverStrategy> {
    let factors = (1..=input.r)
        .map(|l| {
            let s = &node_classes[l - 1].states[tuple[l - 1]];
            s.relabel(RegisterLayout::single(reg(false, l, 1), input.n, NodeId(l)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProverStrategy {
        family: AdversaryFamily::Honest,
        factors,
    })
}

fn certificate_accounting(input: &SgdiInput) -> Accounting {
    let mut per_node = vec![input.columns() * input.n; input.r + 1];
    per_node[0] = 0;
    Accounting {
        certificate_size: input.columns() * input.n,
        certificate_per_node: per_node,
        ..Accounting::default()
    }
}

/// Exact evaluation for register-product certificates: enumerate the distinct
/// class arrangements of slots `1 … k+1` at every node and multiply the
/// single-column acceptances of the tested slots.
pub fn sgdi_factorized(input: &SgdiInput, strategy: &ProverStrategy) -> Result<SgdiBranches> {
    sgdi_descriptor(input)?.check_layout(&strategy.factors)?;
    let node_classes = (1..=input.r)
        .map(|l| classes(input, strategy, l))
        .collect::<Result<Vec<_>>>()?;
    let per_node: Vec<Vec<(Vec<usize>, f64)>> = node_classes
        .iter()
        .map(|nc| arrangements(&nc.counts, input.k + 1))
        .collect();
    let mut memo: HashMap<Vec<usize>, (f64, Accounting)> = HashMap::new();
    let mut by_output: Vec<f64> = vec![0.0; node_classes[input.r - 1].states.len()];
    let mut accounting = certificate_accounting(input);
    let mut leaves = 0;
    let mut idx = vec![0usize; input.r];
    loop {
        let mut w = 1.0;
        for l in 0..input.r {
            w *= per_node[l][idx[l]].1;
        }
        let mut acc = 1.0;
        let mut msg = 0;
        let mut sent = 0;
        for slot in 1..=input.k {
            let tuple: Vec<usize> = (0..input.r).map(|l| per_node[l][idx[l]].0[slot]).collect();
            if !memo.contains_key(&tuple) {
                let col = column_strategy(input, &node_classes, &tuple)?;
                let out = run_sgdiv(input, &col, Mode::Exact)?;
                leaves += out.leaves;
                memo.insert(tuple.clone(), (out.accept_probability(), out.accounting));
            }
            let (a, acct) = &memo[&tuple];
            acc *= a;
            msg += acct.message_size;
            sent += acct.total_qubits_sent;
        }
        accounting.message_size = accounting.message_size.max(msg);
        accounting.total_qubits_sent = accounting.total_qubits_sent.max(sent);
        by_output[per_node[input.r - 1][idx[input.r - 1]].0[0]] += w * acc;

        let mut l = 0;
        loop {
            if l == input.r {
                let branches = by_output
                    .iter()
                    .enumerate()
                    .map(|(cls, &weight)| {
                        Ok(SgdiBranch {
                            weight,
                            output: node_classes[input.r - 1].states[cls].relabel(RegisterLayout::single(
                                reg(true, input.r, 1),
                                input.n,
                                NodeId(input.r),
                            ))?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let acceptance = by_output.iter().sum();
                return Ok(SgdiBranches {
                    branches,
                    acceptance,
                    accounting,
                    leaves,
                });
            }
            idx[l] += 1;
            if idx[l] < per_node[l].len() {
                break;
            }
            idx[l] = 0;
            l += 1;
        }
    }
}

/// One sampled trajectory for register-product certificates: sample the
/// permutations, then run every tested column.
pub(crate) fn sgdi_sampled_trajectory(
    input: &SgdiInput,
    strategy: &ProverStrategy,
    seed: u64,
) -> Result<(bool, QuantumState, Accounting)> {
    let node_classes = (1..=input.r)
        .map(|l| classes(input, strategy, l))
        .collect::<Result<Vec<_>>>()?;
    let mut slots = Vec::new();
    for (l, nc) in node_classes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(l as u64 + 2);
        let mut pool: Vec<usize> = (0..input.columns()).collect();
        let pick: Vec<usize> = (0..=input.k)
            .map(|_| {
                let i = rng.random_range(0..pool.len());
                nc.of_column[pool.remove(i)]
            })
            .collect();
        slots.push(pick);
    }
    let mut accepted = true;
    let mut accounting = certificate_accounting(input);
    for slot in 1..=input.k {
        let tuple: Vec<usize> = slots.iter().map(|s| s[slot]).collect();
        let col = column_strategy(input, &node_classes, &tuple)?;
        let out = run_sgdiv(input, &col, Mode::Sampled { seed: trial_seed(seed, slot as u64) })?;
        accounting.message_size += out.accounting.message_size;
        accounting.total_qubits_sent += out.accounting.total_qubits_sent;
        if out.accept_probability() < 1.0 {
            accepted = false;
            break;
        }
    }
    let last = &node_classes[input.r - 1];
    let output = last.states[slots[input.r - 1][0]].relabel(RegisterLayout::single(
        reg(true, input.r, 1),
        input.n,
        NodeId(input.r),
    ))?;
    Ok((accepted, output, accounting))
}

fn sgdi_sampled(input: &SgdiInput, strategy: &ProverStrategy, seed: u64) -> Result<ProtocolOutcome> {
    sgdi_descriptor(input)?.check_layout(&strategy.factors)?;
    let (accepted, output, accounting) = sgdi_sampled_trajectory(input, strategy, seed)?;
    let hits = usize::from(accepted);
    let (lo, hi) = wilson_interval(hits, 1);
    Ok(ProtocolOutcome {
        acceptance: Acceptance::Estimate {
            p_hat: hits as f64,
            ci_low: lo,
            ci_high: hi,
            trials: 1,
            accepted: hits,
        },
        output: accepted.then_some(output),
        output_requested: true,
        transcripts: Vec::new(),
        accounting,
        leaves: 1,
    })
}
