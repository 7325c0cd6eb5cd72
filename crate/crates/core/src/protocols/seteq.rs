use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sgdi::{run_columns, sgdi_descriptor, sgdi_factorized, sgdi_sampled_trajectory, SgdiBranches};
use super::sgdiv::SgdiInput;
use crate::adversary::{realize, AdversaryFamily, ProverStrategy};
use crate::error::{Representation, Result};
use crate::ff::{fingerprint_amplitudes, g_permutation, FingerprintLayout, SetEqInstance, Side};
use crate::netsim::{wilson_interval, Acceptance, Accounting, Mode, ProtocolOutcome};
use crate::primitives::{swap_test_accept_prob, swap_test_product};
use crate::qcore::{check_cap, Operator, QuantumState};

/// Closed-form guarantees for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeteqBounds {
    /// `1 − 2ℓ(r+1)/p`, a lower bound on acceptance when `A = B`.
    pub completeness: f64,
    /// `½ + 2(ℓ(r+1)/p)²`, an upper bound on the final SWAP test when `A ≠ B`.
    pub soundness: f64,
}

pub fn seteq_bounds(inst: &SetEqInstance) -> SeteqBounds {
    let x = (inst.ell * (inst.r + 1)) as f64 / inst.p as f64;
    SeteqBounds {
        completeness: 1.0 - 2.0 * x,
        soundness: 0.5 + 2.0 * x * x,
    }
}

/// Qubits of one side's register.
pub fn seteq_side_qubits(inst: &SetEqInstance) -> Result<usize> {
    Ok(FingerprintLayout::new(inst.p, inst.r)?.qubits())
}

/// State generation for one side: the fingerprint of `α_0` (or `β_0`) at
/// `v_0` and `G_j` at `v_j`.
pub fn seteq_side_input(inst: &SetEqInstance, side: Side, k: usize, m: usize) -> Result<SgdiInput> {
    inst.validate()?;
    check_cap(seteq_side_qubits(inst)?, Representation::Pure).map_err(|e| e.with_context(format!("seteq side {side:?}")))?;
    let psi = fingerprint_amplitudes(&inst.poly(side, 0)?, inst.r)?;
    let us = (1..=inst.r)
        .map(|j| Ok(Operator::Permutation(g_permutation(&inst.poly(side, j)?, inst.r)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SgdiInput::new(psi, us)?.with_columns(k, m))
}

/// State generation on the joint register `A ⊗ B`.
pub fn seteq_joint_input(inst: &SetEqInstance, k: usize, m: usize) -> Result<SgdiInput> {
    check_cap(2 * seteq_side_qubits(inst)?, Representation::Pure).map_err(|e| e.with_context("seteq joint register A⊗B"))?;
    let a = seteq_side_input(inst, Side::A, k, m)?;
    let b = seteq_side_input(inst, Side::B, k, m)?;
    let psi = a.psi.kronecker(&b.psi);
    let us = (1..=inst.r)
        .map(|j| a.unitary(j).operator().kron(b.unitary(j).operator()))
        .collect();
    Ok(SgdiInput::new(psi, us)?.with_columns(k, m))
}

/// Runs the protocol. Honest certificates take the per-side path; any other
/// family runs on the joint register.
pub fn run_seteq(inst: &SetEqInstance, family: &AdversaryFamily, mode: Mode, k: usize, m: usize) -> Result<ProtocolOutcome> {
    match family {
        AdversaryFamily::Honest => run_seteq_split(inst, mode, k, m),
        _ => run_seteq_joint(inst, family, mode, k, m),
    }
}

fn estimate(accepted: bool) -> Acceptance {
    let hits = usize::from(accepted);
    let (lo, hi) = wilson_interval(hits, 1);
    Acceptance::Estimate {
        p_hat: hits as f64,
        ci_low: lo,
        ci_high: hi,
        trials: 1,
        accepted: hits,
    }
}

fn outcome(acceptance: Acceptance, accounting: Accounting, leaves: usize) -> ProtocolOutcome {
    ProtocolOutcome {
        acceptance,
        output: None,
        output_requested: false,
        transcripts: Vec::new(),
        accounting,
        leaves,
    }
}

fn merge_accounting(a: &Accounting, b: &Accounting) -> Accounting {
    Accounting {
        certificate_size: a.certificate_size + b.certificate_size,
        certificate_per_node: a
            .certificate_per_node
            .iter()
            .zip(&b.certificate_per_node)
            .map(|(x, y)| x + y)
            .collect(),
        message_size: a.message_size + b.message_size,
        total_qubits_sent: a.total_qubits_sent + b.total_qubits_sent,
        ..Accounting::default()
    }
}

/// Honest provers: each side runs separately and only the two outputs meet
/// in the final SWAP test.
pub fn run_seteq_split(inst: &SetEqInstance, mode: Mode, k: usize, m: usize) -> Result<ProtocolOutcome> {
    let sides = [Side::A, Side::B]
        .into_iter()
        .map(|s| {
            let input = seteq_side_input(inst, s, k, m)?;
            let strat = realize(&AdversaryFamily::Honest, &sgdi_descriptor(&input)?)?;
            Ok((input, strat))
        })
        .collect::<Result<Vec<(SgdiInput, ProverStrategy)>>>()?;
    match mode {
        Mode::Exact => {
            let ba = sgdi_factorized(&sides[0].0, &sides[0].1)?;
            let bb = sgdi_factorized(&sides[1].0, &sides[1].1)?;
            let mut p = 0.0;
            for x in &ba.branches {
                for y in &bb.branches {
                    if x.weight > 0.0 && y.weight > 0.0 {
                        p += x.weight * y.weight * swap_test_product(&x.output, &y.output)?;
                    }
                }
            }
            Ok(outcome(
                Acceptance::Exact { probability: p.clamp(0.0, 1.0) },
                merge_accounting(&ba.accounting, &bb.accounting),
                ba.leaves + bb.leaves,
            ))
        }
        Mode::Sampled { seed } => {
            let (ok_a, out_a, acc_a) = sgdi_sampled_trajectory(&sides[0].0, &sides[0].1, seed)?;
            let (ok_b, out_b, acc_b) = sgdi_sampled_trajectory(&sides[1].0, &sides[1].1, seed ^ 0x5EED_B)?;
            let mut accepted = ok_a && ok_b;
            if accepted {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(inst.r as u64 + 1);
                accepted = rng.random::<f64>() < swap_test_product(&out_a, &out_b)?;
            }
            Ok(outcome(estimate(accepted), merge_accounting(&acc_a, &acc_b), 1))
        }
    }
}

fn final_swap(branches: &SgdiBranches, side: usize) -> Result<f64> {
    let mut p = 0.0;
    for b in branches.branches.iter().filter(|b| b.weight > 0.0) {
        let name = b.output.layout().registers()[0].name.clone();
        let s: QuantumState = b.output.split_register(&name, &[("A", side), ("B", side)])?;
        p += b.weight * swap_test_accept_prob(&s, "A", "B")?;
    }
    Ok(p)
}

/// The protocol on the joint register `A ⊗ B`, for any certificate.
pub fn run_seteq_joint(
    inst: &SetEqInstance,
    family: &AdversaryFamily,
    mode: Mode,
    k: usize,
    m: usize,
) -> Result<ProtocolOutcome> {
    let side = seteq_side_qubits(inst)?;
    let input = seteq_joint_input(inst, k, m)?;
    let strat = realize(family, &sgdi_descriptor(&input)?)?;
    if !strat.is_register_product() {
        return run_columns(&input, &strat, mode, Some(side));
    }
    match mode {
        Mode::Exact => {
            let br = sgdi_factorized(&input, &strat)?;
            let p = final_swap(&br, side)?;
            Ok(outcome(
                Acceptance::Exact { probability: p.clamp(0.0, 1.0) },
                br.accounting.clone(),
                br.leaves,
            ))
        }
        Mode::Sampled { seed } => {
            let (mut accepted, out, acc) = sgdi_sampled_trajectory(&input, &strat, seed)?;
            if accepted {
                let name = out.layout().registers()[0].name.clone();
                let s = out.split_register(&name, &[("A", side), ("B", side)])?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(inst.r as u64 + 1);
                accepted = rng.random::<f64>() < swap_test_accept_prob(&s, "A", "B")?;
            }
            Ok(outcome(estimate(accepted), acc, 1))
        }
    }
}

/// Acceptance of `reps` parallel repetitions under a product strategy.
pub fn repeated_acceptance(p: f64, reps: u32) -> f64 {
    p.powi(reps as i32)
}
