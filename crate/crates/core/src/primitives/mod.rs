//! SWAP test, teleportation, the EPR-test measurements and block permutation.

mod epr;
pub(crate) mod swap;
mod teleport;

pub use epr::{epr_test_povms, epr_test_effects, local_basis, omega, phi_plus, Basis};
pub use swap::{
    swap_operator, swap_test_accept_prob, swap_test_branches, swap_test_execute,
    swap_test_product, SwapBranch,
};
pub use teleport::{bell_basis, bell_measure_branches, bell_povm, pauli_correction, teleport, teleport_branches, BellOutcome};

use crate::error::{Error, Result};
use crate::qcore::QuantumState;

/// Renames the blocks so that block `j` afterwards holds what block
/// `pi[j]` held before. Every block must have the same register shape.
pub fn permute_blocks(state: &QuantumState, blocks: &[Vec<&str>], pi: &[usize]) -> Result<QuantumState> {
    let renames = block_renames(state, blocks, pi)?;
    let mut out = state.clone();
    for (from, tmp, _) in &renames {
        out = out.rename_register(from, tmp)?;
    }
    for (_, tmp, to) in &renames {
        out = out.rename_register(tmp, to)?;
    }
    Ok(out)
}

/// `(old name, temporary name, new name)` triples realizing a block permutation.
pub(crate) fn block_renames(
    state: &QuantumState,
    blocks: &[Vec<&str>],
    pi: &[usize],
) -> Result<Vec<(String, String, String)>> {
    check_permutation(pi, blocks.len())?;
    let shape = |b: &Vec<&str>| -> Result<Vec<usize>> {
        b.iter().map(|n| state.layout().qubits_of(n)).collect()
    };
    if let Some(first) = blocks.first() {
        let s0 = shape(first)?;
        for b in blocks {
            if shape(b)? != s0 {
                return Err(Error::Argument("blocks must have equal register shapes".into()));
            }
        }
    }
    let mut out = Vec::new();
    for (j, &src) in pi.iter().enumerate() {
        if src == j {
            continue;
        }
        for (from, to) in blocks[src].iter().zip(&blocks[j]) {
            out.push((from.to_string(), format!("{from}#perm"), to.to_string()));
        }
    }
    Ok(out)
}

pub(crate) fn check_permutation(pi: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if pi.len() != n {
        return Err(Error::Argument(format!("permutation of length {} for {n} blocks", pi.len())));
    }
    for &p in pi {
        if p >= n || seen[p] {
            return Err(Error::Argument(format!("{pi:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{NodeId, RegisterLayout};

    fn blocks_state() -> QuantumState {
        let l = RegisterLayout::owned_by(NodeId(1), &[("R1", 2), ("R2", 2), ("R3", 2)]).unwrap();
        QuantumState::basis_values(l, &[1, 2, 3]).unwrap()
    }

    #[test]
    fn block_permutation_moves_contents() {
        let s = blocks_state();
        let blocks = vec![vec!["R1"], vec!["R2"], vec!["R3"]];
        let t = permute_blocks(&s, &blocks, &[2, 0, 1]).unwrap();
        let t = t.reorder(&["R1", "R2", "R3"]).unwrap();
        let idx = t.probabilities().iter().position(|&p| p > 0.5).unwrap();
        assert_eq!(t.register_values(idx), vec![3, 1, 2]);
    }

    #[test]
    fn inverse_permutation_restores() {
        let s = blocks_state();
        let blocks = vec![vec!["R1"], vec!["R2"], vec!["R3"]];
        let t = permute_blocks(&s, &blocks, &[2, 0, 1]).unwrap();
        let back = permute_blocks(&t, &blocks, &[1, 2, 0]).unwrap();
        let back = back.reorder(&["R1", "R2", "R3"]).unwrap();
        assert_eq!(back.amplitudes(), s.amplitudes());
    }

    #[test]
    fn unequal_blocks_rejected() {
        let l = RegisterLayout::owned_by(NodeId(1), &[("A", 1), ("B", 2)]).unwrap();
        let s = QuantumState::zero(l).unwrap();
        assert!(permute_blocks(&s, &[vec!["A"], vec!["B"]], &[1, 0]).is_err());
    }
}
