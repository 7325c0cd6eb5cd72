use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::linalg::c;
use crate::qcore::{gates, Povm, QuantumState, Unitary, C64};

/// Bell measurement result `(m1, m2)`.
///
/// | m1 m2 | Bell state | correction |
/// |-------|------------|------------|
/// | 0 0   | Φ⁺         | I          |
/// | 0 1   | Ψ⁺         | X          |
/// | 1 0   | Φ⁻         | Z          |
/// | 1 1   | Ψ⁻         | ZX         |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellOutcome {
    pub m1: u8,
    pub m2: u8,
}

impl BellOutcome {
    pub fn from_index(i: usize) -> BellOutcome {
        BellOutcome {
            m1: ((i >> 1) & 1) as u8,
            m2: (i & 1) as u8,
        }
    }

    pub fn index(self) -> usize {
        ((self.m1 as usize) << 1) | self.m2 as usize
    }
}

/// Columns Φ⁺, Ψ⁺, Φ⁻, Ψ⁻ (indexed by `2·m1 + m2`).
pub fn bell_basis() -> DMatrix<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        c(h, 0.0), c(0.0, 0.0), c(h, 0.0),  c(0.0, 0.0),
        c(0.0, 0.0), c(h, 0.0), c(0.0, 0.0), c(h, 0.0),
        c(0.0, 0.0), c(h, 0.0), c(0.0, 0.0), c(-h, 0.0),
        c(h, 0.0), c(0.0, 0.0), c(-h, 0.0), c(0.0, 0.0),
    ]);
    m
}

pub fn bell_povm(a: &str, b: &str) -> Result<Povm> {
    Povm::from_basis(&[a, b], &bell_basis(), &["00", "01", "10", "11"])
}

/// `Z^{m1} X^{m2}`.
pub fn pauli_correction(o: BellOutcome) -> DMatrix<C64> {
    let mut u = gates::identity(2);
    if o.m2 == 1 {
        u = gates::x() * u;
    }
    if o.m1 == 1 {
        u = gates::z() * u;
    }
    u
}

fn check_sizes(state: &QuantumState, source: &str, pair: (&str, &str)) -> Result<()> {
    for r in [source, pair.0, pair.1] {
        if state.layout().qubits_of(r)? != 1 {
            return Err(Error::Argument(format!("teleportation register `{r}` must be one qubit")));
        }
    }
    Ok(())
}

/// All four teleportation branches, corrected. Entries are
/// `(outcome, probability, post-state)` for the possible outcomes.
pub fn teleport_branches(
    state: &QuantumState,
    source: &str,
    pair: (&str, &str),
) -> Result<Vec<(BellOutcome, f64, QuantumState)>> {
    check_sizes(state, source, pair)?;
    let povm = bell_povm(source, pair.0)?;
    let mut out = Vec::new();
    for b in state.measure_branches(&povm)? {
        if let Some(post) = b.state {
            let o = BellOutcome::from_index(b.outcome);
            let u = Unitary::new(&[pair.1], pauli_correction(o))?;
            out.push((o, b.probability, post.apply_unitary(&u)?));
        }
    }
    Ok(out)
}

/// Sampled teleportation of `source` onto the receiver half of `pair`.
pub fn teleport<R: Rng + ?Sized>(
    state: &QuantumState,
    source: &str,
    pair: (&str, &str),
    rng: &mut R,
) -> Result<(BellOutcome, QuantumState)> {
    check_sizes(state, source, pair)?;
    let (k, _, post) = state.measure_sampled(&bell_povm(source, pair.0)?, rng)?;
    let o = BellOutcome::from_index(k);
    let u = Unitary::new(&[pair.1], pauli_correction(o))?;
    Ok((o, post.apply_unitary(&u)?))
}

/// Convenience: measure only, without applying the correction.
pub fn bell_measure_branches(
    state: &QuantumState,
    a: &str,
    b: &str,
) -> Result<Vec<(BellOutcome, f64, QuantumState)>> {
    Ok(state
        .measure_branches(&bell_povm(a, b)?)?
        .into_iter()
        .filter_map(|br| br.state.map(|s| (BellOutcome::from_index(br.outcome), br.probability, s)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::phi_plus;
    use crate::qcore::random::haar_state;
    use crate::qcore::{fidelity, NodeId, RegisterLayout};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn epr(a: &str, b: &str) -> QuantumState {
        let l = RegisterLayout::owned_by(NodeId(0), &[(a, 1), (b, 1)]).unwrap();
        QuantumState::pure(l, phi_plus()).unwrap()
    }

    #[test]
    fn bell_basis_is_unitary() {
        assert!(Unitary::new(&["x", "y"], bell_basis()).is_ok());
        for i in 0..4 {
            assert_eq!(BellOutcome::from_index(i).index(), i);
        }
    }

    #[test]
    fn teleport_plus_state() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let src = QuantumState::pure(
            RegisterLayout::single("S", 1, NodeId(0)),
            DVector::from_vec(vec![c(h, 0.0), c(h, 0.0)]),
        )
        .unwrap();
        let st = src.tensor(&epr("P", "Q")).unwrap();
        let branches = teleport_branches(&st, "S", ("P", "Q")).unwrap();
        assert_eq!(branches.len(), 4);
        let want = src.rename_register("S", "Q").unwrap();
        for (_, p, post) in branches {
            assert!((p - 0.25).abs() < 1e-12);
            let got = post.partial_trace(&["Q"]).unwrap();
            assert!((fidelity(&got, &want).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn teleport_through_product_resource() {
        let src = QuantumState::basis(RegisterLayout::single("S", 1, NodeId(0)), 0).unwrap();
        let res = QuantumState::zero(RegisterLayout::owned_by(NodeId(0), &[("P", 1), ("Q", 1)]).unwrap()).unwrap();
        let st = src.tensor(&res).unwrap();
        // Oracle: enumerate the Bell projections by hand.
        let basis = bell_basis();
        let mut oracle = 0.0;
        let v = st.amplitudes().unwrap();
        for k in 0..4 {
            let bell = basis.column(k);
            // amplitude on receiver value q: Σ_{s,p} conj(bell[s,p]) v[s,p,q]
            let mut amp = [c(0.0, 0.0); 2];
            for (q, a) in amp.iter_mut().enumerate() {
                for sp in 0..4 {
                    *a += bell[sp].conj() * v[sp * 2 + q];
                }
            }
            let o = BellOutcome::from_index(k);
            let corr = pauli_correction(o);
            let out0 = corr[(0, 0)] * amp[0] + corr[(0, 1)] * amp[1];
            oracle += out0.norm_sqr();
        }
        let want = QuantumState::basis(RegisterLayout::single("Q", 1, NodeId(0)), 0).unwrap();
        let mut got = 0.0;
        for (_, p, post) in teleport_branches(&st, "S", ("P", "Q")).unwrap() {
            let f = fidelity(&post.partial_trace(&["Q"]).unwrap(), &want).unwrap();
            got += p * f * f;
        }
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn teleportation_is_identity_channel(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = RegisterLayout::owned_by(NodeId(0), &[("E", 1), ("S", 1)]).unwrap();
            let payload = haar_state(&l, &mut rng).unwrap();
            let st = payload.tensor(&epr("P", "Q")).unwrap();
            let want = payload.rename_register("S", "Q").unwrap();
            for (_, _, post) in teleport_branches(&st, "S", ("P", "Q")).unwrap() {
                let got = post.partial_trace(&["E", "Q"]).unwrap();
                prop_assert!((fidelity(&got, &want).unwrap() - 1.0).abs() < 1e-10);
            }
            let (_, post) = teleport(&st, "S", ("P", "Q"), &mut rng).unwrap();
            let got = post.partial_trace(&["E", "Q"]).unwrap();
            prop_assert!((fidelity(&got, &want).unwrap() - 1.0).abs() < 1e-10);
        }
    }
}
