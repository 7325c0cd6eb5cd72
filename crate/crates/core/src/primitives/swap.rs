use rand::Rng;

use crate::error::{Error, Result};
use crate::qcore::linalg::trace;
use crate::qcore::{sample_index, Operator, QuantumState, BRANCH_EPS};

/// The register exchange on two `qubits`-qubit registers as a permutation.
pub fn swap_operator(qubits: usize) -> Operator {
    let d = 1usize << qubits;
    Operator::Permutation((0..d * d).map(|i| (i % d) * d + i / d).collect())
}

fn swap_perm(state: &QuantumState, r1: &str, r2: &str) -> Result<Vec<usize>> {
    let q1 = state.layout().qubits_of(r1)?;
    let q2 = state.layout().qubits_of(r2)?;
    if q1 != q2 {
        return Err(Error::Argument(format!(
            "SWAP test on `{r1}` ({q1} qubits) and `{r2}` ({q2} qubits)"
        )));
    }
    match swap_operator(q1) {
        Operator::Permutation(p) => Ok(p),
        Operator::Dense(_) => unreachable!(),
    }
}

/// `tr(Π_sym ρ) = ½ + ½ tr(SWAP ρ)`.
pub fn swap_test_accept_prob(state: &QuantumState, r1: &str, r2: &str) -> Result<f64> {
    let perm = swap_perm(state, r1, r2)?;
    let g = state.global_permutation(&[r1, r2], &perm)?;
    let overlap = match state.amplitudes() {
        Some(v) => g.iter().enumerate().map(|(i, &j)| (v[i].conj() * v[j]).re).sum::<f64>(),
        None => {
            let m = state.density();
            // (Sρ)_{ii} = ρ_{S(i), i} since S is an involution.
            g.iter().enumerate().map(|(i, &j)| m[(j, i)].re).sum::<f64>()
        }
    };
    Ok((0.5 + 0.5 * overlap).clamp(0.0, 1.0))
}

/// `½ + ½ tr(σ₁σ₂)` for two independent registers of equal size.
pub fn swap_test_product(s1: &QuantumState, s2: &QuantumState) -> Result<f64> {
    if s1.layout().total_qubits() != s2.layout().total_qubits() {
        return Err(Error::Argument("SWAP test inputs differ in size".into()));
    }
    let overlap = match (s1.amplitudes(), s2.amplitudes()) {
        (Some(a), Some(b)) => a.dotc(b).norm_sqr(),
        (Some(a), None) => s2.overlap_with_pure(a),
        (None, Some(b)) => s1.overlap_with_pure(b),
        (None, None) => trace(&(s1.density().into_owned() * s2.density().into_owned())).re,
    };
    Ok((0.5 + 0.5 * overlap).clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct SwapBranch {
    pub accept: bool,
    pub probability: f64,
    pub state: Option<QuantumState>,
}

/// Both outcomes of the symmetric/antisymmetric projective measurement.
pub fn swap_test_branches(state: &QuantumState, r1: &str, r2: &str) -> Result<[SwapBranch; 2]> {
    let perm = swap_perm(state, r1, r2)?;
    let branch = |accept: bool| -> Result<SwapBranch> {
        let sign = if accept { 1.0 } else { -1.0 };
        let (p, repr) = state.involution_projection(&[r1, r2], &perm, sign)?;
        let p = p.clamp(0.0, 1.0);
        Ok(SwapBranch {
            accept,
            probability: p,
            state: (p > BRANCH_EPS).then(|| state.from_unnormalized(p, repr)),
        })
    };
    Ok([branch(true)?, branch(false)?])
}

/// Post-state of one SWAP-test outcome; errors on an impossible outcome.
pub(crate) fn swap_test_condition(
    state: &QuantumState,
    r1: &str,
    r2: &str,
    accept: bool,
) -> Result<(f64, QuantumState)> {
    let perm = swap_perm(state, r1, r2)?;
    let sign = if accept { 1.0 } else { -1.0 };
    let (p, repr) = state.involution_projection(&[r1, r2], &perm, sign)?;
    if p <= BRANCH_EPS {
        return Err(Error::DegenerateBranch(p));
    }
    Ok((p, state.from_unnormalized(p, repr)))
}

/// Samples the SWAP test; returns whether it accepted and the post-state.
pub fn swap_test_execute<R: Rng + ?Sized>(
    state: &QuantumState,
    r1: &str,
    r2: &str,
    rng: &mut R,
) -> Result<(bool, QuantumState)> {
    let pa = swap_test_accept_prob(state, r1, r2)?;
    let accept = sample_index(&[pa, 1.0 - pa], rng) == 0;
    let (_, post) = swap_test_condition(state, r1, r2, accept)?;
    Ok((accept, post))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::random::{haar_state, random_density};
    use crate::qcore::{trace_distance, NodeId, RegisterLayout};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(q: usize) -> RegisterLayout {
        RegisterLayout::owned_by(NodeId(0), &[("A", q), ("B", q)]).unwrap()
    }

    fn one(name: &str, q: usize) -> RegisterLayout {
        RegisterLayout::single(name, q, NodeId(0))
    }

    #[test]
    fn identical_and_orthogonal_inputs() {
        let z = QuantumState::basis(one("A", 1), 0).unwrap();
        let o = QuantumState::basis(one("B", 1), 1).unwrap();
        let zz = z.tensor(&z.rename_register("A", "B").unwrap()).unwrap();
        assert!((swap_test_accept_prob(&zz, "A", "B").unwrap() - 1.0).abs() < 1e-12);
        let zo = z.tensor(&o).unwrap();
        assert!((swap_test_accept_prob(&zo, "A", "B").unwrap() - 0.5).abs() < 1e-12);
        let mm = QuantumState::maximally_mixed(pair(1)).unwrap();
        assert!((swap_test_accept_prob(&mm, "A", "B").unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn accepted_identical_input_is_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = haar_state(&one("A", 2), &mut rng).unwrap();
        let b = a.rename_register("A", "B").unwrap();
        let ab = a.tensor(&b).unwrap();
        let [acc, rej] = swap_test_branches(&ab, "A", "B").unwrap();
        assert!((acc.probability - 1.0).abs() < 1e-12);
        assert!(rej.state.is_none());
        let post = acc.state.unwrap();
        assert!((post.amplitudes().unwrap() - ab.amplitudes().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let l = RegisterLayout::owned_by(NodeId(0), &[("A", 1), ("B", 2)]).unwrap();
        let s = QuantumState::zero(l).unwrap();
        assert!(swap_test_accept_prob(&s, "A", "B").is_err());
    }

    fn explicit_swap_trace(state: &QuantumState, q: usize) -> f64 {
        let s = swap_operator(q).to_dense();
        let rho = state.partial_trace(&["A", "B"]).unwrap();
        let m: DMatrix<_> = s * rho.density().into_owned();
        0.5 + 0.5 * trace(&m).re
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn accept_matches_swap_trace(seed in any::<u64>(), q in 1usize..=2, mixed in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = RegisterLayout::owned_by(NodeId(0), &[("A", q), ("E", 1), ("B", q)]).unwrap();
            let st = if mixed {
                random_density(&l, 2, &mut rng).unwrap()
            } else {
                haar_state(&l, &mut rng).unwrap()
            };
            let p = swap_test_accept_prob(&st, "A", "B").unwrap();
            prop_assert!((p - explicit_swap_trace(&st, q)).abs() < 1e-10);
            let [acc, rej] = swap_test_branches(&st, "A", "B").unwrap();
            prop_assert!((acc.probability - p).abs() < 1e-10);
            prop_assert!((acc.probability + rej.probability - 1.0).abs() < 1e-10);
            if let Some(post) = acc.state {
                prop_assert!((swap_test_accept_prob(&post, "A", "B").unwrap() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn product_formula(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_density(&one("A", 1), 1, &mut rng).unwrap();
            let b = random_density(&one("B", 1), 1, &mut rng).unwrap();
            let joint = a.tensor(&b).unwrap();
            let p1 = swap_test_product(&a, &b).unwrap();
            let p2 = swap_test_accept_prob(&joint, "A", "B").unwrap();
            prop_assert!((p1 - p2).abs() < 1e-10);
        }

        #[test]
        fn certain_acceptance_gives_equal_marginals(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let st = haar_state(&pair(1), &mut rng).unwrap();
            let [acc, _] = swap_test_branches(&st, "A", "B").unwrap();
            let post = acc.state.unwrap();
            let ra = post.partial_trace(&["A"]).unwrap();
            let rb = post.partial_trace(&["B"]).unwrap().rename_register("B", "A").unwrap();
            prop_assert!(trace_distance(&ra, &rb).unwrap() < 1e-9);
        }
    }
}
