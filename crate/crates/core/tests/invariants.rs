use dqma::adversary::{realize, AdversaryFamily, PairState};
use dqma::ff::SetEqInstance;
use dqma::netsim::{wilson_interval, Mode};
use dqma::primitives::{swap_test_accept_prob, swap_test_product};
use dqma::protocols::{honest_counting, run_classical_seteq_counting, run_zh_engine, run_zh_locc, zh_descriptor};
use dqma::qcore::random::{haar_state, haar_unitary, random_density};
use dqma::qcore::{trace_distance, NodeId, QuantumState, Register, RegisterLayout, Unitary};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn state(name: &str, q: usize, mixed: bool, rng: &mut ChaCha8Rng) -> QuantumState {
    let l = RegisterLayout::single(name, q, NodeId(0));
    if mixed {
        random_density(&l, 1, rng).unwrap()
    } else {
        haar_state(&l, rng).unwrap()
    }
}

fn pair_state(i: u8) -> PairState {
    [PairState::Zeros, PairState::PhiMinus, PairState::PsiPlus, PairState::MaximallyMixed][i as usize % 4]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn swap_acceptance_is_symmetric_and_bounded(seed: u64, q in 1usize..=2, mixed: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = state("A", q, mixed, &mut rng);
        let b = state("B", q, !mixed, &mut rng);
        let p = swap_test_accept_prob(&a.tensor(&b).unwrap(), "A", "B").unwrap();
        let rev = swap_test_accept_prob(&a.tensor(&b).unwrap(), "B", "A").unwrap();
        prop_assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&p));
        prop_assert!((p - rev).abs() < 1e-12);
        prop_assert!((p - swap_test_product(&a, &b).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn local_unitaries_keep_reduced_states(seed: u64, qa in 1usize..=2, qb in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = RegisterLayout::new(vec![Register::new("A", qa, NodeId(0)), Register::new("B", qb, NodeId(1))]).unwrap();
        let s = random_density(&layout, 1, &mut rng).unwrap();
        let u = Unitary::new(&["B"], haar_unitary(1 << qb, &mut rng)).unwrap();
        let t = s.apply_unitary(&u).unwrap();
        prop_assert!((t.trace() - 1.0).abs() < 1e-10);
        prop_assert!((t.purity() - s.purity()).abs() < 1e-10);
        let d = trace_distance(&s.partial_trace(&["A"]).unwrap(), &t.partial_trace(&["A"]).unwrap()).unwrap();
        prop_assert!(d < 1e-10);
    }

    #[test]
    fn zh_closed_form_matches_engine(blocks in proptest::collection::btree_set(1usize..=2, 0..=2), kind: u8) {
        let n = 2;
        let fam = AdversaryFamily::EprCorrupt { blocks: blocks.into_iter().collect(), replacement: pair_state(kind) };
        let s = realize(&fam, &zh_descriptor(n).unwrap()).unwrap();
        let fast = run_zh_locc(n, &s, Mode::Exact).unwrap().accept_probability();
        let slow = run_zh_engine(n, &s, Mode::Exact).unwrap().accept_probability();
        prop_assert!((fast - slow).abs() < 1e-10, "{} vs {}", fast, slow);
    }

    #[test]
    fn multiset_equality_ignores_order(seed: u64, r in 1usize..=4, ell in 1usize..=4, equal: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inst = SetEqInstance::random(&mut rng, r, ell, 8, 1.0, equal).unwrap();
        prop_assert_eq!(inst.is_equal(), equal);
        for list in inst.b.iter_mut().chain(inst.a.iter_mut()) {
            list.shuffle(&mut rng);
        }
        prop_assert_eq!(inst.is_equal(), equal);
        let out = run_classical_seteq_counting(&inst, &honest_counting(&inst)).unwrap();
        prop_assert!(out.all_consistent());
        prop_assert_eq!(out.verdict, equal);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1usize..5000, frac in 0.0f64..=1.0) {
        let k = ((trials as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(k, trials);
        let p = k as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }
}

#[test]
fn shuffled_unequal_instances_stay_unequal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let r = rng.random_range(1..=3);
        let inst = SetEqInstance::random(&mut rng, r, 3, 5, 1.0, false).unwrap();
        assert!(!inst.is_equal());
    }
}
