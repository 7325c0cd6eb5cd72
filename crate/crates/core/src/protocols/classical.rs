use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ff::{SetEqInstance, Side};

/// Bits for one count in `{0, …, (r+1)ℓ}`.
pub fn count_bits(inst: &SetEqInstance) -> usize {
    let max = ((inst.r + 1) * inst.ell) as u64;
    (u64::BITS - max.leading_zeros()) as usize
}

/// Bits for one universe element.
pub fn element_bits(inst: &SetEqInstance) -> usize {
    (u64::BITS - inst.universe.saturating_sub(1).leading_zeros()).max(1) as usize
}

/// What node `v_i` receives in the counting protocol: how often each
/// universe element occurs on each side of `v_0 … v_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountCertificate {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
}

/// What every node receives in the trivial protocol: all lists, per node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListCertificate {
    pub a: Vec<Vec<u64>>,
    pub b: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalOutcome {
    /// Local consistency checks per node.
    pub consistent: Vec<bool>,
    /// `v_r`'s verdict on `A = B` from its certificate.
    pub verdict: bool,
    /// All checks pass and the verdict is "equal".
    pub accepted: bool,
    pub certificate_bits: usize,
    pub message_bits: usize,
}

impl ClassicalOutcome {
    pub fn all_consistent(&self) -> bool {
        self.consistent.iter().all(|&c| c)
    }
}

fn counts(inst: &SetEqInstance, side: Side, upto: usize) -> Vec<u64> {
    let mut c = vec![0; inst.universe as usize];
    for l in &inst.lists(side)[..=upto] {
        for &x in l {
            c[x as usize] += 1;
        }
    }
    c
}

pub fn honest_counting(inst: &SetEqInstance) -> Vec<CountCertificate> {
    (0..=inst.r)
        .map(|i| CountCertificate {
            a: counts(inst, Side::A, i),
            b: counts(inst, Side::B, i),
        })
        .collect()
}

/// Runs the counting protocol. Node `v_i` sees its own certificate, the one
/// of `v_{i−1}` and its input.
pub fn run_classical_seteq_counting(inst: &SetEqInstance, certs: &[CountCertificate]) -> Result<ClassicalOutcome> {
    let u = inst.universe as usize;
    let w = count_bits(inst);
    if certs.len() != inst.r + 1 {
        return Err(Error::Argument(format!("{} certificates for {} nodes", certs.len(), inst.r + 1)));
    }
    for (i, c) in certs.iter().enumerate() {
        if c.a.len() != u || c.b.len() != u {
            return Err(Error::Argument(format!("certificate of v{i} has the wrong length")));
        }
        if c.a.iter().chain(&c.b).any(|&x| x >> w != 0) {
            return Err(Error::Argument(format!("certificate of v{i} does not fit in {w}-bit counts")));
        }
    }
    let own = |i: usize, side: Side| {
        let mut c = vec![0u64; u];
        for &x in &inst.lists(side)[i] {
            c[x as usize] += 1;
        }
        c
    };
    let consistent = (0..=inst.r)
        .map(|i| {
            let (oa, ob) = (own(i, Side::A), own(i, Side::B));
            let (pa, pb) = if i == 0 {
                (vec![0; u], vec![0; u])
            } else {
                (certs[i - 1].a.clone(), certs[i - 1].b.clone())
            };
            (0..u).all(|x| certs[i].a[x] == pa[x] + oa[x] && certs[i].b[x] == pb[x] + ob[x])
        })
        .collect::<Vec<_>>();
    let last = &certs[inst.r];
    let verdict = last.a == last.b;
    let accepted = consistent.iter().all(|&c| c) && verdict;
    Ok(ClassicalOutcome {
        consistent,
        verdict,
        accepted,
        certificate_bits: 2 * u * w,
        message_bits: 2 * u * w,
    })
}

/// Corrupts an honest counting certificate: a few random entries, a shift
/// propagated from some node to the right, or a fully random assignment.
pub fn fuzz_counting<R: Rng + ?Sized>(inst: &SetEqInstance, rng: &mut R) -> Vec<CountCertificate> {
    let mut certs = honest_counting(inst);
    let u = inst.universe as usize;
    let top = 1u64 << count_bits(inst);
    match rng.random_range(0..3) {
        0 => {
            for _ in 0..rng.random_range(1..=3) {
                let i = rng.random_range(0..=inst.r);
                let x = rng.random_range(0..u);
                let v = rng.random_range(0..top);
                if rng.random_bool(0.5) {
                    certs[i].a[x] = v;
                } else {
                    certs[i].b[x] = v;
                }
            }
        }
        1 => {
            let from = rng.random_range(0..=inst.r);
            let x = rng.random_range(0..u);
            let side_a = rng.random_bool(0.5);
            let up = rng.random_bool(0.5);
            for c in &mut certs[from..] {
                let e = if side_a { &mut c.a[x] } else { &mut c.b[x] };
                *e = if up { (*e + 1).min(top - 1) } else { e.saturating_sub(1) };
            }
        }
        _ => {
            for c in &mut certs {
                for e in c.a.iter_mut().chain(c.b.iter_mut()) {
                    *e = rng.random_range(0..top);
                }
            }
        }
    }
    certs
}

pub fn honest_lists(inst: &SetEqInstance) -> Vec<ListCertificate> {
    let c = ListCertificate {
        a: inst.a.clone(),
        b: inst.b.clone(),
    };
    vec![c; inst.r + 1]
}

/// Runs the trivial protocol: each node checks its own slot, compares with
/// both neighbours and recomputes `A = B`.
pub fn run_classical_seteq_trivial(inst: &SetEqInstance, certs: &[ListCertificate]) -> Result<ClassicalOutcome> {
    if certs.len() != inst.r + 1 {
        return Err(Error::Argument(format!("{} certificates for {} nodes", certs.len(), inst.r + 1)));
    }
    let shape_ok = |c: &ListCertificate| {
        [&c.a, &c.b].iter().all(|s| {
            s.len() == inst.r + 1 && s.iter().all(|l| l.len() == inst.ell && l.iter().all(|&x| x < inst.universe))
        })
    };
    let consistent: Vec<bool> = (0..=inst.r)
        .map(|i| {
            let c = &certs[i];
            shape_ok(c)
                && c.a[i] == inst.a[i]
                && c.b[i] == inst.b[i]
                && (i == 0 || certs[i - 1] == *c)
                && (i == inst.r || certs[i + 1] == *c)
        })
        .collect();
    let verdict = {
        let c = &certs[inst.r];
        let mut a: Vec<u64> = c.a.concat();
        let mut b: Vec<u64> = c.b.concat();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    };
    let bits = 2 * (inst.r + 1) * inst.ell * element_bits(inst);
    Ok(ClassicalOutcome {
        accepted: consistent.iter().all(|&c| c) && verdict,
        consistent,
        verdict,
        certificate_bits: bits,
        message_bits: bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inst(a: Vec<Vec<u64>>, b: Vec<Vec<u64>>, universe: u64) -> SetEqInstance {
        let r = a.len() - 1;
        let ell = a[0].len();
        SetEqInstance::with_smallest_prime(r, ell, universe, 1.0, a, b).unwrap()
    }

    #[test]
    fn bit_widths() {
        let i = inst(vec![vec![0, 1]; 3], vec![vec![1, 0]; 3], 5);
        assert_eq!(count_bits(&i), 3);
        assert_eq!(element_bits(&i), 3);
    }

    #[test]
    fn honest_counting_decides() {
        let yes = inst(vec![vec![0, 1], vec![2, 2]], vec![vec![2, 1], vec![0, 2]], 3);
        let out = run_classical_seteq_counting(&yes, &honest_counting(&yes)).unwrap();
        assert!(out.accepted && out.all_consistent());
        let no = inst(vec![vec![0, 1], vec![2, 2]], vec![vec![2, 1], vec![0, 1]], 3);
        let out = run_classical_seteq_counting(&no, &honest_counting(&no)).unwrap();
        assert!(out.all_consistent());
        assert!(!out.verdict && !out.accepted);
    }

    #[test]
    fn counting_soundness_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..400 {
            let equal = rng.random_bool(0.5);
            let (r, ell) = (rng.random_range(0..4), rng.random_range(1..4));
            let i = SetEqInstance::random(&mut rng, r, ell, 4, 1.0, equal).unwrap();
            let certs = fuzz_counting(&i, &mut rng);
            let out = run_classical_seteq_counting(&i, &certs).unwrap();
            if out.all_consistent() {
                assert_eq!(out.verdict, i.is_equal());
            }
        }
    }

    #[test]
    fn trivial_protocol_checks() {
        let i = inst(vec![vec![0], vec![1], vec![2]], vec![vec![2], vec![0], vec![1]], 3);
        let honest = honest_lists(&i);
        let out = run_classical_seteq_trivial(&i, &honest).unwrap();
        assert!(out.accepted);

        let mut split = honest.clone();
        split[2].a[1] = vec![0];
        let out = run_classical_seteq_trivial(&i, &split).unwrap();
        assert_eq!(out.consistent, vec![true, false, false]);

        let mut lie = honest.clone();
        for c in &mut lie {
            c.a[0] = vec![1];
        }
        let out = run_classical_seteq_trivial(&i, &lie).unwrap();
        assert!(!out.consistent[0] && out.consistent[1] && out.consistent[2]);
    }
}
