use nalgebra::DVector;

use super::field::ListPolynomial;
use crate::error::{Error, Result};
use crate::qcore::linalg::c;
use crate::qcore::{NodeId, QuantumState, RegisterLayout, Unitary, C64};

/// `(⌈log₂ p⌉, ⌈log₂(r+1)⌉)`: qubits of each field register and of the flag.
pub fn fingerprint_widths(p: u64, r: usize) -> (usize, usize) {
    let bits = |n: u64| if n <= 1 { 0 } else { 64 - (n - 1).leading_zeros() as usize };
    (bits(p), bits(r as u64 + 1))
}

/// Index arithmetic for the `|s⟩|t⟩|flag⟩` basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FingerprintLayout {
    pub p: u64,
    pub r: usize,
    pub field_qubits: usize,
    pub flag_qubits: usize,
}

impl FingerprintLayout {
    pub fn new(p: u64, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Argument("fingerprints need r >= 1".into()));
        }
        let (w, f) = fingerprint_widths(p, r);
        Ok(FingerprintLayout {
            p,
            r,
            field_qubits: w,
            flag_qubits: f,
        })
    }

    pub fn qubits(&self) -> usize {
        2 * self.field_qubits + self.flag_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits()
    }

    pub fn index(&self, s: u64, t: u64, flag: u64) -> usize {
        (((s << self.field_qubits) | t) << self.flag_qubits | flag) as usize
    }

    pub fn split(&self, i: usize) -> (u64, u64, u64) {
        let i = i as u64;
        let flag = i & ((1 << self.flag_qubits) - 1);
        let t = (i >> self.flag_qubits) & ((1 << self.field_qubits) - 1);
        let s = i >> (self.flag_qubits + self.field_qubits);
        (s, t, flag)
    }

    pub fn register_layout(&self, owner: NodeId) -> Result<RegisterLayout> {
        RegisterLayout::owned_by(
            owner,
            &[("s", self.field_qubits), ("t", self.field_qubits), ("flag", self.flag_qubits)],
        )
    }
}

/// Amplitudes of `(1/√p) Σ_s |s⟩|α(s)⟩|0⟩` in the joined basis.
pub fn fingerprint_amplitudes(poly: &ListPolynomial, r: usize) -> Result<DVector<C64>> {
    let fl = FingerprintLayout::new(poly.modulus(), r)?;
    crate::qcore::check_cap(fl.qubits(), crate::error::Representation::Pure)?;
    let mut v = DVector::zeros(fl.dim());
    let a = 1.0 / (fl.p as f64).sqrt();
    for s in 0..fl.p {
        v[fl.index(s, poly.eval_at(s).value(), 0)] = c(a, 0.0);
    }
    Ok(v)
}

/// The fingerprint state on registers `s`, `t`, `flag`, owned by `v_0`.
pub fn build_fingerprint_state(poly: &ListPolynomial, r: usize) -> Result<QuantumState> {
    let fl = FingerprintLayout::new(poly.modulus(), r)?;
    let layout = fl.register_layout(NodeId(0))?;
    QuantumState::pure(layout, fingerprint_amplitudes(poly, r)?)
}

/// Basis permutation realizing `G` for one node's polynomial.
pub fn g_permutation(poly: &ListPolynomial, r: usize) -> Result<Vec<usize>> {
    let fl = FingerprintLayout::new(poly.modulus(), r)?;
    let dim = fl.dim();
    let mut image: Vec<Option<usize>> = vec![None; dim];
    let mut hit = vec![false; dim];
    let p = fl.p;
    for i in 0..dim {
        let (s, t, nu) = fl.split(i);
        let target = if s >= p || t >= p {
            Some(i)
        } else if nu == 0 {
            let a = poly.eval_at(s);
            if a.is_zero() {
                Some(fl.index(s, t, 1))
            } else {
                let at = (a.value() as u128 * t as u128 % p as u128) as u64;
                Some(fl.index(s, at, 0))
            }
        } else if (nu as usize) < r {
            Some(fl.index(s, t, nu + 1))
        } else {
            None
        };
        if let Some(j) = target {
            debug_assert!(!hit[j]);
            hit[j] = true;
            image[i] = Some(j);
        }
    }
    let mut free = (0..dim).filter(|&j| !hit[j]);
    Ok(image
        .into_iter()
        .map(|m| m.unwrap_or_else(|| free.next().expect("partial map is injective")))
        .collect())
}

/// `G` as a unitary on registers `s`, `t`, `flag`.
pub fn build_g_unitary(poly: &ListPolynomial, r: usize) -> Result<Unitary> {
    Unitary::permutation(&["s", "t", "flag"], g_permutation(poly, r)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ff::FieldElement;
    use crate::qcore::linalg::max_abs_diff;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn widths() {
        assert_eq!(fingerprint_widths(5, 1), (3, 1));
        assert_eq!(fingerprint_widths(8, 3), (3, 2));
        assert_eq!(fingerprint_widths(3, 2), (2, 2));
    }

    #[test]
    fn small_fingerprint_amplitudes() {
        let q = ListPolynomial::new(&[1], 3).unwrap();
        let st = build_fingerprint_state(&q, 1).unwrap();
        let fl = FingerprintLayout::new(3, 1).unwrap();
        let v = st.amplitudes().unwrap();
        let a = 1.0 / 3f64.sqrt();
        let mut nonzero = 0;
        for s in 0..3u64 {
            let alpha = (s + 3 - 1) % 3;
            assert!((v[fl.index(s, alpha, 0)].re - a).abs() < 1e-12);
            nonzero += 1;
        }
        assert_eq!(v.iter().filter(|z| z.norm() > 0.0).count(), nonzero);
    }

    #[test]
    fn g_examples() {
        let q = ListPolynomial::new(&[2], 5).unwrap();
        let fl = FingerprintLayout::new(5, 1).unwrap();
        let g = g_permutation(&q, 1).unwrap();
        assert_eq!(g[fl.index(3, 1, 0)], fl.index(3, 1, 0));
        assert_eq!(g[fl.index(2, 4, 0)], fl.index(2, 4, 1));
        assert_eq!(g[fl.index(4, 3, 0)], fl.index(4, 1, 0));
        let u = build_g_unitary(&q, 1).unwrap();
        let m = u.matrix();
        let id = DMatrix::identity(m.nrows(), m.ncols());
        assert!(max_abs_diff(&(m.adjoint() * &m), &id) < 1e-10);
    }

    #[test]
    fn a3_increments_flag() {
        let q = ListPolynomial::new(&[0, 1], 7).unwrap();
        let fl = FingerprintLayout::new(7, 3).unwrap();
        let g = g_permutation(&q, 3).unwrap();
        for s in 0..7 {
            for t in 0..7 {
                assert_eq!(g[fl.index(s, t, 1)], fl.index(s, t, 2));
                assert_eq!(g[fl.index(s, t, 2)], fl.index(s, t, 3));
            }
        }
        // Out-of-field states are fixed.
        assert_eq!(g[fl.index(7, 2, 1)], fl.index(7, 2, 1));
    }

    /// Classical oracle: follow one basis state through the honest rules.
    fn honest_path(polys: &[ListPolynomial], s: u64) -> (u64, u64) {
        let p = polys[0].modulus();
        let mut t = polys[0].eval_at(s).value();
        let mut flag = 0u64;
        for q in &polys[1..] {
            if flag == 0 {
                let a = q.eval_at(s).value();
                if a == 0 {
                    flag = 1;
                } else {
                    t = a * t % p;
                }
            } else {
                flag += 1;
            }
        }
        (t, flag)
    }

    #[test]
    fn honest_composition_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &p in &[2u64, 3, 5, 7] {
            for r in 1..=3usize {
                for _ in 0..4 {
                    let ell = rng.random_range(1..=2usize);
                    let polys: Vec<ListPolynomial> = (0..=r)
                        .map(|_| {
                            let roots: Vec<u64> = (0..ell).map(|_| rng.random_range(0..p)).collect();
                            ListPolynomial::new(&roots, p).unwrap()
                        })
                        .collect();
                    let mut st = build_fingerprint_state(&polys[0], r).unwrap();
                    for q in &polys[1..] {
                        st = st.apply_unitary(&build_g_unitary(q, r).unwrap()).unwrap();
                    }
                    let fl = FingerprintLayout::new(p, r).unwrap();
                    let v = st.amplitudes().unwrap();
                    let a = 1.0 / (p as f64).sqrt();
                    let mut expected = DVector::<C64>::zeros(fl.dim());
                    for s in 0..p {
                        let (t, flag) = honest_path(&polys, s);
                        expected[fl.index(s, t, flag)] = c(a, 0.0);
                        let p_a = polys
                            .iter()
                            .fold(FieldElement::new(1, p).unwrap(), |acc, q| acc * q.eval_at(s));
                        let later_root = polys[1..].iter().any(|q| q.eval_at(s).is_zero());
                        // Flag is raised exactly when a node after v_0 has s as a root;
                        // otherwise t carries p_A(s).
                        assert_eq!(flag != 0, later_root);
                        if !later_root {
                            assert_eq!(t, p_a.value());
                        }
                    }
                    assert!((v - expected).norm() < 1e-12);
                }
            }
        }
    }
}
