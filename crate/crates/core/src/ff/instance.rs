use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::field::{is_prime, next_prime, FieldElement, ListPolynomial};
use crate::error::{Error, Result};

fn default_c_tilde() -> f64 {
    4.0
}

/// Set Equality on the line `v_0 … v_r`: node `j` holds lists `a[j]`, `b[j]`
/// of `ell` elements from the universe `{0, …, universe − 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEqInstance {
    pub r: usize,
    pub ell: usize,
    pub universe: u64,
    pub p: u64,
    #[serde(default = "default_c_tilde")]
    pub c_tilde: f64,
    pub a: Vec<Vec<u64>>,
    pub b: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

impl SetEqInstance {
    /// Builds an instance choosing `p` as the smallest prime `≥ c̃·ℓ·(r+1)·|U|`.
    pub fn with_smallest_prime(
        r: usize,
        ell: usize,
        universe: u64,
        c_tilde: f64,
        a: Vec<Vec<u64>>,
        b: Vec<Vec<u64>>,
    ) -> Result<Self> {
        let bound = (c_tilde * ell as f64 * (r + 1) as f64 * universe as f64).ceil() as u64;
        let inst = SetEqInstance {
            r,
            ell,
            universe,
            p: next_prime(bound),
            c_tilde,
            a,
            b,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.ell == 0 {
            return bad("ell must be at least 1".into());
        }
        if self.universe == 0 {
            return bad("universe must be non-empty".into());
        }
        if !is_prime(self.p) {
            return bad(format!("p = {} is not prime", self.p));
        }
        let need = self.c_tilde * self.ell as f64 * (self.r + 1) as f64 * self.universe as f64;
        if (self.p as f64) < need {
            return bad(format!("p = {} is below c̃·ℓ·(r+1)·|U| = {need}", self.p));
        }
        for (side, lists) in [("a", &self.a), ("b", &self.b)] {
            if lists.len() != self.r + 1 {
                return bad(format!("{side} has {} node lists, expected {}", lists.len(), self.r + 1));
            }
            for (j, l) in lists.iter().enumerate() {
                if l.len() != self.ell {
                    return bad(format!("{side}[{j}] has {} entries, expected {}", l.len(), self.ell));
                }
                if let Some(x) = l.iter().find(|&&x| x >= self.universe) {
                    return bad(format!("{side}[{j}] entry {x} outside the universe"));
                }
            }
        }
        Ok(())
    }

    pub fn lists(&self, side: Side) -> &[Vec<u64>] {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }

    pub fn poly(&self, side: Side, node: usize) -> Result<ListPolynomial> {
        ListPolynomial::new(&self.lists(side)[node], self.p)
    }

    /// Element counts of one side over all nodes.
    pub fn multiset(&self, side: Side) -> BTreeMap<u64, usize> {
        let mut m = BTreeMap::new();
        for l in self.lists(side) {
            for &x in l {
                *m.entry(x).or_insert(0) += 1;
            }
        }
        m
    }

    /// Whether `A = B` as multisets.
    pub fn is_equal(&self) -> bool {
        self.multiset(Side::A) == self.multiset(Side::B)
    }

    /// Random lists; when `equal` the B lists are a shuffle of the A lists,
    /// otherwise one entry of B is shifted to a different element.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        r: usize,
        ell: usize,
        universe: u64,
        c_tilde: f64,
        equal: bool,
    ) -> Result<Self> {
        if !equal && universe < 2 {
            return Err(Error::Argument("unequal instances need |U| >= 2".into()));
        }
        let total = ell * (r + 1);
        let a_all: Vec<u64> = (0..total).map(|_| rng.random_range(0..universe)).collect();
        let mut b_all = a_all.clone();
        b_all.shuffle(rng);
        if !equal && total > 0 {
            let i = rng.random_range(0..total);
            b_all[i] = (b_all[i] + rng.random_range(1..universe)) % universe;
        }
        let split = |v: Vec<u64>| v.chunks(ell.max(1)).map(|c| c.to_vec()).collect::<Vec<_>>();
        SetEqInstance::with_smallest_prime(r, ell, universe, c_tilde, split(a_all), split(b_all))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: SetEqInstance = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `p_A(s) = ∏_j α_j(s)` (or `p_B`).
pub fn global_poly_eval(inst: &SetEqInstance, side: Side, s: FieldElement) -> Result<FieldElement> {
    let mut acc = FieldElement::new(1, inst.p)?;
    for j in 0..=inst.r {
        acc = acc * inst.poly(side, j)?.eval(s)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn agreeing(inst: &SetEqInstance) -> usize {
        (0..inst.p)
            .filter(|&s| {
                let s = FieldElement::new(s, inst.p).unwrap();
                global_poly_eval(inst, Side::A, s).unwrap() == global_poly_eval(inst, Side::B, s).unwrap()
            })
            .count()
    }

    #[test]
    fn json_round_trip() {
        let inst = SetEqInstance::with_smallest_prime(1, 1, 2, 1.0, vec![vec![0], vec![1]], vec![vec![1], vec![0]]).unwrap();
        let back = SetEqInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, back);
        assert!(SetEqInstance::from_json(r#"{"r":1,"ell":1,"universe":2,"p":4,"a":[[0],[1]],"b":[[0],[1]]}"#).is_err());
    }

    #[test]
    fn single_root_vanishes() {
        let inst = SetEqInstance::with_smallest_prime(0, 1, 3, 1.0, vec![vec![2]], vec![vec![2]]).unwrap();
        let s = FieldElement::new(2, inst.p).unwrap();
        assert!(global_poly_eval(&inst, Side::A, s).unwrap().is_zero());
    }

    fn random_instance(seed: u64, equal: bool) -> SetEqInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.random_range(0..3usize);
        let ell = rng.random_range(1..4usize);
        let universe = rng.random_range(2..6u64);
        SetEqInstance::random(&mut rng, r, ell, universe, 1.0, equal).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn equal_multisets_agree_everywhere(seed in any::<u64>()) {
            let inst = random_instance(seed, true);
            prop_assert!(inst.is_equal());
            prop_assert_eq!(agreeing(&inst), inst.p as usize);
        }

        #[test]
        fn unequal_multisets_agree_rarely(seed in any::<u64>()) {
            let inst = random_instance(seed, false);
            prop_assert!(!inst.is_equal());
            prop_assert!(inst.p <= 64);
            prop_assert!(agreeing(&inst) <= inst.ell * (inst.r + 1));
        }
    }
}
