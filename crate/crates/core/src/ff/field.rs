use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime `>= n`.
pub fn next_prime(n: u64) -> u64 {
    let mut k = n.max(2);
    while !is_prime(k) {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElement {
    value: u64,
    p: u64,
}

impl FieldElement {
    pub fn new(value: u64, p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Argument(format!("modulus {p} is not prime")));
        }
        Ok(FieldElement { value: value % p, p })
    }

    pub(crate) fn raw(value: u64, p: u64) -> Self {
        FieldElement { value: value % p, p }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> u64 {
        self.p
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = FieldElement::raw(1, self.p);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    pub fn inverse(self) -> Option<Self> {
        (!self.is_zero()).then(|| self.pow(self.p - 2))
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.p)
    }
}

impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, o: Self) -> Self {
        debug_assert_eq!(self.p, o.p);
        FieldElement::raw(self.value + o.value, self.p)
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, o: Self) -> Self {
        debug_assert_eq!(self.p, o.p);
        FieldElement::raw(self.value + self.p - o.value, self.p)
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> Self {
        FieldElement::raw(self.p - self.value, self.p)
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, o: Self) -> Self {
        debug_assert_eq!(self.p, o.p);
        let v = (self.value as u128 * o.value as u128) % self.p as u128;
        FieldElement::raw(v as u64, self.p)
    }
}

/// `α(s) = ∏ (s − a_i)` over a node's input list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListPolynomial {
    roots: Vec<FieldElement>,
    p: u64,
}

impl ListPolynomial {
    pub fn new(roots: &[u64], p: u64) -> Result<Self> {
        if roots.is_empty() {
            return Err(Error::Argument("a list polynomial needs at least one root".into()));
        }
        let roots = roots
            .iter()
            .map(|&a| FieldElement::new(a, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(ListPolynomial { roots, p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn roots(&self) -> &[FieldElement] {
        &self.roots
    }

    pub fn eval(&self, s: FieldElement) -> Result<FieldElement> {
        if s.p != self.p {
            return Err(Error::Argument(format!(
                "evaluating a polynomial over F_{} at an element of F_{}",
                self.p, s.p
            )));
        }
        Ok(self.eval_at(s.value))
    }

    /// Evaluation at the integer `s mod p`.
    pub fn eval_at(&self, s: u64) -> FieldElement {
        let s = FieldElement::raw(s, self.p);
        self.roots
            .iter()
            .fold(FieldElement::raw(1, self.p), |acc, &a| acc * (s - a))
    }
}
