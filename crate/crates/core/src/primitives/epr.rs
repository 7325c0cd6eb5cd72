use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::linalg::{c, projector};
use crate::qcore::{gates, Povm, C64};

/// Local measurement basis of the EPR test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    /// `k = 1, 2, 3` selects Z, X, Y.
    pub fn from_index(k: usize) -> Result<Basis> {
        match k {
            1 => Ok(Basis::Z),
            2 => Ok(Basis::X),
            3 => Ok(Basis::Y),
            _ => Err(Error::Argument(format!("basis index {k} not in 1..=3"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 1,
            Basis::X => 2,
            Basis::Y => 3,
        }
    }

    /// Columns are the two basis vectors, outcome 0 first.
    pub fn matrix(self) -> DMatrix<C64> {
        match self {
            Basis::Z => gates::z_basis(),
            Basis::X => gates::x_basis(),
            Basis::Y => gates::y_basis(),
        }
    }

    /// Z and X accept equal outcomes, Y accepts opposite ones.
    pub fn accepts(self, a: usize, b: usize) -> bool {
        match self {
            Basis::Z | Basis::X => a == b,
            Basis::Y => a != b,
        }
    }
}

pub fn local_basis(k: usize) -> Result<DMatrix<C64>> {
    Basis::from_index(k).map(Basis::matrix)
}

pub fn phi_plus() -> DVector<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_vec(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)])
}

/// Accepting effects `E₁, E₂, E₃` on a qubit pair.
pub fn epr_test_effects() -> [DMatrix<C64>; 3] {
    Basis::ALL.map(|b| {
        let m = b.matrix();
        let mut e = DMatrix::zeros(4, 4);
        for x in 0..2 {
            for y in 0..2 {
                if b.accepts(x, y) {
                    let v = m.column(x).kronecker(&m.column(y));
                    e += projector(&v.into_owned());
                }
            }
        }
        e
    })
}

/// The binary POVMs `{E_k, I − E_k}` on the register pair `(a, b)`.
pub fn epr_test_povms(a: &str, b: &str) -> Result<[Povm; 3]> {
    let [e1, e2, e3] = epr_test_effects();
    Ok([
        Povm::binary(&[a, b], e1)?,
        Povm::binary(&[a, b], e2)?,
        Povm::binary(&[a, b], e3)?,
    ])
}

/// `Ω = (E₁ + E₂ + E₃)/3`.
pub fn omega() -> DMatrix<C64> {
    let [e1, e2, e3] = epr_test_effects();
    (e1 + e2 + e3) / c(3.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::max_abs_diff;

    fn basis(i: usize) -> DVector<C64> {
        let mut v = DVector::zeros(4);
        v[i] = c(1.0, 0.0);
        v
    }

    fn expect(e: &DMatrix<C64>, v: &DVector<C64>) -> f64 {
        (v.adjoint() * e * v)[(0, 0)].re
    }

    #[test]
    fn omega_decomposition() {
        let target = projector(&phi_plus()) * c(2.0 / 3.0, 0.0)
            + DMatrix::identity(4, 4) * c(1.0 / 3.0, 0.0);
        assert!(max_abs_diff(&omega(), &target) < 1e-12);
    }

    #[test]
    fn phi_plus_passes_every_test() {
        for e in epr_test_effects() {
            assert!((expect(&e, &phi_plus()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn product_zero_state() {
        let [e1, e2, e3] = epr_test_effects();
        assert!((expect(&e1, &basis(0)) - 1.0).abs() < 1e-12);
        assert!((expect(&e2, &basis(0)) - 0.5).abs() < 1e-12);
        assert!((expect(&e3, &basis(0)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn effects_are_projectors() {
        for e in epr_test_effects() {
            assert!(max_abs_diff(&(&e * &e), &e) < 1e-12);
        }
        assert!(epr_test_povms("a", "b").is_ok());
    }
}
