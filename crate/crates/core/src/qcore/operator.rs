use nalgebra::{DMatrix, DVector};

use super::kernel::Operator;
use super::linalg::{c, hermitian_eigenvalues, is_hermitian, max_abs_diff, psd_sqrt};
use super::C64;
use crate::error::{Error, Result};

/// Tolerance for algebraic identities (unitarity, completeness, normalization).
pub const ALGEBRAIC_TOL: f64 = 1e-10;
/// Floor for eigenvalues in positive-semidefiniteness checks.
pub const PSD_TOL: f64 = 1e-9;
/// Tolerance for optimization-attained maxima.
pub const OPTIMUM_TOL: f64 = 1e-6;

/// A unitary acting on named target registers (in the listed order).
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    targets: Vec<String>,
    op: Operator,
}

impl Unitary {
    pub fn new(targets: &[&str], matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() || !matrix.nrows().is_power_of_two() {
            return Err(Error::Argument(format!(
                "unitary matrix must be square with power-of-two side, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let id = DMatrix::<C64>::identity(matrix.nrows(), matrix.ncols());
        let dev = max_abs_diff(&(matrix.adjoint() * &matrix), &id);
        if dev > ALGEBRAIC_TOL {
            return Err(Error::Argument(format!("matrix is not unitary (|U†U - I| = {dev:e})")));
        }
        Ok(Unitary {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            op: Operator::Dense(matrix),
        })
    }

    pub fn permutation(targets: &[&str], perm: Vec<usize>) -> Result<Self> {
        if !perm.len().is_power_of_two() {
            return Err(Error::Argument("permutation size must be a power of two".into()));
        }
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::Argument("not a permutation of the basis".into()));
            }
            seen[p] = true;
        }
        Ok(Unitary {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            op: Operator::Permutation(perm),
        })
    }

    /// Wraps a pre-validated operator.
    pub fn from_operator(targets: &[&str], op: Operator) -> Result<Self> {
        match op {
            Operator::Dense(m) => Unitary::new(targets, m),
            Operator::Permutation(p) => Unitary::permutation(targets, p),
        }
    }

    pub fn targets(&self) -> Vec<&str> {
        self.targets.iter().map(String::as_str).collect()
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        self.op.to_dense()
    }

    pub fn dagger(&self) -> Unitary {
        Unitary {
            targets: self.targets.clone(),
            op: self.op.adjoint(),
        }
    }

    /// Same operator on differently named registers.
    pub fn retarget(&self, targets: &[&str]) -> Unitary {
        Unitary {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            op: self.op.clone(),
        }
    }

    pub fn is_permutation(&self) -> bool {
        matches!(self.op, Operator::Permutation(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub label: String,
    pub matrix: DMatrix<C64>,
    /// `E^{1/2}`, the Lüders instrument operator.
    pub(crate) kraus: DMatrix<C64>,
}

/// Positive operator-valued measure on named target registers.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    targets: Vec<String>,
    effects: Vec<Effect>,
}

impl Povm {
    pub fn new(targets: &[&str], effects: Vec<(String, DMatrix<C64>)>) -> Result<Self> {
        let Some((_, first)) = effects.first() else {
            return Err(Error::Argument("POVM needs at least one effect".into()));
        };
        let d = first.nrows();
        let mut sum = DMatrix::<C64>::zeros(d, d);
        let mut out = Vec::with_capacity(effects.len());
        for (label, m) in effects {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::Argument(format!("effect `{label}` has wrong dimension")));
            }
            if !is_hermitian(&m, ALGEBRAIC_TOL) {
                return Err(Error::Argument(format!("effect `{label}` is not Hermitian")));
            }
            let min = hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
            if min < -PSD_TOL {
                return Err(Error::Argument(format!(
                    "effect `{label}` is not positive semidefinite (min eigenvalue {min:e})"
                )));
            }
            sum += &m;
            let kraus = if is_projector(&m) { m.clone() } else { psd_sqrt(&m) };
            out.push(Effect {
                label,
                matrix: m,
                kraus,
            });
        }
        let dev = max_abs_diff(&sum, &DMatrix::identity(d, d));
        if dev > ALGEBRAIC_TOL {
            return Err(Error::Argument(format!("POVM effects do not sum to identity ({dev:e})")));
        }
        Ok(Povm {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            effects: out,
        })
    }

    /// Projective measurement in the orthonormal basis given by the columns of `basis`.
    pub fn from_basis(targets: &[&str], basis: &DMatrix<C64>, labels: &[&str]) -> Result<Self> {
        let d = basis.nrows();
        if basis.ncols() != d {
            return Err(Error::Argument("measurement basis must be square".into()));
        }
        let dev = max_abs_diff(&(basis.adjoint() * basis), &DMatrix::identity(d, d));
        if dev > ALGEBRAIC_TOL {
            return Err(Error::Argument(format!("measurement basis is not orthonormal ({dev:e})")));
        }
        let effects = (0..d)
            .map(|k| {
                let v: DVector<C64> = basis.column(k).into_owned();
                let m = &v * v.adjoint();
                Effect {
                    label: labels.get(k).map(|s| s.to_string()).unwrap_or_else(|| k.to_string()),
                    kraus: m.clone(),
                    matrix: m,
                }
            })
            .collect();
        Ok(Povm {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            effects,
        })
    }

    /// Two-outcome POVM `{E, I - E}` labelled `accept` / `reject`.
    pub fn binary(targets: &[&str], accept: DMatrix<C64>) -> Result<Self> {
        let d = accept.nrows();
        let reject = DMatrix::identity(d, d) - &accept;
        Povm::new(targets, vec![("accept".into(), accept), ("reject".into(), reject)])
    }

    pub fn targets(&self) -> Vec<&str> {
        self.targets.iter().map(String::as_str).collect()
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn retarget(&self, targets: &[&str]) -> Povm {
        Povm {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            effects: self.effects.clone(),
        }
    }
}

fn is_projector(m: &DMatrix<C64>) -> bool {
    max_abs_diff(&(m * m), m) <= ALGEBRAIC_TOL
}

/// Standard single- and two-qubit matrices.
pub mod gates {
    use super::*;

    pub fn identity(dim: usize) -> DMatrix<C64> {
        DMatrix::identity(dim, dim)
    }

    pub fn x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn y() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn z() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    pub fn h() -> DMatrix<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DMatrix::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)])
    }

    /// Controlled-NOT with the first qubit as control.
    pub fn cnot() -> DMatrix<C64> {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = c(1., 0.);
        m[(1, 1)] = c(1., 0.);
        m[(3, 2)] = c(1., 0.);
        m[(2, 3)] = c(1., 0.);
        m
    }

    /// Single-qubit measurement bases, columns `(|b0>, |b1>)`.
    pub fn z_basis() -> DMatrix<C64> {
        identity(2)
    }

    /// `(|+>, |->)`.
    pub fn x_basis() -> DMatrix<C64> {
        h()
    }

    /// `(|+'>, |-'>)` with `|±'> = (|0> ± i|1>)/√2`.
    pub fn y_basis() -> DMatrix<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DMatrix::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(0., s), c(0., -s)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_unitary_rejected() {
        let m = DMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(Unitary::new(&["a"], m).is_err());
    }

    #[test]
    fn basis_must_be_orthonormal() {
        let skew = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(Povm::from_basis(&["a"], &skew, &["0", "1"]).is_err());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let had = DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]);
        let povm = Povm::from_basis(&["a"], &had, &["+", "-"]).unwrap();
        let sum = &povm.effects()[0].matrix + &povm.effects()[1].matrix;
        assert!(max_abs_diff(&sum, &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn incomplete_povm_rejected() {
        let e = DMatrix::from_diagonal_element(2, 2, c(0.4, 0.0));
        assert!(Povm::new(&["a"], vec![("0".into(), e)]).is_err());
    }

    #[test]
    fn non_psd_effect_rejected() {
        let e0 = DMatrix::from_row_slice(2, 2, &[c(1.2, 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        let e1 = DMatrix::from_row_slice(2, 2, &[c(-0.2, 0.), c(0., 0.), c(0., 0.), c(1., 0.)]);
        assert!(Povm::new(&["a"], vec![("0".into(), e0), ("1".into(), e1)]).is_err());
    }

    #[test]
    fn bases_are_unitary() {
        for b in [gates::z_basis(), gates::x_basis(), gates::y_basis()] {
            assert!(Unitary::new(&["q"], b).is_ok());
        }
    }
}
