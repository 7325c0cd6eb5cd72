//! Index bookkeeping and the in-place kernels every state operation is built on.

use nalgebra::DMatrix;

use super::layout::RegisterLayout;
use super::C64;
use crate::error::{Error, Result};

/// Splits a global basis index into a target part and a rest part:
/// `global = target[t] | rest[k]`.
pub(crate) struct IndexMap {
    pub target: Vec<usize>,
    pub rest: Vec<usize>,
}

impl IndexMap {
    pub fn new(layout: &RegisterLayout, targets: &[&str]) -> Result<Self> {
        let mut target_pos = Vec::new();
        for (i, name) in targets.iter().enumerate() {
            if targets[..i].contains(name) {
                return Err(Error::Layout(format!("register `{name}` targeted twice")));
            }
            target_pos.extend(layout.bit_positions(name)?);
        }
        let total = layout.total_qubits();
        let rest_pos: Vec<usize> = (0..total)
            .rev()
            .filter(|p| !target_pos.contains(p))
            .collect();
        Ok(IndexMap {
            target: offsets(&target_pos),
            rest: offsets(&rest_pos),
        })
    }

    pub fn target_dim(&self) -> usize {
        self.target.len()
    }
}

/// For each `t` in `0..2^len`, the global index whose bit `positions[j]`
/// carries bit `j` of `t` counted from the most significant end.
pub(crate) fn offsets(positions: &[usize]) -> Vec<usize> {
    let q = positions.len();
    let mut out = vec![0usize; 1 << q];
    for (j, &pos) in positions.iter().enumerate() {
        let bit = 1usize << (q - 1 - j);
        let global = 1usize << pos;
        for (t, o) in out.iter_mut().enumerate() {
            if t & bit != 0 {
                *o |= global;
            }
        }
    }
    out
}

/// Local operator on a target subspace.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Dense(DMatrix<C64>),
    /// Basis permutation `|i> -> |perm[i]>`.
    Permutation(Vec<usize>),
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::Permutation(p) => p.len(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Permutation(p) => {
                let mut m = DMatrix::zeros(p.len(), p.len());
                for (i, &j) in p.iter().enumerate() {
                    m[(j, i)] = C64::new(1.0, 0.0);
                }
                m
            }
        }
    }

    pub fn adjoint(&self) -> Operator {
        match self {
            Operator::Dense(m) => Operator::Dense(m.adjoint()),
            Operator::Permutation(p) => {
                let mut inv = vec![0; p.len()];
                for (i, &j) in p.iter().enumerate() {
                    inv[j] = i;
                }
                Operator::Permutation(inv)
            }
        }
    }

    /// Entrywise complex conjugate (permutations are real).
    pub fn conj(&self) -> Operator {
        match self {
            Operator::Dense(m) => Operator::Dense(m.map(|z| z.conj())),
            Operator::Permutation(p) => Operator::Permutation(p.clone()),
        }
    }

    /// `self ⊗ other`, first factor most significant.
    pub fn kron(&self, other: &Operator) -> Operator {
        match (self, other) {
            (Operator::Permutation(a), Operator::Permutation(b)) => {
                let db = b.len();
                let mut p = Vec::with_capacity(a.len() * db);
                for &ia in a {
                    for &ib in b {
                        p.push(ia * db + ib);
                    }
                }
                Operator::Permutation(p)
            }
            _ => Operator::Dense(self.to_dense().kronecker(&other.to_dense())),
        }
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &Operator) -> Operator {
        match (self, other) {
            (Operator::Permutation(a), Operator::Permutation(b)) => {
                Operator::Permutation(b.iter().map(|&i| a[i]).collect())
            }
            _ => Operator::Dense(self.to_dense() * other.to_dense()),
        }
    }
}

/// Applies `op ⊗ I_rest` to one amplitude column in place.
pub(crate) fn apply_to_column(col: &mut [C64], map: &IndexMap, op: &Operator, buf: &mut Vec<C64>) {
    let dt = map.target_dim();
    buf.resize(dt, C64::new(0.0, 0.0));
    match op {
        Operator::Dense(m) => {
            for &r in &map.rest {
                for (t, b) in buf.iter_mut().enumerate() {
                    *b = col[r | map.target[t]];
                }
                for i in 0..dt {
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, b) in buf.iter().enumerate() {
                        acc += m[(i, j)] * b;
                    }
                    col[r | map.target[i]] = acc;
                }
            }
        }
        Operator::Permutation(p) => {
            for &r in &map.rest {
                for (t, b) in buf.iter_mut().enumerate() {
                    *b = col[r | map.target[t]];
                }
                for (t, b) in buf.iter().enumerate() {
                    col[r | map.target[p[t]]] = *b;
                }
            }
        }
    }
}

/// `(op ⊗ I) · m` for a column-major matrix.
pub(crate) fn apply_left(m: &mut DMatrix<C64>, map: &IndexMap, op: &Operator) {
    let mut buf = Vec::new();
    let rows = m.nrows();
    for col in m.as_mut_slice().chunks_mut(rows) {
        apply_to_column(col, map, op, &mut buf);
    }
}

/// `(op ⊗ I) ρ (op ⊗ I)†` for a Hermitian `ρ`.
pub(crate) fn conjugate_hermitian(rho: &DMatrix<C64>, map: &IndexMap, op: &Operator) -> DMatrix<C64> {
    let mut x = rho.clone();
    apply_left(&mut x, map, op);
    let mut y = x.adjoint();
    apply_left(&mut y, map, op);
    y
}
