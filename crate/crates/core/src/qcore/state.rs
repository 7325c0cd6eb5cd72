use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::kernel::{apply_left, apply_to_column, conjugate_hermitian, IndexMap, Operator};
use super::layout::{Register, RegisterLayout};
use super::linalg::{c, hermitian_eigenvalues, is_hermitian, trace};
use super::operator::{Povm, Unitary, ALGEBRAIC_TOL, PSD_TOL};
use super::C64;
use crate::error::{Error, Representation, Result};

/// Largest pure state (in qubits) the dense simulator accepts.
pub const MAX_PURE_QUBITS: usize = 22;
/// Largest density matrix (in qubits) the dense simulator accepts.
pub const MAX_MIXED_QUBITS: usize = 11;
/// Branches lighter than this are treated as impossible.
pub const BRANCH_EPS: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum Repr {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

/// Pure or mixed state over a register layout. Values are immutable; every
/// operation returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    layout: RegisterLayout,
    repr: Repr,
}

pub(crate) fn check_cap(qubits: usize, kind: Representation) -> Result<()> {
    let limit = match kind {
        Representation::Pure => MAX_PURE_QUBITS,
        Representation::Mixed => MAX_MIXED_QUBITS,
    };
    if qubits > limit {
        return Err(Error::Capacity {
            kind,
            qubits,
            limit,
            context: String::new(),
        });
    }
    Ok(())
}

/// One branch of an exact measurement.
#[derive(Debug, Clone)]
pub struct MeasurementBranch {
    pub outcome: usize,
    pub label: String,
    pub probability: f64,
    /// Normalized post-measurement state; `None` when the branch is impossible.
    pub state: Option<QuantumState>,
}

impl QuantumState {
    pub fn pure(layout: RegisterLayout, amplitudes: DVector<C64>) -> Result<Self> {
        check_cap(layout.total_qubits(), Representation::Pure)?;
        if amplitudes.len() != layout.dim() {
            return Err(Error::InvalidState(format!(
                "{} amplitudes for a {}-dimensional layout",
                amplitudes.len(),
                layout.dim()
            )));
        }
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidState(format!("squared norm {norm} is not 1")));
        }
        Ok(QuantumState {
            layout,
            repr: Repr::Pure(amplitudes),
        })
    }

    /// Normalizes `amplitudes` before building the state.
    pub fn pure_normalized(layout: RegisterLayout, amplitudes: DVector<C64>) -> Result<Self> {
        let n = amplitudes.norm();
        if n < BRANCH_EPS {
            return Err(Error::InvalidState("zero vector".into()));
        }
        QuantumState::pure(layout, amplitudes / c(n, 0.0))
    }

    pub fn mixed(layout: RegisterLayout, rho: DMatrix<C64>) -> Result<Self> {
        check_cap(layout.total_qubits(), Representation::Mixed)?;
        if rho.nrows() != layout.dim() || rho.ncols() != layout.dim() {
            return Err(Error::InvalidState("density matrix has wrong dimension".into()));
        }
        if !is_hermitian(&rho, ALGEBRAIC_TOL) {
            return Err(Error::InvalidState("density matrix is not Hermitian".into()));
        }
        let tr = trace(&rho);
        if (tr.re - 1.0).abs() > ALGEBRAIC_TOL || tr.im.abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = hermitian_eigenvalues(&rho).into_iter().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(QuantumState {
            layout,
            repr: Repr::Mixed(rho),
        })
    }

    /// Internal constructor for results of invariant-preserving operations.
    pub(crate) fn mixed_unchecked(layout: RegisterLayout, rho: DMatrix<C64>) -> Result<Self> {
        check_cap(layout.total_qubits(), Representation::Mixed)?;
        Ok(QuantumState {
            layout,
            repr: Repr::Mixed(rho),
        })
    }

    pub(crate) fn pure_unchecked(layout: RegisterLayout, psi: DVector<C64>) -> Result<Self> {
        check_cap(layout.total_qubits(), Representation::Pure)?;
        Ok(QuantumState {
            layout,
            repr: Repr::Pure(psi),
        })
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Result<Self> {
        let dim = layout.dim();
        check_cap(layout.total_qubits(), Representation::Pure)?;
        if index >= dim {
            return Err(Error::Argument(format!("basis index {index} out of range {dim}")));
        }
        let mut v = DVector::zeros(dim);
        v[index] = c(1.0, 0.0);
        QuantumState::pure(layout, v)
    }

    /// Basis state given one value per register, in layout order.
    pub fn basis_values(layout: RegisterLayout, values: &[usize]) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Argument("one value per register required".into()));
        }
        let mut index = 0usize;
        for (reg, &v) in layout.registers().iter().zip(values) {
            if v >= 1 << reg.qubits {
                return Err(Error::Argument(format!(
                    "value {v} does not fit register `{}`",
                    reg.name
                )));
            }
            index = (index << reg.qubits) | v;
        }
        QuantumState::basis(layout, index)
    }

    pub fn zero(layout: RegisterLayout) -> Result<Self> {
        QuantumState::basis(layout, 0)
    }

    pub fn maximally_mixed(layout: RegisterLayout) -> Result<Self> {
        let d = layout.dim();
        check_cap(layout.total_qubits(), Representation::Mixed)?;
        let rho = DMatrix::from_diagonal_element(d, d, c(1.0 / d as f64, 0.0));
        QuantumState::mixed_unchecked(layout, rho)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed(_) => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Density matrix, computed on demand for pure states.
    pub fn density(&self) -> Cow<'_, DMatrix<C64>> {
        match &self.repr {
            Repr::Pure(v) => Cow::Owned(v * v.adjoint()),
            Repr::Mixed(m) => Cow::Borrowed(m),
        }
    }

    pub fn to_mixed(&self) -> Result<QuantumState> {
        match &self.repr {
            Repr::Pure(v) => QuantumState::mixed_unchecked(self.layout.clone(), v * v.adjoint()),
            Repr::Mixed(_) => Ok(self.clone()),
        }
    }

    /// Trace (1 for every valid state; exposed for invariant checks).
    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared(),
            Repr::Mixed(m) => trace(m).re,
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared().powi(2),
            Repr::Mixed(m) => m.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Checks norm/trace, Hermiticity and the PSD floor.
    pub fn validate(&self) -> Result<()> {
        match &self.repr {
            Repr::Pure(v) => QuantumState::pure(self.layout.clone(), v.clone()).map(|_| ()),
            Repr::Mixed(m) => QuantumState::mixed(self.layout.clone(), m.clone()).map(|_| ()),
        }
    }

    /// Probability of each computational basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            Repr::Mixed(m) => m.diagonal().iter().map(|z| z.re).collect(),
        }
    }

    /// `a ⊗ b`; pure when both factors are pure.
    pub fn tensor(&self, other: &QuantumState) -> Result<QuantumState> {
        let layout = self.layout.concat(&other.layout)?;
        match (&self.repr, &other.repr) {
            (Repr::Pure(a), Repr::Pure(b)) => {
                check_cap(layout.total_qubits(), Representation::Pure)?;
                QuantumState::pure_unchecked(layout, a.kronecker(b))
            }
            _ => {
                check_cap(layout.total_qubits(), Representation::Mixed)?;
                let rho = self.density().kronecker(&other.density());
                QuantumState::mixed_unchecked(layout, rho)
            }
        }
    }

    /// Applies an operator on the target registers (identity elsewhere).
    pub(crate) fn apply_operator(&self, targets: &[&str], op: &Operator) -> Result<QuantumState> {
        let map = IndexMap::new(&self.layout, targets)?;
        if map.target_dim() != op.dim() {
            return Err(Error::Layout(format!(
                "operator of dimension {} on targets of dimension {}",
                op.dim(),
                map.target_dim()
            )));
        }
        let repr = match &self.repr {
            Repr::Pure(v) => {
                let mut out = v.clone();
                let mut buf = Vec::new();
                apply_to_column(out.as_mut_slice(), &map, op, &mut buf);
                Repr::Pure(out)
            }
            Repr::Mixed(m) => Repr::Mixed(conjugate_hermitian(m, &map, op)),
        };
        Ok(QuantumState {
            layout: self.layout.clone(),
            repr,
        })
    }

    pub fn apply_unitary(&self, u: &Unitary) -> Result<QuantumState> {
        self.apply_operator(&u.targets(), u.operator())
    }

    /// Reduced state on `keep`, laid out in the order given.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<QuantumState> {
        if keep.is_empty() {
            return Err(Error::Argument("partial trace must keep at least one register".into()));
        }
        let map = IndexMap::new(&self.layout, keep)?;
        let layout = self.layout.select(keep)?;
        check_cap(layout.total_qubits(), Representation::Mixed)?;
        let dk = map.target_dim();
        let rho = match &self.repr {
            Repr::Pure(v) => {
                let m = DMatrix::from_fn(dk, map.rest.len(), |a, k| v[map.rest[k] | map.target[a]]);
                &m * m.adjoint()
            }
            Repr::Mixed(r) => DMatrix::from_fn(dk, dk, |a, b| {
                map.rest
                    .iter()
                    .map(|&k| r[(k | map.target[a], k | map.target[b])])
                    .sum()
            }),
        };
        QuantumState::mixed_unchecked(layout, rho)
    }

    /// Same amplitudes with the registers listed in a new order.
    pub fn reorder(&self, order: &[&str]) -> Result<QuantumState> {
        if order.len() != self.layout.len() {
            return Err(Error::Layout("reorder must list every register exactly once".into()));
        }
        let map = IndexMap::new(&self.layout, order)?;
        let layout = self.layout.select(order)?;
        let t = &map.target;
        let repr = match &self.repr {
            Repr::Pure(v) => Repr::Pure(DVector::from_fn(t.len(), |i, _| v[t[i]])),
            Repr::Mixed(m) => Repr::Mixed(DMatrix::from_fn(t.len(), t.len(), |i, j| m[(t[i], t[j])])),
        };
        Ok(QuantumState { layout, repr })
    }

    /// Reinterprets the basis under a new layout with the same qubit count.
    pub fn relabel(&self, layout: RegisterLayout) -> Result<QuantumState> {
        if layout.total_qubits() != self.layout.total_qubits() {
            return Err(Error::Layout("relabel must preserve the qubit count".into()));
        }
        Ok(QuantumState {
            layout,
            repr: self.repr.clone(),
        })
    }

    pub fn rename_register(&self, from: &str, to: &str) -> Result<QuantumState> {
        let mut layout = self.layout.clone();
        layout.rename(from, to)?;
        Ok(QuantumState {
            layout,
            repr: self.repr.clone(),
        })
    }

    /// Splits a register into consecutive sub-registers of the given sizes.
    pub fn split_register(&self, name: &str, parts: &[(&str, usize)]) -> Result<QuantumState> {
        let reg = self.layout.get(name)?.clone();
        if parts.iter().map(|p| p.1).sum::<usize>() != reg.qubits {
            return Err(Error::Layout(format!("split of `{name}` does not cover its qubits")));
        }
        let pos = self.layout.position(name).expect("checked above");
        let mut layout = self.layout.clone();
        layout.replace_at(
            pos,
            parts.iter().map(|&(n, q)| Register::new(n, q, reg.owner)).collect(),
        );
        let layout = RegisterLayout::new(layout.registers().to_vec())?;
        Ok(QuantumState {
            layout,
            repr: self.repr.clone(),
        })
    }

    /// Joins the listed registers (in that order) into one register `name`.
    pub fn join_registers(&self, parts: &[&str], name: &str) -> Result<QuantumState> {
        let first = self
            .layout
            .position(parts.first().ok_or_else(|| Error::Argument("nothing to join".into()))?)
            .ok_or_else(|| Error::Layout(format!("unknown register `{}`", parts[0])))?;
        // Move the parts next to each other, in order, at the first part's slot.
        let mut order: Vec<&str> = Vec::new();
        for (i, r) in self.layout.registers().iter().enumerate() {
            if i == first {
                order.extend(parts.iter().copied());
            }
            if !parts.contains(&r.name.as_str()) {
                order.push(r.name.as_str());
            }
        }
        let owner = self.layout.registers()[first].owner;
        let state = self.reorder(&order)?;
        let qubits: usize = parts
            .iter()
            .map(|p| self.layout.qubits_of(p))
            .sum::<Result<usize>>()?;
        let mut regs: Vec<Register> = Vec::new();
        let mut skip = 0;
        for r in state.layout.registers() {
            if skip > 0 {
                skip -= 1;
                continue;
            }
            if r.name == parts[0] {
                regs.push(Register::new(name, qubits, owner));
                skip = parts.len() - 1;
            } else {
                regs.push(r.clone());
            }
        }
        state.relabel(RegisterLayout::new(regs)?)
    }

    /// `<x|ρ|x>` for a pure reference state `x` on the same layout.
    pub fn overlap_with_pure(&self, x: &DVector<C64>) -> f64 {
        match &self.repr {
            Repr::Pure(v) => x.dotc(v).norm_sqr(),
            Repr::Mixed(m) => (x.adjoint() * m * x)[(0, 0)].re,
        }
    }

    /// `tr[(E ⊗ I) ρ]` for an operator on the target registers.
    pub fn expectation(&self, targets: &[&str], op: &DMatrix<C64>) -> Result<C64> {
        let map = IndexMap::new(&self.layout, targets)?;
        if map.target_dim() != op.nrows() {
            return Err(Error::Layout("operator dimension mismatch".into()));
        }
        let mut acc = c(0.0, 0.0);
        let dt = map.target_dim();
        match &self.repr {
            Repr::Pure(v) => {
                for &r in &map.rest {
                    for i in 0..dt {
                        let vi = v[r | map.target[i]].conj();
                        if vi == c(0.0, 0.0) {
                            continue;
                        }
                        for j in 0..dt {
                            acc += vi * op[(i, j)] * v[r | map.target[j]];
                        }
                    }
                }
            }
            Repr::Mixed(m) => {
                for &r in &map.rest {
                    for i in 0..dt {
                        for j in 0..dt {
                            acc += op[(i, j)] * m[(r | map.target[j], r | map.target[i])];
                        }
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Unnormalized `K ρ K†` for an operator `K` on the targets.
    pub(crate) fn apply_kraus(&self, targets: &[&str], k: &DMatrix<C64>) -> Result<(f64, Repr)> {
        let map = IndexMap::new(&self.layout, targets)?;
        let op = Operator::Dense(k.clone());
        match &self.repr {
            Repr::Pure(v) => {
                let mut out = v.clone();
                let mut buf = Vec::new();
                apply_to_column(out.as_mut_slice(), &map, &op, &mut buf);
                Ok((out.norm_squared(), Repr::Pure(out)))
            }
            Repr::Mixed(m) => {
                let mut x = m.clone();
                apply_left(&mut x, &map, &op);
                let mut y = x.adjoint();
                apply_left(&mut y, &map, &op);
                Ok((trace(&y).re, Repr::Mixed(y)))
            }
        }
    }

    pub(crate) fn from_unnormalized(&self, prob: f64, repr: Repr) -> QuantumState {
        let repr = match repr {
            Repr::Pure(v) => Repr::Pure(v / c(prob.sqrt(), 0.0)),
            Repr::Mixed(m) => Repr::Mixed(m / c(prob, 0.0)),
        };
        QuantumState {
            layout: self.layout.clone(),
            repr,
        }
    }

    /// All measurement branches with their probabilities and Lüders post-states.
    pub fn measure_branches(&self, povm: &Povm) -> Result<Vec<MeasurementBranch>> {
        let targets = povm.targets();
        povm.effects()
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let (p, repr) = self.apply_kraus(&targets, &e.kraus)?;
                let p = p.clamp(0.0, 1.0);
                let state = (p > BRANCH_EPS).then(|| self.from_unnormalized(p, repr));
                Ok(MeasurementBranch {
                    outcome: k,
                    label: e.label.clone(),
                    probability: p,
                    state,
                })
            })
            .collect()
    }

    /// Outcome probabilities `tr(E_k ρ)` without post-states.
    pub fn outcome_probabilities(&self, povm: &Povm) -> Result<Vec<f64>> {
        let targets = povm.targets();
        povm.effects()
            .iter()
            .map(|e| Ok(self.expectation(&targets, &e.matrix)?.re.clamp(0.0, 1.0)))
            .collect()
    }

    /// Conditions on a specific outcome; fails on a zero-probability branch.
    pub fn condition_on(&self, povm: &Povm, outcome: usize) -> Result<(f64, QuantumState)> {
        let e = povm
            .effects()
            .get(outcome)
            .ok_or_else(|| Error::Argument(format!("POVM has no outcome {outcome}")))?;
        let (p, repr) = self.apply_kraus(&povm.targets(), &e.kraus)?;
        if p <= BRANCH_EPS {
            return Err(Error::DegenerateBranch(p));
        }
        Ok((p, self.from_unnormalized(p, repr)))
    }

    /// Samples an outcome with probability `tr(E_k ρ)` and returns
    /// `(outcome, probability, post-state)`.
    pub fn measure_sampled<R: Rng + ?Sized>(
        &self,
        povm: &Povm,
        rng: &mut R,
    ) -> Result<(usize, f64, QuantumState)> {
        let probs = self.outcome_probabilities(povm)?;
        let k = sample_index(&probs, rng);
        let (p, state) = self.condition_on(povm, k)?;
        Ok((k, p, state))
    }

    /// Value held by each register in basis index `index`.
    pub fn register_values(&self, index: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layout.len());
        let mut shift = self.layout.total_qubits();
        for reg in self.layout.registers() {
            shift -= reg.qubits;
            out.push((index >> shift) & ((1 << reg.qubits) - 1));
        }
        out
    }

    /// Global basis index of one value per register.
    pub fn index_of(&self, values: &[usize]) -> usize {
        self.layout
            .registers()
            .iter()
            .zip(values)
            .fold(0, |acc, (r, &v)| (acc << r.qubits) | v)
    }

    /// Global basis permutation induced by a local permutation on `targets`.
    pub(crate) fn global_permutation(&self, targets: &[&str], perm: &[usize]) -> Result<Vec<usize>> {
        let map = IndexMap::new(&self.layout, targets)?;
        if perm.len() != map.target_dim() {
            return Err(Error::Layout("permutation has wrong dimension".into()));
        }
        let mut out = vec![0; self.dim()];
        for &r in &map.rest {
            for (t, &pt) in perm.iter().enumerate() {
                out[r | map.target[t]] = r | map.target[pt];
            }
        }
        Ok(out)
    }

    /// Unnormalized `Π ρ Π` with `Π = (I + sign·P)/2` for an involutive
    /// permutation `P` on the targets. Returns the trace and the result.
    pub(crate) fn involution_projection(
        &self,
        targets: &[&str],
        perm: &[usize],
        sign: f64,
    ) -> Result<(f64, Repr)> {
        let map = IndexMap::new(&self.layout, targets)?;
        let op = Operator::Permutation(perm.to_vec());
        let half = c(0.5, 0.0);
        let s = c(sign, 0.0);
        match &self.repr {
            Repr::Pure(v) => {
                let mut pv = v.clone();
                let mut buf = Vec::new();
                apply_to_column(pv.as_mut_slice(), &map, &op, &mut buf);
                let out = (v + pv * s) * half;
                Ok((out.norm_squared(), Repr::Pure(out)))
            }
            Repr::Mixed(m) => {
                let mut pm = m.clone();
                apply_left(&mut pm, &map, &op);
                let x = (m + pm * s) * half;
                let y = x.adjoint();
                let mut py = y.clone();
                apply_left(&mut py, &map, &op);
                let z = (y + py * s) * half;
                Ok((trace(&z).re, Repr::Mixed(z)))
            }
        }
    }

    /// Exchanges the contents of two equal-size registers.
    pub fn swap_registers(&self, a: &str, b: &str) -> Result<QuantumState> {
        let qa = self.layout.qubits_of(a)?;
        let qb = self.layout.qubits_of(b)?;
        if qa != qb {
            return Err(Error::Argument(format!(
                "cannot swap `{a}` ({qa} qubits) with `{b}` ({qb} qubits)"
            )));
        }
        let d = 1usize << qa;
        let perm = (0..d * d).map(|i| (i % d) * d + i / d).collect();
        self.apply_operator(&[a, b], &Operator::Permutation(perm))
    }
}

/// Draws an index with the given (approximately normalized) weights.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = k;
            if u < w {
                return k;
            }
            u -= w;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::max_abs_diff;
    use crate::qcore::random::{haar_state, haar_unitary, random_density};
    use crate::qcore::{gates, NodeId};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn abc() -> RegisterLayout {
        RegisterLayout::owned_by(NodeId(0), &[("A", 1), ("B", 2), ("C", 1)]).unwrap()
    }

    #[test]
    fn basis_values_index() {
        let s = QuantumState::basis_values(abc(), &[1, 2, 0]).unwrap();
        assert_eq!(s.amplitudes().unwrap()[0b1100].re, 1.0);
        assert_eq!(s.register_values(0b1100), vec![1, 2, 0]);
    }

    #[test]
    fn cap_is_enforced() {
        let big = RegisterLayout::single("A", MAX_MIXED_QUBITS + 1, NodeId(0));
        let err = QuantumState::maximally_mixed(big).unwrap_err();
        assert!(err.is_capacity());
        let big = RegisterLayout::single("A", MAX_PURE_QUBITS + 1, NodeId(0));
        assert!(QuantumState::zero(big).unwrap_err().is_capacity());
    }

    #[test]
    fn x_on_middle_register() {
        let s = QuantumState::zero(abc()).unwrap();
        let u = Unitary::new(&["C"], gates::x()).unwrap();
        let t = s.apply_unitary(&u).unwrap();
        assert_eq!(t.register_values(1), vec![0, 0, 1]);
        assert!((t.amplitudes().unwrap()[1].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = haar_state(&RegisterLayout::single("A", 2, NodeId(0)), &mut rng).unwrap();
        let b = random_density(&RegisterLayout::single("B", 1, NodeId(1)), 1, &mut rng).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ra = ab.partial_trace(&["A"]).unwrap();
        let rb = ab.partial_trace(&["B"]).unwrap();
        assert!(max_abs_diff(&ra.density(), &a.density()) < 1e-12);
        assert!(max_abs_diff(&rb.density(), &b.density()) < 1e-12);
        let ba = ab.partial_trace(&["B", "A"]).unwrap();
        let direct = b.tensor(&a).unwrap();
        assert!(max_abs_diff(&ba.density(), &direct.density()) < 1e-12);
    }

    #[test]
    fn join_and_split_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = haar_state(&abc(), &mut rng).unwrap();
        let j = s.join_registers(&["C", "A"], "J").unwrap();
        assert_eq!(j.layout().names().collect::<Vec<_>>(), vec!["B", "J"]);
        let back = j
            .split_register("J", &[("C", 1), ("A", 1)])
            .unwrap()
            .reorder(&["A", "B", "C"])
            .unwrap();
        assert!((back.amplitudes().unwrap() - s.amplitudes().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn swap_registers_exchanges_contents() {
        let l = RegisterLayout::owned_by(NodeId(0), &[("A", 2), ("B", 2)]).unwrap();
        let s = QuantumState::basis_values(l, &[1, 3]).unwrap();
        let t = s.swap_registers("A", "B").unwrap();
        assert_eq!(t.amplitudes().unwrap()[0b1101].re, 1.0);
    }

    #[test]
    fn degenerate_branch_is_an_error() {
        let s = QuantumState::zero(abc()).unwrap();
        let povm = Povm::from_basis(&["A"], &gates::z_basis(), &["0", "1"]).unwrap();
        assert!(matches!(s.condition_on(&povm, 1), Err(Error::DegenerateBranch(_))));
    }

    fn seeds() -> impl Strategy<Value = u64> {
        any::<u64>()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn unitary_preserves_validity_pure_and_mixed(seed in seeds()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&abc(), 3, &mut rng).unwrap();
            let psi = haar_state(&abc(), &mut rng).unwrap();
            let u = Unitary::new(&["C", "A"], haar_unitary(4, &mut rng)).unwrap();
            let out = rho.apply_unitary(&u).unwrap();
            prop_assert!(out.validate().is_ok());
            let p_out = psi.apply_unitary(&u).unwrap();
            let m_out = psi.to_mixed().unwrap().apply_unitary(&u).unwrap();
            prop_assert!(max_abs_diff(&p_out.density(), &m_out.density()) < 1e-10);
            // Identity on the untouched register.
            let rb = out.partial_trace(&["B"]).unwrap();
            prop_assert!(max_abs_diff(&rb.density(), &rho.partial_trace(&["B"]).unwrap().density()) < 1e-10);
        }

        #[test]
        fn measurement_branches_sum_to_state(seed in seeds()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&abc(), 2, &mut rng).unwrap();
            let povm = Povm::from_basis(&["B"], &haar_unitary(4, &mut rng), &["a", "b", "c", "d"]).unwrap();
            let branches = rho.measure_branches(&povm).unwrap();
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            // Averaging the post-states over outcomes leaves the other registers untouched.
            let mut avg = DMatrix::zeros(4, 4);
            for b in &branches {
                if let Some(s) = &b.state {
                    prop_assert!(s.validate().is_ok());
                    avg += s.partial_trace(&["A", "C"]).unwrap().density().into_owned() * c(b.probability, 0.0);
                }
            }
            let direct = rho.partial_trace(&["A", "C"]).unwrap();
            prop_assert!(max_abs_diff(&avg, &direct.density()) < 1e-10);
            let probs = rho.outcome_probabilities(&povm).unwrap();
            for (b, p) in branches.iter().zip(probs) {
                prop_assert!((b.probability - p).abs() < 1e-10);
            }
        }

        #[test]
        fn pure_and_mixed_partial_traces_agree(seed in seeds()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = haar_state(&abc(), &mut rng).unwrap();
            let a = psi.partial_trace(&["C", "A"]).unwrap();
            let b = psi.to_mixed().unwrap().partial_trace(&["C", "A"]).unwrap();
            prop_assert!(max_abs_diff(&a.density(), &b.density()) < 1e-12);
            prop_assert!(a.validate().is_ok());
        }
    }
}
