use crate::error::{Error, Representation, Result};
use crate::qcore::{check_cap, MeasurementBranch, NodeId, Operator, Povm, QuantumState, Unitary};

use super::topology::Topology;

/// A global state kept as a tensor product of factors. Factors are merged
/// only when an operation spans several of them.
#[derive(Debug, Clone, Default)]
pub struct StateStore {
    factors: Vec<QuantumState>,
}

impl StateStore {
    pub fn new() -> Self {
        StateStore::default()
    }

    pub fn from_factors(factors: Vec<QuantumState>) -> Result<Self> {
        let mut s = StateStore::new();
        for f in factors {
            s.push(f)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, f: QuantumState) -> Result<()> {
        for name in f.layout().names() {
            if self.contains(name) {
                return Err(Error::Layout(format!("register `{name}` appears twice")));
            }
        }
        self.factors.push(f);
        Ok(())
    }

    pub fn factors(&self) -> &[QuantumState] {
        &self.factors
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factors.iter().any(|f| f.layout().contains(name))
    }

    fn factor_of(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.layout().contains(name))
            .ok_or_else(|| Error::Layout(format!("unknown register `{name}`")))
    }

    pub fn owner(&self, name: &str) -> Result<NodeId> {
        Ok(self.factors[self.factor_of(name)?].layout().get(name)?.owner)
    }

    pub fn qubits_of(&self, name: &str) -> Result<usize> {
        self.factors[self.factor_of(name)?].layout().qubits_of(name)
    }

    pub(crate) fn set_owner(&mut self, name: &str, owner: NodeId) -> Result<()> {
        let i = self.factor_of(name)?;
        let f = &self.factors[i];
        let mut regs = f.layout().registers().to_vec();
        for r in regs.iter_mut().filter(|r| r.name == name) {
            r.owner = owner;
        }
        let layout = crate::qcore::RegisterLayout::new(regs)?;
        self.factors[i] = f.relabel(layout)?;
        Ok(())
    }

    /// `(name, qubits, owner)` for every register.
    pub fn registers(&self) -> Vec<(String, usize, NodeId)> {
        self.factors
            .iter()
            .flat_map(|f| f.layout().registers().iter().map(|r| (r.name.clone(), r.qubits, r.owner)))
            .collect()
    }

    pub fn total_qubits(&self) -> usize {
        self.factors.iter().map(|f| f.layout().total_qubits()).sum()
    }

    /// Merges every factor touching `names` into one and returns its index.
    fn merge(&mut self, names: &[&str]) -> Result<usize> {
        let mut idx: Vec<usize> = names.iter().map(|n| self.factor_of(n)).collect::<Result<_>>()?;
        idx.sort_unstable();
        idx.dedup();
        if idx.len() == 1 {
            return Ok(idx[0]);
        }
        let qubits: usize = idx.iter().map(|&i| self.factors[i].layout().total_qubits()).sum();
        let pure = idx.iter().all(|&i| self.factors[i].is_pure());
        check_cap(qubits, if pure { Representation::Pure } else { Representation::Mixed })?;
        let mut merged = self.factors[idx[0]].clone();
        for &i in &idx[1..] {
            merged = merged.tensor(&self.factors[i])?;
        }
        for &i in idx.iter().rev() {
            self.factors.remove(i);
        }
        self.factors.push(merged);
        Ok(self.factors.len() - 1)
    }

    pub fn apply(&mut self, u: &Unitary) -> Result<()> {
        let i = self.merge(&u.targets())?;
        self.factors[i] = self.factors[i].apply_unitary(u)?;
        Ok(())
    }

    pub fn apply_operator(&mut self, targets: &[&str], op: &Operator) -> Result<()> {
        let u = Unitary::from_operator(targets, op.clone())?;
        self.apply(&u)
    }

    /// Outcome probabilities of a POVM (merging the touched factors).
    pub fn outcome_probabilities(&mut self, povm: &Povm) -> Result<Vec<f64>> {
        let i = self.merge(&povm.targets())?;
        self.factors[i].outcome_probabilities(povm)
    }

    /// Replaces the state by its post-measurement state; returns the probability.
    pub fn condition(&mut self, povm: &Povm, outcome: usize) -> Result<f64> {
        let i = self.merge(&povm.targets())?;
        let (p, post) = self.factors[i].condition_on(povm, outcome)?;
        self.factors[i] = post;
        Ok(p)
    }

    pub fn measure_branches(&mut self, povm: &Povm) -> Result<Vec<MeasurementBranch>> {
        let i = self.merge(&povm.targets())?;
        self.factors[i].measure_branches(povm)
    }

    pub fn swap_accept_prob(&mut self, a: &str, b: &str) -> Result<f64> {
        let i = self.merge(&[a, b])?;
        crate::primitives::swap_test_accept_prob(&self.factors[i], a, b)
    }

    pub fn swap_condition(&mut self, a: &str, b: &str, accept: bool) -> Result<f64> {
        let i = self.merge(&[a, b])?;
        let (p, post) = crate::primitives::swap::swap_test_condition(&self.factors[i], a, b, accept)?;
        self.factors[i] = post;
        Ok(p)
    }

    pub fn swap_registers(&mut self, a: &str, b: &str) -> Result<()> {
        let q = self.qubits_of(a)?;
        if self.qubits_of(b)? != q {
            return Err(Error::Argument(format!("cannot exchange `{a}` and `{b}` of different sizes")));
        }
        let tmp = format!("{a}#swap");
        self.rename(a, &tmp)?;
        self.rename(b, a)?;
        self.rename(&tmp, b)?;
        Ok(())
    }

    pub fn rename(&mut self, from: &str, to: &str) -> Result<()> {
        if self.contains(to) {
            return Err(Error::Layout(format!("register `{to}` already exists")));
        }
        let i = self.factor_of(from)?;
        self.factors[i] = self.factors[i].rename_register(from, to)?;
        Ok(())
    }

    pub fn split_register(&mut self, name: &str, parts: &[(&str, usize)]) -> Result<()> {
        let i = self.factor_of(name)?;
        self.factors[i] = self.factors[i].split_register(name, parts)?;
        Ok(())
    }

    pub fn join_registers(&mut self, parts: &[&str], name: &str) -> Result<()> {
        let i = self.merge(parts)?;
        self.factors[i] = self.factors[i].join_registers(parts, name)?;
        Ok(())
    }

    /// Reduced state on `names`, in that order.
    pub fn reduced(&self, names: &[&str]) -> Result<QuantumState> {
        let mut tmp = self.clone();
        let i = tmp.merge(names)?;
        let f = &tmp.factors[i];
        if f.layout().len() == names.len() {
            let s = f.reorder(names)?;
            return Ok(s);
        }
        f.partial_trace(names)
    }

    /// The whole state as one factor (subject to the cap).
    pub fn joint(&self) -> Result<QuantumState> {
        let names: Vec<String> = self.registers().into_iter().map(|r| r.0).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut tmp = self.clone();
        let i = tmp.merge(&refs)?;
        Ok(tmp.factors[i].clone())
    }
}

/// Checks that every certificate register belongs to a node of the topology
/// and returns the prover's state as a factored store.
pub fn distribute_certificates(topology: &Topology, factors: &[QuantumState]) -> Result<StateStore> {
    for f in factors {
        for r in f.layout().registers() {
            if r.owner.0 >= topology.len() {
                return Err(Error::Layout(format!(
                    "certificate register `{}` assigned to missing node {}",
                    r.name, r.owner
                )));
            }
        }
        f.validate()?;
    }
    StateStore::from_factors(factors.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{gates, RegisterLayout};

    fn qubit(name: &str, node: usize, v: usize) -> QuantumState {
        QuantumState::basis(RegisterLayout::single(name, 1, NodeId(node)), v).unwrap()
    }

    #[test]
    fn merges_only_when_needed() {
        let mut s = StateStore::from_factors(vec![qubit("a", 0, 0), qubit("b", 1, 1), qubit("c", 1, 0)]).unwrap();
        s.apply(&Unitary::new(&["a"], gates::h()).unwrap()).unwrap();
        assert_eq!(s.factors().len(), 3);
        s.apply(&Unitary::new(&["a", "c"], gates::cnot()).unwrap()).unwrap();
        assert_eq!(s.factors().len(), 2);
        let red = s.reduced(&["c"]).unwrap();
        assert!((red.density()[(0, 0)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ownership_moves() {
        let mut s = StateStore::from_factors(vec![qubit("a", 0, 0)]).unwrap();
        s.set_owner("a", NodeId(1)).unwrap();
        assert_eq!(s.owner("a").unwrap(), NodeId(1));
        assert!(s.push(qubit("a", 0, 0)).is_err());
    }

    #[test]
    fn certificates_must_sit_on_nodes() {
        let t = Topology::line(1);
        assert!(distribute_certificates(&t, &[qubit("a", 2, 0)]).is_err());
        assert!(distribute_certificates(&t, &[qubit("a", 1, 0)]).is_ok());
    }
}
