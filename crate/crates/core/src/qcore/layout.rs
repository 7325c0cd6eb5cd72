use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a network node (`v0`, `v1`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub qubits: usize,
    pub owner: NodeId,
}

impl Register {
    pub fn new(name: impl Into<String>, qubits: usize, owner: NodeId) -> Self {
        Register {
            name: name.into(),
            qubits,
            owner,
        }
    }
}

/// Ordered list of named registers. The first register holds the most
/// significant bits of a computational-basis index, and inside a register the
/// value is stored big-endian.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    registers: Vec<Register>,
}

impl RegisterLayout {
    pub fn new(registers: Vec<Register>) -> Result<Self> {
        for (i, reg) in registers.iter().enumerate() {
            if reg.qubits == 0 {
                return Err(Error::Layout(format!("register `{}` has zero qubits", reg.name)));
            }
            if registers[..i].iter().any(|r| r.name == reg.name) {
                return Err(Error::Layout(format!("duplicate register name `{}`", reg.name)));
            }
        }
        Ok(RegisterLayout { registers })
    }

    pub fn single(name: impl Into<String>, qubits: usize, owner: NodeId) -> Self {
        RegisterLayout {
            registers: vec![Register::new(name, qubits, owner)],
        }
    }

    /// Layout of `(name, qubits)` pairs all owned by `owner`.
    pub fn owned_by(owner: NodeId, regs: &[(&str, usize)]) -> Result<Self> {
        RegisterLayout::new(
            regs.iter()
                .map(|&(name, q)| Register::new(name, q, owner))
                .collect(),
        )
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn total_qubits(&self) -> usize {
        self.registers.iter().map(|r| r.qubits).sum()
    }

    pub fn dim(&self) -> usize {
        1usize << self.total_qubits()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.registers.iter().map(|r| r.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.registers.iter().position(|r| r.name == name)
    }

    pub fn get(&self, name: &str) -> Result<&Register> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::Layout(format!("unknown register `{name}`")))
    }

    pub fn qubits_of(&self, name: &str) -> Result<usize> {
        Ok(self.get(name)?.qubits)
    }

    /// Global bit positions (counted from the least significant bit) of the
    /// qubits of `name`, most significant qubit first.
    pub fn bit_positions(&self, name: &str) -> Result<Vec<usize>> {
        let total = self.total_qubits();
        let mut offset = 0;
        for reg in &self.registers {
            if reg.name == name {
                return Ok((0..reg.qubits).map(|i| total - 1 - (offset + i)).collect());
            }
            offset += reg.qubits;
        }
        Err(Error::Layout(format!("unknown register `{name}`")))
    }

    /// Same layout with the registers of `other` appended.
    pub fn concat(&self, other: &RegisterLayout) -> Result<Self> {
        for name in other.names() {
            if self.contains(name) {
                return Err(Error::Layout(format!(
                    "register `{name}` present in both layouts"
                )));
            }
        }
        let mut registers = self.registers.clone();
        registers.extend(other.registers.iter().cloned());
        Ok(RegisterLayout { registers })
    }

    /// Sub-layout with the named registers in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let registers = names
            .iter()
            .map(|n| self.get(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        RegisterLayout::new(registers)
    }

    /// Names and sizes agree position by position; owners are ignored.
    pub fn same_shape(&self, other: &RegisterLayout) -> bool {
        self.registers.len() == other.registers.len()
            && self
                .registers
                .iter()
                .zip(&other.registers)
                .all(|(a, b)| a.name == b.name && a.qubits == b.qubits)
    }

    pub(crate) fn rename(&mut self, from: &str, to: &str) -> Result<()> {
        if from != to && self.contains(to) {
            return Err(Error::Layout(format!("register `{to}` already exists")));
        }
        let pos = self
            .position(from)
            .ok_or_else(|| Error::Layout(format!("unknown register `{from}`")))?;
        self.registers[pos].name = to.to_string();
        Ok(())
    }

    pub(crate) fn replace_at(&mut self, pos: usize, with: Vec<Register>) {
        self.registers.splice(pos..=pos, with);
    }
}
