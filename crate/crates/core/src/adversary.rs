//! Prover strategies: the honest certificate and handcrafted malicious families.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Representation, Result};
use crate::netsim::StateStore;
use crate::primitives::phi_plus;
use crate::qcore::linalg::{c, max_abs_diff};
use crate::qcore::{check_cap, NodeId, QuantumState, Register, RegisterLayout, C64};

fn first_column() -> usize {
    1
}

fn quarter_pi() -> f64 {
    std::f64::consts::FRAC_PI_4
}

/// Two-qubit state substituted for an EPR pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairState {
    #[default]
    Zeros,
    PhiMinus,
    PsiPlus,
    MaximallyMixed,
}

impl PairState {
    /// Density matrix in the `(V₁ qubit, V₂ qubit)` basis.
    pub fn density(self) -> DMatrix<C64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = |a: [f64; 4]| DVector::from_iterator(4, a.iter().map(|&x| c(x, 0.0)));
        match self {
            PairState::Zeros => {
                let z = v([1.0, 0.0, 0.0, 0.0]);
                &z * z.adjoint()
            }
            PairState::PhiMinus => {
                let z = v([h, 0.0, 0.0, -h]);
                &z * z.adjoint()
            }
            PairState::PsiPlus => {
                let z = v([0.0, h, h, 0.0]);
                &z * z.adjoint()
            }
            PairState::MaximallyMixed => DMatrix::identity(4, 4) * c(0.25, 0.0),
        }
    }

    fn state(self, layout: RegisterLayout) -> Result<QuantumState> {
        let rho = self.density();
        match self {
            PairState::MaximallyMixed => QuantumState::mixed(layout, rho),
            _ => {
                let col = (0..4).find(|&j| rho[(j, j)].re > 1e-9).unwrap_or(0);
                let amp = rho.column(col) / c(rho[(col, col)].re.sqrt(), 0.0);
                QuantumState::pure(layout, amp)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryFamily {
    Honest,
    AllZeros,
    /// The register of `node` in `column` holds a state orthogonal to the honest one.
    OrthogonalAt {
        node: usize,
        #[serde(default = "first_column")]
        column: usize,
    },
    /// `(1 − t)·honest + t·target`.
    Interpolate { t: f64, target: Box<AdversaryFamily> },
    /// `cos θ |φ_a φ_b⟩ + sin θ |φ_a^⊥ φ_b^⊥⟩` across the registers of two nodes.
    EntangledPair {
        nodes: (usize, usize),
        #[serde(default = "first_column")]
        column: usize,
        #[serde(default = "quarter_pi")]
        theta: f64,
    },
    /// EPR pairs with the listed 1-based indices replaced.
    EprCorrupt {
        blocks: Vec<usize>,
        #[serde(default)]
        replacement: PairState,
    },
}

impl AdversaryFamily {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryFamily::Honest => "honest",
            AdversaryFamily::AllZeros => "all_zeros",
            AdversaryFamily::OrthogonalAt { .. } => "orthogonal_at",
            AdversaryFamily::Interpolate { .. } => "interpolate",
            AdversaryFamily::EntangledPair { .. } => "entangled_pair",
            AdversaryFamily::EprCorrupt { .. } => "epr_corrupt",
        }
    }
}

/// One certificate register and where it sits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertSlot {
    pub register: String,
    pub node: usize,
    pub column: usize,
    pub qubits: usize,
}

/// What a protocol expects from the prover: slots, the honest certificate as
/// product factors, and which register pairs are meant to be EPR pairs.
#[derive(Debug, Clone)]
pub struct ProtocolDescriptor {
    pub slots: Vec<CertSlot>,
    pub honest: Vec<QuantumState>,
    pub pairs: Vec<(String, String)>,
}

impl ProtocolDescriptor {
    pub fn new(slots: Vec<CertSlot>, honest: Vec<QuantumState>) -> Result<Self> {
        let d = ProtocolDescriptor {
            slots,
            honest,
            pairs: Vec::new(),
        };
        d.check_layout(&d.honest)?;
        Ok(d)
    }

    pub fn with_pairs(mut self, pairs: Vec<(String, String)>) -> Self {
        self.pairs = pairs;
        self
    }

    pub fn slot(&self, node: usize, column: usize) -> Result<&CertSlot> {
        self.slots
            .iter()
            .find(|s| s.node == node && s.column == column)
            .ok_or_else(|| Error::Argument(format!("no certificate register at node {node}, column {column}")))
    }

    /// Factors must cover exactly the slots, with matching sizes and owners.
    pub fn check_layout(&self, factors: &[QuantumState]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for f in factors {
            for r in f.layout().registers() {
                let slot = self
                    .slots
                    .iter()
                    .find(|s| s.register == r.name)
                    .ok_or_else(|| Error::Layout(format!("`{}` is not a certificate register", r.name)))?;
                if slot.qubits != r.qubits || slot.node != r.owner.0 {
                    return Err(Error::Layout(format!(
                        "`{}` should be {} qubits on v{}, got {} on {}",
                        r.name, slot.qubits, slot.node, r.qubits, r.owner
                    )));
                }
                if !seen.insert(r.name.clone()) {
                    return Err(Error::Layout(format!("`{}` provided twice", r.name)));
                }
            }
        }
        if let Some(missing) = self.slots.iter().find(|s| !seen.contains(&s.register)) {
            return Err(Error::Layout(format!("certificate register `{}` missing", missing.register)));
        }
        Ok(())
    }

    fn slot_layout(&self, slot: &CertSlot) -> RegisterLayout {
        RegisterLayout::single(slot.register.clone(), slot.qubits, NodeId(slot.node))
    }

    fn honest_factor_of(&self, register: &str) -> Result<usize> {
        self.honest
            .iter()
            .position(|f| f.layout().contains(register))
            .ok_or_else(|| Error::Layout(format!("no honest factor holds `{register}`")))
    }

    /// The honest pure state of a register that is its own factor.
    fn standalone_honest(&self, register: &str) -> Result<(usize, DVector<C64>)> {
        let i = self.honest_factor_of(register)?;
        let f = &self.honest[i];
        match (f.layout().len(), f.amplitudes()) {
            (1, Some(a)) => Ok((i, a.clone())),
            _ => Err(Error::Argument(format!(
                "honest certificate of `{register}` is not a standalone pure state"
            ))),
        }
    }
}

/// A concrete certificate: the family it came from and its product factors.
#[derive(Debug, Clone)]
pub struct ProverStrategy {
    pub family: AdversaryFamily,
    pub factors: Vec<QuantumState>,
}

impl ProverStrategy {
    pub fn store(&self) -> Result<StateStore> {
        StateStore::from_factors(self.factors.clone())
    }

    /// Every register is its own tensor factor.
    pub fn is_register_product(&self) -> bool {
        self.factors.iter().all(|f| f.layout().len() == 1)
    }

    /// State of one register, if it is a standalone factor.
    pub fn register_state(&self, name: &str) -> Option<&QuantumState> {
        self.factors
            .iter()
            .find(|f| f.layout().len() == 1 && f.layout().contains(name))
    }

    /// Reduced state of any set of registers.
    pub fn reduced(&self, names: &[&str]) -> Result<QuantumState> {
        self.store()?.reduced(names)
    }
}

/// `|v⟩` orthogonal to `phi`, from the basis vector with the smallest overlap.
pub fn orthogonal_to(phi: &DVector<C64>) -> DVector<C64> {
    let mut best = 0;
    for i in 1..phi.len() {
        if phi[i].norm() < phi[best].norm() - 1e-15 {
            best = i;
        }
    }
    let mut v = -phi * phi[best].conj();
    v[best] += c(1.0, 0.0);
    let n = v.norm();
    v / c(n, 0.0)
}

fn same_state(a: &QuantumState, b: &QuantumState) -> bool {
    a.layout() == b.layout()
        && match (a.amplitudes(), b.amplitudes()) {
            (Some(x), Some(y)) => (x - y).camax() < 1e-12,
            _ => max_abs_diff(&a.density(), &b.density()) < 1e-12,
        }
}

/// Builds the certificate for a family against a protocol.
pub fn realize(family: &AdversaryFamily, desc: &ProtocolDescriptor) -> Result<ProverStrategy> {
    let factors = match family {
        AdversaryFamily::Honest => desc.honest.clone(),
        AdversaryFamily::AllZeros => desc
            .slots
            .iter()
            .map(|s| QuantumState::zero(desc.slot_layout(s)))
            .collect::<Result<_>>()?,
        AdversaryFamily::OrthogonalAt { node, column } => {
            let slot = desc.slot(*node, *column)?;
            let (i, phi) = desc.standalone_honest(&slot.register)?;
            let mut f = desc.honest.clone();
            f[i] = QuantumState::pure(desc.slot_layout(slot), orthogonal_to(&phi))?;
            f
        }
        AdversaryFamily::EntangledPair { nodes, column, theta } => {
            if nodes.0 == nodes.1 {
                return Err(Error::Argument("entangled pair needs two distinct nodes".into()));
            }
            let sa = desc.slot(nodes.0, *column)?;
            let sb = desc.slot(nodes.1, *column)?;
            let (ia, pa) = desc.standalone_honest(&sa.register)?;
            let (ib, pb) = desc.standalone_honest(&sb.register)?;
            let oa = orthogonal_to(&pa);
            let ob = orthogonal_to(&pb);
            let amp = pa.kronecker(&pb) * c(theta.cos(), 0.0) + oa.kronecker(&ob) * c(theta.sin(), 0.0);
            let layout = desc.slot_layout(sa).concat(&desc.slot_layout(sb))?;
            let joint = QuantumState::pure_normalized(layout, amp)?;
            let mut f: Vec<QuantumState> = desc
                .honest
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != ia && *i != ib)
                .map(|(_, s)| s.clone())
                .collect();
            f.push(joint);
            f
        }
        AdversaryFamily::EprCorrupt { blocks, replacement } => {
            let mut f = desc.honest.clone();
            for &b in blocks {
                let (ra, rb) = desc
                    .pairs
                    .get(b.wrapping_sub(1))
                    .ok_or_else(|| Error::Argument(format!("EPR block {b} does not exist")))?;
                let i = desc.honest_factor_of(ra)?;
                let names: Vec<&str> = f[i].layout().names().collect();
                if names != [ra.as_str(), rb.as_str()] {
                    return Err(Error::Argument(format!("`{ra}`, `{rb}` are not a standalone pair")));
                }
                let layout = f[i].layout().clone();
                f[i] = replacement.state(layout)?;
            }
            f
        }
        AdversaryFamily::Interpolate { t, target } => {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::Argument(format!("interpolation weight {t} outside [0, 1]")));
            }
            let tgt = realize(target, desc)?;
            if *t == 0.0 {
                desc.honest.clone()
            } else if *t == 1.0 {
                tgt.factors
            } else {
                interpolate(&desc.honest, &tgt.factors, *t)?
            }
        }
    };
    desc.check_layout(&factors)?;
    Ok(ProverStrategy {
        family: family.clone(),
        factors,
    })
}

/// Mixes two factorizations, merging only the factors that differ.
fn interpolate(honest: &[QuantumState], target: &[QuantumState], t: f64) -> Result<Vec<QuantumState>> {
    let shared = |f: &QuantumState, other: &[QuantumState]| other.iter().any(|g| same_state(f, g));
    let mut touched: BTreeSet<String> = BTreeSet::new();
    for f in honest.iter().filter(|f| !shared(f, target)) {
        touched.extend(f.layout().names().map(String::from));
    }
    for f in target.iter().filter(|f| !shared(f, honest)) {
        touched.extend(f.layout().names().map(String::from));
    }
    loop {
        let before = touched.len();
        for f in honest.iter().chain(target) {
            if f.layout().names().any(|n| touched.contains(n)) {
                touched.extend(f.layout().names().map(String::from));
            }
        }
        if touched.len() == before {
            break;
        }
    }
    let mut out: Vec<QuantumState> = honest
        .iter()
        .filter(|f| !f.layout().names().any(|n| touched.contains(n)))
        .cloned()
        .collect();
    if touched.is_empty() {
        return Ok(out);
    }
    let product = |fs: &[QuantumState]| -> Result<QuantumState> {
        let mut acc: Option<QuantumState> = None;
        for f in fs.iter().filter(|f| f.layout().names().any(|n| touched.contains(n))) {
            acc = Some(match acc {
                None => f.clone(),
                Some(a) => a.tensor(f)?,
            });
        }
        acc.ok_or_else(|| Error::Layout("empty interpolation block".into()))
    };
    let h = product(honest)?;
    let order: Vec<&str> = h.layout().names().collect();
    let g = product(target)?.reorder(&order)?;
    check_cap(h.layout().total_qubits(), Representation::Mixed)?;
    let rho = h.density().into_owned() * c(1.0 - t, 0.0) + g.density().into_owned() * c(t, 0.0);
    let layout = RegisterLayout::new(h.layout().registers().iter().cloned().collect::<Vec<Register>>())?;
    out.push(QuantumState::mixed(layout, rho)?);
    Ok(out)
}

/// Honest certificate for EPR verification: `|Φ⁺⟩` on every `(a, b)` pair.
pub fn epr_pair_state(a: &str, owner_a: NodeId, b: &str, owner_b: NodeId) -> Result<QuantumState> {
    let layout = RegisterLayout::new(vec![Register::new(a, 1, owner_a), Register::new(b, 1, owner_b)])?;
    QuantumState::pure(layout, phi_plus())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::random::haar_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn descriptor(r: usize, n: usize, seed: u64) -> ProtocolDescriptor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut slots = Vec::new();
        let mut honest = Vec::new();
        for l in 1..=r {
            let s = CertSlot {
                register: format!("R{l}"),
                node: l,
                column: 1,
                qubits: n,
            };
            let layout = RegisterLayout::single(s.register.clone(), n, NodeId(l));
            honest.push(QuantumState::pure(layout, haar_vector(1 << n, &mut rng)).unwrap());
            slots.push(s);
        }
        ProtocolDescriptor::new(slots, honest).unwrap()
    }

    #[test]
    fn honest_and_zero() {
        let d = descriptor(2, 2, 1);
        let h = realize(&AdversaryFamily::Honest, &d).unwrap();
        assert!(h.is_register_product());
        let z = realize(&AdversaryFamily::AllZeros, &d).unwrap();
        assert!((z.register_state("R2").unwrap().probabilities()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        let d = descriptor(3, 2, 2);
        let s = realize(&AdversaryFamily::OrthogonalAt { node: 3, column: 1 }, &d).unwrap();
        let phi = d.honest[2].amplitudes().unwrap();
        let got = s.register_state("R3").unwrap().amplitudes().unwrap();
        assert!(phi.dotc(got).norm() < 1e-12);
        assert!(realize(&AdversaryFamily::OrthogonalAt { node: 4, column: 1 }, &d).is_err());
    }

    #[test]
    fn interpolate_endpoints() {
        let d = descriptor(2, 1, 3);
        let target = Box::new(AdversaryFamily::OrthogonalAt { node: 2, column: 1 });
        let s0 = realize(&AdversaryFamily::Interpolate { t: 0.0, target: target.clone() }, &d).unwrap();
        for (a, b) in s0.factors.iter().zip(&d.honest) {
            assert!(same_state(a, b));
        }
        let s = realize(&AdversaryFamily::Interpolate { t: 0.3, target }, &d).unwrap();
        assert_eq!(s.factors.len(), 2);
        let rho = s.register_state("R2").unwrap();
        let phi = d.honest[1].amplitudes().unwrap();
        assert!((rho.overlap_with_pure(phi) - 0.7).abs() < 1e-12);
        assert!(realize(
            &AdversaryFamily::Interpolate { t: 1.5, target: Box::new(AdversaryFamily::AllZeros) },
            &d
        )
        .is_err());
    }

    #[test]
    fn entangled_pair_is_entangled() {
        let d = descriptor(2, 1, 4);
        let s = realize(
            &AdversaryFamily::EntangledPair {
                nodes: (1, 2),
                column: 1,
                theta: quarter_pi(),
            },
            &d,
        )
        .unwrap();
        assert!(!s.is_register_product());
        let red = s.reduced(&["R1"]).unwrap();
        assert!((red.purity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn epr_corruption() {
        let slots = vec![
            CertSlot { register: "A1".into(), node: 0, column: 1, qubits: 1 },
            CertSlot { register: "B1".into(), node: 1, column: 1, qubits: 1 },
        ];
        let honest = vec![epr_pair_state("A1", NodeId(0), "B1", NodeId(1)).unwrap()];
        let d = ProtocolDescriptor::new(slots, honest)
            .unwrap()
            .with_pairs(vec![("A1".into(), "B1".into())]);
        let s = realize(
            &AdversaryFamily::EprCorrupt {
                blocks: vec![1],
                replacement: PairState::Zeros,
            },
            &d,
        )
        .unwrap();
        assert!((s.factors[0].probabilities()[0] - 1.0).abs() < 1e-15);
        let bad = AdversaryFamily::EprCorrupt {
            blocks: vec![2],
            replacement: PairState::Zeros,
        };
        assert!(realize(&bad, &d).is_err());
    }

    #[test]
    fn families_parse_from_json() {
        let f: AdversaryFamily =
            serde_json::from_str(r#"{"kind":"interpolate","t":0.5,"target":{"kind":"orthogonal_at","node":2}}"#)
                .unwrap();
        assert_eq!(
            f,
            AdversaryFamily::Interpolate {
                t: 0.5,
                target: Box::new(AdversaryFamily::OrthogonalAt { node: 2, column: 1 })
            }
        );
    }
}
