//! Haar-random states and unitaries, random density matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::layout::{NodeId, RegisterLayout};
use super::linalg::c;
use super::state::QuantumState;
use super::C64;
use crate::error::Result;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn haar_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v / c(n, 0.0)
}

pub fn haar_state<R: Rng + ?Sized>(layout: &RegisterLayout, rng: &mut R) -> Result<QuantumState> {
    QuantumState::pure(layout.clone(), haar_vector(layout.dim(), rng))
}

/// Random mixed state: reduced state of a Haar-random purification with
/// `env_qubits` environment qubits.
pub fn random_density<R: Rng + ?Sized>(
    layout: &RegisterLayout,
    env_qubits: usize,
    rng: &mut R,
) -> Result<QuantumState> {
    let d = layout.dim();
    let e = 1usize << env_qubits;
    let g = DMatrix::from_fn(d, e, |_, _| gaussian(rng));
    let mut rho = &g * g.adjoint();
    let tr: f64 = rho.diagonal().iter().map(|z| z.re).sum();
    rho /= c(tr, 0.0);
    // Symmetrize away rounding before validation.
    let rho = (&rho + rho.adjoint()) * c(0.5, 0.0);
    QuantumState::mixed(layout.clone(), rho)
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase fix.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / c(d.norm(), 0.0) } else { c(1.0, 0.0) };
        for i in 0..dim {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// Layout with a single register, owned by node 0.
pub fn single(name: &str, qubits: usize) -> RegisterLayout {
    RegisterLayout::single(name, qubits, NodeId(0))
}
