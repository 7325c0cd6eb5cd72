use nalgebra::DMatrix;

use super::linalg::hermitian_eigen;
use super::state::{QuantumState, Repr};
use super::C64;
use crate::error::{Error, Result};

fn check_shapes(a: &QuantumState, b: &QuantumState) -> Result<()> {
    if !a.layout().same_shape(b.layout()) {
        return Err(Error::Layout(
            "metric arguments must have identical register layouts".into(),
        ));
    }
    Ok(())
}

/// Fidelity `tr sqrt(sqrt(σ) ρ sqrt(σ))` (not squared).
pub fn fidelity(rho: &QuantumState, sigma: &QuantumState) -> Result<f64> {
    check_shapes(rho, sigma)?;
    let f = match (rho.repr(), sigma.repr()) {
        (Repr::Pure(a), Repr::Pure(b)) => a.dotc(b).norm(),
        (Repr::Pure(a), _) => sigma.overlap_with_pure(a).max(0.0).sqrt(),
        (_, Repr::Pure(b)) => rho.overlap_with_pure(b).max(0.0).sqrt(),
        (Repr::Mixed(r), Repr::Mixed(s)) => mixed_fidelity(r, s),
    };
    Ok(f.clamp(0.0, 1.0))
}

/// `ρ = A A†` keeping only eigenvalues above rounding noise, so that rank
/// deficient states do not pick up `√ε` contributions.
fn support_factor(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (vals, vecs) = hermitian_eigen(m);
    let floor = 1e-13 * vals.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > floor).collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |r, k| vecs[(r, keep[k])] * vals[keep[k]].sqrt())
}

fn mixed_fidelity(r: &DMatrix<C64>, s: &DMatrix<C64>) -> f64 {
    let (a, b) = (support_factor(r), support_factor(s));
    if a.ncols() == 0 || b.ncols() == 0 {
        return 0.0;
    }
    (a.adjoint() * b).singular_values().iter().sum()
}

/// Trace distance `½ ||ρ − σ||₁`.
pub fn trace_distance(rho: &QuantumState, sigma: &QuantumState) -> Result<f64> {
    check_shapes(rho, sigma)?;
    if let (Repr::Pure(a), Repr::Pure(b)) = (rho.repr(), sigma.repr()) {
        let o = a.dotc(b).norm_sqr();
        return Ok((1.0 - o).max(0.0).sqrt());
    }
    let diff = rho.density().into_owned() - sigma.density().into_owned();
    let (vals, _) = hermitian_eigen(&diff);
    Ok((0.5 * vals.iter().map(|l| l.abs()).sum::<f64>()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::random::{haar_state, random_density};
    use crate::qcore::{NodeId, RegisterLayout};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layout() -> RegisterLayout {
        RegisterLayout::single("A", 2, NodeId(0))
    }

    #[test]
    fn pure_closed_forms_agree_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = haar_state(&layout(), &mut rng).unwrap();
            let b = haar_state(&layout(), &mut rng).unwrap();
            let am = a.to_mixed().unwrap();
            let bm = b.to_mixed().unwrap();
            let f1 = fidelity(&a, &b).unwrap();
            let f2 = mixed_fidelity(&am.density(), &bm.density());
            assert!((f1 - f2).abs() < 1e-6, "{f1} {f2}");
            let d1 = trace_distance(&a, &b).unwrap();
            let d2 = trace_distance(&am, &bm).unwrap();
            assert!((d1 - d2).abs() < 1e-9);
        }
    }

    #[test]
    fn fuchs_van_de_graaf() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let a = random_density(&layout(), 2, &mut rng).unwrap();
            let b = random_density(&layout(), 1, &mut rng).unwrap();
            let f = fidelity(&a, &b).unwrap();
            let d = trace_distance(&a, &b).unwrap();
            assert!(1.0 - f <= d + 1e-9);
            assert!(d <= (1.0 - f * f).sqrt() + 1e-9);
            assert!((fidelity(&b, &a).unwrap() - f).abs() < 1e-8);
        }
    }

    #[test]
    fn layouts_must_match() {
        let a = QuantumState::zero(layout()).unwrap();
        let b = QuantumState::zero(RegisterLayout::single("B", 2, NodeId(0))).unwrap();
        assert!(fidelity(&a, &b).is_err());
    }
}
