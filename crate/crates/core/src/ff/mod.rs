//! Prime-field arithmetic, Set Equality instances, fingerprint states and
//! the classical reduction encoders.

mod field;
mod fingerprint;
mod instance;
mod reductions;

pub use field::{is_prime, next_prime, FieldElement, ListPolynomial};
pub use fingerprint::{
    build_fingerprint_state, build_g_unitary, fingerprint_amplitudes, fingerprint_widths,
    g_permutation, FingerprintLayout,
};
pub use instance::{global_poly_eval, SetEqInstance, Side};
pub use reductions::{
    case2_ell, reduction_case1, reduction_case2, reduction_case3, unrank_combination,
};
