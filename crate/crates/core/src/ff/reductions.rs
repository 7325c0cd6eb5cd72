//! Instance encoders of the classical lower-bound reductions from two-party
//! equality to Set Equality.

use super::instance::SetEqInstance;
use crate::error::{Error, Result};

const DEFAULT_C_TILDE: f64 = 4.0;

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn bits_to_int(bits: &[bool]) -> u128 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u128)
}

/// Smallest `ℓ ≥ 1` with `C(3ℓ, ℓ) ≥ 2^n`.
pub fn case2_ell(n: usize) -> usize {
    let target = 1u128 << n;
    let mut ell = 1;
    while binom(3 * ell as u64, ell as u64) < target {
        ell += 1;
    }
    ell
}

/// The `rank`-th string (lexicographic, 0 before 1) of length `len` and
/// Hamming weight `weight`.
pub fn unrank_combination(mut rank: u128, len: usize, weight: usize) -> Result<Vec<bool>> {
    if rank >= binom(len as u64, weight as u64) {
        return Err(Error::Argument(format!("rank {rank} out of range for C({len},{weight})")));
    }
    let mut out = Vec::with_capacity(len);
    let mut ones = weight;
    for i in 0..len {
        let rest = (len - i - 1) as u64;
        let with_zero = binom(rest, ones as u64);
        if ones > 0 && rank >= with_zero {
            out.push(true);
            rank -= with_zero;
            ones -= 1;
        } else {
            out.push(false);
        }
    }
    Ok(out)
}

/// `|U| < ℓ`: `x` and `y` are cut into `|U|−1` substrings of
/// `⌊log₂(ℓ/|U|)⌋` bits; substring `i` is the multiplicity of element `i`,
/// padded with the last universe element.
pub fn reduction_case1(x: &[bool], y: &[bool], universe: u64, ell: usize, r: usize) -> Result<SetEqInstance> {
    if universe < 2 || universe as usize >= ell {
        return Err(Error::Argument("case 1 needs 2 <= |U| < ell".into()));
    }
    if r == 0 {
        return Err(Error::Argument("case 1 needs r >= 1".into()));
    }
    let mut w = 0;
    while universe << (w + 1) <= ell as u64 {
        w += 1;
    }
    if w == 0 {
        return Err(Error::Argument("ell / |U| < 2 leaves no room for substrings".into()));
    }
    let n = (universe as usize - 1) * w;
    if x.len() != n || y.len() != n {
        return Err(Error::Argument(format!(
            "case 1 with |U| = {universe}, ell = {ell} takes {n}-bit inputs, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let pad = universe - 1;
    let encode = |bits: &[bool]| -> Vec<u64> {
        let mut list = Vec::with_capacity(ell);
        for (i, chunk) in bits.chunks(w).enumerate() {
            for _ in 0..bits_to_int(chunk) {
                list.push(i as u64);
            }
        }
        list.resize(ell, pad);
        list
    };
    let fill = vec![pad; ell];
    let mut a = vec![fill.clone(); r + 1];
    let mut b = vec![fill; r + 1];
    a[0] = encode(x);
    b[r] = encode(y);
    SetEqInstance::with_smallest_prime(r, ell, universe, DEFAULT_C_TILDE, a, b)
}

fn case2_positions(bits: &[bool], ell: usize, shift: u64) -> Result<Vec<u64>> {
    let s = unrank_combination(bits_to_int(bits), 3 * ell, ell)?;
    Ok(s.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| shift + i as u64 + 1)
        .collect())
}

/// `|U| = 3ℓ + 1`: `f(x)` is the lexicographic unranking of `x` among the
/// weight-`ℓ` strings of length `3ℓ`; its one-positions form `v_0`'s a-list
/// and those of `f(y)` form `v_r`'s b-list.
pub fn reduction_case2(x: &[bool], y: &[bool], r: usize) -> Result<SetEqInstance> {
    if x.len() != y.len() {
        return Err(Error::Argument("x and y differ in length".into()));
    }
    if r == 0 {
        return Err(Error::Argument("case 2 needs r >= 1".into()));
    }
    let ell = case2_ell(x.len());
    let zeros = vec![0u64; ell];
    let mut a = vec![zeros.clone(); r + 1];
    let mut b = vec![zeros; r + 1];
    a[0] = case2_positions(x, ell, 0)?;
    b[r] = case2_positions(y, ell, 0)?;
    SetEqInstance::with_smallest_prime(r, ell, 3 * ell as u64 + 1, DEFAULT_C_TILDE, a, b)
}

/// `r = 2k + 1`: pair `i` is encoded as in case 2, shifted by `3iℓ`, with
/// `x_i` at `v_i` and `y_i` at `v_{2k+1−i}`.
pub fn reduction_case3(xs: &[Vec<bool>], ys: &[Vec<bool>], r: usize) -> Result<SetEqInstance> {
    if r % 2 == 0 {
        return Err(Error::Argument(format!("case 3 needs odd r, got {r}")));
    }
    let k = (r - 1) / 2;
    if k == 0 || xs.len() != k || ys.len() != k {
        return Err(Error::Argument(format!("case 3 with r = {r} needs {k} >= 1 input pairs")));
    }
    let n = xs[0].len();
    if xs.iter().chain(ys).any(|v| v.len() != n) {
        return Err(Error::Argument("all inputs must have the same length".into()));
    }
    let ell = case2_ell(n);
    let zeros = vec![0u64; ell];
    let mut a = vec![zeros.clone(); r + 1];
    let mut b = vec![zeros; r + 1];
    for i in 0..k {
        let shift = 3 * (i * ell) as u64;
        a[i] = case2_positions(&xs[i], ell, shift)?;
        b[r - i] = case2_positions(&ys[i], ell, shift)?;
    }
    SetEqInstance::with_smallest_prime(r, ell, 3 * (k * ell) as u64 + 1, DEFAULT_C_TILDE, a, b)
}
