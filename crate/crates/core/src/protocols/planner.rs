use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

fn tenth() -> f64 {
    0.1
}

/// Inputs to [`plan_parameters`]. `big_k`, `big_n` and `ln_d` default to
/// `k+1`, `m+k+1` and `n(r+1)·ln 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub r: usize,
    pub n: usize,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "tenth")]
    pub epsilon: f64,
    #[serde(default = "tenth")]
    pub delta: f64,
    #[serde(default)]
    pub ln_d: Option<f64>,
    #[serde(default)]
    pub big_k: Option<u64>,
    #[serde(default)]
    pub big_n: Option<u64>,
    /// Constant in `N = ⌈(C/ε)·ln(1/δ)⌉`.
    #[serde(default = "one")]
    pub epr_constant: f64,
}

impl PlanRequest {
    pub fn new(r: usize, n: usize, c: f64, eta: f64) -> Self {
        PlanRequest {
            r,
            n,
            c,
            eta,
            epsilon: 0.1,
            delta: 0.1,
            ln_d: None,
            big_k: None,
            big_n: None,
            epr_constant: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerOutput {
    pub request: PlanRequest,
    pub k: u64,
    pub m: u64,
    pub big_k: u64,
    pub big_n: u64,
    pub ln_d: f64,
    pub de_finetti: f64,
    /// Copies for EPR verification.
    pub epr_copies: u64,
    pub completeness: f64,
    /// `1/(c·r^η)^{1/4}`.
    pub soundness: f64,
}

/// `√(2(K−1)²·ln d/(N−K))`.
pub fn de_finetti_term(big_k: u64, big_n: u64, ln_d: f64) -> Result<f64> {
    if big_k >= big_n {
        return Err(Error::Argument(format!("de Finetti term needs K < N, got K = {big_k}, N = {big_n}")));
    }
    if !(ln_d >= 0.0) {
        return Err(Error::Argument(format!("ln d must be non-negative, got {ln_d}")));
    }
    let km1 = big_k.saturating_sub(1) as f64;
    Ok((2.0 * km1 * km1 * ln_d / (big_n - big_k) as f64).sqrt())
}

pub fn plan_k(r: usize, c: f64, eta: f64) -> u64 {
    (144.0 * c * (r as f64).powf(2.0 + eta)).ceil() as u64
}

pub fn plan_m(r: usize, n: usize, c: f64, eta: f64, k: u64) -> u64 {
    let k = k as f64;
    (2.0 * c * n as f64 * k * k * ((r + 1) as f64).powf(1.0 + eta)).ceil() as u64
}

pub fn epr_copies(epsilon: f64, delta: f64, constant: f64) -> u64 {
    ((constant / epsilon) * (1.0 / delta).ln()).ceil() as u64
}

/// `γ² / s_tm`.
pub fn locc_epsilon(gamma: f64, s_tm: usize) -> Result<f64> {
    if s_tm == 0 || !(gamma > 0.0) {
        return Err(Error::Argument(format!("need γ > 0 and s_tm > 0, got γ = {gamma}, s_tm = {s_tm}")));
    }
    Ok(gamma * gamma / s_tm as f64)
}

pub fn plan_parameters(req: &PlanRequest) -> Result<PlannerOutput> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Argument(format!("{name} must be positive, got {v}")))
        }
    };
    if req.r == 0 || req.n == 0 {
        return Err(Error::Argument(format!("r and n must be positive, got r = {}, n = {}", req.r, req.n)));
    }
    positive("c", req.c)?;
    positive("epsilon", req.epsilon)?;
    positive("C", req.epr_constant)?;
    if !(req.delta > 0.0 && req.delta < 1.0) {
        return Err(Error::Argument(format!("delta must lie in (0, 1), got {}", req.delta)));
    }
    if !(req.eta >= 0.0) {
        return Err(Error::Argument(format!("eta must be non-negative, got {}", req.eta)));
    }
    let k = plan_k(req.r, req.c, req.eta);
    let m = plan_m(req.r, req.n, req.c, req.eta, k);
    let big_k = req.big_k.unwrap_or(k + 1);
    let big_n = req.big_n.unwrap_or(m + k + 1);
    let ln_d = req.ln_d.unwrap_or((req.n * (req.r + 1)) as f64 * std::f64::consts::LN_2);
    Ok(PlannerOutput {
        request: req.clone(),
        k,
        m,
        big_k,
        big_n,
        ln_d,
        de_finetti: de_finetti_term(big_k, big_n, ln_d)?,
        epr_copies: epr_copies(req.epsilon, req.delta, req.epr_constant),
        completeness: 1.0,
        soundness: (req.c * (req.r as f64).powf(req.eta)).powf(-0.25),
    })
}

impl fmt::Display for PlannerOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = &self.request;
        let rows: Vec<(&str, String)> = vec![
            ("r", q.r.to_string()),
            ("n", q.n.to_string()),
            ("c", q.c.to_string()),
            ("eta", q.eta.to_string()),
            ("k", self.k.to_string()),
            ("m", self.m.to_string()),
            ("K", self.big_k.to_string()),
            ("N (de Finetti)", self.big_n.to_string()),
            ("ln d", format!("{:.6}", self.ln_d)),
            ("de Finetti term", format!("{:.6e}", self.de_finetti)),
            ("epsilon", q.epsilon.to_string()),
            ("delta", q.delta.to_string()),
            ("C", q.epr_constant.to_string()),
            ("N (EPR copies)", self.epr_copies.to_string()),
            ("completeness", self.completeness.to_string()),
            ("soundness", format!("{:.6}", self.soundness)),
        ];
        let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        for (name, v) in rows {
            writeln!(f, "{name:<w$}  {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_line() {
        let out = plan_parameters(&PlanRequest::new(1, 1, 1.0, 0.0)).unwrap();
        assert_eq!((out.k, out.m), (144, 82944));
        assert_eq!(out.soundness, 1.0);
        assert_eq!((out.big_k, out.big_n), (145, 83089));
    }

    #[test]
    fn de_finetti_guard() {
        assert!(de_finetti_term(5, 5, 1.0).is_err());
        assert!(de_finetti_term(6, 5, 1.0).is_err());
        let t = de_finetti_term(3, 11, 2.0).unwrap();
        assert!((t - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn epr_count_and_locc() {
        assert_eq!(epr_copies(0.1, (-1.0f64).exp(), 1.0), 10);
        assert!((locc_epsilon(0.3, 3).unwrap() - 0.03).abs() < 1e-15);
        assert!(locc_epsilon(0.3, 0).is_err());
        let mut q = PlanRequest::new(2, 1, 1.0, 0.0);
        q.big_k = Some(10);
        q.big_n = Some(10);
        assert!(plan_parameters(&q).is_err());
    }
}
