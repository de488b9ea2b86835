//! Noise-driven SER averaged over the Gamma law of `|H|`.
//!
//! Both detectors reduce to `E[Q(p·|H| − q)]`. With the two-exponential tail
//! approximation every term `c·e^{-κ(pt−q)²}` integrates against the Gamma
//! density in closed form through `D_{-ω}`:
//!
//! `c·λ^ω·e^{-κq²}·b^{-ω}·e^{γ²/(4b²)}·D_{-ω}(γ/b)`, `b² = 2κp²`, `γ = λ − 2κpq`.

use super::numeric::{gamma_expectation_ln, ln_q_approx, ln_q_exact};
use super::{AnalyticConfig, QKernel};
use crate::channel::GammaFit;
use crate::error::{Error, Result};
use crate::specfun::{harmonic_approx, ln_pcf_d_scaled, Q_APPROX_TERMS};

const ORACLE_REL_TOL: f64 = 1e-10;

/// `(ε₁, ε₂)` of the coherent max-of-Gaussians approximation.
pub fn coherent_epsilons(sf: u32) -> (f64, f64) {
    let sf = sf as f64;
    let e1 = 0.5f64.sqrt() * (1.161 + 0.2074 * sf);
    let e2 = (0.5 + 0.5 * (0.2775 - 0.0153 * sf)).sqrt();
    (e1, e2)
}

fn noncoherent_pq(cfg: &AnalyticConfig) -> Result<(f64, f64)> {
    let u1 = (2.0 * cfg.snr_linear * cfg.k()).sqrt();
    let u2 = (2.0 * harmonic_approx(cfg.params.k() as u64 - 2)?).sqrt();
    Ok((u1, u2))
}

fn coherent_pq(cfg: &AnalyticConfig) -> (f64, f64) {
    let (e1, e2) = coherent_epsilons(cfg.params.sf());
    ((cfg.snr_linear * cfg.k()).sqrt() / e2, e1 / e2)
}

/// `E[q_approx(p·T − q)]` for `T ~ Gamma(ω, λ)` by the parabolic-cylinder closed form.
pub(crate) fn two_exp_closed_form(fit: &GammaFit, p: f64, q: f64) -> Result<f64> {
    let (w, l) = (fit.shape, fit.rate);
    let mut total = 0.0;
    for (c, kappa) in Q_APPROX_TERMS {
        let b = (2.0 * kappa).sqrt() * p;
        let gamma = l - 2.0 * kappa * p * q;
        let z = gamma / b;
        let ln_term = c.ln() + w * (l / b).ln() - kappa * q * q + ln_pcf_d_scaled(w, z)?;
        total += ln_term.exp();
    }
    if !total.is_finite() {
        return Err(Error::NumericFailure(format!(
            "noise closed form not finite (ω={w}, λ={l}, p={p}, q={q})"
        )));
    }
    Ok(total)
}

fn numeric(fit: &GammaFit, p: f64, q: f64, kernel: QKernel) -> Result<f64> {
    match kernel {
        QKernel::Exact => gamma_expectation_ln(fit, |t| ln_q_exact(p * t - q), ORACLE_REL_TOL),
        QKernel::TwoExp => gamma_expectation_ln(fit, |t| ln_q_approx(p * t - q), ORACLE_REL_TOL),
    }
}

/// Noise-driven SER of the non-coherent detector, `E[Q(U₁|H| − U₂)]` with
/// `U₁ = √(2ΓK)` and `U₂ = √(2Φ_{K−2})`, in closed form.
pub fn noise_ser_noncoherent(cfg: &AnalyticConfig) -> Result<f64> {
    cfg.validate()?;
    let (p, q) = noncoherent_pq(cfg)?;
    two_exp_closed_form(&cfg.fits.target, p, q)
}

/// Direct integration of the non-coherent noise expectation with either tail kernel.
pub fn noise_ser_noncoherent_numeric(cfg: &AnalyticConfig, kernel: QKernel) -> Result<f64> {
    cfg.validate()?;
    let (p, q) = noncoherent_pq(cfg)?;
    numeric(&cfg.fits.target, p, q, kernel)
}

/// Noise-driven SER of the coherent detector, `E[Q((√(ΓK)|H| − ε₁)/ε₂)]`, in closed form.
///
/// The `ε` fit is only calibrated for SF ≥ 7; smaller SF is evaluated anyway
/// and logged.
pub fn noise_ser_coherent(cfg: &AnalyticConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.params.sf() < 7 {
        log::warn!(
            "coherent noise approximation used at SF{} (< 7)",
            cfg.params.sf()
        );
    }
    let (p, q) = coherent_pq(cfg);
    two_exp_closed_form(&cfg.fits.target, p, q)
}

/// Direct integration of the coherent noise expectation with either tail kernel.
pub fn noise_ser_coherent_numeric(cfg: &AnalyticConfig, kernel: QKernel) -> Result<f64> {
    cfg.validate()?;
    let (p, q) = coherent_pq(cfg);
    numeric(&cfg.fits.target, p, q, kernel)
}
