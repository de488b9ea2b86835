//! Misaligned co-SF interferer frames and the cross-correlation bounds χ.

use crate::error::{invalid, Result};
use crate::lora_phy::{modulate, LoRaParams};
use num_complex::Complex64;
use std::f64::consts::PI;

/// The two interfering symbols overlapping the target window and the
/// boundary offset `tau` (samples of `i1` before `i2` starts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InterfererState {
    pub i1: usize,
    pub i2: usize,
    pub tau: usize,
}

impl InterfererState {
    pub fn new(i1: usize, i2: usize, tau: usize, params: &LoRaParams) -> Result<Self> {
        let s = Self { i1, i2, tau };
        s.validate(params)?;
        Ok(s)
    }

    pub fn validate(&self, params: &LoRaParams) -> Result<()> {
        let k = params.k();
        if self.i1 >= k || self.i2 >= k {
            return invalid(format!(
                "interfering symbols ({}, {}) out of range for K = {k}",
                self.i1, self.i2
            ));
        }
        check_tau(self.tau, k)
    }
}

fn check_tau(tau: usize, k: usize) -> Result<()> {
    if tau > k / 2 {
        return invalid(format!("offset tau = {tau} exceeds K/2 = {}", k / 2));
    }
    Ok(())
}

/// Samples `0..tau` of `modulate(i1)` followed by samples `tau..K` of `modulate(i2)`.
pub fn build_interferer_frame(
    state: &InterfererState,
    params: &LoRaParams,
) -> Result<Vec<Complex64>> {
    state.validate(params)?;
    let mut frame = modulate(state.i2, params)?;
    if state.tau > 0 {
        let head = modulate(state.i1, params)?;
        frame[..state.tau].copy_from_slice(&head[..state.tau]);
    }
    Ok(frame)
}

// (1/K) Σ_{n=from}^{to-1} e^{j2π d n / K}
fn geometric_sum(d: usize, from: usize, to: usize, k: usize) -> Complex64 {
    let len = to - from;
    if d.is_multiple_of(k) || len == 0 {
        return Complex64::new(len as f64 / k as f64, 0.0);
    }
    let theta = 2.0 * PI * d as f64 / k as f64;
    let at = |n: usize| Complex64::from_polar(1.0, 2.0 * PI * ((d * n) % k) as f64 / k as f64);
    (at(from) - at(to)) / (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, theta)) / k as f64
}

/// Contributions of the `i1` segment and the `i2` segment to bin `bin` of the
/// dechirped interferer frame.
pub fn psi_partial_sums(
    bin: usize,
    state: &InterfererState,
    params: &LoRaParams,
) -> Result<(Complex64, Complex64)> {
    state.validate(params)?;
    params.check_symbol(bin)?;
    let k = params.k();
    let d1 = (state.i1 + k - bin) % k;
    let d2 = (state.i2 + k - bin) % k;
    Ok((
        geometric_sum(d1, 0, state.tau, k),
        geometric_sum(d2, state.tau, k, k),
    ))
}

/// `|sin(π ρ d / K) / sin(π d / K)|`, with the removable singularity at `d ≡ 0` set to `ρ`.
pub(crate) fn sine_ratio(rho: usize, d: usize, k: usize) -> f64 {
    let d = d % k;
    if d == 0 {
        return rho as f64;
    }
    let num = ((rho * d) % (2 * k)) as f64;
    ((PI * num / k as f64).sin() / (PI * d as f64 / k as f64).sin()).abs()
}

/// Triangle-inequality bound `(Δ₁ + Δ₂)/K` on the interferer's magnitude in bin `bin`.
pub fn chi_bound(bin: usize, state: &InterfererState, params: &LoRaParams) -> Result<f64> {
    state.validate(params)?;
    params.check_symbol(bin)?;
    let k = params.k();
    let d1 = (state.i1 + k - bin) % k;
    let d2 = (state.i2 + k - bin) % k;
    Ok((sine_ratio(state.tau, d1, k) + sine_ratio(k - state.tau, d2, k)) / k as f64)
}

/// `χ_I = (|sin(πIτ/K)/sin(πI/K)| + K − τ)/K`, the bound at bin `i2` for `I = i2 − i1`.
pub fn chi_of_i(i: usize, tau: usize, params: &LoRaParams) -> Result<f64> {
    let k = params.k();
    params.check_symbol(i)?;
    check_tau(tau, k)?;
    Ok(chi_of_i_unchecked(i, tau, k))
}

pub(crate) fn chi_of_i_unchecked(i: usize, tau: usize, k: usize) -> f64 {
    (sine_ratio(tau, i, k) + (k - tau) as f64) / k as f64
}
