//! Numerical kernels used by the analytic BER engine.
//!
//! Everything here is a pure function of its arguments. The Gaussian tail uses
//! `libm::erfc`; the Gamma function, Gauss-Hermite rules, the parabolic
//! cylinder function and the adaptive integrator are implemented locally.

mod hermite;
mod pcf;
pub mod quad;

pub use hermite::{gauss_hermite, gauss_hermite_cached, QuadratureRule};
pub use pcf::{ln_pcf_d, ln_pcf_d_scaled, pcf_d};

use crate::error::{invalid, Result};
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is already shifted down by one
    let mut a = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// Natural log of the Gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps the Lanczos sum in its accurate range
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln()
}

/// Gamma function on the positive real axis.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!(
            "gamma_fn requires a finite positive argument, got {x}"
        ));
    }
    if x < 0.5 {
        return Ok(PI / ((PI * x).sin() * gamma_fn(1.0 - x)?));
    }
    if x > 171.0 {
        return Ok(ln_gamma(x).exp());
    }
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    Ok((2.0 * PI).sqrt() * t.powf(xm + 0.5) * (-t).exp() * lanczos_sum(xm))
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_exact(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Two-exponential approximation `Q(x) ≈ e^{-x²/2}/12 + e^{-2x²/3}/4`.
///
/// Intended for `x >= 0`; for negative arguments the formula is still evaluated
/// as written (and then exceeds 1/3 rather than tending to 1).
pub fn q_approx(x: f64) -> f64 {
    (-x * x / 2.0).exp() / 12.0 + (-2.0 * x * x / 3.0).exp() / 4.0
}

/// Coefficients `(c, k)` of the two terms `c·exp(-k·x²)` of [`q_approx`].
pub(crate) const Q_APPROX_TERMS: [(f64, f64); 2] = [(1.0 / 12.0, 0.5), (0.25, 2.0 / 3.0)];

/// Asymptotic harmonic number `ln(m) + 1/(2m) + 0.57722`.
pub fn harmonic_approx(count: u64) -> Result<f64> {
    if count == 0 {
        return invalid("harmonic_approx requires count >= 1");
    }
    let m = count as f64;
    Ok(m.ln() + 1.0 / (2.0 * m) + 0.57722)
}
