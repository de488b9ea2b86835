use super::ln_gamma;
use super::quad::{integrate_with_breaks, QuadOptions};
use crate::error::{invalid, Result};

// the integrand is negligible once it falls this far (in log) below its peak
const LOG_CUTOFF: f64 = -60.0;
const MAX_EXPANSIONS: usize = 200;

/// Parabolic cylinder function `D_{-ω}(z)` for `ω > 0`.
pub fn pcf_d(omega: f64, z: f64) -> Result<f64> {
    Ok(ln_pcf_d(omega, z)?.exp())
}

/// `ln D_{-ω}(z)`. Finite even where `D` itself under- or overflows.
pub fn ln_pcf_d(omega: f64, z: f64) -> Result<f64> {
    Ok(ln_pcf_d_scaled(omega, z)? - 0.25 * z * z)
}

/// `ln D_{-ω}(z) + z²/4`, i.e. `ln( (1/Γ(ω)) ∫₀^∞ t^{ω-1} e^{-zt - t²/2} dt )`.
pub fn ln_pcf_d_scaled(omega: f64, z: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return invalid(format!(
            "pcf_d requires a finite positive order, got {omega}"
        ));
    }
    if !z.is_finite() {
        return invalid(format!("pcf_d requires a finite argument, got {z}"));
    }
    let ln_int = if omega <= 1.0 {
        // t = u^{1/ω} removes the endpoint singularity and leaves a bounded integrand
        let p = 1.0 / omega;
        let logf = move |u: f64| -z * u.powf(p) - 0.5 * u.powf(2.0 * p);
        let (peak, width) = if z < 0.0 {
            ((-z).powf(omega), omega * (-z).powf(omega - 1.0).max(1e-3))
        } else {
            (0.0, (1.0 / z.max(1.0)).powf(omega))
        };
        log_integral(logf, peak, width)? - omega.ln()
    } else {
        let a = omega - 1.0;
        let logf = move |t: f64| a * t.ln() - z * t - 0.5 * t * t;
        let peak = 2.0 * a / (z + (z * z + 4.0 * a).sqrt());
        let width = 1.0 / (a / (peak * peak) + 1.0).sqrt();
        log_integral(logf, peak, width)?
    };
    Ok(ln_int - ln_gamma(omega))
}

/// `ln ∫₀^∞ e^{logf(x)} dx` for a unimodal `logf` peaking at `peak >= 0`.
fn log_integral<F: Fn(f64) -> f64>(logf: F, peak: f64, width: f64) -> Result<f64> {
    let top = logf(peak);
    let mut hi_step = width;
    let mut n = 0;
    while logf(peak + hi_step) - top > LOG_CUTOFF {
        hi_step *= 2.0;
        n += 1;
        if n > MAX_EXPANSIONS {
            return Err(crate::Error::NumericFailure(format!(
                "pcf_d: integrand does not decay (peak {peak:e}, width {width:e})"
            )));
        }
    }
    let hi = peak + hi_step;
    let mut lo = 0.0;
    if peak > 0.0 {
        let mut step = width;
        while step < peak && logf(peak - step) - top > LOG_CUTOFF {
            step *= 2.0;
        }
        lo = (peak - step).max(0.0);
    }
    let mut breaks = vec![lo, (peak - width).max(lo), peak, (peak + width).min(hi), hi];
    breaks.dedup();
    let mut f = |x: f64| (logf(x) - top).exp();
    let opts = QuadOptions {
        rel_tol: 1e-13,
        abs_tol: 0.0,
        max_intervals: 4000,
    };
    let v = integrate_with_breaks(&mut f, &breaks, opts)
        .map_err(|e| crate::Error::NumericFailure(format!("pcf_d quadrature failed: {e}")))?;
    Ok(top + v.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // composite Simpson on a long uniform grid
    fn simpson_oracle(omega: f64, z: f64) -> f64 {
        let n = 400_000;
        let upper = 40.0;
        let h = upper / n as f64;
        let f = |t: f64| {
            if t == 0.0 {
                0.0
            } else {
                t.powf(omega - 1.0) * (-z * t - 0.5 * t * t).exp()
            }
        };
        let mut s = f(0.0) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        (-z * z / 4.0).exp() * s * h / 3.0 / crate::specfun::gamma_fn(omega).unwrap()
    }

    #[test]
    fn closed_form_orders() {
        assert!(rel(pcf_d(1.0, 0.0).unwrap(), (PI / 2.0).sqrt()) < 1e-10);
        assert!(rel(pcf_d(2.0, 0.0).unwrap(), 1.0) < 1e-10);
        for z in [0.0, 0.5, 1.0, 2.0, -3.0, 8.0] {
            let want = (z * z / 4.0f64).exp() * (PI / 2.0).sqrt() * libm::erfc(z / 2f64.sqrt());
            assert!(rel(pcf_d(1.0, z).unwrap(), want) < 1e-8, "z={z}");
        }
    }

    #[test]
    fn matches_simpson_oracle() {
        assert!(rel(pcf_d(3.5, 1.2).unwrap(), simpson_oracle(3.5, 1.2)) < 1e-8);
        assert!(rel(pcf_d(7.25, -2.0).unwrap(), simpson_oracle(7.25, -2.0)) < 1e-8);
    }

    #[test]
    fn three_term_recurrence() {
        // D_{1-ω} - z D_{-ω} - ω D_{-ω-1} = 0
        for &omega in &[1.05, 1.3, 1.5, 4.0, 20.0, 77.0] {
            for &z in &[-10.0, -1.0, 0.0, 0.7, 5.0, 30.0] {
                let a = ln_pcf_d_scaled(omega - 1.0, z).unwrap().exp();
                let b = z * ln_pcf_d_scaled(omega, z).unwrap().exp();
                let c = omega * ln_pcf_d_scaled(omega + 1.0, z).unwrap().exp();
                assert!(
                    (a - b - c).abs() <= 1e-8 * a.abs().max(b.abs()),
                    "ω={omega} z={z}"
                );
            }
        }
    }

    #[test]
    fn small_order_and_extreme_arguments() {
        for &(omega, z) in &[
            (0.3, 2.0),
            (0.3, -4.0),
            (0.05, 0.0),
            (0.9, 50.0),
            (40.0, -50.0),
            (120.0, 50.0),
        ] {
            let v = ln_pcf_d(omega, z).unwrap();
            assert!(v.is_finite(), "ω={omega} z={z}");
        }
    }

    #[test]
    fn rejects_bad_order() {
        assert!(pcf_d(0.0, 1.0).is_err());
        assert!(pcf_d(-1.0, 1.0).is_err());
        assert!(pcf_d(1.0, f64::NAN).is_err());
    }
}
