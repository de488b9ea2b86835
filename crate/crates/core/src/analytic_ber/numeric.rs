//! Direct adaptive integration against a Gamma density, used as the
//! reference for the closed forms.

use crate::channel::GammaFit;
use crate::error::{Error, Result};
use crate::specfun::ln_gamma;
use crate::specfun::quad::{integrate_with_breaks, QuadOptions};

const SCAN_POINTS: usize = 600;
const LOG_DROP: f64 = 60.0;

/// `ln Q(x)`, finite far into the tail.
pub(crate) fn ln_q_exact(x: f64) -> f64 {
    if x < 30.0 {
        return crate::specfun::q_exact(x).ln();
    }
    let x2 = x * x;
    -0.5 * x2 - (x * (2.0 * std::f64::consts::PI).sqrt()).ln()
        + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
}

/// `ln` of the two-exponential tail approximation.
pub(crate) fn ln_q_approx(x: f64) -> f64 {
    let a = -0.5 * x * x - 12f64.ln();
    let b = -2.0 / 3.0 * x * x - 4f64.ln();
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln` of the Gamma density at `x = e^α` times the Jacobian `e^α`.
pub(crate) fn ln_gamma_density_in_log(fit: &GammaFit, alpha: f64) -> f64 {
    fit.shape * fit.rate.ln() - ln_gamma(fit.shape) + fit.shape * alpha - fit.rate * alpha.exp()
}

/// `∫ e^{logh(α)} dα` for an integrand that is negligible outside
/// `[lo, hi]` and has a single dominant bump.
///
/// The bump is located on a uniform scan, then the integral is taken over
/// the region within `LOG_DROP` nats of the peak.
pub(crate) fn log_bump_integral<F: Fn(f64) -> f64>(
    logh: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<f64> {
    let step = (hi - lo) / SCAN_POINTS as f64;
    let grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| logh(lo + step * i as f64))
        .collect();
    let (imax, &top) = grid
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::NumericFailure("integrand is NaN on the whole scan".into()))?;
    if top == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let mut a = imax;
    while a > 0 && grid[a] > top - LOG_DROP {
        a -= 1;
    }
    let mut b = imax;
    while b < SCAN_POINTS && grid[b] > top - LOG_DROP {
        b += 1;
    }
    let peak = lo + step * imax as f64;
    let left = lo + step * a as f64;
    let right = lo + step * b as f64;
    let mut breaks = vec![left];
    for k in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        let x = peak + k * step;
        if x > left && x < right {
            breaks.push(x);
        }
    }
    breaks.push(right);
    breaks.dedup();
    let mut f = |x: f64| (logh(x) - top).exp();
    let opts = QuadOptions {
        rel_tol,
        abs_tol: 0.0,
        max_intervals: 4000,
    };
    let v = integrate_with_breaks(&mut f, &breaks, opts)?;
    Ok(v * top.exp())
}

/// Scan window in `α = ln x` wide enough to cover every region where a
/// Gamma-weighted integrand with a bounded factor can matter.
pub(crate) fn log_window(fit: &GammaFit) -> (f64, f64) {
    let a0 = (fit.shape / fit.rate).ln();
    (
        a0 - (150.0 / fit.shape + 12.0),
        a0 + (1.0 + 150.0 / fit.shape).ln() + 1.0,
    )
}

/// `E[g(X)]`, `X ~ Gamma(shape, rate)`, with `ln g` supplied.
pub(crate) fn gamma_expectation_ln<G: Fn(f64) -> f64>(
    fit: &GammaFit,
    ln_g: G,
    rel_tol: f64,
) -> Result<f64> {
    let (lo, hi) = log_window(fit);
    log_bump_integral(
        |a| ln_gamma_density_in_log(fit, a) + ln_g(a.exp()),
        lo,
        hi,
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_q_helpers() {
        for x in [-3.0, 0.0, 1.0, 5.0, 29.9] {
            assert!((ln_q_exact(x) - crate::specfun::q_exact(x).ln()).abs() < 1e-10);
            assert!((ln_q_approx(x) - crate::specfun::q_approx(x).ln()).abs() < 1e-12);
        }
        // continuity across the switch to the asymptotic form
        assert!((ln_q_exact(30.0 - 1e-9) - ln_q_exact(30.0)).abs() < 1e-6);
        assert!(ln_q_exact(1e3).is_finite());
    }

    #[test]
    fn gamma_expectations() {
        for (w, l) in [(0.6, 0.3), (1.0, 2.0), (76.9, 4.13), (300.0, 10.0)] {
            let fit = GammaFit::new(w, l).unwrap();
            let one = gamma_expectation_ln(&fit, |_| 0.0, 1e-12).unwrap();
            assert!((one - 1.0).abs() < 1e-9, "{w} {l}: {one}");
            let mean = gamma_expectation_ln(&fit, |x| x.ln(), 1e-12).unwrap();
            assert!((mean - w / l).abs() < 1e-9 * (w / l), "{w} {l}");
        }
    }

    #[test]
    fn far_tail_expectation() {
        // P(X < 1) for a concentrated Gamma is tiny but still recovered
        let fit = GammaFit::new(50.0, 2.0).unwrap();
        let p = gamma_expectation_ln(
            &fit,
            |x| if x < 1.0 { 0.0 } else { f64::NEG_INFINITY },
            1e-10,
        )
        .unwrap();
        // series for the regularized lower incomplete gamma P(50, 2)
        let (a, x) = (50.0f64, 2.0f64);
        let mut term = 1.0 / a;
        let mut sum = term;
        for n in 1..200 {
            term *= x / (a + n as f64);
            sum += term;
        }
        let want = (a * x.ln() - x - ln_gamma(a)).exp() * sum;
        assert!(((p - want) / want).abs() < 1e-6, "{p} vs {want}");
    }
}
