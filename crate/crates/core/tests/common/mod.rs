//! Reference integrals built only from adaptive Simpson and `libm::erfc`,
//! sharing no numerical code with the library.

#![allow(dead_code)]

use std::f64::consts::PI;

pub fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn q_two_exp(x: f64) -> f64 {
    (-x * x / 2.0).exp() / 12.0 + (-2.0 * x * x / 3.0).exp() / 4.0
}

/// Stirling series with upward shift, good to ~1e-14 for `x > 0`.
pub fn ln_gamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 12.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let x2 = x * x;
    let series = 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2) + 1.0 / (1260.0 * x2 * x2 * x)
        - 1.0 / (1680.0 * x2 * x2 * x2 * x);
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

/// Adaptive Simpson over `panels` equal pieces with relative tolerance `rel`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, rel: f64) -> f64 {
    let h = (b - a) / panels as f64;
    let coarse: Vec<(f64, f64, f64, f64, f64)> = (0..panels)
        .map(|i| {
            let (x0, x1) = (a + h * i as f64, a + h * (i + 1) as f64);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            (x0, x1, f0, fm, f1)
        })
        .collect();
    let scale: f64 = coarse
        .iter()
        .map(|c| (c.1 - c.0) / 6.0 * (c.2.abs() + 4.0 * c.3.abs() + c.4.abs()))
        .sum();
    if scale == 0.0 {
        return 0.0;
    }
    let eps = rel * scale / panels as f64;
    coarse
        .iter()
        .map(|&(x0, x1, f0, fm, f1)| {
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            simpson_rec(&f, x0, x1, f0, fm, f1, whole, eps, 40)
        })
        .sum()
}

/// `E[g(X)]` for `X ~ Gamma(shape, rate)`, integrating in `u = ln x`.
pub fn gamma_expect<G: Fn(f64) -> f64>(shape: f64, rate: f64, g: G, rel: f64) -> f64 {
    let u0 = (shape / rate).ln();
    let lo = u0 - (45.0 / shape + 6.0);
    let hi = u0 + (1.0 + 60.0 / shape).ln() + 2.0;
    let norm = shape * rate.ln() - ln_gamma(shape);
    simpson(
        |u| (norm + shape * u - rate * u.exp()).exp() * g(u.exp()),
        lo,
        hi,
        120,
        rel,
    )
}

/// Conditional interference SER by nested integration.
///
/// `power_law`: the interferer Gamma law describes the power, so the
/// amplitude is its square root.
pub fn interf_conditional(
    target: (f64, f64),
    interferer: (f64, f64),
    power_law: bool,
    amp: f64,
    chi: f64,
    coherent: bool,
) -> f64 {
    let at = |c: f64| {
        gamma_expect(
            interferer.0,
            interferer.1,
            |y| {
                let s = if power_law { y.sqrt() } else { y };
                gamma_expect(target.0, target.1, |t| q(amp * (t - s * chi * c)), 1e-7)
            },
            1e-6,
        )
    };
    if coherent {
        simpson(|th| at(th.cos()), 0.0, PI, 4, 1e-5) / PI
    } else {
        at(1.0)
    }
}
