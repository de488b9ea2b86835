//! Interference-driven SER.
//!
//! Conditioned on `χ_I`, the error event is `Q(√(ΓK)(|H| − S·χ_I·c))` where
//! `S` is the interferer amplitude (`√|H_A|²` or `|H_B|`) and `c = 1` for the
//! non-coherent detector or `cos ϑ` for the coherent one. The expectation over
//! the two Gamma laws is a double Gauss-Hermite sum in `α = ln x`; the phase
//! average is an `M`-point staircase.

use super::numeric::{gamma_expectation_ln, ln_q_approx, ln_q_exact};
use super::{clamp_probability, AnalyticConfig, Detection, InterfCase, NodeMapping, QKernel};
use crate::channel::GammaFit;
use crate::error::{Error, Result};
use crate::interference::chi_of_i_unchecked;
use crate::specfun::quad::{integrate, QuadOptions};
use crate::specfun::{gauss_hermite_cached, ln_gamma, q_approx, q_exact, QuadratureRule};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

const PRUNE_REL: f64 = 1e-16;
// Q(x) rounds to 1 below this and to 0 above the upper cut
const Q_ONE_BELOW: f64 = -9.0;
const Q_ZERO_ABOVE: f64 = 38.5;
const CHI_KEY_SCALE: f64 = 1e9;

/// Gauss-Hermite nodes mapped onto a Gamma law: `E[g(X)] ≈ Σ wᵢ g(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaNodes {
    /// ascending
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GammaNodes {
    pub fn new(fit: &GammaFit, rule: &QuadratureRule, mapping: NodeMapping) -> Self {
        let (w, l) = (fit.shape, fit.rate);
        let (a0, s) = match mapping {
            NodeMapping::Adaptive => ((w / l).ln(), (2.0 / w).sqrt()),
            NodeMapping::Raw => (0.0, 1.0),
        };
        let norm = w * l.ln() - ln_gamma(w) + s.ln();
        let mut pairs: Vec<(f64, f64)> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&u, &psi)| {
                let alpha = a0 + s * u;
                let x = alpha.exp();
                (x, psi * (norm + u * u + w * alpha - l * x).exp())
            })
            .filter(|(x, wt)| x.is_finite() && wt.is_finite())
            .collect();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        pairs.retain(|p| p.1 > PRUNE_REL * total);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            values: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

// the two-exponential form is only meaningful for x ≥ 0, so it is mirrored
fn kernel_q(kernel: QKernel, x: f64) -> f64 {
    match kernel {
        QKernel::Exact => q_exact(x),
        QKernel::TwoExp if x >= 0.0 => q_approx(x),
        QKernel::TwoExp => 1.0 - q_approx(-x),
    }
}

fn kernel_ln_q(kernel: QKernel, x: f64) -> f64 {
    match kernel {
        QKernel::Exact => ln_q_exact(x),
        QKernel::TwoExp if x >= 0.0 => ln_q_approx(x),
        QKernel::TwoExp => (1.0 - q_approx(-x)).ln(),
    }
}

/// Precomputed node sets and phase staircase for one configuration.
struct Evaluator {
    target: GammaNodes,
    cum_target: Vec<f64>,
    interferer: Vec<(f64, f64)>,
    phases: Vec<(f64, f64)>,
    amp: f64,
    kernel: QKernel,
}

fn interferer_amplitude(case: InterfCase, y: f64) -> f64 {
    match case {
        // the case A fit describes the power |H_A|²
        InterfCase::A => y.sqrt(),
        InterfCase::B => y,
    }
}

fn staircase(m: usize) -> Vec<(f64, f64)> {
    let mut groups: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for k in 1..=m {
        let c = (2.0 * PI * k as f64 / m as f64).cos();
        let e = groups.entry((c * 1e12).round() as i64).or_insert((c, 0.0));
        e.1 += 1.0 / m as f64;
    }
    groups.into_values().collect()
}

impl Evaluator {
    fn new(cfg: &AnalyticConfig, case: InterfCase, detection: Detection) -> Result<Self> {
        cfg.validate()?;
        let ifit = cfg.fits.interferer(case)?;
        let r1 = gauss_hermite_cached(cfg.quadrature_order_v1)?;
        let r2 = gauss_hermite_cached(cfg.quadrature_order_v2)?;
        let target = GammaNodes::new(&cfg.fits.target, &r1, cfg.node_mapping);
        let inodes = GammaNodes::new(&ifit, &r2, cfg.node_mapping);
        if target.is_empty() || inodes.is_empty() {
            return Err(Error::NumericFailure(
                "Gauss-Hermite node set collapsed after mapping".into(),
            ));
        }
        let mut cum_target = Vec::with_capacity(target.len() + 1);
        let mut acc = 0.0;
        cum_target.push(0.0);
        for w in &target.weights {
            acc += w;
            cum_target.push(acc);
        }
        let interferer = inodes
            .values
            .iter()
            .zip(&inodes.weights)
            .map(|(&y, &w)| (interferer_amplitude(case, y), w))
            .collect();
        let phases = match detection {
            Detection::NonCoherent => vec![(1.0, 1.0)],
            Detection::Coherent => staircase(cfg.staircase_m),
        };
        Ok(Self {
            target,
            cum_target,
            interferer,
            phases,
            amp: (cfg.snr_linear * cfg.k()).sqrt(),
            kernel: cfg.interf_kernel,
        })
    }

    // Σᵢ wᵢ Q(amp·(tᵢ − d))
    fn target_sum(&self, d: f64) -> f64 {
        let t = &self.target.values;
        let w = &self.target.weights;
        if self.kernel == QKernel::TwoExp {
            return t
                .iter()
                .zip(w)
                .map(|(&ti, &wi)| wi * kernel_q(self.kernel, self.amp * (ti - d)))
                .sum();
        }
        let lo = t.partition_point(|&ti| self.amp * (ti - d) < Q_ONE_BELOW);
        let hi = t.partition_point(|&ti| self.amp * (ti - d) <= Q_ZERO_ABOVE);
        let mut s = self.cum_target[lo];
        for i in lo..hi {
            s += w[i] * q_exact(self.amp * (t[i] - d));
        }
        s
    }

    fn conditional(&self, chi: f64) -> f64 {
        let mut total = 0.0;
        for &(c, pw) in &self.phases {
            let mut inner = 0.0;
            for &(s, w) in &self.interferer {
                inner += w * self.target_sum(s * chi * c);
            }
            total += pw * inner;
        }
        total
    }
}

/// Gauss-Hermite (and staircase) value of the conditional interference SER for a given `χ_I`.
pub fn interf_conditional(
    cfg: &AnalyticConfig,
    case: InterfCase,
    detection: Detection,
    chi: f64,
) -> Result<f64> {
    Ok(Evaluator::new(cfg, case, detection)?.conditional(chi))
}

/// Nested adaptive integration of the same conditional, with a continuous
/// phase average for the coherent detector.
pub fn interf_conditional_numeric(
    cfg: &AnalyticConfig,
    case: InterfCase,
    detection: Detection,
    chi: f64,
) -> Result<f64> {
    cfg.validate()?;
    let ifit = cfg.fits.interferer(case)?;
    let target = cfg.fits.target;
    let amp = (cfg.snr_linear * cfg.k()).sqrt();
    let kernel = cfg.interf_kernel;
    let rel_tol = 1e-8;
    let inner =
        |d: f64| gamma_expectation_ln(&target, |t| kernel_ln_q(kernel, amp * (t - d)), rel_tol);
    let at_phase = |c: f64| -> Result<f64> {
        let failure = std::cell::RefCell::new(None);
        let v = gamma_expectation_ln(
            &ifit,
            |y| match inner(interferer_amplitude(case, y) * chi * c) {
                Ok(v) => v.ln(),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            rel_tol,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        v
    };
    match detection {
        Detection::NonCoherent => at_phase(1.0),
        Detection::Coherent => {
            let mut err = None;
            let v = integrate(
                |th| match at_phase(th.cos()) {
                    Ok(v) => v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                0.0,
                PI,
                QuadOptions {
                    rel_tol: 1e-6,
                    abs_tol: 0.0,
                    max_intervals: 200,
                },
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            Ok(v / PI)
        }
    }
}

/// Distinct `χ_I` values over `I ∈ [0, K)`, `τ ∈ [0, K/2]` with their multiplicities.
pub(crate) fn chi_table(k: usize) -> Vec<(f64, u64)> {
    let mut table: BTreeMap<i64, (f64, u64)> = BTreeMap::new();
    for tau in 0..=k / 2 {
        for i in 0..k {
            let chi = chi_of_i_unchecked(i, tau, k);
            let e = table
                .entry((chi * CHI_KEY_SCALE).round() as i64)
                .or_insert((chi, 0));
            e.1 += 1;
        }
    }
    table.into_values().collect()
}

/// Interference-driven SER averaged uniformly over `I` and `τ`.
pub fn interf_ser(cfg: &AnalyticConfig, case: InterfCase, detection: Detection) -> Result<f64> {
    let ev = Evaluator::new(cfg, case, detection)?;
    let k = cfg.params.k();
    let table = chi_table(k);
    let values: Vec<f64> = table
        .par_iter()
        .map(|&(chi, _)| ev.conditional(chi))
        .collect();
    let total: f64 = table
        .iter()
        .zip(&values)
        .map(|(&(_, n), &v)| n as f64 * v)
        .sum();
    let p = total / (k as f64 * (k / 2 + 1) as f64);
    if !p.is_finite() {
        return Err(Error::NumericFailure(format!(
            "interference SER is not finite ({case:?}, {detection:?})"
        )));
    }
    Ok(clamp_probability(p))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::channel::FadingConfig;
    use crate::lora_phy::LoRaParams;

    fn cfg(sf: u32, m: f64, n: usize, snr_db: f64) -> AnalyticConfig {
        let p = LoRaParams::with_sf(sf).unwrap();
        let f = FadingConfig::uniform(m, n).unwrap();
        AnalyticConfig::from_fading(p, &f, db_to_linear(snr_db)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn nodes_integrate_gamma_moments() {
        let rule = gauss_hermite_cached(70).unwrap();
        for (w, l) in [
            (76.93, 4.134),
            (1.0011, 0.04767),
            (119.56, 6.173),
            (2.0, 2.0),
        ] {
            let fit = GammaFit::new(w, l).unwrap();
            let nodes = GammaNodes::new(&fit, &rule, NodeMapping::Adaptive);
            let m0: f64 = nodes.weights.iter().sum();
            let m1: f64 = nodes
                .values
                .iter()
                .zip(&nodes.weights)
                .map(|(x, w)| x * w)
                .sum();
            let m2: f64 = nodes
                .values
                .iter()
                .zip(&nodes.weights)
                .map(|(x, w)| x * x * w)
                .sum();
            // a near-exponential law has a heavy left tail in ln x
            let tol = if w < 10.0 { 1e-6 } else { 1e-10 };
            assert!((m0 - 1.0).abs() < tol, "{w} {l}: {m0}");
            assert!(rel(m1, fit.mean()) < tol);
            assert!(rel(m2 - m1 * m1, fit.variance()) < 100.0 * tol);
            assert!(nodes.values.windows(2).all(|p| p[1] >= p[0]));
        }
    }

    #[test]
    fn raw_mapping_is_coarse() {
        // the untransformed template misplaces nodes for a concentrated law
        let rule = gauss_hermite_cached(70).unwrap();
        let fit = GammaFit::new(76.93, 4.134).unwrap();
        let raw = GammaNodes::new(&fit, &rule, NodeMapping::Raw);
        let m0: f64 = raw.weights.iter().sum();
        assert!((m0 - 1.0).abs() > 1e-6);
    }

    #[test]
    fn staircase_weights() {
        let s = staircase(20);
        assert_eq!(s.len(), 11);
        assert!((s.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(staircase(1), vec![(1.0, 1.0)]);
    }

    #[test]
    fn chi_table_counts() {
        for sf in [2, 5, 7] {
            let k = 1usize << sf;
            let t = chi_table(k);
            let n: u64 = t.iter().map(|p| p.1).sum();
            assert_eq!(n as usize, k * (k / 2 + 1));
            assert!(t.iter().all(|&(c, _)| c > 0.49 && c <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn conditional_matches_nested_integration() {
        let c = cfg(7, 2.0, 25, -25.0);
        let k = 128;
        for (i, tau) in [(1, 64), (5, 32), (64, 17), (3, 1), (100, 60)] {
            let chi = chi_of_i_unchecked(i, tau, k);
            let gh = interf_conditional(&c, InterfCase::A, Detection::NonCoherent, chi).unwrap();
            let num =
                interf_conditional_numeric(&c, InterfCase::A, Detection::NonCoherent, chi).unwrap();
            assert!(rel(gh, num) < 1e-2, "I={i} τ={tau}: {gh} vs {num}");
        }
        for case in [InterfCase::A, InterfCase::B] {
            let chi = chi_of_i_unchecked(5, 32, k);
            let gh = interf_conditional(&c, case, Detection::Coherent, chi).unwrap();
            let num = interf_conditional_numeric(&c, case, Detection::Coherent, chi).unwrap();
            assert!(rel(gh, num) < 1e-2, "{case:?}: {gh} vs {num}");
        }
    }

    #[test]
    fn zero_interference_gain() {
        let c = cfg(7, 2.0, 25, -30.0);
        for case in [InterfCase::A, InterfCase::B] {
            for det in [Detection::NonCoherent, Detection::Coherent] {
                let v = interf_conditional(&c, case, det, 0.0).unwrap();
                assert!(v > 0.0 && v < 0.5);
                assert!(v <= interf_conditional(&c, case, det, 0.9).unwrap());
            }
        }
    }

    #[test]
    fn quadrature_order_convergence() {
        for case in [InterfCase::A, InterfCase::B] {
            let c70 = cfg(7, 2.0, 25, -25.0);
            let mut c90 = c70;
            c90.quadrature_order_v1 = 90;
            c90.quadrature_order_v2 = 90;
            let a = interf_ser(&c70, case, Detection::NonCoherent).unwrap();
            let b = interf_ser(&c90, case, Detection::NonCoherent).unwrap();
            assert!(rel(a, b) < 1e-3, "{case:?}: V70 {a} V90 {b}");
            let mut c40 = c70;
            c40.staircase_m = 40;
            let a = interf_ser(&c70, case, Detection::Coherent).unwrap();
            let b = interf_ser(&c40, case, Detection::Coherent).unwrap();
            assert!(rel(a, b) < 1e-3, "{case:?}: M20 {a} M40 {b}");
        }
    }

    #[test]
    fn symmetric_in_symbol_difference() {
        let c = cfg(6, 2.0, 10, -20.0);
        let k = 64;
        for tau in [0, 7, 32] {
            for i in 1..k {
                let a = interf_conditional(
                    &c,
                    InterfCase::A,
                    Detection::NonCoherent,
                    chi_of_i_unchecked(i, tau, k),
                )
                .unwrap();
                let b = interf_conditional(
                    &c,
                    InterfCase::A,
                    Detection::NonCoherent,
                    chi_of_i_unchecked(k - i, tau, k),
                )
                .unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn two_exp_kernel_is_close() {
        let mut c = cfg(7, 2.0, 25, -25.0);
        let exact = interf_ser(&c, InterfCase::B, Detection::NonCoherent).unwrap();
        c.interf_kernel = QKernel::TwoExp;
        let approx = interf_ser(&c, InterfCase::B, Detection::NonCoherent).unwrap();
        assert!(rel(approx, exact) < 0.3);
    }
}
