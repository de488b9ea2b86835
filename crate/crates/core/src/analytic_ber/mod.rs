//! Closed-form and quadrature-based BER for the shared-RIS (case A) and
//! paired-RIS (case B) topologies under non-coherent and coherent detection.
//!
//! The symbol error rate splits into a noise-driven part, evaluated through a
//! parabolic-cylinder closed form, and an interference-driven part averaged
//! over the interferer's symbol difference `I` and offset `τ`, evaluated by a
//! double Gauss-Hermite sum (and an `M`-point phase staircase when coherent).

mod interf;
mod noise;
mod numeric;

pub use interf::{interf_conditional, interf_conditional_numeric, interf_ser, GammaNodes};
pub use noise::{
    coherent_epsilons, noise_ser_coherent, noise_ser_coherent_numeric, noise_ser_noncoherent,
    noise_ser_noncoherent_numeric,
};

use crate::channel::{self, Estimator, FadingConfig, GammaFit};
use crate::error::{invalid, Result};
use crate::lora_phy::LoRaParams;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Detection {
    NonCoherent,
    Coherent,
}

impl Detection {
    pub fn as_str(&self) -> &'static str {
        match self {
            Detection::NonCoherent => "noncoherent",
            Detection::Coherent => "coherent",
        }
    }
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Detection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "noncoherent" | "nc" | "non-coherent" => Ok(Detection::NonCoherent),
            "coherent" | "c" => Ok(Detection::Coherent),
            _ => Err(format!(
                "unknown detection '{s}' (expected noncoherent or coherent)"
            )),
        }
    }
}

/// Interference topology handled by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterfCase {
    A,
    B,
}

/// Which Gaussian tail is placed inside a sum or integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QKernel {
    #[default]
    Exact,
    TwoExp,
}

impl QKernel {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            QKernel::Exact => crate::specfun::q_exact(x),
            QKernel::TwoExp => crate::specfun::q_approx(x),
        }
    }
}

/// Placement of Gauss-Hermite nodes in `α = ln x` when averaging over a Gamma law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeMapping {
    /// nodes centred on the log-mode `ln(ω/λ)` and scaled by `√(2/ω)`
    #[default]
    Adaptive,
    /// `α = u` directly, without the log mapping
    Raw,
}

/// Gamma approximations for the target and each interferer topology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSet {
    /// `|H|`
    pub target: GammaFit,
    /// `|H_A|²`
    pub case_a: Option<GammaFit>,
    /// `|H_B|`
    pub case_b: Option<GammaFit>,
}

impl FitSet {
    pub fn from_fading(fading: &FadingConfig, estimator: Estimator) -> Result<Self> {
        Ok(Self {
            target: channel::fit_gamma_target(fading, estimator)?,
            case_a: Some(channel::fit_gamma_interferer_case_a(fading, estimator)?),
            case_b: Some(channel::fit_gamma_interferer_case_b(fading, estimator)?),
        })
    }

    pub fn interferer(&self, case: InterfCase) -> Result<GammaFit> {
        match case {
            InterfCase::A => self.case_a.ok_or_else(|| {
                crate::Error::InvalidArgument("case A interferer fit missing".into())
            }),
            InterfCase::B => self.case_b.ok_or_else(|| {
                crate::Error::InvalidArgument("case B interferer fit missing".into())
            }),
        }
    }
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 70;
pub const DEFAULT_STAIRCASE_M: usize = 20;

/// Everything needed to evaluate one analytic BER point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticConfig {
    pub params: LoRaParams,
    pub fits: FitSet,
    /// `Γ = E_c/(N₀K)`, linear
    pub snr_linear: f64,
    pub quadrature_order_v1: usize,
    pub quadrature_order_v2: usize,
    pub staircase_m: usize,
    pub interf_kernel: QKernel,
    pub node_mapping: NodeMapping,
}

impl AnalyticConfig {
    pub fn new(params: LoRaParams, fits: FitSet, snr_linear: f64) -> Result<Self> {
        let c = Self {
            params,
            fits,
            snr_linear,
            quadrature_order_v1: DEFAULT_QUADRATURE_ORDER,
            quadrature_order_v2: DEFAULT_QUADRATURE_ORDER,
            staircase_m: DEFAULT_STAIRCASE_M,
            interf_kernel: QKernel::Exact,
            node_mapping: NodeMapping::Adaptive,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn from_fading(params: LoRaParams, fading: &FadingConfig, snr_linear: f64) -> Result<Self> {
        Self::new(
            params,
            FitSet::from_fading(fading, Estimator::Variance)?,
            snr_linear,
        )
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Result<Self> {
        self.snr_linear = db_to_linear(snr_db);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr_linear > 0.0) || !self.snr_linear.is_finite() {
            return invalid(format!(
                "SNR must be positive and finite, got {}",
                self.snr_linear
            ));
        }
        if self.quadrature_order_v1 == 0 || self.quadrature_order_v2 == 0 {
            return invalid("quadrature orders must be at least 1");
        }
        if self.staircase_m == 0 {
            return invalid("staircase M must be at least 1");
        }
        Ok(())
    }

    pub(crate) fn k(&self) -> f64 {
        self.params.k() as f64
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Noise-driven and interference-driven SER together with the resulting BER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerBreakdown {
    pub p_noise: f64,
    pub p_interf: f64,
    pub ber: f64,
    /// coherent noise approximation used outside its SF ≥ 7 range
    pub domain_warning: bool,
}

static CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of probabilities clamped into `[0, 1]` since start-up.
pub fn clamp_events() -> u64 {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

pub(crate) fn clamp_probability(p: f64) -> f64 {
    if p.is_nan() {
        return p;
    }
    if !(0.0..=1.0).contains(&p) {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
        log::debug!("clamping probability {p:e} into [0, 1]");
        return p.clamp(0.0, 1.0);
    }
    p
}

/// `(K/2)/(K−1) · [1 − (1 − P_I)(1 − P_N)]`, after clamping both inputs.
pub fn combine(p_noise: f64, p_interf: f64, k: usize) -> BerBreakdown {
    let p_noise = clamp_probability(p_noise);
    let p_interf = clamp_probability(p_interf);
    let kf = k as f64;
    let ser = 1.0 - (1.0 - p_interf) * (1.0 - p_noise);
    BerBreakdown {
        p_noise,
        p_interf,
        ber: (kf / 2.0) / (kf - 1.0) * ser,
        domain_warning: false,
    }
}

/// Noise-driven SER for the requested detector.
pub fn noise_ser(cfg: &AnalyticConfig, detection: Detection) -> Result<f64> {
    match detection {
        Detection::NonCoherent => noise_ser_noncoherent(cfg),
        Detection::Coherent => noise_ser_coherent(cfg),
    }
}

/// Total BER for one topology and detector.
pub fn ber(cfg: &AnalyticConfig, case: InterfCase, detection: Detection) -> Result<BerBreakdown> {
    cfg.validate()?;
    let p_n = noise_ser(cfg, detection)?;
    let p_i = interf_ser(cfg, case, detection)?;
    let mut b = combine(p_n, p_i, cfg.params.k());
    b.domain_warning = detection == Detection::Coherent && cfg.params.sf() < 7;
    Ok(b)
}

/// BER with the interferer switched off, i.e. the noise-driven part alone.
pub fn ber_no_interference(cfg: &AnalyticConfig, detection: Detection) -> Result<BerBreakdown> {
    cfg.validate()?;
    let mut b = combine(noise_ser(cfg, detection)?, 0.0, cfg.params.k());
    b.domain_warning = detection == Detection::Coherent && cfg.params.sf() < 7;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sf: u32, m: f64, n: usize, snr_db: f64) -> AnalyticConfig {
        let p = LoRaParams::with_sf(sf).unwrap();
        let f = FadingConfig::uniform(m, n).unwrap();
        AnalyticConfig::from_fading(p, &f, db_to_linear(snr_db)).unwrap()
    }

    #[test]
    fn combination_formula() {
        let b = combine(0.0, 0.0, 128);
        assert_eq!(b.ber, 0.0);
        let b = combine(0.3, 1.0, 128);
        assert!((b.ber - 64.0 / 127.0).abs() < 1e-15);
        let b = combine(0.01, 0.02, 128);
        assert!((b.ber - 64.0 / 127.0 * (1.0 - 0.98 * 0.99)).abs() < 1e-15);
    }

    #[test]
    fn clamping_is_counted() {
        let before = clamp_events();
        let b = combine(1.2, -1e-3, 128);
        assert_eq!(b.p_noise, 1.0);
        assert_eq!(b.p_interf, 0.0);
        assert!(clamp_events() >= before + 2);
    }

    #[test]
    fn config_validation() {
        let c = cfg(7, 2.0, 20, -20.0);
        let mut bad = c;
        bad.snr_linear = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.quadrature_order_v1 = 0;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.staircase_m = 0;
        assert!(bad.validate().is_err());
        let mut missing = c;
        missing.fits.case_b = None;
        assert!(interf_ser(&missing, InterfCase::B, Detection::NonCoherent).is_err());
    }

    #[test]
    fn detection_parsing() {
        assert_eq!("NC".parse::<Detection>().unwrap(), Detection::NonCoherent);
        assert_eq!(
            "coherent".parse::<Detection>().unwrap(),
            Detection::Coherent
        );
        assert!("x".parse::<Detection>().is_err());
    }

    #[test]
    fn domain_warning_below_sf7() {
        let c = cfg(6, 2.0, 5, -10.0);
        assert!(
            ber_no_interference(&c, Detection::Coherent)
                .unwrap()
                .domain_warning
        );
        assert!(
            !ber_no_interference(&c, Detection::NonCoherent)
                .unwrap()
                .domain_warning
        );
    }

    #[test]
    fn ber_non_increasing_in_elements() {
        for case in [InterfCase::A, InterfCase::B] {
            for det in [Detection::NonCoherent, Detection::Coherent] {
                let mut prev = f64::INFINITY;
                for n in [15, 20, 25, 30, 35] {
                    let b = ber(&cfg(7, 2.0, n, -28.0), case, det).unwrap().ber;
                    assert!(
                        b <= prev * (1.0 + 1e-9),
                        "{case:?} {det:?} N={n}: {b} > {prev}"
                    );
                    prev = b;
                }
            }
        }
    }

    #[test]
    fn case_b_worse_than_case_a() {
        for snr in [-30.0, -25.0, -20.0, -15.0, -10.0] {
            let c = cfg(7, 2.0, 25, snr);
            let a = interf_ser(&c, InterfCase::A, Detection::NonCoherent).unwrap();
            let b = interf_ser(&c, InterfCase::B, Detection::NonCoherent).unwrap();
            assert!(b > a, "snr {snr}: A {a} B {b}");
        }
    }

    #[test]
    fn case_b_error_floor() {
        let hi = interf_ser(
            &cfg(7, 2.0, 25, 10.0),
            InterfCase::B,
            Detection::NonCoherent,
        )
        .unwrap();
        let higher = interf_ser(
            &cfg(7, 2.0, 25, 20.0),
            InterfCase::B,
            Detection::NonCoherent,
        )
        .unwrap();
        assert!(hi > 1e-3 && higher > 1e-3);
        assert!((hi - higher).abs() / hi < 0.05);
    }
}
