//! Nakagami-m links, RIS phase configuration, effective gains and the
//! moment-matched Gamma approximations of `|H|`, `|H_A|²` and `|H_B|`.

use crate::error::{invalid, Error, Result};
use crate::specfun::{gamma_fn, ln_gamma};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use std::f64::consts::PI;

/// Shape parameters of every link (all with unit spread) and RIS size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingConfig {
    /// target direct link `h_Td`
    pub m1: f64,
    /// interferer direct link `h_Id`
    pub m2: f64,
    pub m_ht: f64,
    pub m_gt: f64,
    pub m_hi: f64,
    pub m_gi: f64,
    pub n_elements: usize,
}

impl FadingConfig {
    /// Every link with the same shape `m`.
    pub fn uniform(m: f64, n_elements: usize) -> Result<Self> {
        let c = Self {
            m1: m,
            m2: m,
            m_ht: m,
            m_gt: m,
            m_hi: m,
            m_gi: m,
            n_elements,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [
            ("m1", self.m1),
            ("m2", self.m2),
            ("m_ht", self.m_ht),
            ("m_gt", self.m_gt),
            ("m_hi", self.m_hi),
            ("m_gi", self.m_gi),
        ] {
            if !(m > 0.0) || !m.is_finite() {
                return invalid(format!("Nakagami shape {name} must be positive, got {m}"));
            }
        }
        Ok(())
    }
}

/// Which RIS topology a draw is generated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// target and interferer share one RIS
    SharedRis,
    /// each user has its own RIS
    PairedRis,
}

/// One realisation of every complex link gain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub h_td: Complex64,
    pub h_id: Complex64,
    pub h_t: Vec<Complex64>,
    pub g_t: Vec<Complex64>,
    pub h_i: Vec<Complex64>,
    /// second RIS to gateway, paired topology only
    pub g_i: Option<Vec<Complex64>>,
}

impl ChannelDraw {
    pub fn n_elements(&self) -> usize {
        self.h_t.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    Optimal,
    Blind,
}

/// RIS phase shifts. `interferer` is the second RIS of the paired topology.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases {
    pub target: Vec<f64>,
    pub interferer: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    A,
    B,
    RisFree,
    Blind,
}

/// Aggregate target and interferer gains seen at the gateway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveGains {
    pub h_eff: Complex64,
    pub h_int: Complex64,
    pub case_tag: CaseTag,
}

fn gamma_for_shape(m: f64) -> Result<Gamma<f64>> {
    if !(m > 0.0) || !m.is_finite() {
        return invalid(format!("Nakagami shape must be positive, got {m}"));
    }
    Gamma::new(m, 1.0 / m).map_err(|e| Error::InvalidArgument(format!("Nakagami shape {m}: {e}")))
}

/// One `Nakagami(m, 1)` magnitude, drawn as the square root of a `Gamma(m, 1/m)` variate.
pub fn sample_nakagami<R: Rng + ?Sized>(m: f64, rng: &mut R) -> Result<f64> {
    Ok(gamma_for_shape(m)?.sample(rng).sqrt())
}

/// Pre-built samplers for every link of a [`FadingConfig`].
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    n: usize,
    td: Gamma<f64>,
    id: Gamma<f64>,
    ht: Gamma<f64>,
    gt: Gamma<f64>,
    hi: Gamma<f64>,
    gi: Gamma<f64>,
}

impl ChannelSampler {
    pub fn new(config: &FadingConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            n: config.n_elements,
            td: gamma_for_shape(config.m1)?,
            id: gamma_for_shape(config.m2)?,
            ht: gamma_for_shape(config.m_ht)?,
            gt: gamma_for_shape(config.m_gt)?,
            hi: gamma_for_shape(config.m_hi)?,
            gi: gamma_for_shape(config.m_gi)?,
        })
    }

    fn link<R: Rng + ?Sized>(g: &Gamma<f64>, rng: &mut R) -> Complex64 {
        let mag = g.sample(rng).sqrt();
        Complex64::from_polar(mag, 2.0 * PI * rng.random::<f64>())
    }

    pub fn draw<R: Rng + ?Sized>(&self, topology: Topology, rng: &mut R) -> ChannelDraw {
        let h_td = Self::link(&self.td, rng);
        let h_id = Self::link(&self.id, rng);
        let h_t = (0..self.n).map(|_| Self::link(&self.ht, rng)).collect();
        let g_t = (0..self.n).map(|_| Self::link(&self.gt, rng)).collect();
        let h_i = (0..self.n).map(|_| Self::link(&self.hi, rng)).collect();
        let g_i = match topology {
            Topology::SharedRis => None,
            Topology::PairedRis => Some((0..self.n).map(|_| Self::link(&self.gi, rng)).collect()),
        };
        ChannelDraw {
            h_td,
            h_id,
            h_t,
            g_t,
            h_i,
            g_i,
        }
    }
}

/// Draws every link once; phases are independent and uniform on `[0, 2π)`.
pub fn draw_channels<R: Rng + ?Sized>(
    config: &FadingConfig,
    topology: Topology,
    rng: &mut R,
) -> Result<ChannelDraw> {
    Ok(ChannelSampler::new(config)?.draw(topology, rng))
}

fn co_phase(h: &[Complex64], g: &[Complex64], reference: f64) -> Vec<f64> {
    h.iter()
        .zip(g)
        .map(|(h, g)| reference - (h.arg() + g.arg()))
        .collect()
}

/// Optimal mode co-phases every reflected target path with `h_Td` (and, on
/// the paired topology, every interferer path with `h_Id`). Blind mode draws
/// uniform phases.
pub fn configure_phases<R: Rng + ?Sized>(
    draw: &ChannelDraw,
    mode: PhaseMode,
    rng: &mut R,
) -> RisPhases {
    match mode {
        PhaseMode::Optimal => RisPhases {
            target: co_phase(&draw.h_t, &draw.g_t, draw.h_td.arg()),
            interferer: draw
                .g_i
                .as_ref()
                .map(|g_i| co_phase(&draw.h_i, g_i, draw.h_id.arg())),
        },
        PhaseMode::Blind => {
            let n = draw.n_elements();
            let mut uniform = |_| 2.0 * PI * rng.random::<f64>();
            let target = (0..n).map(&mut uniform).collect();
            let interferer = draw
                .g_i
                .as_ref()
                .map(|_| (0..n).map(&mut uniform).collect());
            RisPhases { target, interferer }
        }
    }
}

fn reflect(h: &[Complex64], g: &[Complex64], phases: &[f64]) -> Complex64 {
    h.iter()
        .zip(g)
        .zip(phases)
        .map(|((h, g), &w)| h * g * Complex64::from_polar(1.0, w))
        .sum()
}

/// Effective gains for the requested case.
///
/// `A` and `Blind` use the shared RIS (the interferer is reflected through the
/// target's phase profile), `B` uses the paired RISs, `RisFree` ignores the
/// surface entirely.
pub fn aggregate(draw: &ChannelDraw, phases: &RisPhases, case: CaseTag) -> Result<EffectiveGains> {
    let n = draw.n_elements();
    if case != CaseTag::RisFree && phases.target.len() != n {
        return invalid(format!(
            "expected {n} target phases, got {}",
            phases.target.len()
        ));
    }
    let (h_eff, h_int) = match case {
        CaseTag::RisFree => (draw.h_td, draw.h_id),
        CaseTag::A | CaseTag::Blind => (
            draw.h_td + reflect(&draw.h_t, &draw.g_t, &phases.target),
            draw.h_id + reflect(&draw.h_i, &draw.g_t, &phases.target),
        ),
        CaseTag::B => {
            let (Some(g_i), Some(w_i)) = (draw.g_i.as_ref(), phases.interferer.as_ref()) else {
                return invalid("case B needs the interferer's RIS links and phases");
            };
            if w_i.len() != n {
                return invalid(format!("expected {n} interferer phases, got {}", w_i.len()));
            }
            (
                draw.h_td + reflect(&draw.h_t, &draw.g_t, &phases.target),
                draw.h_id + reflect(&draw.h_i, g_i, w_i),
            )
        }
    };
    Ok(EffectiveGains {
        h_eff,
        h_int,
        case_tag: case,
    })
}

/// Gamma distribution with shape `ω` and rate `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub shape: f64,
    pub rate: f64,
}

impl GammaFit {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::NumericFailure(format!(
                "invalid Gamma fit (shape {shape}, rate {rate})"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln()
            - self.rate * x
    }
}

/// How the Gamma shape and rate are derived from the first two raw moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// `ω = μ₁²/(μ₂ − μ₁²)`, `λ = μ₁/(μ₂ − μ₁²)`: matches mean and variance
    #[default]
    Variance,
    /// `ω = μ₁²/(μ₂ − μ₁)`, `λ = μ₁/(μ₂ − μ₁)`, the literal non-central variant
    Literal,
}

impl Estimator {
    pub fn fit(self, mu1: f64, mu2: f64) -> Result<GammaFit> {
        let denom = match self {
            Estimator::Variance => mu2 - mu1 * mu1,
            Estimator::Literal => mu2 - mu1,
        };
        if !(denom > 0.0) {
            return Err(Error::NumericFailure(format!(
                "moment-matching denominator is not positive (μ1 = {mu1}, μ2 = {mu2}, {self:?})"
            )));
        }
        GammaFit::new(mu1 * mu1 / denom, mu1 / denom)
    }
}

/// `E[X^ι]` for `X ~ Nakagami(m, 1)`.
pub fn nakagami_moment(m: f64, iota: f64) -> Result<f64> {
    Ok(gamma_fn(m + iota / 2.0)? / gamma_fn(m)? * m.powf(-iota / 2.0))
}

/// First two raw moments of `|h_d| + Σ_ℓ |h_ℓ||g_ℓ|` with `N` i.i.d. products.
pub fn coherent_sum_moments(m_d: f64, m_h: f64, m_g: f64, n: usize) -> Result<(f64, f64)> {
    let nf = n as f64;
    let d1 = nakagami_moment(m_d, 1.0)?;
    let d2 = nakagami_moment(m_d, 2.0)?;
    let z1 = nakagami_moment(m_h, 1.0)? * nakagami_moment(m_g, 1.0)?;
    let z2 = nakagami_moment(m_h, 2.0)? * nakagami_moment(m_g, 2.0)?;
    let j1 = nf * z1;
    let j2 = nf * z2 + nf * (nf - 1.0) * z1 * z1;
    Ok((d1 + j1, d2 + j2 + 2.0 * d1 * j1))
}

/// Raw moments of `|H_A|²` with the reflected sum treated as `Nakagami(1, N)`.
pub fn case_a_interferer_moments(config: &FadingConfig) -> Result<(f64, f64)> {
    config.validate()?;
    let nf = config.n_elements as f64;
    let d2 = nakagami_moment(config.m2, 2.0)?;
    let d4 = nakagami_moment(config.m2, 4.0)?;
    let g2 = nf;
    let g4 = 2.0 * nf * nf;
    Ok((d2 + g2, d4 + g4 + 4.0 * d2 * g2))
}

/// Gamma approximation of `|H|` under optimal phasing.
pub fn fit_gamma_target(config: &FadingConfig, estimator: Estimator) -> Result<GammaFit> {
    config.validate()?;
    let (m1, m2) = coherent_sum_moments(config.m1, config.m_ht, config.m_gt, config.n_elements)?;
    estimator.fit(m1, m2)
}

/// Gamma approximation of `|H_A|²` (shared RIS, interferer not co-phased).
pub fn fit_gamma_interferer_case_a(
    config: &FadingConfig,
    estimator: Estimator,
) -> Result<GammaFit> {
    let (m1, m2) = case_a_interferer_moments(config)?;
    estimator.fit(m1, m2)
}

/// Gamma approximation of `|H_B|` (paired RIS, interferer co-phased with `h_Id`).
pub fn fit_gamma_interferer_case_b(
    config: &FadingConfig,
    estimator: Estimator,
) -> Result<GammaFit> {
    config.validate()?;
    let (m1, m2) = coherent_sum_moments(config.m2, config.m_hi, config.m_gi, config.n_elements)?;
    estimator.fit(m1, m2)
}
