//! Experiment configuration: TOML file, flag overrides and figure presets.

use crate::analytic_ber::{Detection, QKernel, DEFAULT_QUADRATURE_ORDER, DEFAULT_STAIRCASE_M};
use crate::channel::{Estimator, FadingConfig};
use crate::error::{Error, Result};
use crate::lora_phy::{LoRaParams, DEFAULT_BANDWIDTH_HZ};
use crate::montecarlo::{Scenario, DEFAULT_MAX_BIT_ERRORS};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SNR_GRID: &str = "-40:-20:2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Simulate,
    Analytic,
    Both,
    Validate,
}

impl Mode {
    pub fn simulates(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Both | Mode::Validate)
    }

    pub fn analyses(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both | Mode::Validate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig5a,
    Fig5b,
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig3a,
        Preset::Fig3b,
        Preset::Fig4a,
        Preset::Fig4b,
        Preset::Fig5a,
        Preset::Fig5b,
        Preset::Fig5,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Fig5a => "fig5a",
            Preset::Fig5b => "fig5b",
            Preset::Fig5 => "fig5",
        }
    }

    fn sfs(self) -> Vec<u32> {
        match self {
            Preset::Fig3a | Preset::Fig3b => vec![7, 8, 9],
            _ => vec![7],
        }
    }

    fn elements(self) -> Vec<usize> {
        match self {
            Preset::Fig4a | Preset::Fig4b => vec![15, 20, 25, 30, 35],
            Preset::Fig5a | Preset::Fig5b => vec![20],
            _ => vec![25],
        }
    }

    fn ms(self) -> Vec<f64> {
        match self {
            Preset::Fig5a | Preset::Fig5b => vec![2.0, 3.0, 4.0],
            _ => vec![2.0],
        }
    }

    fn curves(self) -> Vec<(Scenario, Detection)> {
        use Detection::*;
        use Scenario::*;
        match self {
            Preset::Fig3a | Preset::Fig4a | Preset::Fig5a => {
                vec![(CaseA, NonCoherent), (CaseA, Coherent)]
            }
            Preset::Fig3b | Preset::Fig4b | Preset::Fig5b => {
                vec![(CaseB, NonCoherent), (CaseB, Coherent)]
            }
            Preset::Fig5 => vec![
                (RisFree, NonCoherent),
                (RisFree, Coherent),
                (Blind, NonCoherent),
                (CaseA, NonCoherent),
                (CaseA, Coherent),
                (CaseB, NonCoherent),
                (CaseB, Coherent),
            ],
        }
    }

    fn snr_grid(self) -> &'static str {
        match self {
            Preset::Fig3a => "-48:-28:1",
            Preset::Fig4a | Preset::Fig5a => "-44:-26:1",
            Preset::Fig3b | Preset::Fig4b | Preset::Fig5b => "-46:-10:2",
            Preset::Fig5 => "-44:0:2",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}' (expected fig3a, fig3b, fig4a, fig4b, fig5a, fig5b or fig5)")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Raw settings from a file or the command line, before defaults and presets.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub sf: Option<OneOrMany<u32>>,
    pub elements: Option<OneOrMany<usize>>,
    pub m: Option<OneOrMany<f64>>,
    pub scenario: Option<OneOrMany<String>>,
    pub detection: Option<OneOrMany<String>>,
    pub snr_db: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    /// 0 disables early stopping
    pub max_bit_errors: Option<u64>,
    pub bandwidth_hz: Option<f64>,
    pub quadrature_order: Option<usize>,
    pub staircase_m: Option<usize>,
    pub estimator: Option<String>,
    pub q_kernel: Option<String>,
    pub full_offset_range: Option<bool>,
    pub out: Option<PathBuf>,
}

impl RawConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: RawConfig) -> RawConfig {
        RawConfig {
            preset: other.preset.or(self.preset),
            sf: other.sf.or(self.sf),
            elements: other.elements.or(self.elements),
            m: other.m.or(self.m),
            scenario: other.scenario.or(self.scenario),
            detection: other.detection.or(self.detection),
            snr_db: other.snr_db.or(self.snr_db),
            trials: other.trials.or(self.trials),
            seed: other.seed.or(self.seed),
            max_bit_errors: other.max_bit_errors.or(self.max_bit_errors),
            bandwidth_hz: other.bandwidth_hz.or(self.bandwidth_hz),
            quadrature_order: other.quadrature_order.or(self.quadrature_order),
            staircase_m: other.staircase_m.or(self.staircase_m),
            estimator: other.estimator.or(self.estimator),
            q_kernel: other.q_kernel.or(self.q_kernel),
            full_offset_range: other.full_offset_range.or(self.full_offset_range),
            out: other.out.or(self.out),
        }
    }
}

/// Fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub preset: Option<Preset>,
    pub sfs: Vec<u32>,
    pub elements: Vec<usize>,
    pub ms: Vec<f64>,
    pub curves: Vec<(Scenario, Detection)>,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub max_bit_errors: Option<u64>,
    pub bandwidth_hz: f64,
    pub quadrature_order: usize,
    pub staircase_m: usize,
    pub estimator: Estimator,
    pub q_kernel: QKernel,
    pub full_offset_range: bool,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn params(&self, sf: u32) -> Result<LoRaParams> {
        LoRaParams::new(sf, self.bandwidth_hz)
    }
}

/// `A:B:STEP` (inclusive) or a single value.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Config(format!("invalid SNR grid '{s}': {why}"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| bad("expected numbers in A:B:STEP form"))
        })
        .collect::<Result<_>>()?;
    if parts.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    match parts[..] {
        [a] => Ok(vec![a]),
        [a, b, step] => {
            if !(step > 0.0) {
                return Err(bad("step must be positive"));
            }
            if b < a {
                return Err(bad("end is below start"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            if n > 100_000 {
                return Err(bad("too many points"));
            }
            Ok((0..=n)
                .map(|i| ((a + step * i as f64) * 1e9).round() / 1e9)
                .collect())
        }
        _ => Err(bad("expected A:B:STEP or a single value")),
    }
}

fn parse_estimator(s: &str) -> Result<Estimator> {
    match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "variance" => Ok(Estimator::Variance),
        "literal" => Ok(Estimator::Literal),
        _ => Err(Error::Config(format!(
            "unknown estimator '{s}' (expected variance or literal)"
        ))),
    }
}

fn parse_kernel(s: &str) -> Result<QKernel> {
    match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "exact" => Ok(QKernel::Exact),
        "two_exp" | "approx" => Ok(QKernel::TwoExp),
        _ => Err(Error::Config(format!(
            "unknown q_kernel '{s}' (expected exact or two_exp)"
        ))),
    }
}

fn pinned<T: PartialEq + fmt::Debug>(
    preset: Preset,
    key: &str,
    given: Option<Vec<T>>,
    fixed: Vec<T>,
) -> Result<Vec<T>> {
    match given {
        Some(v) if v != fixed => Err(Error::Config(format!(
            "preset {preset} pins {key} to {fixed:?}; got {v:?} (drop the override)"
        ))),
        _ => Ok(fixed),
    }
}

fn non_empty<T>(key: &str, v: Vec<T>) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::Config(format!("{key} must list at least one value")));
    }
    Ok(v)
}

/// Applies defaults and the preset, then validates every combination.
pub fn resolve(mode: Mode, raw: RawConfig) -> Result<ExperimentSpec> {
    let preset = raw.preset.as_deref().map(Preset::from_str).transpose()?;
    let scenarios = raw
        .scenario
        .map(|s| {
            s.into_vec()
                .iter()
                .map(|x| x.parse::<Scenario>())
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let detections = raw
        .detection
        .map(|s| {
            s.into_vec()
                .iter()
                .map(|x| x.parse::<Detection>().map_err(Error::Config))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let sf = raw.sf.map(OneOrMany::into_vec);
    let elements = raw.elements.map(OneOrMany::into_vec);
    let ms = raw.m.map(OneOrMany::into_vec);

    let (sfs, elements, ms, curves, grid) = match preset {
        Some(p) => {
            let curves = p.curves();
            if let Some(s) = &scenarios {
                let fixed: Vec<Scenario> =
                    curves.iter().map(|c| c.0).fold(Vec::new(), |mut acc, s| {
                        if !acc.contains(&s) {
                            acc.push(s);
                        }
                        acc
                    });
                pinned(p, "scenario", Some(s.clone()), fixed)?;
            }
            if let Some(d) = &detections {
                let mut fixed: Vec<Detection> = curves.iter().map(|c| c.1).collect();
                fixed.sort();
                fixed.dedup();
                let mut d = d.clone();
                d.sort();
                pinned(p, "detection", Some(d), fixed)?;
            }
            (
                pinned(p, "sf", sf, p.sfs())?,
                pinned(p, "elements", elements, p.elements())?,
                pinned(p, "m", ms, p.ms())?,
                curves,
                raw.snr_db.unwrap_or_else(|| p.snr_grid().to_string()),
            )
        }
        None => {
            let scenarios = non_empty(
                "scenario",
                scenarios.unwrap_or_else(|| vec![Scenario::CaseA]),
            )?;
            let detections = non_empty(
                "detection",
                detections.unwrap_or_else(|| vec![Detection::NonCoherent, Detection::Coherent]),
            )?;
            let curves = scenarios
                .iter()
                .flat_map(|&s| detections.iter().map(move |&d| (s, d)))
                .collect();
            (
                non_empty("sf", sf.unwrap_or_else(|| vec![7]))?,
                non_empty("elements", elements.unwrap_or_else(|| vec![25]))?,
                non_empty("m", ms.unwrap_or_else(|| vec![2.0]))?,
                curves,
                raw.snr_db.unwrap_or_else(|| DEFAULT_SNR_GRID.to_string()),
            )
        }
    };

    let trials = raw.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let quadrature_order = raw.quadrature_order.unwrap_or(DEFAULT_QUADRATURE_ORDER);
    if quadrature_order == 0 || quadrature_order > 400 {
        return Err(Error::Config(format!(
            "quadrature_order must be in 1..=400, got {quadrature_order}"
        )));
    }
    let staircase_m = raw.staircase_m.unwrap_or(DEFAULT_STAIRCASE_M);
    if staircase_m == 0 {
        return Err(Error::Config("staircase_m must be at least 1".into()));
    }
    let spec = ExperimentSpec {
        mode,
        preset,
        sfs,
        elements,
        ms,
        curves,
        snr_db: parse_snr_grid(&grid)?,
        trials,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        max_bit_errors: match raw.max_bit_errors {
            Some(0) => None,
            Some(n) => Some(n),
            None => Some(DEFAULT_MAX_BIT_ERRORS),
        },
        bandwidth_hz: raw.bandwidth_hz.unwrap_or(DEFAULT_BANDWIDTH_HZ),
        quadrature_order,
        staircase_m,
        estimator: raw
            .estimator
            .as_deref()
            .map(parse_estimator)
            .transpose()?
            .unwrap_or_default(),
        q_kernel: raw
            .q_kernel
            .as_deref()
            .map(parse_kernel)
            .transpose()?
            .unwrap_or_default(),
        full_offset_range: raw.full_offset_range.unwrap_or(false),
        out: raw.out,
    };
    let cfg_err = |e: Error| Error::Config(e.to_string());
    for &sf in &spec.sfs {
        spec.params(sf).map_err(cfg_err)?;
    }
    for &n in &spec.elements {
        for &m in &spec.ms {
            FadingConfig::uniform(m, n).map_err(cfg_err)?;
        }
    }
    Ok(spec)
}
