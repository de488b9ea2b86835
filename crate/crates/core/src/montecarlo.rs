//! Symbol-level Monte Carlo BER on the exact received-signal model.
//!
//! Every trial synthesises `y[n] = h_eff·x_c[n] + h_int·x_I[n] + z[n]`,
//! dechirps it with an FFT and runs the detector. Nothing from the analytic
//! chain is used here.

use crate::analytic_ber::{db_to_linear, Detection};
use crate::channel::{
    aggregate, configure_phases, CaseTag, ChannelSampler, FadingConfig, PhaseMode, Topology,
};
use crate::error::{invalid, Error, Result};
use crate::lora_phy::{argmax_by, chirp_phase_cycles, count_bit_errors, Dechirper, LoRaParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_MAX_BIT_ERRORS: u64 = 1000;
const BATCH: u64 = 1024;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    CaseA,
    CaseB,
    RisFree,
    Blind,
    NoInterference,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::CaseA,
        Scenario::CaseB,
        Scenario::RisFree,
        Scenario::Blind,
        Scenario::NoInterference,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::CaseA => "case_a",
            Scenario::CaseB => "case_b",
            Scenario::RisFree => "ris_free",
            Scenario::Blind => "blind",
            Scenario::NoInterference => "no_interference",
        }
    }

    fn topology(self) -> Topology {
        match self {
            Scenario::CaseB => Topology::PairedRis,
            _ => Topology::SharedRis,
        }
    }

    fn has_interferer(self) -> bool {
        self != Scenario::NoInterference
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "case_a" | "a" => Ok(Scenario::CaseA),
            "case_b" | "b" => Ok(Scenario::CaseB),
            "ris_free" => Ok(Scenario::RisFree),
            "blind" => Ok(Scenario::Blind),
            "no_interference" => Ok(Scenario::NoInterference),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected case_a, case_b, ris_free, blind or no_interference)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: LoRaParams,
    pub fading: FadingConfig,
    pub scenario: Scenario,
    pub detection: Detection,
    pub snr_db_grid: Vec<f64>,
    pub trials_per_point: u64,
    pub seed: u64,
    /// stop a point once this many bit errors are collected (checked per batch)
    pub max_bit_errors: Option<u64>,
    /// draw `τ` from `[0, K)` instead of `[0, K/2]`
    pub full_offset_range: bool,
    pub parallel: bool,
}

impl SimConfig {
    pub fn new(
        params: LoRaParams,
        fading: FadingConfig,
        scenario: Scenario,
        detection: Detection,
        snr_db_grid: Vec<f64>,
        trials_per_point: u64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            params,
            fading,
            scenario,
            detection,
            snr_db_grid,
            trials_per_point,
            seed,
            max_bit_errors: Some(DEFAULT_MAX_BIT_ERRORS),
            full_offset_range: false,
            parallel: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.fading.validate()?;
        if self.trials_per_point == 0 {
            return invalid("trials_per_point must be at least 1");
        }
        if self.snr_db_grid.is_empty() {
            return invalid("SNR grid is empty");
        }
        if let Some(bad) = self.snr_db_grid.iter().find(|s| !s.is_finite()) {
            return invalid(format!("non-finite SNR grid value {bad}"));
        }
        if self.max_bit_errors == Some(0) {
            return invalid("max_bit_errors must be positive when set");
        }
        Ok(())
    }
}

/// Bit error rate with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub ber: f64,
    pub bit_errors: u64,
    pub bits_sent: u64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub trials: u64,
    pub symbol_errors: u64,
    /// trials where the target symbol equals the interferer's second symbol
    pub collisions: u64,
    pub collision_bit_errors: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub scenario: Scenario,
    pub detection: Detection,
    pub snr_db: f64,
    pub estimate: BerEstimate,
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Everything a single symbol needs once the channel has been realised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialInput {
    pub symbol: usize,
    pub i1: usize,
    pub i2: usize,
    pub tau: usize,
    pub h_eff: Complex64,
    /// `None` disables the interferer
    pub h_int: Option<Complex64>,
}

/// Per-worker buffers and tables.
pub struct Workspace {
    k: usize,
    base: Vec<Complex64>,
    twiddle: Vec<Complex64>,
    dechirper: Dechirper,
    rx: Vec<Complex64>,
    bins: Vec<Complex64>,
}

impl Workspace {
    pub fn new(params: &LoRaParams) -> Self {
        let k = params.k();
        let kf = k as f64;
        // x_c[n] = x_0[n]·e^{j2π c n / K}
        let base = (0..k)
            .map(|n| Complex64::from_polar(1.0 / kf.sqrt(), 2.0 * PI * chirp_phase_cycles(k, 0, n)))
            .collect();
        let twiddle = (0..k)
            .map(|r| Complex64::from_polar(1.0, 2.0 * PI * r as f64 / kf))
            .collect();
        let zero = Complex64::new(0.0, 0.0);
        Self {
            k,
            base,
            twiddle,
            dechirper: Dechirper::new(params),
            rx: vec![zero; k],
            bins: vec![zero; k],
        }
    }

    fn chirp(&self, c: usize, n: usize) -> Complex64 {
        self.base[n] * self.twiddle[(c * n) % self.k]
    }

    /// Bins after dechirping the last synthesised symbol.
    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Synthesises, dechirps and detects one symbol; returns the decision.
    pub fn detect<R: Rng + ?Sized>(
        &mut self,
        input: &TrialInput,
        detection: Detection,
        n0: f64,
        rng: &mut R,
    ) -> usize {
        let sigma = (n0 / 2.0).sqrt();
        for n in 0..self.k {
            let mut y = input.h_eff * self.chirp(input.symbol, n);
            if let Some(h_int) = input.h_int {
                let sym = if n < input.tau { input.i1 } else { input.i2 };
                y += h_int * self.chirp(sym, n);
            }
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            self.rx[n] = y + Complex64::new(sigma * re, sigma * im);
        }
        // lengths always agree, so the dechirper cannot fail
        let _ = self.dechirper.process(&self.rx, &mut self.bins);
        match detection {
            Detection::NonCoherent => argmax_by(&self.bins, |b| b.norm_sqr()),
            Detection::Coherent => {
                // perfect CSI: the target phase is removed exactly
                let rot = Complex64::from_polar(1.0, -input.h_eff.arg());
                argmax_by(&self.bins, |b| (b * rot).re)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bit_errors: u32,
    pub symbol_error: bool,
    pub collision: bool,
}

/// Channel sampler and scenario logic shared by every trial of a run.
pub struct Simulator {
    cfg: SimConfig,
    sampler: ChannelSampler,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let mut fading = cfg.fading;
        if cfg.scenario == Scenario::RisFree {
            fading.n_elements = 0;
        }
        let sampler = ChannelSampler::new(&fading)?;
        Ok(Self { cfg, sampler })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn trial<R: Rng + ?Sized>(
        &self,
        snr_linear: f64,
        rng: &mut R,
        ws: &mut Workspace,
    ) -> Result<TrialOutcome> {
        if !(snr_linear > 0.0) || !snr_linear.is_finite() {
            return invalid(format!("SNR must be positive and finite, got {snr_linear}"));
        }
        let params = &self.cfg.params;
        let k = params.k();
        let symbol = rng.random_range(0..k);
        let i1 = rng.random_range(0..k);
        let i2 = rng.random_range(0..k);
        let tau_max = if self.cfg.full_offset_range {
            k - 1
        } else {
            k / 2
        };
        let tau = rng.random_range(0..=tau_max);
        let scenario = self.cfg.scenario;
        let draw = self.sampler.draw(scenario.topology(), rng);
        let (mode, case) = match scenario {
            Scenario::CaseA | Scenario::NoInterference => (PhaseMode::Optimal, CaseTag::A),
            Scenario::CaseB => (PhaseMode::Optimal, CaseTag::B),
            Scenario::Blind => (PhaseMode::Blind, CaseTag::Blind),
            Scenario::RisFree => (PhaseMode::Optimal, CaseTag::RisFree),
        };
        let phases = configure_phases(&draw, mode, rng);
        let gains = aggregate(&draw, &phases, case)?;
        let input = TrialInput {
            symbol,
            i1,
            i2,
            tau,
            h_eff: gains.h_eff,
            h_int: scenario.has_interferer().then_some(gains.h_int),
        };
        let n0 = 1.0 / (snr_linear * k as f64);
        let detected = ws.detect(&input, self.cfg.detection, n0, rng);
        Ok(TrialOutcome {
            bit_errors: count_bit_errors(symbol, detected, params.sf())?,
            symbol_error: detected != symbol,
            collision: scenario.has_interferer() && symbol == i2,
        })
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn point_key(seed: u64, point: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut s = splitmix64(seed) ^ splitmix64(point.wrapping_add(0x5851_F42D_4C95_7F2D));
    for chunk in key.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    key
}

/// Independent generator for trial `trial` of grid point `point`.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(point_key(seed, point));
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    trials: u64,
    bit_errors: u64,
    symbol_errors: u64,
    collisions: u64,
    collision_bit_errors: u64,
}

impl Tally {
    fn add(mut self, o: &TrialOutcome) -> Self {
        self.trials += 1;
        self.bit_errors += o.bit_errors as u64;
        self.symbol_errors += o.symbol_error as u64;
        if o.collision {
            self.collisions += 1;
            self.collision_bit_errors += o.bit_errors as u64;
        }
        self
    }

    fn merge(self, o: Self) -> Self {
        Self {
            trials: self.trials + o.trials,
            bit_errors: self.bit_errors + o.bit_errors,
            symbol_errors: self.symbol_errors + o.symbol_errors,
            collisions: self.collisions + o.collisions,
            collision_bit_errors: self.collision_bit_errors + o.collision_bit_errors,
        }
    }
}

impl Simulator {
    fn batch(&self, snr: f64, point: u64, range: std::ops::Range<u64>) -> Result<Tally> {
        let params = &self.cfg.params;
        let seed = self.cfg.seed;
        let one = |ws: &mut Workspace, t: u64| self.trial(snr, &mut trial_rng(seed, point, t), ws);
        if self.cfg.parallel {
            range
                .into_par_iter()
                .map_init(|| Workspace::new(params), |ws, t| one(ws, t))
                .try_fold(Tally::default, |acc, o| o.map(|o| acc.add(&o)))
                .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
        } else {
            let mut ws = Workspace::new(params);
            range
                .map(|t| one(&mut ws, t))
                .try_fold(Tally::default(), |acc, o| o.map(|o| acc.add(&o)))
        }
    }

    /// Runs grid point `point` at `snr_db`.
    pub fn point(&self, point: u64, snr_db: f64) -> Result<BerEstimate> {
        let snr = db_to_linear(snr_db);
        let total = self.cfg.trials_per_point;
        let mut tally = Tally::default();
        let mut start = 0;
        while start < total {
            let end = (start + BATCH).min(total);
            tally = tally.merge(self.batch(snr, point, start..end)?);
            start = end;
            if self
                .cfg
                .max_bit_errors
                .is_some_and(|cap| tally.bit_errors >= cap)
            {
                break;
            }
        }
        let bits_sent = tally.trials * self.cfg.params.sf() as u64;
        let (lo, hi) = wilson_interval(tally.bit_errors, bits_sent);
        Ok(BerEstimate {
            ber: tally.bit_errors as f64 / bits_sent as f64,
            bit_errors: tally.bit_errors,
            bits_sent,
            ci95_low: lo,
            ci95_high: hi,
            trials: tally.trials,
            symbol_errors: tally.symbol_errors,
            collisions: tally.collisions,
            collision_bit_errors: tally.collision_bit_errors,
        })
    }
}

/// One trial with a fresh workspace; returns the number of bit errors.
pub fn run_trial<R: Rng + ?Sized>(cfg: &SimConfig, snr_linear: f64, rng: &mut R) -> Result<u32> {
    let sim = Simulator::new(cfg.clone())?;
    let mut ws = Workspace::new(&cfg.params);
    Ok(sim.trial(snr_linear, rng, &mut ws)?.bit_errors)
}

/// BER at one SNR. The point index used for the substreams is the position
/// of `snr_db` in the grid, or the grid length if it is not on the grid.
pub fn run_point(cfg: &SimConfig, snr_db: f64) -> Result<BerEstimate> {
    let idx = cfg
        .snr_db_grid
        .iter()
        .position(|&s| s == snr_db)
        .unwrap_or(cfg.snr_db_grid.len());
    Simulator::new(cfg.clone())?.point(idx as u64, snr_db)
}

pub fn run_sweep(cfg: &SimConfig) -> Result<Vec<BerPoint>> {
    let sim = Simulator::new(cfg.clone())?;
    cfg.snr_db_grid
        .iter()
        .enumerate()
        .map(|(i, &snr_db)| {
            Ok(BerPoint {
                scenario: cfg.scenario,
                detection: cfg.detection,
                snr_db,
                estimate: sim.point(i as u64, snr_db)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lora_phy::modulate;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn wilson_brackets_estimate(n in 1u64..10_000_000, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac).floor() as u64;
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            prop_assert!(lo >= -1e-15 && hi <= 1.0 + 1e-15);
            prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
        }
    }

    fn cfg(scenario: Scenario, detection: Detection, trials: u64) -> SimConfig {
        let p = LoRaParams::with_sf(7).unwrap();
        let f = FadingConfig::uniform(2.0, 25).unwrap();
        SimConfig::new(p, f, scenario, detection, vec![-27.0], trials, 42).unwrap()
    }

    #[test]
    fn wilson_brackets() {
        let (lo, hi) = wilson_interval(10, 1000);
        assert!(lo < 0.01 && hi > 0.01);
        // reference value for 10/1000
        assert!(
            (lo - 0.005431).abs() < 2e-5 && (hi - 0.018317).abs() < 2e-5,
            "{lo} {hi}"
        );
        let (lo, hi) = wilson_interval(0, 100);
        assert!(lo.abs() < 1e-15);
        assert!(hi > 0.0 && hi < 0.05);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn chirp_table_matches_modulator() {
        let p = LoRaParams::with_sf(6).unwrap();
        let ws = Workspace::new(&p);
        for c in [0, 1, 17, 63] {
            let x = modulate(c, &p).unwrap();
            for (n, xn) in x.iter().enumerate() {
                assert!((ws.chirp(c, n) - xn).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_unit_channel_is_error_free() {
        let p = LoRaParams::with_sf(7).unwrap();
        let mut ws = Workspace::new(&p);
        let n0 = 1.0 / (1e6 * 128.0);
        let mut rng = trial_rng(1, 0, 0);
        for t in 0..10_000usize {
            let c = t % 128;
            let input = TrialInput {
                symbol: c,
                i1: 0,
                i2: 0,
                tau: 0,
                h_eff: Complex64::new(1.0, 0.0),
                h_int: None,
            };
            for det in [Detection::NonCoherent, Detection::Coherent] {
                assert_eq!(ws.detect(&input, det, n0, &mut rng), c);
            }
        }
    }

    #[test]
    fn dominant_interferer_captures_detector() {
        let p = LoRaParams::with_sf(7).unwrap();
        let mut ws = Workspace::new(&p);
        let n0 = 1.0 / (1e6 * 128.0);
        let mut rng = trial_rng(2, 0, 0);
        for (c, i1, i2, tau) in [(3, 90, 40, 0), (10, 11, 12, 5), (100, 0, 64, 20)] {
            let input = TrialInput {
                symbol: c,
                i1,
                i2,
                tau,
                h_eff: Complex64::new(0.05, 0.0),
                h_int: Some(Complex64::from_polar(1.0, 0.4)),
            };
            assert_eq!(ws.detect(&input, Detection::NonCoherent, n0, &mut rng), i2);
        }
    }

    #[test]
    fn bin_noise_calibration() {
        let p = LoRaParams::with_sf(7).unwrap();
        let mut ws = Workspace::new(&p);
        let snr = db_to_linear(-10.0);
        let n0 = 1.0 / (snr * 128.0);
        let mut rng = trial_rng(3, 0, 0);
        let trials = 20_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let input = TrialInput {
                symbol: 5,
                i1: 0,
                i2: 0,
                tau: 0,
                h_eff: Complex64::new(1.0, 0.0),
                h_int: None,
            };
            ws.detect(&input, Detection::NonCoherent, n0, &mut rng);
            acc += ws
                .bins()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != 5)
                .map(|(_, b)| b.norm_sqr())
                .sum::<f64>()
                / 127.0;
        }
        let measured_snr = 1.0 / (acc / trials as f64);
        assert!(
            (measured_snr / (snr * 128.0) - 1.0).abs() < 0.03,
            "{measured_snr}"
        );
    }

    #[test]
    fn reproducible_and_worker_independent() {
        let mut c = cfg(Scenario::CaseB, Detection::NonCoherent, 3000);
        c.max_bit_errors = None;
        let a = run_point(&c, -27.0).unwrap();
        let b = run_point(&c, -27.0).unwrap();
        assert_eq!(a, b);
        c.parallel = false;
        let s = run_point(&c, -27.0).unwrap();
        assert_eq!(a, s);
        assert!(a.bit_errors > 0);
        assert!(a.ci95_low <= a.ber && a.ber <= a.ci95_high);
    }

    #[test]
    fn early_stop_on_error_budget() {
        let mut c = cfg(Scenario::RisFree, Detection::NonCoherent, 1_000_000);
        c.max_bit_errors = Some(200);
        let e = run_point(&c, -27.0).unwrap();
        assert!(e.bit_errors >= 200);
        assert!(e.trials < 1_000_000 && e.trials.is_multiple_of(BATCH));
        assert_eq!(e.bits_sent, e.trials * 7);
    }

    #[test]
    fn sweep_shape_and_metadata() {
        let c = cfg(Scenario::CaseA, Detection::Coherent, 50);
        let pts = run_sweep(&c).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].scenario, Scenario::CaseA);
        assert_eq!(pts[0].estimate.trials, 50);
    }

    #[test]
    fn config_validation() {
        let p = LoRaParams::with_sf(7).unwrap();
        let f = FadingConfig::uniform(2.0, 25).unwrap();
        let mk = |grid: Vec<f64>, trials| {
            SimConfig::new(p, f, Scenario::CaseA, Detection::Coherent, grid, trials, 0)
        };
        assert!(mk(vec![], 10).is_err());
        assert!(mk(vec![0.0], 0).is_err());
        assert!(mk(vec![f64::NAN], 1).is_err());
        let mut rng = trial_rng(0, 0, 0);
        assert!(run_trial(&mk(vec![0.0], 1).unwrap(), 0.0, &mut rng).is_err());
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.as_str().parse::<Scenario>().unwrap(), s);
        }
        assert!("case_c".parse::<Scenario>().is_err());
    }

    #[test]
    fn collisions_are_counted() {
        let mut c = cfg(Scenario::CaseA, Detection::NonCoherent, 20_000);
        c.max_bit_errors = None;
        let e = run_point(&c, -27.0).unwrap();
        let expected = 20_000.0 / 128.0;
        assert!((e.collisions as f64 - expected).abs() < 5.0 * expected.sqrt());
        let n = cfg(Scenario::NoInterference, Detection::NonCoherent, 2000);
        assert_eq!(run_point(&n, -27.0).unwrap().collisions, 0);
    }
}
