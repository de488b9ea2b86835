//! Chirp modulation, dechirp-DFT demodulation and the two symbol detectors.

use crate::error::{invalid, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_BANDWIDTH_HZ: f64 = 125_000.0;

/// Spreading factor, symbol length and bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoRaParams {
    sf: u32,
    bandwidth_hz: f64,
}

impl LoRaParams {
    pub fn new(sf: u32, bandwidth_hz: f64) -> Result<Self> {
        if !(2..=12).contains(&sf) {
            return invalid(format!("spreading factor must be in [2, 12], got {sf}"));
        }
        if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
            return invalid(format!("bandwidth must be positive, got {bandwidth_hz}"));
        }
        Ok(Self { sf, bandwidth_hz })
    }

    pub fn with_sf(sf: u32) -> Result<Self> {
        Self::new(sf, DEFAULT_BANDWIDTH_HZ)
    }

    pub fn sf(&self) -> u32 {
        self.sf
    }

    /// Samples per symbol, `2^sf`.
    pub fn k(&self) -> usize {
        1usize << self.sf
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.k() as f64 / self.bandwidth_hz
    }

    pub(crate) fn check_symbol(&self, symbol: usize) -> Result<()> {
        if symbol >= self.k() {
            return invalid(format!(
                "symbol {symbol} out of range for SF{} (K = {})",
                self.sf,
                self.k()
            ));
        }
        Ok(())
    }
}

impl fmt::Display for LoRaParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SF{} (K={}, B={} Hz)",
            self.sf,
            self.k(),
            self.bandwidth_hz
        )
    }
}

/// DFT output of a dechirped symbol, one complex value per candidate symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct BinVector {
    pub bins: Vec<Complex64>,
}

impl BinVector {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

// phase of sample n of symbol c in cycles, reduced mod 1 using exact integer arithmetic
pub(crate) fn chirp_phase_cycles(k: usize, c: usize, n: usize) -> f64 {
    // n²/2K + (c/K − 1/2)n = (n² + 2cn − Kn) / 2K
    let two_k = 2 * k as u128;
    let (n, c, k) = (n as u128, c as u128, k as u128);
    let num = (n * n + 2 * c * n + two_k * n - k * n) % two_k;
    num as f64 / two_k as f64
}

/// Baseband samples of symbol `symbol`, each of magnitude `1/√K`.
pub fn modulate(symbol: usize, params: &LoRaParams) -> Result<Vec<Complex64>> {
    params.check_symbol(symbol)?;
    let k = params.k();
    let amp = 1.0 / (k as f64).sqrt();
    Ok((0..k)
        .map(|n| Complex64::from_polar(amp, 2.0 * PI * chirp_phase_cycles(k, symbol, n)))
        .collect())
}

/// Multiplies by the conjugate base chirp and takes an unnormalised forward DFT.
pub fn dechirp_dft(received: &[Complex64], params: &LoRaParams) -> Result<BinVector> {
    let mut d = Dechirper::new(params);
    let mut bins = vec![Complex64::new(0.0, 0.0); params.k()];
    d.process(received, &mut bins)?;
    Ok(BinVector { bins })
}

/// Reusable dechirp state: conjugate base chirp and a planned FFT.
///
/// The FFT is the unnormalised forward transform, so a unit-energy chirp
/// through gain `h` lands as exactly `h` in its bin and CN(0, N₀) sample noise
/// stays CN(0, N₀) per bin.
pub struct Dechirper {
    k: usize,
    down: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Dechirper {
    pub fn new(params: &LoRaParams) -> Self {
        let k = params.k();
        let amp = 1.0 / (k as f64).sqrt();
        let down = (0..k)
            .map(|n| Complex64::from_polar(amp, -2.0 * PI * chirp_phase_cycles(k, 0, n)))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(k);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Self {
            k,
            down,
            fft,
            scratch,
        }
    }

    pub fn process(&mut self, received: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if received.len() != self.k || out.len() != self.k {
            return invalid(format!(
                "dechirp expects {} samples, got input {} / output {}",
                self.k,
                received.len(),
                out.len()
            ));
        }
        for ((o, r), d) in out.iter_mut().zip(received).zip(&self.down) {
            *o = r * d;
        }
        self.fft.process_with_scratch(out, &mut self.scratch);
        Ok(())
    }
}

/// Index of the largest-magnitude bin; ties go to the lowest index.
pub fn detect_noncoherent(bins: &BinVector) -> usize {
    argmax_by(&bins.bins, |b| b.norm_sqr())
}

/// Index maximising `Re(bin · e^{jφ})`; ties go to the lowest index.
pub fn detect_coherent(bins: &BinVector, compensation_phase: f64) -> usize {
    let rot = Complex64::from_polar(1.0, compensation_phase);
    argmax_by(&bins.bins, |b| (b * rot).re)
}

pub(crate) fn argmax_by<F: Fn(&Complex64) -> f64>(bins: &[Complex64], metric: F) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, b) in bins.iter().enumerate() {
        let v = metric(b);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Hamming distance between the `sf`-bit natural binary labels of two symbols.
pub fn count_bit_errors(sent: usize, detected: usize, sf: u32) -> Result<u32> {
    let k = 1usize.checked_shl(sf).unwrap_or(0);
    if sf == 0 || sf > 30 || sent >= k || detected >= k {
        return invalid(format!(
            "symbols ({sent}, {detected}) out of range for sf {sf}"
        ));
    }
    Ok((sent ^ detected).count_ones())
}
