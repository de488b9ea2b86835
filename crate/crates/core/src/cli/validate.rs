//! Oracle cross-checks behind `chirpfield validate`.

use super::config::ExperimentSpec;
use crate::analytic_ber::{
    self, db_to_linear, interf_conditional, interf_conditional_numeric, interf_ser, AnalyticConfig,
    Detection, FitSet, InterfCase, QKernel,
};
use crate::channel::{
    self, aggregate, configure_phases, CaseTag, ChannelSampler, FadingConfig, PhaseMode, Topology,
};
use crate::error::Result;
use crate::interference::chi_of_i;
use crate::lora_phy::{dechirp_dft, detect_noncoherent, modulate, LoRaParams};
use crate::montecarlo::{run_point, trial_rng, Scenario, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn chirp_checks(params: &LoRaParams) -> Result<CheckResult> {
    let k = params.k();
    let mut worst: f64 = 0.0;
    let mut round_trip = true;
    let probe: Vec<usize> = (0..k).step_by((k / 16).max(1)).collect();
    for &a in &probe {
        let xa = modulate(a, params)?;
        for &b in &probe {
            let xb = modulate(b, params)?;
            let ip: num_complex::Complex64 = xa.iter().zip(&xb).map(|(x, y)| x * y.conj()).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((ip.norm() - want).abs());
        }
        round_trip &= detect_noncoherent(&dechirp_dft(&xa, params)?) == a;
    }
    Ok(CheckResult::new(
        "chirp orthonormality and dechirp round trip",
        worst < 1e-9 && round_trip,
        format!(
            "max |<x_a,x_b> - δ| = {worst:.2e}, round trip {}",
            if round_trip { "ok" } else { "broken" }
        ),
    ))
}

fn fit_checks(fading: &FadingConfig, estimator: channel::Estimator) -> Result<CheckResult> {
    let fits = FitSet::from_fading(fading, estimator)?;
    let sampler = ChannelSampler::new(fading)?;
    let mut rng = trial_rng(0xF17, 0, 0);
    let draws = 20_000;
    let (mut h, mut ha2, mut hb) = (0.0, 0.0, 0.0);
    for _ in 0..draws {
        let d = sampler.draw(Topology::PairedRis, &mut rng);
        let ph = configure_phases(&d, PhaseMode::Optimal, &mut rng);
        let a = aggregate(&d, &ph, CaseTag::A)?;
        let b = aggregate(&d, &ph, CaseTag::B)?;
        h += a.h_eff.norm();
        ha2 += a.h_int.norm_sqr();
        hb += b.h_int.norm();
    }
    let n = draws as f64;
    let errs = [
        rel(h / n, fits.target.mean()),
        rel(ha2 / n, fits.interferer(InterfCase::A)?.mean()),
        rel(hb / n, fits.interferer(InterfCase::B)?.mean()),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok(CheckResult::new(
        "Gamma fit means vs sampled channels",
        worst < 0.03,
        format!(
            "relative errors |H| {:.2e}, |H_A|^2 {:.2e}, |H_B| {:.2e}",
            errs[0], errs[1], errs[2]
        ),
    ))
}

fn noise_checks(base: &AnalyticConfig) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for snr_db in [-36.0, -32.0, -28.0, -24.0] {
        let c = base.with_snr_db(snr_db)?;
        worst = worst.max(rel(
            analytic_ber::noise_ser_noncoherent(&c)?,
            analytic_ber::noise_ser_noncoherent_numeric(&c, QKernel::TwoExp)?,
        ));
        worst = worst.max(rel(
            analytic_ber::noise_ser_coherent(&c)?,
            analytic_ber::noise_ser_coherent_numeric(&c, QKernel::TwoExp)?,
        ));
    }
    Ok(CheckResult::new(
        "noise SER closed forms vs direct integration",
        worst < 1e-2,
        format!("worst relative error {worst:.2e}"),
    ))
}

fn interference_checks(base: &AnalyticConfig) -> Result<Vec<CheckResult>> {
    let c = base.with_snr_db(-28.0)?;
    let params = c.params;
    let k = params.k();
    let mut worst: f64 = 0.0;
    for case in [InterfCase::A, InterfCase::B] {
        for (i, tau) in [(1, k / 2), (k / 4, k / 8)] {
            let chi = chi_of_i(i, tau, &params)?;
            worst = worst.max(rel(
                interf_conditional(&c, case, Detection::NonCoherent, chi)?,
                interf_conditional_numeric(&c, case, Detection::NonCoherent, chi)?,
            ));
        }
    }
    let gh = CheckResult::new(
        "Gauss-Hermite interference SER vs nested integration",
        worst < 1e-2,
        format!("worst relative error {worst:.2e}"),
    );
    let mut hi = c;
    hi.quadrature_order_v1 = 90;
    hi.quadrature_order_v2 = 90;
    let a = interf_ser(&c, InterfCase::A, Detection::NonCoherent)?;
    let b = interf_ser(&hi, InterfCase::A, Detection::NonCoherent)?;
    let order = CheckResult::new(
        "quadrature order 70 vs 90",
        rel(a, b) < 1e-3,
        format!("{a:.6e} vs {b:.6e}"),
    );
    Ok(vec![gh, order])
}

fn determinism_check(params: LoRaParams, fading: FadingConfig, seed: u64) -> Result<CheckResult> {
    let mut cfg = SimConfig::new(
        params,
        fading,
        Scenario::CaseB,
        Detection::NonCoherent,
        vec![-30.0],
        4000,
        seed,
    )?;
    cfg.max_bit_errors = None;
    let par = run_point(&cfg, -30.0)?;
    cfg.parallel = false;
    let seq = run_point(&cfg, -30.0)?;
    Ok(CheckResult::new(
        "seeded Monte Carlo is worker independent",
        par == seq,
        format!(
            "bit errors parallel {} sequential {}",
            par.bit_errors, seq.bit_errors
        ),
    ))
}

/// Runs every check for the first `(sf, N, m)` of the spec.
pub fn run_checks(spec: &ExperimentSpec) -> Result<Vec<CheckResult>> {
    let params = spec.params(spec.sfs[0])?;
    let fading = FadingConfig::uniform(spec.ms[0], spec.elements[0])?;
    let fits = FitSet::from_fading(&fading, spec.estimator)?;
    let base = AnalyticConfig::new(params, fits, db_to_linear(-30.0))?;
    let mut out = vec![
        chirp_checks(&params)?,
        fit_checks(&fading, spec.estimator)?,
        noise_checks(&base)?,
    ];
    out.extend(interference_checks(&base)?);
    out.push(determinism_check(params, fading, spec.seed)?);
    Ok(out)
}
