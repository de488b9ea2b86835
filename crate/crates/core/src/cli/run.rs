//! Sweep orchestration and CSV output.

use super::config::ExperimentSpec;
use crate::analytic_ber::{self, AnalyticConfig, BerBreakdown, FitSet, InterfCase};
use crate::channel::FadingConfig;
use crate::error::{Error, Result};
use crate::montecarlo::{BerEstimate, Scenario, SimConfig, Simulator};
use std::io::Write;

pub const CSV_HEADER: &str =
    "scenario,detection,sf,n_elements,m,snr_db,ber_analytic,p_noise,p_interf,ber_sim,ci_low,ci_high,bits_sent,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: Scenario,
    pub detection: analytic_ber::Detection,
    pub sf: u32,
    pub n_elements: usize,
    pub m: f64,
    pub snr_db: f64,
    pub analytic: Option<BerBreakdown>,
    pub sim: Option<BerEstimate>,
    pub seed: u64,
}

fn sci(x: f64) -> String {
    format!("{x:.9e}")
}

impl Row {
    pub fn to_csv(&self) -> String {
        let a = self
            .analytic
            .map(|a| [sci(a.ber), sci(a.p_noise), sci(a.p_interf)])
            .unwrap_or_default();
        let s = self
            .sim
            .map(|s| {
                [
                    sci(s.ber),
                    sci(s.ci95_low),
                    sci(s.ci95_high),
                    s.bits_sent.to_string(),
                ]
            })
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.detection,
            self.sf,
            self.n_elements,
            self.m,
            self.snr_db,
            a[0],
            a[1],
            a[2],
            s[0],
            s[1],
            s[2],
            s[3],
            self.seed
        )
    }
}

/// Analytic BER for a scenario, or `None` when no closed form exists.
pub fn analytic_point(
    cfg: &AnalyticConfig,
    scenario: Scenario,
    detection: analytic_ber::Detection,
) -> Option<Result<BerBreakdown>> {
    match scenario {
        Scenario::CaseA => Some(analytic_ber::ber(cfg, InterfCase::A, detection)),
        Scenario::CaseB => Some(analytic_ber::ber(cfg, InterfCase::B, detection)),
        Scenario::NoInterference => Some(analytic_ber::ber_no_interference(cfg, detection)),
        Scenario::RisFree | Scenario::Blind => None,
    }
}

/// Outcome of a sweep: rows in output order plus the number of failed points.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub rows: usize,
    pub numeric_failures: usize,
}

/// Runs every point of `spec` and writes rows to `out` as they complete.
pub fn run_sweep<W: Write>(spec: &ExperimentSpec, out: &mut W) -> Result<RunSummary> {
    let io = |e: std::io::Error| Error::Io(e);
    writeln!(out, "{CSV_HEADER}").map_err(io)?;
    let mut summary = RunSummary::default();
    for &(scenario, detection) in &spec.curves {
        for &sf in &spec.sfs {
            let params = spec.params(sf)?;
            for &n in &spec.elements {
                for &m in &spec.ms {
                    let fading = FadingConfig::uniform(m, n)?;
                    let fits = if spec.mode.analyses() {
                        Some(FitSet::from_fading(&fading, spec.estimator)?)
                    } else {
                        None
                    };
                    let sim = if spec.mode.simulates() {
                        let mut c = SimConfig::new(
                            params,
                            fading,
                            scenario,
                            detection,
                            spec.snr_db.clone(),
                            spec.trials,
                            spec.seed,
                        )?;
                        c.max_bit_errors = spec.max_bit_errors;
                        c.full_offset_range = spec.full_offset_range;
                        Some(Simulator::new(c)?)
                    } else {
                        None
                    };
                    for (idx, &snr_db) in spec.snr_db.iter().enumerate() {
                        let mut failed = false;
                        let analytic = fits.and_then(|fits| {
                            let res = AnalyticConfig::new(params, fits, analytic_ber::db_to_linear(snr_db)).and_then(|mut c| {
                                c.quadrature_order_v1 = spec.quadrature_order;
                                c.quadrature_order_v2 = spec.quadrature_order;
                                c.staircase_m = spec.staircase_m;
                                c.interf_kernel = spec.q_kernel;
                                analytic_point(&c, scenario, detection).transpose()
                            });
                            match res {
                                Ok(v) => v,
                                Err(e) => {
                                    log::error!("analytic {scenario}/{detection} SF{sf} N={n} m={m} at {snr_db} dB: {e}");
                                    failed = true;
                                    None
                                }
                            }
                        });
                        let sim = match &sim {
                            Some(s) => match s.point(idx as u64, snr_db) {
                                Ok(e) => Some(e),
                                Err(e) => {
                                    log::error!("simulation {scenario}/{detection} SF{sf} N={n} m={m} at {snr_db} dB: {e}");
                                    failed = true;
                                    None
                                }
                            },
                            None => None,
                        };
                        summary.numeric_failures += failed as usize;
                        let row = Row {
                            scenario,
                            detection,
                            sf,
                            n_elements: n,
                            m,
                            snr_db,
                            analytic,
                            sim,
                            seed: spec.seed,
                        };
                        writeln!(out, "{}", row.to_csv()).map_err(io)?;
                        out.flush().map_err(io)?;
                        summary.rows += 1;
                        log::info!("{}", row.to_csv());
                    }
                }
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::super::config::{resolve, Mode, RawConfig};
    use super::*;

    fn spec(mode: Mode, text: &str) -> ExperimentSpec {
        resolve(mode, RawConfig::from_toml_str(text, "t").unwrap()).unwrap()
    }

    #[test]
    fn analytic_single_point_has_empty_sim_columns() {
        let s = spec(Mode::Analytic, "sf = 7\nelements = 25\nm = 2.0\nscenario = \"case_a\"\ndetection = \"nc\"\nsnr_db = \"-30\"");
        let mut buf = Vec::new();
        let sum = run_sweep(&s, &mut buf).unwrap();
        assert_eq!(sum.rows, 1);
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        let cols: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cols.len(), 14);
        assert_eq!(
            &cols[..6],
            &["case_a", "noncoherent", "7", "25", "2", "-30"]
        );
        assert!(cols[6].parse::<f64>().unwrap() > 0.0);
        assert!(cols[9..13].iter().all(|c| c.is_empty()));
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn simulation_rows_are_byte_identical() {
        let s = spec(Mode::Simulate, "scenario = [\"case_b\", \"ris_free\"]\ndetection = \"c\"\nsnr_db = \"-30:-28:2\"\ntrials = 500");
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_sweep(&s, &mut a).unwrap();
        run_sweep(&s, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 5);
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let ber: f64 = cols[9].parse().unwrap();
            assert!((0.0..=0.55).contains(&ber));
            assert!(cols[6].is_empty());
        }
    }
}
