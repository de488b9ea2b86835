//! Command-line front end.
//!
//! `chirpfield <simulate|analytic|both|validate> [options]`. Settings come
//! from an optional TOML file; flags override the file. Exit codes: 0 success,
//! 1 configuration error, 2 numeric failure in at least one point, 3 failed
//! validation.

pub mod config;
pub mod run;
pub mod validate;

pub use config::{parse_snr_grid, resolve, ExperimentSpec, Mode, Preset, RawConfig};
pub use run::{run_sweep, Row, RunSummary, CSV_HEADER};
pub use validate::{run_checks, CheckResult};

use crate::error::Error;
use clap::Parser;
use config::OneOrMany;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "chirpfield",
    version,
    about = "LoRa BER under co-SF interference with RIS assistance"
)]
pub struct Cli {
    /// what to compute
    #[arg(value_enum)]
    pub mode: Mode,
    /// TOML experiment file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// fig3a, fig3b, fig4a, fig4b, fig5a, fig5b or fig5
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub sf: Option<Vec<u32>>,
    /// RIS elements per surface
    #[arg(long, value_delimiter = ',')]
    pub elements: Option<Vec<usize>>,
    /// Nakagami shape for every link
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<f64>>,
    /// case_a, case_b, ris_free, blind, no_interference
    #[arg(long, value_delimiter = ',')]
    pub scenario: Option<Vec<String>>,
    /// noncoherent, coherent
    #[arg(long, value_delimiter = ',')]
    pub detection: Option<Vec<String>>,
    /// A:B:STEP in dB, inclusive
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    /// Monte Carlo symbols per point
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// early stop per point, 0 disables
    #[arg(long = "max-bit-errors")]
    pub max_bit_errors: Option<u64>,
    /// CSV destination, stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// worker threads, all cores when omitted
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Cli {
    fn flags(&self) -> RawConfig {
        RawConfig {
            preset: self.preset.clone(),
            sf: self.sf.clone().map(OneOrMany::Many),
            elements: self.elements.clone().map(OneOrMany::Many),
            m: self.m.clone().map(OneOrMany::Many),
            scenario: self.scenario.clone().map(OneOrMany::Many),
            detection: self.detection.clone().map(OneOrMany::Many),
            snr_db: self.snr_db.clone(),
            trials: self.trials,
            seed: self.seed,
            max_bit_errors: self.max_bit_errors,
            out: self.out.clone(),
            ..Default::default()
        }
    }

    pub fn spec(&self) -> crate::Result<ExperimentSpec> {
        let file = match &self.config {
            Some(p) => RawConfig::from_file(p)?,
            None => RawConfig::default(),
        };
        resolve(self.mode, file.overlay(self.flags()))
    }
}

fn sweep_to_output(spec: &ExperimentSpec) -> crate::Result<RunSummary> {
    match &spec.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| {
                Error::Config(format!("cannot write output {}: {e}", path.display()))
            })?;
            let mut w = BufWriter::new(f);
            let s = run_sweep(spec, &mut w)?;
            w.flush()?;
            Ok(s)
        }
        None => run_sweep(spec, &mut std::io::stdout().lock()),
    }
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::NumericFailure(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    let spec = match cli.spec() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut code = EXIT_OK;
    if spec.mode == Mode::Validate {
        match run_checks(&spec) {
            Ok(results) => {
                for r in &results {
                    println!("{}", r.line());
                }
                let failed = results.iter().filter(|r| !r.passed).count();
                println!(
                    "validation: {} of {} checks passed",
                    results.len() - failed,
                    results.len()
                );
                if failed > 0 {
                    code = EXIT_VALIDATION;
                }
            }
            Err(e) => {
                eprintln!("error: validation aborted: {e}");
                return exit_for(&e).max(EXIT_VALIDATION);
            }
        }
        if spec.out.is_none() {
            return code;
        }
    }
    match sweep_to_output(&spec) {
        Ok(summary) if summary.numeric_failures > 0 => {
            eprintln!(
                "error: {} point(s) failed numerically",
                summary.numeric_failures
            );
            code.max(EXIT_NUMERIC)
        }
        Ok(_) => code,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
