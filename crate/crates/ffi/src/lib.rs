//! C ABI for chirpfield.
//!
//! Every fallible call returns a [`CfStatus`]; on failure the message is
//! available from [`cf_last_error`] on the same thread. Analytic contexts are
//! opaque handles created by [`cf_analytic_new`] and released with
//! [`cf_analytic_free`]. Scenario and detection arguments take the integer
//! values of [`CfScenario`] and [`CfDetection`].

use chirpfield::analytic_ber::{self, db_to_linear, AnalyticConfig, Detection, FitSet, InterfCase};
use chirpfield::channel::{Estimator, FadingConfig};
use chirpfield::interference::chi_of_i;
use chirpfield::lora_phy::LoRaParams;
use chirpfield::montecarlo::{run_point, Scenario, SimConfig};
use chirpfield::specfun::q_exact;
use chirpfield::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfStatus {
    Ok = 0,
    InvalidArgument = 1,
    NumericFailure = 2,
    Config = 3,
    Io = 4,
    NullPointer = 5,
    Panic = 6,
    /// scenario has no closed form (RIS-free, blind)
    Unsupported = 7,
}

#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfScenario {
    CaseA = 0,
    CaseB = 1,
    RisFree = 2,
    Blind = 3,
    NoInterference = 4,
}

#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfDetection {
    NonCoherent = 0,
    Coherent = 1,
}

/// Analytic BER components.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CfBer {
    pub ber: f64,
    pub p_noise: f64,
    pub p_interf: f64,
}

/// Monte Carlo estimate with a 95% Wilson interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CfSimResult {
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bit_errors: u64,
    pub bits_sent: u64,
}

/// Opaque analytic context: LoRa parameters and Gamma fits for one `(SF, m, N)`.
pub struct CfAnalytic {
    params: LoRaParams,
    fading: FadingConfig,
    fits: FitSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CfStatus {
    match e {
        Error::InvalidArgument(_) => CfStatus::InvalidArgument,
        Error::NumericFailure(_) => CfStatus::NumericFailure,
        Error::Config(_) => CfStatus::Config,
        Error::Io(_) => CfStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), (CfStatus, String)>>(f: F) -> CfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CfStatus::Panic
        }
    }
}

fn lift<T>(r: chirpfield::Result<T>) -> Result<T, (CfStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn bad(msg: impl Into<String>) -> (CfStatus, String) {
    (CfStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> (CfStatus, String) {
    (CfStatus::NullPointer, format!("{what} is null"))
}

fn scenario(v: u32) -> Result<Scenario, (CfStatus, String)> {
    Ok(match v {
        0 => Scenario::CaseA,
        1 => Scenario::CaseB,
        2 => Scenario::RisFree,
        3 => Scenario::Blind,
        4 => Scenario::NoInterference,
        _ => return Err(bad(format!("unknown scenario {v}"))),
    })
}

fn detection(v: u32) -> Result<Detection, (CfStatus, String)> {
    match v {
        0 => Ok(Detection::NonCoherent),
        1 => Ok(Detection::Coherent),
        _ => Err(bad(format!("unknown detection {v}"))),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Gaussian tail probability `Q(x)`.
#[no_mangle]
pub extern "C" fn cf_q_exact(x: f64) -> f64 {
    q_exact(x)
}

/// Peak-bin interference bound `χ_I` for symbol difference `i` and offset `tau`.
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn cf_chi_of_i(sf: u32, i: usize, tau: usize, out: *mut f64) -> CfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = lift(LoRaParams::with_sf(sf))?;
        let v = lift(chi_of_i(i, tau, &p))?;
        // SAFETY: checked non-null; caller guarantees validity
        unsafe { *out = v };
        Ok(())
    })
}

/// Creates an analytic context for spreading factor `sf`, Nakagami shape `m`
/// on every link and `n_elements` RIS elements.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn cf_analytic_new(
    sf: u32,
    m: f64,
    n_elements: usize,
    out: *mut *mut CfAnalytic,
) -> CfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = lift(LoRaParams::with_sf(sf))?;
        let fading = lift(FadingConfig::uniform(m, n_elements))?;
        let fits = lift(FitSet::from_fading(&fading, Estimator::Variance))?;
        let h = Box::new(CfAnalytic {
            params,
            fading,
            fits,
        });
        // SAFETY: checked non-null
        unsafe { *out = Box::into_raw(h) };
        Ok(())
    })
}

/// Releases a context. NULL is ignored.
///
/// # Safety
/// `handle` must come from [`cf_analytic_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cf_analytic_free(handle: *mut CfAnalytic) {
    if !handle.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Analytic BER at `snr_db`. RIS-free and blind scenarios return
/// `CF_STATUS_UNSUPPORTED`.
///
/// # Safety
/// `handle` must be a live context; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cf_analytic_ber(
    handle: *const CfAnalytic,
    scenario_id: u32,
    detection_id: u32,
    snr_db: f64,
    out: *mut CfBer,
) -> CfStatus {
    guard(|| {
        if handle.is_null() {
            return Err(null("handle"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null; caller guarantees liveness
        let h = unsafe { &*handle };
        let det = detection(detection_id)?;
        let cfg = lift(AnalyticConfig::new(h.params, h.fits, db_to_linear(snr_db)))?;
        let b = match scenario(scenario_id)? {
            Scenario::CaseA => lift(analytic_ber::ber(&cfg, InterfCase::A, det))?,
            Scenario::CaseB => lift(analytic_ber::ber(&cfg, InterfCase::B, det))?,
            Scenario::NoInterference => lift(analytic_ber::ber_no_interference(&cfg, det))?,
            s => {
                return Err((
                    CfStatus::Unsupported,
                    format!("no closed form for scenario {s}"),
                ))
            }
        };
        // SAFETY: checked non-null
        unsafe {
            *out = CfBer {
                ber: b.ber,
                p_noise: b.p_noise,
                p_interf: b.p_interf,
            }
        };
        Ok(())
    })
}

/// Monte Carlo BER for the context's `(SF, m, N)` at one SNR. `max_bit_errors`
/// of 0 disables early stopping.
///
/// # Safety
/// `handle` must be a live context; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cf_simulate_point(
    handle: *const CfAnalytic,
    scenario_id: u32,
    detection_id: u32,
    snr_db: f64,
    trials: u64,
    seed: u64,
    max_bit_errors: u64,
    out: *mut CfSimResult,
) -> CfStatus {
    guard(|| {
        if handle.is_null() {
            return Err(null("handle"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null; caller guarantees liveness
        let h = unsafe { &*handle };
        let mut cfg = lift(SimConfig::new(
            h.params,
            h.fading,
            scenario(scenario_id)?,
            detection(detection_id)?,
            vec![snr_db],
            trials,
            seed,
        ))?;
        cfg.max_bit_errors = (max_bit_errors > 0).then_some(max_bit_errors);
        let e = lift(run_point(&cfg, snr_db))?;
        // SAFETY: checked non-null
        unsafe {
            *out = CfSimResult {
                ber: e.ber,
                ci_low: e.ci95_low,
                ci_high: e.ci95_high,
                bit_errors: e.bit_errors,
                bits_sent: e.bits_sent,
            }
        };
        Ok(())
    })
}
