use chirpfield_ffi::*;
use std::ffi::CStr;
use std::ptr;

fn last_error() -> String {
    let p = cf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn context(sf: u32, m: f64, n: usize) -> *mut CfAnalytic {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { cf_analytic_new(sf, m, n, &mut h) }, CfStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(cf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn q_exact_values() {
    assert!((cf_q_exact(0.0) - 0.5).abs() < 1e-15);
    assert!((cf_q_exact(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
}

#[test]
fn chi_of_i_zero_difference() {
    let mut x = f64::NAN;
    assert_eq!(unsafe { cf_chi_of_i(7, 0, 0, &mut x) }, CfStatus::Ok);
    assert!((x - 1.0).abs() < 1e-12, "{x}");
    assert_eq!(unsafe { cf_chi_of_i(7, 5, 64, &mut x) }, CfStatus::Ok);
    assert!(x > 0.5 && x < 1.0, "{x}");
    assert_eq!(
        unsafe { cf_chi_of_i(7, 1, 0, ptr::null_mut()) },
        CfStatus::NullPointer
    );
    assert_eq!(
        unsafe { cf_chi_of_i(13, 1, 0, &mut x) },
        CfStatus::InvalidArgument
    );
    assert!(!last_error().is_empty());
}

#[test]
fn analytic_ber_falls_with_snr() {
    let h = context(7, 2.0, 25);
    let mut lo = CfBer::default();
    let mut hi = CfBer::default();
    unsafe {
        assert_eq!(
            cf_analytic_ber(
                h,
                CfScenario::CaseA as u32,
                CfDetection::NonCoherent as u32,
                -36.0,
                &mut lo
            ),
            CfStatus::Ok
        );
        assert_eq!(
            cf_analytic_ber(
                h,
                CfScenario::CaseA as u32,
                CfDetection::NonCoherent as u32,
                -32.0,
                &mut hi
            ),
            CfStatus::Ok
        );
        cf_analytic_free(h);
    }
    assert!(hi.ber < lo.ber && lo.ber < 0.5);
    assert!(lo.p_noise > 0.0 && lo.p_interf >= 0.0);
}

#[test]
fn rejects_bad_arguments() {
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { cf_analytic_new(7, -1.0, 25, &mut h) },
        CfStatus::InvalidArgument
    );
    assert!(h.is_null());
    assert_eq!(
        unsafe { cf_analytic_new(7, 2.0, 25, ptr::null_mut()) },
        CfStatus::NullPointer
    );

    let h = context(7, 2.0, 25);
    let mut b = CfBer::default();
    unsafe {
        assert_eq!(
            cf_analytic_ber(h, 99, 0, -30.0, &mut b),
            CfStatus::InvalidArgument
        );
        assert!(last_error().contains("scenario"));
        assert_eq!(
            cf_analytic_ber(h, 0, 7, -30.0, &mut b),
            CfStatus::InvalidArgument
        );
        assert_eq!(
            cf_analytic_ber(h, CfScenario::RisFree as u32, 0, -30.0, &mut b),
            CfStatus::Unsupported
        );
        assert_eq!(
            cf_analytic_ber(ptr::null(), 0, 0, -30.0, &mut b),
            CfStatus::NullPointer
        );
        cf_analytic_free(h);
        cf_analytic_free(ptr::null_mut());
    }
}

#[test]
fn simulate_point_is_deterministic() {
    let h = context(7, 2.0, 25);
    let mut a = CfSimResult::default();
    let mut b = CfSimResult::default();
    unsafe {
        assert_eq!(
            cf_simulate_point(h, 0, 0, -30.0, 2000, 5, 0, &mut a),
            CfStatus::Ok
        );
        assert_eq!(
            cf_simulate_point(h, 0, 0, -30.0, 2000, 5, 0, &mut b),
            CfStatus::Ok
        );
        let mut c = CfSimResult::default();
        assert_ne!(
            cf_simulate_point(h, 0, 0, -30.0, 0, 5, 0, &mut c),
            CfStatus::Ok
        );
        cf_analytic_free(h);
    }
    assert_eq!(a.bit_errors, b.bit_errors);
    assert_eq!(a.bits_sent, 2000 * 7);
    assert!(a.ci_low <= a.ber && a.ber <= a.ci_high);
}

#[test]
fn header_declares_every_symbol() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/chirpfield.h"))
        .unwrap();
    for sym in [
        "cf_version",
        "cf_last_error",
        "cf_q_exact",
        "cf_chi_of_i",
        "cf_analytic_new",
        "cf_analytic_free",
        "cf_analytic_ber",
        "cf_simulate_point",
        "CF_STATUS_UNSUPPORTED",
        "CF_SCENARIO_NO_INTERFERENCE",
        "CF_DETECTION_COHERENT",
        "typedef struct CfAnalytic CfAnalytic",
    ] {
        assert!(h.contains(sym), "missing {sym}");
    }
}
