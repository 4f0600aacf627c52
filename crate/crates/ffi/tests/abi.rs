use std::ffi::{CStr, CString};
use std::ptr;

use avtable_ffi::*;

fn last_error() -> String {
    let p = av_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn project_equality_and_line() {
    let null = CString::new("equality").unwrap();
    let mut out = AvProjection { theta_a: 0.0, theta_b: 0.0, kl_value: 0.0, member: true };
    let status = unsafe { av_project(null.as_ptr(), 0.3, 0.7, 1, 1, &mut out) };
    assert_eq!(status, AvStatus::Ok);
    assert_eq!((out.theta_a, out.theta_b, out.member), (0.5, 0.5, false));
    assert!((out.kl_value - 0.16456575701010362).abs() < 1e-15);

    let line = CString::new("line:0.1:1").unwrap();
    assert_eq!(unsafe { av_project(line.as_ptr(), 0.1, 0.5, 1, 1, &mut out) }, AvStatus::Ok);
    assert!((out.theta_a - 0.2338).abs() < 1e-4);
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = AvProjection { theta_a: 0.0, theta_b: 0.0, kl_value: 0.0, member: false };
    let bad = CString::new("lor-le:-1").unwrap();
    assert_eq!(unsafe { av_project(bad.as_ptr(), 0.3, 0.7, 1, 1, &mut out) }, AvStatus::InvalidArgument);
    assert!(last_error().contains("convex"));
    assert_eq!(unsafe { av_project(ptr::null(), 0.3, 0.7, 1, 1, &mut out) }, AvStatus::NullPointer);
    let ok = CString::new("equality").unwrap();
    assert_eq!(unsafe { av_project(ok.as_ptr(), 0.3, 0.7, 1, 1, ptr::null_mut()) }, AvStatus::NullPointer);
    assert_eq!(unsafe { av_project(ok.as_ptr(), 1.3, 0.7, 1, 1, &mut out) }, AvStatus::InvalidArgument);
    let bytes = [0xffu8, 0];
    assert_eq!(unsafe { av_project(bytes.as_ptr().cast(), 0.3, 0.7, 1, 1, &mut out) }, AvStatus::InvalidUtf8);
}

#[test]
fn eprocess_lifecycle_and_snapshot() {
    let null = CString::new("equality").unwrap();
    let mut ep = ptr::null_mut();
    assert_eq!(unsafe { av_eprocess_new(null.as_ptr(), 1, 1, ptr::null(), &mut ep) }, AvStatus::Ok);
    let (a, b) = ([0u8], [1u8]);
    for _ in 0..5 {
        let mut inc = f64::NAN;
        assert_eq!(unsafe { av_eprocess_update(ep, a.as_ptr(), 1, b.as_ptr(), 1, &mut inc) }, AvStatus::Ok);
        assert!(inc.is_finite());
    }
    let two = [0u8, 1];
    assert_eq!(unsafe { av_eprocess_update(ep, two.as_ptr(), 2, b.as_ptr(), 1, ptr::null_mut()) }, AvStatus::BlockShape);
    let bad = [2u8];
    assert_eq!(unsafe { av_eprocess_update(ep, bad.as_ptr(), 1, b.as_ptr(), 1, ptr::null_mut()) }, AvStatus::InvalidArgument);

    let (mut log_e, mut m) = (0.0, 0u64);
    assert_eq!(unsafe { av_eprocess_state(ep, &mut log_e, &mut m) }, AvStatus::Ok);
    assert_eq!(m, 5);
    let mut decision = AvDecision::Continue;
    assert_eq!(unsafe { av_eprocess_decision(ep, 0.05, &mut decision) }, AvStatus::Ok);
    assert_eq!(decision, AvDecision::Reject);
    assert!(log_e >= 20f64.ln());
    assert_eq!(unsafe { av_eprocess_decision(ep, 1.0, &mut decision) }, AvStatus::InvalidArgument);

    let mut text = ptr::null_mut();
    assert_eq!(unsafe { av_eprocess_snapshot(ep, &mut text) }, AvStatus::Ok);
    let mut restored = ptr::null_mut();
    assert_eq!(unsafe { av_eprocess_restore(text, &mut restored) }, AvStatus::Ok);
    let (mut log_e2, mut m2) = (0.0, 0u64);
    unsafe { av_eprocess_state(restored, &mut log_e2, &mut m2) };
    assert_eq!((log_e2.to_bits(), m2), (log_e.to_bits(), m));
    unsafe {
        av_string_free(text);
        av_eprocess_free(ep);
        av_eprocess_free(restored);
        av_eprocess_free(ptr::null_mut());
    }

    let garbage = CString::new("not a snapshot").unwrap();
    assert_eq!(unsafe { av_eprocess_restore(garbage.as_ptr(), &mut restored) }, AvStatus::Snapshot);
}

#[test]
fn confseq_interval_shrinks() {
    let mut cs = ptr::null_mut();
    let status = unsafe { av_confseq_new(AvEffect::RiskDifference, 0.05, 1, 1, ptr::null(), ptr::null(), &mut cs) };
    assert_eq!(status, AvStatus::Ok);
    let mut iv = AvInterval { lower: 0.0, upper: 0.0, empty: true, n_alive: 0, blocks: 0 };
    unsafe { av_confseq_interval(cs, &mut iv) };
    assert_eq!((iv.lower, iv.upper, iv.empty, iv.n_alive, iv.blocks), (-1.0, 1.0, false, 201, 0));
    for i in 0..200u32 {
        let (a, b) = ([u8::from(i % 10 == 0)], [u8::from(i % 3 == 0)]);
        assert_eq!(unsafe { av_confseq_update(cs, a.as_ptr(), 1, b.as_ptr(), 1) }, AvStatus::Ok);
    }
    unsafe { av_confseq_interval(cs, &mut iv) };
    assert!(iv.n_alive < 201 && iv.lower > -1.0 && iv.upper < 1.0 && iv.blocks == 200);
    unsafe { av_confseq_free(cs) };

    let grid = CString::new("list:0,-1").unwrap();
    let status = unsafe { av_confseq_new(AvEffect::RelativeRisk, 0.05, 1, 1, ptr::null(), grid.as_ptr(), &mut cs) };
    assert_eq!(status, AvStatus::InvalidArgument);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(av_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
