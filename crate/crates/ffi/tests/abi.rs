use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use story_beliefs_ffi::*;

fn last_error() -> String {
    let p = sb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn beliefs_match_hand_computation() {
    let samples = [1.0, 10.0, 3.0, 14.0];
    let mut e = [0.0; 2];
    let mut u = [0.0; 2];
    let s = unsafe { sb_beliefs(samples.as_ptr(), 2, 2, e.as_mut_ptr(), u.as_mut_ptr()) };
    assert_eq!(s, SbStatus::Ok);
    assert_eq!(e, [2.0, 12.0]);
    assert_eq!(u, [1.0, 4.0]);
    assert!(sb_last_error().is_null());

    let mut out = [0.0; 2];
    let prev = [1.0, 15.0];
    assert_eq!(unsafe { sb_surprise(e.as_ptr(), prev.as_ptr(), 2, out.as_mut_ptr()) }, SbStatus::Ok);
    assert_eq!(out, [1.0, 9.0]);
}

#[test]
fn errors_carry_codes_and_messages() {
    let s = unsafe { sb_beliefs(ptr::null(), 3, 2, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, SbStatus::NullPointer);
    assert!(last_error().contains("samples"));

    let s = unsafe { sb_beliefs([1.0].as_ptr(), 0, 1, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, SbStatus::InvalidArgument);

    let mut r = 0.0;
    unsafe {
        assert_eq!(sb_relative_improvement(1.0, 1.0, 2.0, &mut r), SbStatus::InvalidArgument);
        assert_eq!(sb_relative_improvement(1.66, 2.44, 2.79, &mut r), SbStatus::Ok);
    }
    assert!((r - 0.35 / 0.78).abs() < 1e-12);
}

#[test]
fn path_metrics_and_mvee() {
    let line = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
    let (mut ratio, mut exact) = (0.0, 0);
    assert_eq!(unsafe { sb_path_circuitousness(line.as_ptr(), 4, 2, &mut ratio, &mut exact) }, SbStatus::Ok);
    assert_eq!((ratio, exact), (1.0, 1));
    let mut speed = 0.0;
    assert_eq!(unsafe { sb_path_speed(line.as_ptr(), 4, 2, &mut speed) }, SbStatus::Ok);
    assert!((speed - 2f64.sqrt()).abs() < 1e-12);

    let circle: Vec<f64> = (0..32)
        .flat_map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 32.0;
            [a.cos(), a.sin()]
        })
        .collect();
    let (mut c, mut v) = ([9.0; 2], 0.0);
    assert_eq!(unsafe { sb_mvee(circle.as_ptr(), 32, 2, 1e-6, c.as_mut_ptr(), &mut v) }, SbStatus::Ok);
    assert!((v - std::f64::consts::PI).abs() < 0.01 * std::f64::consts::PI);
    assert!(c.iter().all(|x| x.abs() < 1e-6));
}

#[test]
fn ols_recovers_exact_line() {
    let x: Vec<f64> = (0..10).flat_map(|i| [1.0, i as f64]).collect();
    let y: Vec<f64> = (0..10).map(|i| 3.0 + 0.5 * i as f64 + if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
    let (mut b, mut se, mut r2) = ([0.0; 2], [0.0; 2], 0.0);
    let s = unsafe { sb_ols(x.as_ptr(), y.as_ptr(), 10, 2, b.as_mut_ptr(), se.as_mut_ptr(), &mut r2, ptr::null_mut()) };
    assert_eq!(s, SbStatus::Ok);
    assert!((b[1] - 0.5).abs() < 0.01 && (b[0] - 3.0).abs() < 0.05);
    assert!(r2 > 0.99 && se.iter().all(|s| *s > 0.0));
}

#[test]
fn pipeline_handles_run_the_toy_corpus() {
    let dir = tempfile::tempdir().unwrap();
    story_beliefs::toy::write_toy(dir.path()).unwrap();
    let config = CString::new(dir.path().join("config.toml").to_str().unwrap()).unwrap();
    let mut p: *mut SbPipeline = ptr::null_mut();
    unsafe {
        assert_eq!(sb_pipeline_open(config.as_ptr(), ptr::null(), &mut p), SbStatus::Ok);
        let mut ex: *mut SbExtractor = ptr::null_mut();
        assert_eq!(sb_extractor_from_pipeline(p, &mut ex), SbStatus::Prerequisite);
        assert!(ex.is_null());
        let bad = CString::new("imagine-all").unwrap();
        assert_eq!(sb_pipeline_run_stage(p, bad.as_ptr()), SbStatus::InvalidArgument);
        assert_eq!(sb_pipeline_run(p), SbStatus::Ok);
        let mut calls = 0;
        assert_eq!(sb_pipeline_stats(p, &mut calls, ptr::null_mut()), SbStatus::Ok);
        assert!(calls > 0);

        assert_eq!(sb_extractor_from_pipeline(p, &mut ex), SbStatus::Ok);
        let text = CString::new("Mara walks to the harbor and feels joy.").unwrap();
        let mut vals = [0.0; SB_FEATURE_DIMS];
        let mut present = [0u8; SB_FEATURE_DIMS];
        assert_eq!(sb_extractor_extract(ex, text.as_ptr(), vals.as_mut_ptr(), present.as_mut_ptr()), SbStatus::Ok);
        let theme_sum: f64 = vals[2..27].iter().sum();
        assert!((theme_sum - 1.0).abs() < 1e-9);
        // Too short for two embedding windows: path dims are absent.
        assert_eq!(present[27..], [0, 0, 0]);
        assert!(vals[27].is_nan());
        sb_extractor_free(ex);
        sb_pipeline_free(p);
    }
}

#[test]
fn missing_config_is_a_config_error() {
    let path = CString::new("/nonexistent/config.toml").unwrap();
    let mut p: *mut SbPipeline = ptr::null_mut();
    assert_eq!(unsafe { sb_pipeline_open(path.as_ptr(), ptr::null(), &mut p) }, SbStatus::Config);
    assert!(p.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/story_beliefs.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["sb_beliefs", "sb_pipeline_open", "sb_extractor_extract", "sb_last_error", "SB_FEATURE_DIMS 30"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("t.c");
    std::fs::write(&src, format!("#include \"{header}\"\nint main(void) {{ return SB_STATUS_OK; }}\n")).unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().map(|_| cc).map_err(|_| ())
}
