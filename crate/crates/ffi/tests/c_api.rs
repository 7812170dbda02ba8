use std::ffi::{c_char, CStr, CString};
use std::ptr;

use holonomy_ffi::*;
use HolonomyStatus::*;

fn last_error() -> String {
    let p = holonomy_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn builtin(name: &str) -> *mut HolonomyAnsatz {
    let name = CString::new(name).unwrap();
    let mut a = ptr::null_mut();
    assert_eq!(unsafe { holonomy_ansatz_builtin(name.as_ptr(), &mut a) }, HOLONOMY_OK);
    a
}

#[test]
fn builtin_derives_and_evaluates() {
    let a = builtin("brandhuber");
    assert_eq!(unsafe { holonomy_ansatz_dim(a) }, 7);

    let mut f = ptr::null_mut();
    assert_eq!(unsafe { holonomy_derive(a, &mut f) }, HOLONOMY_OK);
    let n = unsafe { holonomy_flow_dim(f) };
    assert_eq!(n, 4);
    assert_eq!(unsafe { holonomy_flow_certified(f) }, 1);

    let mut needed = 0usize;
    assert_eq!(unsafe { holonomy_flow_render(f, ptr::null_mut(), 0, &mut needed) }, HOLONOMY_OK);
    let mut small = vec![0 as c_char; 4];
    assert_eq!(unsafe { holonomy_flow_render(f, small.as_mut_ptr(), small.len(), ptr::null_mut()) }, HOLONOMY_BUFFER_TOO_SMALL);
    assert!(last_error().contains("need"));
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { holonomy_flow_render(f, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, HOLONOMY_OK);
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    assert_eq!(text.len() + 1, needed);
    assert!(text.contains("dC/dr"));

    // At A = B = C = D the C equation vanishes.
    let y = [1.0, 1.0, 1.0, 1.0];
    let mut dy = [f64::NAN; 4];
    assert_eq!(unsafe { holonomy_flow_eval(f, 0.0, y.as_ptr(), 4, dy.as_mut_ptr()) }, HOLONOMY_OK);
    assert!(dy.iter().all(|v| v.is_finite()));
    assert_eq!(unsafe { holonomy_flow_eval(f, 0.0, y.as_ptr(), 3, dy.as_mut_ptr()) }, HOLONOMY_INVALID_ARGUMENT);

    let mut r = f64::NAN;
    assert_eq!(unsafe { holonomy_verify(a, 1, 20, 7, &mut r) }, HOLONOMY_OK);
    assert!(r < 1e-9, "residual {r}");

    unsafe {
        holonomy_flow_free(f);
        holonomy_ansatz_free(a);
    }
}

#[test]
fn parsed_document_round_trips() {
    let text = CString::new(include_str!("../../core/data/flat7.ans")).unwrap();
    let mut a = ptr::null_mut();
    assert_eq!(unsafe { holonomy_ansatz_parse(text.as_ptr(), &mut a) }, HOLONOMY_OK);
    assert_eq!(unsafe { holonomy_ansatz_dim(a) }, 7);
    let mut r = f64::NAN;
    assert_eq!(unsafe { holonomy_verify(a, 0, 10, 1, &mut r) }, HOLONOMY_OK);
    assert_eq!(r, 0.0);
    unsafe { holonomy_ansatz_free(a) };
}

#[test]
fn errors_are_reported() {
    let mut a = ptr::null_mut();
    let bad = CString::new("no_such_thing").unwrap();
    assert_eq!(unsafe { holonomy_ansatz_builtin(bad.as_ptr(), &mut a) }, HOLONOMY_UNKNOWN_BUILTIN);
    assert!(a.is_null());
    assert!(last_error().contains("no_such_thing"));

    assert_eq!(unsafe { holonomy_ansatz_builtin(ptr::null(), &mut a) }, HOLONOMY_NULL_POINTER);
    let junk = CString::new("[frames]\nbase = x\n[coframe]\ne1 = dx\n").unwrap();
    assert_eq!(unsafe { holonomy_ansatz_parse(junk.as_ptr(), &mut a) }, HOLONOMY_PARSE_ERROR);

    let invalid = [0xffu8 as c_char, 0];
    assert_eq!(unsafe { holonomy_ansatz_parse(invalid.as_ptr(), &mut a) }, HOLONOMY_INVALID_UTF8);

    let mut r = 0.0;
    assert_eq!(unsafe { holonomy_verify(ptr::null(), 0, 10, 1, &mut r) }, HOLONOMY_NULL_POINTER);
    assert_eq!(unsafe { holonomy_ansatz_dim(ptr::null()) }, 0);
    unsafe {
        holonomy_ansatz_free(ptr::null_mut());
        holonomy_flow_free(ptr::null_mut());
        holonomy_string_free(ptr::null_mut());
    }
}

#[test]
fn non_derivable_ansatz_fails_cleanly() {
    let a = builtin("multiply_warped");
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { holonomy_derive(a, &mut f) }, HOLONOMY_DERIVATION_FAILED);
    assert!(f.is_null());
    assert!(!last_error().is_empty());
    unsafe { holonomy_ansatz_free(a) };
}

#[test]
fn command_line_matches_executable() {
    let args: Vec<CString> = ["classify", "--builtin", "brandhuber", "--closure", "derived", "--points", "20"]
        .iter()
        .map(|s| CString::new(*s).unwrap())
        .collect();
    let ptrs: Vec<*const c_char> = args.iter().map(|s| s.as_ptr()).collect();
    let mut report = ptr::null_mut();
    let mut code = -1;
    assert_eq!(unsafe { holonomy_run_command(ptrs.as_ptr(), ptrs.len(), &mut report, &mut code) }, HOLONOMY_OK);
    assert_eq!(code, 0);
    let json = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    unsafe { holonomy_string_free(report) };
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["command"], "classify");

    let direct = holonomy::cli::run_command(std::iter::once("holonomy").chain(["classify", "--builtin", "brandhuber", "--closure", "derived", "--points", "20"]));
    assert_eq!(direct.stdout, json);

    let bad = [CString::new("frobnicate").unwrap()];
    let p = [bad[0].as_ptr()];
    assert_eq!(unsafe { holonomy_run_command(p.as_ptr(), 1, &mut report, &mut code) }, HOLONOMY_OK);
    assert_eq!(code, 2);
    unsafe { holonomy_string_free(report) };
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(holonomy_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/holonomy.h")).unwrap();
    for f in [
        "holonomy_last_error",
        "holonomy_ansatz_builtin",
        "holonomy_ansatz_parse",
        "holonomy_ansatz_free",
        "holonomy_verify",
        "holonomy_derive",
        "holonomy_flow_render",
        "holonomy_flow_eval",
        "holonomy_run_command",
        "holonomy_string_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing");
    }
    assert!(header.contains("HOLONOMY_H"));
}
