//! C ABI over the holonomy engine.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! constructors and released with the matching `*_free`. Every fallible call
//! returns a [`HolonomyStatus`]; on failure a description is available from
//! [`holonomy_last_error`] until the next failing call on the same thread.
//! Panics never unwind into C: they are caught and reported as
//! `HOLONOMY_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use holonomy::cli::{run_command, AnsatzDocument};
use holonomy::flows::{derive_flow, DeriveOptions, FlowSystem};
use holonomy::frames::AnsatzFrame;
use holonomy::structures::{builtin_ansatz, BuiltinParams, ReferenceSystem, StructureKind};
use holonomy::torsion::{torsion_forms, SampleOptions};

/// Result of every fallible call.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolonomyStatus {
    HOLONOMY_OK = 0,
    HOLONOMY_NULL_POINTER = 1,
    HOLONOMY_INVALID_UTF8 = 2,
    HOLONOMY_INVALID_ARGUMENT = 3,
    HOLONOMY_PARSE_ERROR = 4,
    HOLONOMY_UNKNOWN_BUILTIN = 5,
    HOLONOMY_DERIVATION_FAILED = 6,
    HOLONOMY_EVALUATION_FAILED = 7,
    HOLONOMY_BUFFER_TOO_SMALL = 8,
    HOLONOMY_PANIC = 9,
}

use HolonomyStatus::*;

/// A frame ansatz together with its structure kind.
pub struct HolonomyAnsatz {
    frame: AnsatzFrame,
    kind: StructureKind,
    reference: Option<ReferenceSystem>,
}

/// A derived first-order flow system.
pub struct HolonomyFlow {
    flow: FlowSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: HolonomyStatus, msg: impl Into<String>) -> HolonomyStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> HolonomyStatus) -> HolonomyStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(HOLONOMY_PANIC, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, HolonomyStatus> {
    if p.is_null() {
        return Err(fail(HOLONOMY_NULL_POINTER, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(HOLONOMY_INVALID_UTF8, format!("{what} is not UTF-8")))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn holonomy_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn holonomy_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a handle for a built-in ansatz such as `"brandhuber"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn holonomy_ansatz_builtin(name: *const c_char, out: *mut *mut HolonomyAnsatz) -> HolonomyStatus {
    guard(|| {
        if out.is_null() {
            return fail(HOLONOMY_NULL_POINTER, "out is null");
        }
        let name = match str_arg(name, "name") {
            Ok(s) => s,
            Err(s) => return s,
        };
        match builtin_ansatz(name, &BuiltinParams::default()) {
            Ok(b) => {
                *out = Box::into_raw(Box::new(HolonomyAnsatz { frame: b.frame, kind: b.kind, reference: b.reference }));
                HOLONOMY_OK
            }
            Err(e) => fail(HOLONOMY_UNKNOWN_BUILTIN, e.to_string()),
        }
    })
}

/// Parses an ansatz document; it must declare its structure.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn holonomy_ansatz_parse(text: *const c_char, out: *mut *mut HolonomyAnsatz) -> HolonomyStatus {
    guard(|| {
        if out.is_null() {
            return fail(HOLONOMY_NULL_POINTER, "out is null");
        }
        let text = match str_arg(text, "text") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let doc = match AnsatzDocument::parse(text) {
            Ok(d) => d,
            Err(e) => return fail(HOLONOMY_PARSE_ERROR, e.to_string()),
        };
        let Some(kind) = doc.structure else {
            return fail(HOLONOMY_PARSE_ERROR, "document has no [structure] section");
        };
        match doc.to_frame() {
            Ok(frame) => {
                *out = Box::into_raw(Box::new(HolonomyAnsatz { frame, kind, reference: None }));
                HOLONOMY_OK
            }
            Err(e) => fail(HOLONOMY_PARSE_ERROR, e.to_string()),
        }
    })
}

/// Releases an ansatz handle. Null is ignored.
///
/// # Safety
/// `ansatz` must come from a constructor of this library and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn holonomy_ansatz_free(ansatz: *mut HolonomyAnsatz) {
    if !ansatz.is_null() {
        drop(Box::from_raw(ansatz));
    }
}

/// Frame dimension of the ansatz, 0 for null.
///
/// # Safety
/// `ansatz` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn holonomy_ansatz_dim(ansatz: *const HolonomyAnsatz) -> usize {
    ansatz.as_ref().map_or(0, |a| a.frame.dim())
}

/// Largest torsion coefficient over `points` seeded samples. With
/// `derived_closure` nonzero the flow is derived first and substituted.
///
/// # Safety
/// `ansatz` must be a live handle and `max_residual` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn holonomy_verify(
    ansatz: *const HolonomyAnsatz,
    derived_closure: i32,
    points: usize,
    seed: u64,
    max_residual: *mut f64,
) -> HolonomyStatus {
    guard(|| {
        let (Some(a), false) = (ansatz.as_ref(), max_residual.is_null()) else {
            return fail(HOLONOMY_NULL_POINTER, "ansatz or max_residual is null");
        };
        if points == 0 {
            return fail(HOLONOMY_INVALID_ARGUMENT, "points must be positive");
        }
        let flow = if derived_closure != 0 {
            let opts = DeriveOptions { seed, reference: a.reference.clone(), ..Default::default() };
            match derive_flow(&a.frame, a.kind, &opts) {
                Ok(f) => Some(f),
                Err(e) => return fail(HOLONOMY_DERIVATION_FAILED, e.to_string()),
            }
        } else {
            None
        };
        match torsion_forms(&a.frame, a.kind, flow.as_ref(), SampleOptions { points, seed }) {
            Ok(r) => {
                *max_residual = r.max_residual();
                HOLONOMY_OK
            }
            Err(e) => fail(HOLONOMY_EVALUATION_FAILED, e.to_string()),
        }
    })
}

/// Derives the first-order flow of the ansatz with automatic scale
/// selection.
///
/// # Safety
/// `ansatz` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn holonomy_derive(ansatz: *const HolonomyAnsatz, out: *mut *mut HolonomyFlow) -> HolonomyStatus {
    guard(|| {
        let (Some(a), false) = (ansatz.as_ref(), out.is_null()) else {
            return fail(HOLONOMY_NULL_POINTER, "ansatz or out is null");
        };
        let opts = DeriveOptions { reference: a.reference.clone(), ..Default::default() };
        match derive_flow(&a.frame, a.kind, &opts) {
            Ok(flow) => {
                *out = Box::into_raw(Box::new(HolonomyFlow { flow }));
                HOLONOMY_OK
            }
            Err(e) => fail(HOLONOMY_DERIVATION_FAILED, e.to_string()),
        }
    })
}

/// Releases a flow handle. Null is ignored.
///
/// # Safety
/// `flow` must come from [`holonomy_derive`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn holonomy_flow_free(flow: *mut HolonomyFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// Number of unknowns, 0 for null.
///
/// # Safety
/// `flow` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn holonomy_flow_dim(flow: *const HolonomyFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.flow.dim())
}

/// Nonzero when every closure condition was certified after substitution.
///
/// # Safety
/// `flow` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn holonomy_flow_certified(flow: *const HolonomyFlow) -> i32 {
    flow.as_ref().map_or(0, |f| i32::from(f.flow.leftovers_ok))
}

/// Writes the `du/dt = rhs` lines into `buf`. `needed` receives the size
/// including the terminating NUL; pass a null `buf` to query it.
///
/// # Safety
/// `flow` must be a live handle, `buf` null or writable for `len` bytes,
/// `needed` null or valid.
#[no_mangle]
pub unsafe extern "C" fn holonomy_flow_render(
    flow: *const HolonomyFlow,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> HolonomyStatus {
    guard(|| {
        let Some(f) = flow.as_ref() else { return fail(HOLONOMY_NULL_POINTER, "flow is null") };
        let text = f.flow.render();
        let size = text.len() + 1;
        if !needed.is_null() {
            *needed = size;
        }
        if buf.is_null() {
            return HOLONOMY_OK;
        }
        if len < size {
            return fail(HOLONOMY_BUFFER_TOO_SMALL, format!("need {size} bytes, got {len}"));
        }
        ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), buf, text.len());
        *buf.add(text.len()) = 0;
        HOLONOMY_OK
    })
}

/// Evaluates the right-hand side at `(t, y)` into `dy`; both arrays have
/// `n` entries in unknown order.
///
/// # Safety
/// `flow` must be a live handle; `y` and `dy` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn holonomy_flow_eval(
    flow: *const HolonomyFlow,
    t: f64,
    y: *const f64,
    n: usize,
    dy: *mut f64,
) -> HolonomyStatus {
    guard(|| {
        let Some(f) = flow.as_ref() else { return fail(HOLONOMY_NULL_POINTER, "flow is null") };
        if y.is_null() || dy.is_null() {
            return fail(HOLONOMY_NULL_POINTER, "y or dy is null");
        }
        if n != f.flow.dim() {
            return fail(HOLONOMY_INVALID_ARGUMENT, format!("flow has {} unknowns, got {n}", f.flow.dim()));
        }
        let ys = std::slice::from_raw_parts(y, n);
        match f.flow.eval(t, ys) {
            Ok(v) => {
                std::slice::from_raw_parts_mut(dy, n).copy_from_slice(&v);
                HOLONOMY_OK
            }
            Err(e) => fail(HOLONOMY_EVALUATION_FAILED, e.to_string()),
        }
    })
}

/// Runs a command line exactly like the `holonomy` executable. `argv`
/// excludes the program name. The JSON report (possibly empty) is returned
/// in `report`, to be released with [`holonomy_string_free`].
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings; `report` and `exit_code`
/// must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn holonomy_run_command(
    argv: *const *const c_char,
    argc: usize,
    report: *mut *mut c_char,
    exit_code: *mut i32,
) -> HolonomyStatus {
    guard(|| {
        if report.is_null() || exit_code.is_null() || (argv.is_null() && argc > 0) {
            return fail(HOLONOMY_NULL_POINTER, "argv, report or exit_code is null");
        }
        let mut args = vec!["holonomy".to_string()];
        for i in 0..argc {
            match str_arg(*argv.add(i), "argument") {
                Ok(s) => args.push(s.to_string()),
                Err(s) => return s,
            }
        }
        let outcome = run_command(args);
        *exit_code = outcome.code;
        if !outcome.stderr.is_empty() {
            set_error(outcome.stderr.trim_end());
        }
        match CString::new(outcome.stdout) {
            Ok(s) => {
                *report = s.into_raw();
                HOLONOMY_OK
            }
            Err(_) => fail(HOLONOMY_INVALID_UTF8, "report contains NUL"),
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn holonomy_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
