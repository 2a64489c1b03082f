//! C interface to `firegrid`.
//!
//! Objects cross the boundary as opaque handles created by `*_from_json`,
//! `fg_model_build` or the solve functions and released with the matching
//! `*_free`. Every fallible call returns an [`FgStatus`]; on failure the
//! message is kept per thread and read with [`fg_last_error_message`].
//! Strings handed out by the library are released with [`fg_string_free`].

// `!(x >= 0.0)` is how NaN gets rejected along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use firegrid::analysis::{compute_group_metrics, postprocess_equity};
use firegrid::grid::{validate_network, ModelId, Network, ScenarioSpec, Severity};
use firegrid::model::{build_scenario, BaselineReference, BuildContext, MilpModel};
use firegrid::risk::RiskProfile;
use firegrid::solve::mps::write_mps;
use firegrid::solve::{solve_model, MicrolpBackend, OracleBackend, Solution, SolveRequest, SolveStatus};
use firegrid::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON, CSV or MPS.
    ParseError = 3,
    InvalidInput = 4,
    BuildError = 5,
    SolveError = 6,
    /// The requested value does not exist, e.g. the objective of an
    /// infeasible solve.
    NotAvailable = 7,
    /// A panic was caught at the boundary.
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgSolveStatus {
    Optimal = 0,
    FeasibleGapped = 1,
    Infeasible = 2,
    TimeLimit = 3,
    Error = 4,
}

impl From<SolveStatus> for FgSolveStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => FgSolveStatus::Optimal,
            SolveStatus::FeasibleGapped => FgSolveStatus::FeasibleGapped,
            SolveStatus::Infeasible => FgSolveStatus::Infeasible,
            SolveStatus::TimeLimit => FgSolveStatus::TimeLimit,
            SolveStatus::Error => FgSolveStatus::Error,
        }
    }
}

/// Network with horizon, demands and group fractions.
pub struct FgNetwork(Network);

/// Line/day risk and categories.
pub struct FgRisk(RiskProfile);

/// A built scenario model.
pub struct FgModel(MilpModel);

/// Result of a solve.
pub struct FgSolution(Solution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(FgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Json { .. } | Error::Csv { .. } | Error::Parse { .. } => FgStatus::ParseError,
            Error::Build(_) => FgStatus::BuildError,
            Error::Solver(_) | Error::OracleCapExceeded { .. } => FgStatus::SolveError,
            _ => FgStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure and turns panics into [`FgStatus::Internal`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            FgStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(FgStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    let c = CString::new(s).map_err(|_| Failure(FgStatus::Internal, "string holds a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a network JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_network_from_json(json: *const c_char, out: *mut *mut FgNetwork) -> FgStatus {
    guard(|| {
        let net = Network::from_json_str(text(json, "json")?)?;
        put(out, FgNetwork(net))
    })
}

/// Counts validation errors and optionally returns the full report, one
/// violation per line.
///
/// # Safety
/// `net` must be a live handle; `errors` must be writable; `report` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn fg_network_validate(
    net: *const FgNetwork,
    errors: *mut usize,
    report: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let net = arg(net, "network")?;
        let v = validate_network(&net.0);
        if errors.is_null() {
            return Err(null("errors"));
        }
        *errors = v.iter().filter(|x| x.severity == Severity::Error).count();
        if !report.is_null() {
            let lines: Vec<String> = v.iter().map(ToString::to_string).collect();
            put_string(report, lines.join("\n"))?;
        }
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_network_free(net: *mut FgNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Parses a risk profile JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_risk_from_json(json: *const c_char, out: *mut *mut FgRisk) -> FgStatus {
    guard(|| {
        let risk = RiskProfile::from_json_str(text(json, "json")?)?;
        put(out, FgRisk(risk))
    })
}

/// # Safety
/// `risk` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_risk_free(risk: *mut FgRisk) {
    if !risk.is_null() {
        drop(Box::from_raw(risk));
    }
}

/// Builds the model for `model_id` (e.g. `"E-M8"`) at `budget` million USD.
/// `baseline` is the no-hardening solve needed by load-shed policy models
/// and may be null otherwise. Equity models balance every network group.
///
/// # Safety
/// Handles must be live; `model_id` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_model_build(
    net: *const FgNetwork,
    risk: *const FgRisk,
    model_id: *const c_char,
    budget: f64,
    baseline: *const FgSolution,
    out: *mut *mut FgModel,
) -> FgStatus {
    guard(|| {
        let net = arg(net, "network")?;
        let risk = arg(risk, "risk")?;
        let id: ModelId = text(model_id, "model id")?.parse()?;
        let ctx = BuildContext {
            baseline: baseline
                .as_ref()
                .map(|s| BaselineReference::from_values(&net.0, &s.0.values)),
            equity_groups: None,
        };
        let m = build_scenario(&net.0, &risk.0, &ScenarioSpec::new(id, budget), &ctx)?;
        put(out, FgModel(m))
    })
}

/// Number of binary columns, fixed ones included.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fg_model_num_binaries(model: *const FgModel, out: *mut usize) -> FgStatus {
    guard(|| {
        let m = arg(model, "model")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = m.0.num_binaries();
        Ok(())
    })
}

/// Free-format MPS text of the model.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_model_emit_mps(model: *const FgModel, out: *mut *mut c_char) -> FgStatus {
    guard(|| put_string(out, write_mps(&arg(model, "model")?.0)?))
}

/// Model as JSON, the format the CLI's `solve` reads.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_model_to_json(model: *const FgModel, out: *mut *mut c_char) -> FgStatus {
    guard(|| put_string(out, arg(model, "model")?.0.to_json()))
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_model_free(model: *mut FgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Solves with the built-in branch and bound. An infeasible model is not a
/// failure: the call succeeds and the solution reports its status.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_solve(
    model: *const FgModel,
    mip_gap: f64,
    time_limit_s: f64,
    out: *mut *mut FgSolution,
) -> FgStatus {
    guard(|| {
        let m = arg(model, "model")?;
        if !(mip_gap >= 0.0) || !(time_limit_s > 0.0) {
            return Err(Failure(
                FgStatus::InvalidInput,
                "gap must be >= 0 and the time limit > 0".into(),
            ));
        }
        let mut req = SolveRequest::new(&m.0);
        req.mip_gap = mip_gap;
        req.time_limit = time_limit_s;
        put(out, FgSolution(solve_model(&MicrolpBackend, &req)))
    })
}

/// Solves by enumerating every binary assignment. Fails with
/// [`FgStatus::SolveError`] when the model has more than `cap` free binaries.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_solve_oracle(model: *const FgModel, cap: usize, out: *mut *mut FgSolution) -> FgStatus {
    guard(|| {
        let m = arg(model, "model")?;
        let free = m.0.free_binaries().len();
        if free > cap {
            return Err(Error::OracleCapExceeded { free, cap }.into());
        }
        put(
            out,
            FgSolution(solve_model(&OracleBackend { cap }, &SolveRequest::new(&m.0))),
        )
    })
}

/// Re-solves an equity solution for least total shed with its switching
/// and hardening decisions and the equity level held.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_postprocess_equity(
    model: *const FgModel,
    net: *const FgNetwork,
    sol: *const FgSolution,
    out: *mut *mut FgSolution,
) -> FgStatus {
    guard(|| {
        let p = postprocess_equity(
            &arg(model, "model")?.0,
            &arg(net, "network")?.0,
            &arg(sol, "solution")?.0,
        )?;
        put(out, FgSolution(p.solution))
    })
}

/// # Safety
/// `sol` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_solution_status(sol: *const FgSolution, out: *mut FgSolveStatus) -> FgStatus {
    guard(|| {
        let s = arg(sol, "solution")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = s.0.status.into();
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_solution_objective(sol: *const FgSolution, out: *mut f64) -> FgStatus {
    guard(|| {
        let s = arg(sol, "solution")?;
        let v =
            s.0.objective
                .ok_or_else(|| Failure(FgStatus::NotAvailable, format!("no objective: {}", s.0.status)))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = v;
        Ok(())
    })
}

/// Value of a named variable, e.g. `"z_L1_201"`.
///
/// # Safety
/// `sol` must be a live handle; `name` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_solution_value(sol: *const FgSolution, name: *const c_char, out: *mut f64) -> FgStatus {
    guard(|| {
        let s = arg(sol, "solution")?;
        let name = text(name, "name")?;
        let v =
            s.0.value(name)
                .ok_or_else(|| Failure(FgStatus::NotAvailable, format!("no value for {name}")))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = v;
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_solution_to_json(sol: *const FgSolution, out: *mut *mut c_char) -> FgStatus {
    guard(|| put_string(out, arg(sol, "solution")?.0.to_json_pretty()))
}

/// Parses a solution JSON, e.g. a baseline written by the CLI.
///
/// # Safety
/// `json` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_solution_from_json(json: *const c_char, out: *mut *mut FgSolution) -> FgStatus {
    guard(|| put(out, FgSolution(Solution::from_json_str(text(json, "json")?)?)))
}

/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_solution_free(sol: *mut FgSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Per-group load shed, unfairness, budget and risk-reduction metrics as
/// JSON.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_group_metrics_json(
    net: *const FgNetwork,
    risk: *const FgRisk,
    sol: *const FgSolution,
    out: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let m = compute_group_metrics(&arg(net, "network")?.0, &arg(risk, "risk")?.0, &arg(sol, "solution")?.0);
        let json = serde_json::to_string_pretty(&m).map_err(|e| Failure(FgStatus::Internal, e.to_string()))?;
        put_string(out, json)
    })
}
