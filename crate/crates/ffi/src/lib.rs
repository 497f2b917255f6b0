//! C ABI over the laboratory.
//!
//! Every function returns an [`EpdStatus`]; on failure a message for the
//! calling thread is available from [`epd_last_error_message`]. Kernels and
//! simulations are opaque handles released with their `_free` function.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use epdiff_blowup::cli::{simulate, MomentumProfile, RunConfig, Simulation};
use epdiff_blowup::criteria::comparison_constant;
use epdiff_blowup::error::Error;
use epdiff_blowup::hypergeom::{f21, HypergeomParams};
use epdiff_blowup::kernels::{greens_apply, KernelSpec, RadialGrid};
use epdiff_blowup::solver::{SummationPath, Termination};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpdStatus {
    Ok = 0,
    /// Validation failure (bad parameter, config, length).
    InvalidArgument = 1,
    /// Quadrature non-convergence or step underflow.
    NumericalFailure = 2,
    /// A state or criterion invariant was violated.
    InvariantViolation = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpdPath {
    Naive = 0,
    Fast = 1,
    Both = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpdTermination {
    Threshold = 0,
    TimeLimit = 1,
    StepUnderflow = 2,
}

/// Run parameters; `dt` or `t_max` ≤ 0 selects the automatic value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpdSimParams {
    pub n: u32,
    pub k: u32,
    pub points: usize,
    pub r_max: f64,
    pub dt: f64,
    pub t_max: f64,
    pub dt_min: f64,
    pub rho_threshold: f64,
    /// ω₀ = -amplitude·r·e^{-r²}.
    pub amplitude: f64,
    pub path: EpdPath,
    pub record_stride: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpdReport {
    pub blew_up: bool,
    pub has_t_est: bool,
    pub t_est: f64,
    pub r_star: f64,
    pub c_est: f64,
    pub criteria_passed: bool,
    pub energy_drift: f64,
    pub termination: EpdTermination,
    pub steps: usize,
    pub rejected_steps: usize,
    pub t_final: f64,
}

/// Opaque Green-kernel handle.
pub struct EpdKernel {
    spec: KernelSpec,
}

/// Opaque handle to a finished run.
pub struct EpdSimulation {
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> EpdStatus {
    match e.exit_code() {
        2 => EpdStatus::NumericalFailure,
        3 => EpdStatus::InvariantViolation,
        _ => EpdStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (EpdStatus, String)>) -> EpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EpdStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EpdStatus::Panic
        }
    }
}

fn lift(e: Error) -> (EpdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EpdStatus, String) {
    (EpdStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn epd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Gauss ₂F₁(a, b; c; z).
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn epd_f21(a: f64, b: f64, c: f64, z: f64, out: *mut f64) -> EpdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = HypergeomParams::new(a, b, c).and_then(|p| f21(p, z)).map_err(lift)?;
        *out = v;
        Ok(())
    })
}

/// Kernel of (-Δ)^k on radial vector fields in R^n.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn epd_kernel_new(k: u32, n: u32, out: *mut *mut EpdKernel) -> EpdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let spec = KernelSpec::new(k, n).map_err(lift)?;
        *out = Box::into_raw(Box::new(EpdKernel { spec }));
        Ok(())
    })
}

/// # Safety
/// `kernel` must come from [`epd_kernel_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn epd_kernel_free(kernel: *mut EpdKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// δ_k(r, s) for 0 ≤ r ≤ s.
///
/// # Safety
/// `kernel` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn epd_kernel_delta(kernel: *const EpdKernel, r: f64, s: f64, out: *mut f64) -> EpdStatus {
    guard(|| {
        let kernel = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = kernel.spec.delta(r, s).map_err(lift)?;
        Ok(())
    })
}

/// C_est(k, n), the constant of the comparison equation.
///
/// # Safety
/// `kernel` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn epd_kernel_comparison_constant(kernel: *const EpdKernel, out: *mut f64) -> EpdStatus {
    guard(|| {
        let kernel = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = comparison_constant(&kernel.spec).map_err(lift)?;
        Ok(())
    })
}

/// u = G ω on the uniform grid r_i = i·r_max/(len-1).
///
/// # Safety
/// `omega` must point to `len` readable values, `out` to `len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn epd_greens_apply_uniform(
    kernel: *const EpdKernel,
    omega: *const f64,
    len: usize,
    r_max: f64,
    out: *mut f64,
) -> EpdStatus {
    guard(|| {
        let kernel = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if omega.is_null() {
            return Err(null("omega"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = RadialGrid::uniform(len, r_max).map_err(lift)?;
        let omega = std::slice::from_raw_parts(omega, len);
        let u = greens_apply(&kernel.spec, omega, &grid).map_err(lift)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&u);
        Ok(())
    })
}

/// Defaults for a pair: 1024 points, r_max 8, automatic dt and t_max.
#[no_mangle]
pub extern "C" fn epd_sim_params_default(n: u32, k: u32) -> EpdSimParams {
    let d = RunConfig::with_pair(n, k);
    EpdSimParams {
        n,
        k,
        points: d.points,
        r_max: d.r_max,
        dt: 0.0,
        t_max: 0.0,
        dt_min: d.dt_min,
        rho_threshold: d.rho_threshold,
        amplitude: d.amplitude,
        path: EpdPath::Fast,
        record_stride: d.record_stride,
    }
}

fn run_config(p: &EpdSimParams) -> RunConfig {
    RunConfig {
        points: p.points,
        r_max: p.r_max,
        dt: (p.dt > 0.0).then_some(p.dt),
        t_max: (p.t_max > 0.0).then_some(p.t_max),
        dt_min: p.dt_min,
        rho_threshold: p.rho_threshold,
        profile: MomentumProfile::GaussianOdd,
        amplitude: p.amplitude,
        path: match p.path {
            EpdPath::Naive => SummationPath::Naive,
            EpdPath::Fast => SummationPath::Fast,
            EpdPath::Both => SummationPath::Both,
        },
        record_stride: p.record_stride,
        ..RunConfig::with_pair(p.n, p.k)
    }
}

/// Integrates one run. A step underflow still yields a handle (its report
/// says so); only validation and hard numerical errors fail.
///
/// # Safety
/// `params` must be readable and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn epd_simulation_run(params: *const EpdSimParams, out: *mut *mut EpdSimulation) -> EpdStatus {
    guard(|| {
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sim = simulate(&run_config(params)).map_err(lift)?;
        *out = Box::into_raw(Box::new(EpdSimulation { sim }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`epd_simulation_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn epd_simulation_free(sim: *mut EpdSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `sim` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn epd_simulation_report(sim: *const EpdSimulation, out: *mut EpdReport) -> EpdStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = &sim.sim.summary;
        *out = EpdReport {
            blew_up: s.blew_up,
            has_t_est: s.t_est.is_some(),
            t_est: s.t_est.unwrap_or(f64::NAN),
            r_star: s.r_star,
            c_est: s.c_est,
            criteria_passed: s.criteria_passed,
            energy_drift: s.energy_drift,
            termination: match s.termination {
                Termination::Threshold => EpdTermination::Threshold,
                Termination::TimeLimit => EpdTermination::TimeLimit,
                Termination::StepUnderflow { .. } => EpdTermination::StepUnderflow,
            },
            steps: s.steps,
            rejected_steps: s.rejected_steps,
            t_final: s.t_final,
        };
        Ok(())
    })
}

/// Number of accepted states in the step history (including t = 0).
///
/// # Safety
/// `sim` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn epd_simulation_history_len(sim: *const EpdSimulation, out: *mut usize) -> EpdStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = sim.sim.run.report.history.len();
        Ok(())
    })
}

/// Copies (t, min ρ, min slope) of the step history; each buffer must hold
/// `cap` ≥ history length values. Null buffers are skipped.
///
/// # Safety
/// `sim` must be a live handle; non-null buffers must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn epd_simulation_history(
    sim: *const EpdSimulation,
    t: *mut f64,
    min_rho: *mut f64,
    min_slope: *mut f64,
    cap: usize,
) -> EpdStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        let hist = &sim.sim.run.report.history;
        if cap < hist.len() {
            return Err((EpdStatus::InvalidArgument, format!("capacity {cap} < history length {}", hist.len())));
        }
        for (buf, get) in [
            (t, (|h| h.t) as fn(&epdiff_blowup::solver::StepRecord) -> f64),
            (min_rho, |h| h.min_rho),
            (min_slope, |h| h.min_slope),
        ] {
            if !buf.is_null() {
                let dst = std::slice::from_raw_parts_mut(buf, hist.len());
                for (d, h) in dst.iter_mut().zip(hist) {
                    *d = get(h);
                }
            }
        }
        Ok(())
    })
}
