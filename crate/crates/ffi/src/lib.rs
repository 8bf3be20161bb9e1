//! C ABI for the penalmhd simulator.
//!
//! Simulations are opaque `PmhdSim` handles created from configuration text
//! or a file and released with `pmhd_free`. Every fallible call returns a
//! `PmhdStatus`; on failure `pmhd_last_error` describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use penalmhd::config::SimConfig;
use penalmhd::driver::{SimState, Simulation};
use penalmhd::energy::{kinetic_energy, magnetic_energy, EnergyLedger};
use penalmhd::rigid::distance_to_boundary;
use penalmhd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmhdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Solver = 4,
    Io = 5,
    BodyLost = 6,
    /// `T` reached or the body hit the clearance threshold; no step taken.
    Finished = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmhdField {
    Density = 0,
    Velocity = 1,
    Magnetic = 2,
    Indicator = 3,
}

/// Energy bookkeeping of the latest step (step 0: initial energies only).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PmhdEnergies {
    pub step: u64,
    pub time: f64,
    pub kinetic: f64,
    pub magnetic: f64,
    pub dissipation: f64,
    pub penalty_work: f64,
    pub source_work: f64,
    pub mixed_residual: f64,
    /// 1 if the energy inequality held for the latest step.
    pub inequality_passed: i32,
}

/// Opaque simulation handle.
pub struct PmhdSim {
    sim: Simulation,
    state: SimState,
    ledger: EnergyLedger,
    passed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PmhdStatus {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Shape { .. } | Error::OutOfRange { .. } => PmhdStatus::Config,
        Error::Solver { .. } | Error::Picard { .. } | Error::MaximumPrinciple { .. } | Error::NonFinite(_) => PmhdStatus::Solver,
        Error::BodyLost => PmhdStatus::BodyLost,
        Error::Io(_) => PmhdStatus::Io,
        Error::StepFailed { source, .. } => status_of(source),
    }
}

fn fail(e: Error) -> PmhdStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn guard(f: impl FnOnce() -> PmhdStatus) -> PmhdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            PmhdStatus::Internal
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, PmhdStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(PmhdStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        PmhdStatus::InvalidUtf8
    })
}

fn build(cfg: SimConfig) -> Result<Box<PmhdSim>, Error> {
    let sim = Simulation::new(cfg)?;
    let state = sim.initial_state()?;
    let mu = sim.config().physics.mu;
    let ledger = EnergyLedger::initial(kinetic_energy(&state.rho, &state.u), magnetic_energy(&state.b, mu));
    Ok(Box::new(PmhdSim { sim, state, ledger, passed: true }))
}

unsafe fn create(out: *mut *mut PmhdSim, make: impl FnOnce() -> Result<SimConfig, Error>) -> PmhdStatus {
    if out.is_null() {
        set_error("null output handle");
        return PmhdStatus::NullPointer;
    }
    *out = std::ptr::null_mut();
    match make().and_then(build) {
        Ok(b) => {
            *out = Box::into_raw(b);
            PmhdStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Creates a simulation from configuration text (`key = value` lines).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmhd_create_from_text(text: *const c_char, out: *mut *mut PmhdSim) -> PmhdStatus {
    guard(|| match read_str(text) {
        Ok(t) => create(out, || SimConfig::parse(t)),
        Err(s) => s,
    })
}

/// Creates a simulation from a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmhd_create_from_file(path: *const c_char, out: *mut *mut PmhdSim) -> PmhdStatus {
    guard(|| match read_str(path) {
        Ok(p) => create(out, || SimConfig::load(Path::new(p))),
        Err(s) => s,
    })
}

fn finished(h: &PmhdSim) -> bool {
    let cfg = h.sim.config();
    h.state.step >= cfg.steps()
        || h.state.body.as_ref().is_some_and(|b| distance_to_boundary(b, h.sim.grid()) <= cfg.stop_clearance)
}

fn advance(h: &mut PmhdSim) -> PmhdStatus {
    if finished(h) {
        return PmhdStatus::Finished;
    }
    match h.sim.step(&h.state) {
        Ok(o) => {
            if o.state.body.as_ref().is_some_and(|b| distance_to_boundary(b, h.sim.grid()) < 0.0) {
                return PmhdStatus::Finished;
            }
            h.ledger = o.ledger;
            h.passed = o.inequality.passed;
            h.state = o.state;
            PmhdStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Advances one step. Returns `Finished` without stepping at the end.
///
/// # Safety
/// `sim` must be a handle from `pmhd_create_*` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pmhd_step(sim: *mut PmhdSim) -> PmhdStatus {
    guard(|| match sim.as_mut() {
        Some(h) => advance(h),
        None => {
            set_error("null simulation handle");
            PmhdStatus::NullPointer
        }
    })
}

/// Steps until the run ends; `steps` (may be null) receives the count taken.
///
/// # Safety
/// `sim` must be a live handle; `steps` null or valid.
#[no_mangle]
pub unsafe extern "C" fn pmhd_run(sim: *mut PmhdSim, steps: *mut u64) -> PmhdStatus {
    guard(|| {
        let Some(h) = sim.as_mut() else {
            set_error("null simulation handle");
            return PmhdStatus::NullPointer;
        };
        let mut count = 0u64;
        let status = loop {
            match advance(h) {
                PmhdStatus::Ok => count += 1,
                PmhdStatus::Finished => break PmhdStatus::Ok,
                other => break other,
            }
        };
        if let Some(s) = steps.as_mut() {
            *s = count;
        }
        status
    })
}

/// Energies of the current state.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmhd_energies(sim: *const PmhdSim, out: *mut PmhdEnergies) -> PmhdStatus {
    guard(|| {
        let (Some(h), Some(o)) = (sim.as_ref(), out.as_mut()) else {
            set_error("null argument");
            return PmhdStatus::NullPointer;
        };
        let l = &h.ledger;
        *o = PmhdEnergies {
            step: h.state.step as u64,
            time: h.state.time,
            kinetic: l.kinetic,
            magnetic: l.magnetic,
            dissipation: l.dissipation(),
            penalty_work: l.penalty_work,
            source_work: l.source_work,
            mixed_residual: l.mixed_residual,
            inequality_passed: i32::from(h.passed),
        };
        PmhdStatus::Ok
    })
}

/// Cells per side of the grid (0 for a null handle).
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmhd_grid_cells(sim: *const PmhdSim) -> usize {
    sim.as_ref().map_or(0, |h| h.sim.grid().n())
}

/// Copies a field into `buf`. Scalars take `n³` values, vectors `3n³`
/// stored component by component; cell `(i, j, k)` sits at `(k n + j) n + i`.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pmhd_copy_field(sim: *const PmhdSim, field: PmhdField, buf: *mut f64, len: usize) -> PmhdStatus {
    guard(|| {
        let Some(h) = sim.as_ref() else {
            set_error("null simulation handle");
            return PmhdStatus::NullPointer;
        };
        let data = match field {
            PmhdField::Density => h.state.rho.values.clone(),
            PmhdField::Indicator => h.state.chi.values.clone(),
            PmhdField::Velocity => h.state.u.to_flat(),
            PmhdField::Magnetic => h.state.b.to_flat(),
        };
        if buf.is_null() {
            set_error("null buffer");
            return PmhdStatus::NullPointer;
        }
        if len < data.len() {
            set_error(&format!("buffer holds {len} values, field needs {}", data.len()));
            return PmhdStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        PmhdStatus::Ok
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pmhd_free(sim: *mut PmhdSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Message of the last failure on this thread; valid until the next call
/// into the library from the same thread.
#[no_mangle]
pub extern "C" fn pmhd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pmhd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
