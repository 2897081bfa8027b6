//! C ABI for ptkick.
//!
//! Objects are opaque heap handles created by `ptk_*_new` and released by the
//! matching `ptk_*_free`. Every fallible call returns a `PtkStatus`; the
//! message of the last failure on the calling thread is available through
//! `ptk_last_error_message`. Indices follow the library: modes and levels are
//! 1-based.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ptkick::eigen::EigenOptions;
use ptkick::floquet::{detect_pt_breaking, floquet_spectrum, FloquetSpectrum};
use ptkick::kick::{build_kick_matrix, KickMatrix, KickOptions, Route};
use ptkick::model::{make_initial_state, InitialState, QuantumState, SystemParams};
use ptkick::propagator::{kinetic_energy, norm, EnergyOperator, Propagator};
use ptkick::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    Io = 4,
    Eigensolver = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtkRoute {
    Quadrature = 0,
    Fourier = 1,
    Both = 2,
}

impl From<PtkRoute> for Route {
    fn from(r: PtkRoute) -> Self {
        match r {
            PtkRoute::Quadrature => Route::Quadrature,
            PtkRoute::Fourier => Route::Fourier,
            PtkRoute::Both => Route::Both,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtkParams {
    pub length: f64,
    pub wavelength: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub period: f64,
    pub n_basis: usize,
    pub dispersion_coeff: f64,
}

impl From<&PtkParams> for SystemParams {
    fn from(p: &PtkParams) -> Self {
        SystemParams {
            length: p.length,
            wavelength: p.wavelength,
            epsilon: p.epsilon,
            gamma: p.gamma,
            period: p.period,
            n_basis: p.n_basis,
            dispersion_coeff: p.dispersion_coeff,
        }
    }
}

impl From<SystemParams> for PtkParams {
    fn from(p: SystemParams) -> Self {
        PtkParams {
            length: p.length,
            wavelength: p.wavelength,
            epsilon: p.epsilon,
            gamma: p.gamma,
            period: p.period,
            n_basis: p.n_basis,
            dispersion_coeff: p.dispersion_coeff,
        }
    }
}

/// Observables of the current state, taken before the next kick.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PtkObservables {
    pub kick: u64,
    pub time: f64,
    pub norm: f64,
    pub e_kin: f64,
    pub e_kin_normalized: f64,
    pub e_tot_re: f64,
    pub e_tot_im: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PtkBreaking {
    pub broken: bool,
    pub max_im: f64,
    pub gain_count: usize,
    pub loss_count: usize,
    pub levels_considered: usize,
}

pub struct PtkKickMatrix {
    inner: KickMatrix,
}

pub struct PtkSimulation {
    params: SystemParams,
    propagator: Propagator,
    energy: EnergyOperator,
    state: QuantumState,
}

pub struct PtkSpectrum {
    inner: FloquetSpectrum,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PtkStatus, msg: impl Into<String>) -> PtkStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> PtkStatus {
    match e.root() {
        Error::Domain(_) | Error::InvalidInput(_) => PtkStatus::InvalidInput,
        Error::Io(_) => PtkStatus::Io,
        Error::Eigensolver { .. } => PtkStatus::Eigensolver,
        _ => PtkStatus::Numerical,
    }
}

fn from_error(e: Error) -> PtkStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

/// Runs `f`, turning panics into `PtkStatus::Panic`.
fn guard(f: impl FnOnce() -> PtkStatus) -> PtkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PtkStatus::Panic, format!("panic: {msg}"))
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PtkStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ptk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// excluding the NUL, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ptk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// # Safety
/// `out` must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptk_params_default(out: *mut PtkParams) -> PtkStatus {
    non_null!(out);
    *out = SystemParams::default().into();
    PtkStatus::Ok
}

/// # Safety
/// `params` must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptk_params_validate(params: *const PtkParams) -> PtkStatus {
    non_null!(params);
    guard(|| match SystemParams::from(&*params).validate() {
        Ok(()) => PtkStatus::Ok,
        Err(e) => from_error(e),
    })
}

/// Builds the kick matrix. With `PTK_ROUTE_BOTH` the routes are
/// cross-checked and a disagreement is reported as `PTK_STATUS_NUMERICAL`.
///
/// # Safety
/// `params` and `out` must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ptk_kick_matrix_new(
    params: *const PtkParams,
    route: PtkRoute,
    out: *mut *mut PtkKickMatrix,
) -> PtkStatus {
    non_null!(params, out);
    *out = ptr::null_mut();
    guard(|| {
        let p = SystemParams::from(&*params);
        match build_kick_matrix(&p, route.into(), &KickOptions::default()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PtkKickMatrix { inner }));
                PtkStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `m` must be null or a handle from `ptk_kick_matrix_new`.
#[no_mangle]
pub unsafe extern "C" fn ptk_kick_matrix_dim(m: *const PtkKickMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.dim())
}

/// Entry V(n, l), 1-based.
///
/// # Safety
/// `m`, `re` and `im` must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ptk_kick_matrix_entry(
    m: *const PtkKickMatrix,
    n: usize,
    l: usize,
    re: *mut f64,
    im: *mut f64,
) -> PtkStatus {
    non_null!(m, re, im);
    match (*m).inner.entry(n, l) {
        Some(z) => {
            *re = z.re;
            *im = z.im;
            PtkStatus::Ok
        }
        None => fail(PtkStatus::OutOfRange, format!("entry ({n}, {l}) outside 1..={}", (*m).inner.dim())),
    }
}

/// # Safety
/// `m` must be null or a handle from `ptk_kick_matrix_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ptk_kick_matrix_free(m: *mut PtkKickMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Starts a trajectory in box mode `initial_mode` (1-based).
///
/// # Safety
/// `params`, `kick` and `out` must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ptk_simulation_new(
    params: *const PtkParams,
    kick: *const PtkKickMatrix,
    initial_mode: usize,
    out: *mut *mut PtkSimulation,
) -> PtkStatus {
    non_null!(params, kick, out);
    *out = ptr::null_mut();
    guard(|| {
        let p = SystemParams::from(&*params);
        let build = || -> Result<PtkSimulation, Error> {
            let state = make_initial_state(&InitialState::SingleMode(initial_mode), &p)?;
            let propagator = Propagator::new(&(*kick).inner, &p)?;
            let energy = EnergyOperator::new(&p)?;
            Ok(PtkSimulation { params: p, propagator, energy, state })
        };
        match build() {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(sim));
                PtkStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Applies `n_kicks` periods. On overflow the state stays at the last
/// finite kick and `PTK_STATUS_NUMERICAL` is returned.
///
/// # Safety
/// `sim` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ptk_simulation_step(sim: *mut PtkSimulation, n_kicks: u64) -> PtkStatus {
    non_null!(sim);
    let sim = &mut *sim;
    guard(|| {
        for _ in 0..n_kicks {
            match sim.propagator.apply(&sim.state) {
                Ok(next) => sim.state = next,
                Err(e) => return from_error(e),
            }
        }
        PtkStatus::Ok
    })
}

/// # Safety
/// `sim` and `out` must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ptk_simulation_observables(sim: *const PtkSimulation, out: *mut PtkObservables) -> PtkStatus {
    non_null!(sim, out);
    guard(|| {
        let sim = &*sim;
        let n = norm(&sim.state);
        let e_kin = kinetic_energy(&sim.state, &sim.params);
        let e_tot = sim.energy.expectation(&sim.state);
        *out = PtkObservables {
            kick: sim.state.kick_count(),
            time: sim.state.time(&sim.params),
            norm: n,
            e_kin,
            e_kin_normalized: e_kin / n,
            e_tot_re: e_tot.value.re,
            e_tot_im: e_tot.value.im,
        };
        PtkStatus::Ok
    })
}

/// Copies the amplitudes into `re`/`im`, each of length `len` = N.
///
/// # Safety
/// `re` and `im` must be null or point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ptk_simulation_amplitudes(
    sim: *const PtkSimulation,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> PtkStatus {
    non_null!(sim, re, im);
    let a = (*sim).state.amplitudes();
    if len != a.len() {
        return fail(PtkStatus::OutOfRange, format!("buffer length {len}, state has {}", a.len()));
    }
    for (i, z) in a.iter().enumerate() {
        *re.add(i) = z.re;
        *im.add(i) = z.im;
    }
    PtkStatus::Ok
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ptk_simulation_free(sim: *mut PtkSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Diagonalizes the Floquet matrix of `kick` at `params`.
///
/// # Safety
/// `params`, `kick` and `out` must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ptk_spectrum_new(
    params: *const PtkParams,
    kick: *const PtkKickMatrix,
    out: *mut *mut PtkSpectrum,
) -> PtkStatus {
    non_null!(params, kick, out);
    *out = ptr::null_mut();
    guard(|| {
        let p = SystemParams::from(&*params);
        match floquet_spectrum(&p, &(*kick).inner, &EigenOptions::default()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PtkSpectrum { inner }));
                PtkStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `s` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ptk_spectrum_len(s: *const PtkSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.inner.len())
}

/// Eigenvalue λ and quasienergy φ of level `index` (1-based, sorted by
/// Re φ then Im φ). Either output pair may be null.
///
/// # Safety
/// Non-null output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ptk_spectrum_level(
    s: *const PtkSpectrum,
    index: usize,
    lambda_re: *mut f64,
    lambda_im: *mut f64,
    phi_re: *mut f64,
    phi_im: *mut f64,
) -> PtkStatus {
    non_null!(s);
    let s = &(*s).inner;
    if index == 0 || index > s.len() {
        return fail(PtkStatus::OutOfRange, format!("level {index} outside 1..={}", s.len()));
    }
    let (l, p) = (s.eigenvalues()[index - 1], s.quasienergies()[index - 1]);
    for (dst, v) in [(lambda_re, l.re), (lambda_im, l.im), (phi_re, p.re), (phi_im, p.im)] {
        if !dst.is_null() {
            *dst = v;
        }
    }
    PtkStatus::Ok
}

/// # Safety
/// `s` and `out` must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ptk_spectrum_breaking(s: *const PtkSpectrum, tol: f64, out: *mut PtkBreaking) -> PtkStatus {
    non_null!(s, out);
    match detect_pt_breaking(&(*s).inner, tol) {
        Ok(b) => {
            *out = PtkBreaking {
                broken: b.broken,
                max_im: b.max_im,
                gain_count: b.gain_count,
                loss_count: b.loss_count,
                levels_considered: b.levels_considered,
            };
            PtkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ptk_spectrum_free(s: *mut PtkSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
