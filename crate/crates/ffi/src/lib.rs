//! C ABI over `ris-bsum`.
//!
//! Channels and solutions are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`RisStatus`]; on failure [`ris_last_error`] describes what went wrong
//! on the calling thread. Complex arrays are column-major [`RisComplex`]
//! buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ris_bsum::{
    bsum_solve, generate_channels, CMatrix, ChannelSet, Error, FadingConfig, Geometry, NoisePowers, PowerBudget,
    Precoder, ReflectCoeffs, Solution, SolverConfig, C64,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    NotPositiveDefinite = 4,
    NonFinite = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisComplex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for RisComplex {
    fn from(c: C64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<RisComplex> for C64 {
    fn from(c: RisComplex) -> Self {
        C64::new(c.re, c.im)
    }
}

/// Solver knobs; obtain defaults from [`ris_solver_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RisSolverOptions {
    /// Stop once the sum-rate change drops below this.
    pub tol: f64,
    pub max_iters: u32,
    /// Penalty growth factor per iteration, at least 1.
    pub mu_growth: f64,
    /// Seed of the random initial reflection phases.
    pub init_seed: u64,
}

/// Opaque channel realization.
pub struct RisChannels(ChannelSet);

/// Opaque solver result.
pub struct RisSolution(Solution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg).unwrap_or_else(|e| {
        let end = e.nul_position();
        CString::new(&e.into_vec()[..end]).expect("truncated at the first nul")
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> RisStatus {
    match e {
        Error::Dimension(_) => RisStatus::DimensionMismatch,
        Error::NotPositiveDefinite(_) => RisStatus::NotPositiveDefinite,
        Error::NonFinite { .. } | Error::NonPositiveWeight { .. } => RisStatus::NonFinite,
        _ => RisStatus::InvalidInput,
    }
}

/// Runs `body`, converting errors and panics into a status plus message.
fn guard(body: impl FnOnce() -> Result<(), (RisStatus, String)>) -> RisStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RisStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RisStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (RisStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RisStatus, String) {
    (RisStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_matrix(data: *const RisComplex, rows: usize, cols: usize, what: &str) -> Result<CMatrix, (RisStatus, String)> {
    if data.is_null() {
        return Err(null(what));
    }
    let s = slice::from_raw_parts(data, rows * cols);
    Ok(CMatrix::from_iterator(rows, cols, s.iter().map(|&c| C64::from(c))))
}

unsafe fn channels<'a>(ch: *const RisChannels) -> Result<&'a ChannelSet, (RisStatus, String)> {
    ch.as_ref().map(|c| &c.0).ok_or_else(|| null("channels"))
}

unsafe fn solution<'a>(sol: *const RisSolution) -> Result<&'a Solution, (RisStatus, String)> {
    sol.as_ref().map(|s| &s.0).ok_or_else(|| null("solution"))
}

unsafe fn copy_out(values: &[C64], out: *mut RisComplex, len: usize) -> Result<(), (RisStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < values.len() {
        return Err((RisStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", values.len())));
    }
    let dst = slice::from_raw_parts_mut(out, values.len());
    for (d, s) in dst.iter_mut().zip(values) {
        *d = (*s).into();
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ris_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ris_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn ris_dbm_to_watts(dbm: f64) -> f64 {
    ris_bsum::dbm_to_watts(dbm)
}

#[no_mangle]
pub extern "C" fn ris_solver_options_default() -> RisSolverOptions {
    let d = SolverConfig::default();
    RisSolverOptions { tol: d.tol, max_iters: d.max_iters as u32, mu_growth: d.mu_growth, init_seed: d.init_seed }
}

/// Draws a seeded channel realization with the default geometry (BS at the
/// origin, RIS 100 m away, users on an 8 m disk around the RIS) and
/// Rician factor `rician_factor`. Noise powers are in dBm.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ris_channels_generate(
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
    rician_factor: f64,
    noise_user_dbm: f64,
    noise_ris_dbm: f64,
    out: *mut *mut RisChannels,
) -> RisStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if m == 0 || n == 0 || k == 0 {
            return Err((RisStatus::InvalidInput, format!("sizes must be positive, got M={m} N={n} K={k}")));
        }
        let geometry = Geometry { num_users: k, ..Default::default() };
        let fading = FadingConfig { seed, rician_factor, ..Default::default() };
        let noise =
            NoisePowers { user_w: ris_bsum::dbm_to_watts(noise_user_dbm), ris_w: ris_bsum::dbm_to_watts(noise_ris_dbm) };
        let ch = generate_channels(&geometry, &fading, (m, n), noise).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RisChannels(ch)));
        Ok(())
    })
}

/// Builds channels from caller data: `bs_user` is M×K, `ris_user` N×K,
/// `bs_ris` N×M (all column-major), `noise_user` has K entries. Powers in
/// watts.
///
/// # Safety
/// Each array must hold the stated number of elements; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ris_channels_from_arrays(
    m: usize,
    n: usize,
    k: usize,
    bs_user: *const RisComplex,
    ris_user: *const RisComplex,
    bs_ris: *const RisComplex,
    noise_ris: f64,
    noise_user: *const f64,
    out: *mut *mut RisChannels,
) -> RisStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if noise_user.is_null() {
            return Err(null("noise_user"));
        }
        let ch = ChannelSet::new(
            read_matrix(bs_user, m, k, "bs_user")?,
            read_matrix(ris_user, n, k, "ris_user")?,
            read_matrix(bs_ris, n, m, "bs_ris")?,
            noise_ris,
            slice::from_raw_parts(noise_user, k).to_vec(),
        )
        .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RisChannels(ch)));
        Ok(())
    })
}

/// # Safety
/// `ch` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ris_channels_free(ch: *mut RisChannels) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// # Safety
/// `ch` must be a live handle; the size pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ris_channels_dims(ch: *const RisChannels, m: *mut usize, n: *mut usize, k: *mut usize) -> RisStatus {
    guard(|| {
        let ch = channels(ch)?;
        for (dst, v) in [(m, ch.num_antennas()), (n, ch.num_elements()), (k, ch.num_users())] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}

/// Sum rate in bits/s/Hz of precoder `w` (M×K, column-major) and reflection
/// coefficients `phi` (N entries).
///
/// # Safety
/// `ch` must be live and the arrays sized to its dimensions.
#[no_mangle]
pub unsafe extern "C" fn ris_sum_rate(
    ch: *const RisChannels,
    w: *const RisComplex,
    phi: *const RisComplex,
    out: *mut f64,
) -> RisStatus {
    guard(|| {
        let ch = channels(ch)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let w = Precoder::new(read_matrix(w, ch.num_antennas(), ch.num_users(), "w")?);
        let phi = ReflectCoeffs::new(read_matrix(phi, ch.num_elements(), 1, "phi")?.column(0).into_owned());
        *out = ris_bsum::sum_rate(ch, &w, &phi).map_err(lib_err)?;
        Ok(())
    })
}

/// Runs the solver. `p_bs`/`p_ris` are in watts, `eta` has one amplitude cap
/// per RIS element, `per_antenna` switches the BS constraint to per-antenna
/// power `p_bs / M`. `options` may be null for defaults.
///
/// # Safety
/// `ch` must be live, `eta` must hold N values, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ris_solve(
    ch: *const RisChannels,
    p_bs: f64,
    p_ris: f64,
    eta: *const f64,
    per_antenna: bool,
    options: *const RisSolverOptions,
    out: *mut *mut RisSolution,
) -> RisStatus {
    guard(|| {
        let ch = channels(ch)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if eta.is_null() {
            return Err(null("eta"));
        }
        let eta = slice::from_raw_parts(eta, ch.num_elements()).to_vec();
        let budget = PowerBudget::new(p_bs, p_ris, eta, per_antenna).map_err(lib_err)?;
        let mut cfg = SolverConfig::default();
        if let Some(o) = options.as_ref() {
            cfg.tol = o.tol;
            cfg.max_iters = o.max_iters as usize;
            cfg.mu_growth = o.mu_growth;
            cfg.init_seed = o.init_seed;
        }
        let sol = bsum_solve(ch, &budget, &cfg, None).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RisSolution(sol)));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ris_solution_free(sol: *mut RisSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Sum rate of the feasible solution, or NaN for a null handle.
///
/// # Safety
/// `sol` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ris_solution_sum_rate(sol: *const RisSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.sum_rate)
}

/// Sum rate at the solver's starting point, or NaN for a null handle.
///
/// # Safety
/// `sol` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ris_solution_initial_sum_rate(sol: *const RisSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.initial_sum_rate)
}

/// # Safety
/// `sol` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ris_solution_iterations(sol: *const RisSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.iterations)
}

/// # Safety
/// `sol` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ris_solution_converged(sol: *const RisSolution) -> bool {
    sol.as_ref().is_some_and(|s| s.0.converged)
}

/// Largest relative constraint violation of the returned point.
///
/// # Safety
/// `sol` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ris_solution_max_residual(sol: *const RisSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.residuals.max_relative())
}

/// Copies the M×K precoder, column-major, into `out` (capacity `len`).
///
/// # Safety
/// `sol` must be live and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ris_solution_precoder(sol: *const RisSolution, out: *mut RisComplex, len: usize) -> RisStatus {
    guard(|| copy_out(solution(sol)?.w.as_matrix().as_slice(), out, len))
}

/// Copies the N reflection coefficients into `out` (capacity `len`).
///
/// # Safety
/// `sol` must be live and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ris_solution_reflect(sol: *const RisSolution, out: *mut RisComplex, len: usize) -> RisStatus {
    guard(|| copy_out(solution(sol)?.phi.as_vector().as_slice(), out, len))
}
