//! C interface to the `eeshare` allocators.
//!
//! Every object crosses the boundary as an opaque pointer created by an
//! `eeshare_*_new` or solver call and released with the matching `_free`.
//! Fallible calls return an [`EeStatus`]; on failure a description can be
//! fetched with [`eeshare_last_error`] from the same thread.
//!
//! Complex arrays are interleaved `(re, im)` doubles. Matrices are row-major,
//! so an `r x c` matrix occupies `2 r c` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eeshare::channel::{generate_drop, DropConfig, Scenario};
use eeshare::dinkelbach::SurrogateOptions;
use eeshare::linalg::{CMat, CVec};
use eeshare::model::{ChannelSet, Objective, SystemParams};
use eeshare::overlay::{solve_overlay_full, solve_overlay_rank1, OverlaySolution};
use eeshare::underlay::{allocate_underlay, CaseTag, UnderlaySolution};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The rate targets cannot be met.
    Infeasible = 3,
    SolverFailure = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EeObjective {
    EnergyEfficiency = 0,
    Rate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EeOverlayAlgorithm {
    Full = 0,
    Rank1 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EeScenario {
    Underlay = 0,
    Overlay = 1,
}

/// Which matrix of a solution to copy out.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EeMatrix {
    /// Underlay: covariance of the non-decodable secondary stream.
    K21 = 0,
    /// Underlay: covariance of the stream the primary receiver decodes.
    K22 = 1,
    /// Overlay: relay matrix `A`.
    RelayA = 2,
    /// Overlay: `X = A M A^H`.
    RelayX = 3,
    /// Overlay: secondary data covariance `B`.
    DataB = 4,
}

/// System parameters with scalar fields in SI units.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EeParams {
    pub n_t1: usize,
    pub n_t2: usize,
    pub n_r: usize,
    pub p1_w: f64,
    pub p2_w: f64,
    pub noise_power_w: f64,
    pub bandwidth_hz: f64,
    pub alpha: f64,
    pub p_c_w: f64,
    pub r1_star_bps: f64,
    pub r2_star_bps: f64,
}

impl From<&EeParams> for SystemParams {
    fn from(p: &EeParams) -> Self {
        SystemParams {
            n_t1: p.n_t1,
            n_t2: p.n_t2,
            n_r: p.n_r,
            p1: p.p1_w,
            p2: p.p2_w,
            noise_power: p.noise_power_w,
            bandwidth: p.bandwidth_hz,
            alpha: p.alpha,
            p_c: p.p_c_w,
            r1_star: p.r1_star_bps,
            r2_star: p.r2_star_bps,
        }
    }
}

/// Opaque channel realization.
pub struct EeChannels(ChannelSet);

/// Opaque allocation result.
pub enum EeSolution {
    Underlay(UnderlaySolution),
    Overlay(OverlaySolution),
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

struct Failure(EeStatus, String);

fn fail<T>(status: EeStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            EeStatus::Internal
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass pointers obtained from this library or valid C structs.
    unsafe { p.as_ref() }.ok_or_else(|| Failure(EeStatus::NullPointer, format!("{what} is null")))
}

unsafe fn read_complex(
    data: *const f64,
    len: usize,
    what: &str,
) -> Result<Vec<Complex64>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if data.is_null() {
        return fail(EeStatus::NullPointer, format!("{what} is null"));
    }
    // SAFETY: the caller guarantees `2 * len` readable doubles.
    let raw = unsafe { std::slice::from_raw_parts(data, 2 * len) };
    Ok(raw
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect())
}

unsafe fn read_vec(data: *const f64, n: usize, what: &str) -> Result<CVec, Failure> {
    Ok(CVec::from_vec(unsafe { read_complex(data, n, what)? }))
}

unsafe fn read_mat(
    data: *const f64,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<CMat, Failure> {
    let v = unsafe { read_complex(data, rows * cols, what)? };
    Ok(CMat::from_row_slice(rows, cols, &v))
}

fn objective(o: EeObjective) -> Objective {
    match o {
        EeObjective::EnergyEfficiency => Objective::EnergyEfficiency,
        EeObjective::Rate => Objective::Rate,
    }
}

/// Static version string, e.g. `"0.1.0"`.
#[no_mangle]
pub extern "C" fn eeshare_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or 0
/// if there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn eeshare_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: `buf` has room for `len` bytes and `n < len`.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Builds a channel set from caller arrays. Dimensions come from `params`:
/// `h11` has `n_t1` entries, `h22` is `n_r x n_t2`, `h12` is `n_r x n_t1`,
/// `h21` has `n_t2` entries and `ht` is `n_t2 x n_t1`. `ht` may be null for
/// underlay use, in which case it is set to zero.
///
/// # Safety
/// Each non-null array must hold the stated number of complex entries.
#[no_mangle]
pub unsafe extern "C" fn eeshare_channels_new(
    params: *const EeParams,
    h11: *const f64,
    h22: *const f64,
    h12: *const f64,
    h21: *const f64,
    ht: *const f64,
    out: *mut *mut EeChannels,
) -> EeStatus {
    guard(|| unsafe {
        if out.is_null() {
            return fail(EeStatus::NullPointer, "out is null");
        }
        let p = as_ref(params, "params")?;
        let ht = if ht.is_null() {
            CMat::zeros(p.n_t2, p.n_t1)
        } else {
            read_mat(ht, p.n_t2, p.n_t1, "ht")?
        };
        let ch = ChannelSet {
            h11: read_vec(h11, p.n_t1, "h11")?,
            h22: read_mat(h22, p.n_r, p.n_t2, "h22")?,
            h12: read_mat(h12, p.n_r, p.n_t1, "h12")?,
            h21: read_vec(h21, p.n_t2, "h21")?,
            ht,
        };
        let sp = SystemParams::from(p);
        if let Err(e) = sp.validate().and_then(|()| ch.validate(&sp)) {
            return fail(EeStatus::InvalidArgument, e.to_string());
        }
        *out = Box::into_raw(Box::new(EeChannels(ch)));
        Ok(())
    })
}

/// Draws the channels of drop `index` from the seeded random geometry with
/// default cell layout.
///
/// # Safety
/// `params` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eeshare_channels_from_drop(
    params: *const EeParams,
    scenario: EeScenario,
    seed: u64,
    index: u64,
    out: *mut *mut EeChannels,
) -> EeStatus {
    guard(|| unsafe {
        if out.is_null() {
            return fail(EeStatus::NullPointer, "out is null");
        }
        let p = SystemParams::from(as_ref(params, "params")?);
        let scenario = match scenario {
            EeScenario::Underlay => Scenario::Underlay,
            EeScenario::Overlay => Scenario::Overlay,
        };
        let cfg = DropConfig {
            seed,
            scenario,
            ..DropConfig::default()
        };
        let drop = generate_drop(&cfg, &p, index)
            .or_else(|e| fail(EeStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(EeChannels(drop.channels)));
        Ok(())
    })
}

/// # Safety
/// `ch` must be null or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn eeshare_channels_free(ch: *mut EeChannels) {
    if !ch.is_null() {
        drop(unsafe { Box::from_raw(ch) });
    }
}

/// Primary point-to-point capacity in bit/s, or NaN on invalid input.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn eeshare_direct_capacity(
    params: *const EeParams,
    ch: *const EeChannels,
) -> f64 {
    match unsafe { (params.as_ref(), ch.as_ref()) } {
        (Some(p), Some(c)) => eeshare::model::direct_capacity(&SystemParams::from(p), &c.0),
        _ => f64::NAN,
    }
}

/// Runs the underlay allocator.
///
/// # Safety
/// Pointers must be valid; `out` receives a solution to release with
/// [`eeshare_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn eeshare_allocate_underlay(
    params: *const EeParams,
    ch: *const EeChannels,
    obj: EeObjective,
    out: *mut *mut EeSolution,
) -> EeStatus {
    use eeshare::error::UnderlayError as E;
    guard(|| unsafe {
        if out.is_null() {
            return fail(EeStatus::NullPointer, "out is null");
        }
        let p = SystemParams::from(as_ref(params, "params")?);
        let ch = as_ref(ch, "channels")?;
        let sol = allocate_underlay(&p, &ch.0, objective(obj)).map_err(|e| {
            let status = match e {
                E::R1StarExceedsDirectCapacity | E::R2StarInfeasible => EeStatus::Infeasible,
                E::Model(_) => EeStatus::InvalidArgument,
                _ => EeStatus::SolverFailure,
            };
            Failure(status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(EeSolution::Underlay(sol)));
        Ok(())
    })
}

/// Runs an overlay allocator. `eps` is the relative stopping tolerance of the
/// outer loop; pass 0 for the default.
///
/// # Safety
/// Pointers must be valid; `out` receives a solution to release with
/// [`eeshare_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn eeshare_solve_overlay(
    params: *const EeParams,
    ch: *const EeChannels,
    algorithm: EeOverlayAlgorithm,
    obj: EeObjective,
    eps: f64,
    out: *mut *mut EeSolution,
) -> EeStatus {
    use eeshare::error::OverlayError as E;
    guard(|| unsafe {
        if out.is_null() {
            return fail(EeStatus::NullPointer, "out is null");
        }
        if eps.is_nan() || eps < 0.0 {
            return fail(EeStatus::InvalidArgument, "eps must be >= 0");
        }
        let p = SystemParams::from(as_ref(params, "params")?);
        let ch = as_ref(ch, "channels")?;
        let mut opts = SurrogateOptions::default();
        if eps > 0.0 {
            opts.eps = eps;
        }
        let res = match algorithm {
            EeOverlayAlgorithm::Full => solve_overlay_full(&p, &ch.0, objective(obj), &opts),
            EeOverlayAlgorithm::Rank1 => solve_overlay_rank1(&p, &ch.0, objective(obj), &opts),
        };
        let sol = res.map_err(|e| {
            let status = match e {
                E::InfeasibleR1Star { .. }
                | E::UnderlayRegime
                | E::R2StarInfeasible
                | E::Rank1Infeasible
                | E::InitInfeasible => EeStatus::Infeasible,
                E::Model(_) | E::DegenerateChannel(_) => EeStatus::InvalidArgument,
                _ => EeStatus::SolverFailure,
            };
            Failure(status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(EeSolution::Overlay(sol)));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn eeshare_solution_free(sol: *mut EeSolution) {
    if !sol.is_null() {
        drop(unsafe { Box::from_raw(sol) });
    }
}

fn scalar_field(sol: *const EeSolution, which: usize) -> f64 {
    match unsafe { sol.as_ref() } {
        Some(EeSolution::Underlay(s)) => [s.ee, s.r1, s.r2, s.tx_power][which],
        Some(EeSolution::Overlay(s)) => [s.ee, s.r1, s.r2, s.tx_power][which],
        None => f64::NAN,
    }
}

/// Energy efficiency, bit/Joule (NaN for a null handle).
///
/// # Safety
/// `sol` must be null or a live solution.
#[no_mangle]
pub unsafe extern "C" fn eeshare_solution_ee(sol: *const EeSolution) -> f64 {
    scalar_field(sol, 0)
}

/// Primary rate, bit/s.
///
/// # Safety
/// `sol` must be null or a live solution.
#[no_mangle]
pub unsafe extern "C" fn eeshare_solution_r1(sol: *const EeSolution) -> f64 {
    scalar_field(sol, 1)
}

/// Secondary rate, bit/s.
///
/// # Safety
/// `sol` must be null or a live solution.
#[no_mangle]
pub unsafe extern "C" fn eeshare_solution_r2(sol: *const EeSolution) -> f64 {
    scalar_field(sol, 2)
}

/// Consumed transmit power, W.
///
/// # Safety
/// `sol` must be null or a live solution.
#[no_mangle]
pub unsafe extern "C" fn eeshare_solution_tx_power(sol: *const EeSolution) -> f64 {
    scalar_field(sol, 3)
}

/// Outer iterations used (0 for a null handle).
///
/// # Safety
/// `sol` must be null or a live solution.
#[no_mangle]
pub unsafe extern "C" fn eeshare_solution_iterations(sol: *const EeSolution) -> usize {
    match unsafe { sol.as_ref() } {
        Some(EeSolution::Underlay(s)) => s.iterations,
        Some(EeSolution::Overlay(s)) => s.iterations,
        None => 0,
    }
}

/// Underlay regime: 1, 2 or 3. Overlay solutions and null handles give 0.
///
/// # Safety
/// `sol` must be null or a live solution.
#[no_mangle]
pub unsafe extern "C" fn eeshare_solution_case(sol: *const EeSolution) -> u32 {
    match unsafe { sol.as_ref() } {
        Some(EeSolution::Underlay(s)) => match s.case_tag {
            CaseTag::Case1NoSic => 1,
            CaseTag::Case2FullSic => 2,
            CaseTag::Case3RateSplit => 3,
        },
        _ => 0,
    }
}

/// Copies one matrix of the solution into `buf` as interleaved row-major
/// complex values and stores its dimensions in `rows`/`cols`. Call with a
/// null `buf` to query the size; `len` counts doubles.
///
/// # Safety
/// `rows` and `cols` must be writable; `buf` null or `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn eeshare_solution_matrix(
    sol: *const EeSolution,
    which: EeMatrix,
    buf: *mut f64,
    len: usize,
    rows: *mut usize,
    cols: *mut usize,
) -> EeStatus {
    guard(|| unsafe {
        if rows.is_null() || cols.is_null() {
            return fail(EeStatus::NullPointer, "rows/cols is null");
        }
        let m: &CMat = match (as_ref(sol, "solution")?, which) {
            (EeSolution::Underlay(s), EeMatrix::K21) => s.k21.matrix(),
            (EeSolution::Underlay(s), EeMatrix::K22) => s.k22.matrix(),
            (EeSolution::Overlay(s), EeMatrix::RelayA) => &s.relay_a,
            (EeSolution::Overlay(s), EeMatrix::RelayX) => s.relay_x.matrix(),
            (EeSolution::Overlay(s), EeMatrix::DataB) => s.b_cov.matrix(),
            (_, w) => {
                return fail(
                    EeStatus::InvalidArgument,
                    format!("{w:?} is not part of this solution"),
                )
            }
        };
        *rows = m.nrows();
        *cols = m.ncols();
        if buf.is_null() {
            return Ok(());
        }
        let need = 2 * m.nrows() * m.ncols();
        if len < need {
            return fail(
                EeStatus::InvalidArgument,
                format!("buffer holds {len} doubles, {need} needed"),
            );
        }
        // SAFETY: `buf` has at least `need` doubles.
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                let k = 2 * (r * m.ncols() + c);
                dst[k] = z.re;
                dst[k + 1] = z.im;
            }
        }
        Ok(())
    })
}
