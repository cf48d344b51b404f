//! C ABI over `mala_lab`.
//!
//! Objects cross the boundary as opaque pointers created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns a
//! [`MalaStatus`]; on failure the message is available from
//! [`mala_last_error_message`] on the same thread. Panics are caught and
//! reported as [`MalaStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use mala_lab::diagnostics::{self, TypicalSetFilter};
use mala_lab::finite_chain::{self, FiniteChain};
use mala_lab::kernels::{self, ChainState, KernelParams};
use mala_lab::nalgebra::{DMatrix, DVector};
use mala_lab::{Error, Potential};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MalaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numeric = 3,
    Unsupported = 4,
    Accuracy = 5,
    Resource = 6,
    Config = 7,
    Io = 8,
    Internal = 9,
    Panic = 10,
}

pub const MALA_KERNEL_MALA: u32 = 0;
pub const MALA_KERNEL_ULA: u32 = 1;
pub const MALA_KERNEL_OU_EXACT: u32 = 2;

/// Opaque target potential.
pub struct MalaPotential {
    inner: Potential,
}

/// Opaque chain: a potential, kernel parameters and the current state.
pub struct MalaChain {
    potential: Potential,
    params: KernelParams,
    state: ChainState,
}

/// Outcome of [`mala_run_chain`]. Fields are NaN when undefined (an empty
/// run, or too few steps for batch means).
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MalaChainSummary {
    pub n_steps: u64,
    pub acceptance_rate: f64,
    pub mean_accept_prob: f64,
    pub coord1_second_moment: f64,
    pub coord1_second_moment_se: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MalaStatus {
    match e {
        Error::Input(_) => MalaStatus::InvalidInput,
        Error::Numeric(_) => MalaStatus::Numeric,
        Error::Unsupported(_) => MalaStatus::Unsupported,
        Error::Accuracy { .. } => MalaStatus::Accuracy,
        Error::Resource(_) => MalaStatus::Resource,
        Error::Config(_) => MalaStatus::Config,
        Error::Io(_) | Error::Csv(_) => MalaStatus::Io,
        Error::Internal(_) => MalaStatus::Internal,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard<F: FnOnce() -> Outcome>(f: F) -> MalaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MalaStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            MalaStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("panic inside mala_lab".into());
            MalaStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> std::result::Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &'static str) -> std::result::Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn as_slice<'a>(p: *const f64, len: usize, what: &'static str) -> std::result::Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn as_slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> std::result::Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn check_len(got: usize, want: usize) -> Outcome {
    if got != want {
        return Err(Error::Input(format!("length {got} does not match dimension {want}")).into());
    }
    Ok(())
}

fn kernel_params(kernel: u32, h: f64) -> std::result::Result<KernelParams, Failure> {
    let params = match kernel {
        MALA_KERNEL_MALA => KernelParams::mala(h),
        MALA_KERNEL_ULA => KernelParams::ula(h),
        MALA_KERNEL_OU_EXACT => KernelParams::ou_exact(h),
        _ => return Err(Error::Input(format!("unknown kernel id {kernel}")).into()),
    };
    params.validate()?;
    Ok(params)
}

unsafe fn emit_potential(p: Potential, out: *mut *mut MalaPotential) -> Outcome {
    let out = as_mut(out, "out")?;
    *out = Box::into_raw(Box::new(MalaPotential { inner: p }));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mala_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mala_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Standard Gaussian target in `d` dimensions.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mala_potential_new_gaussian(d: usize, out: *mut *mut MalaPotential) -> MalaStatus {
    guard(|| emit_potential(Potential::gaussian(d)?, out))
}

/// Cosine-perturbed Gaussian with ripple exponent `eta` in (0, 1/4).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mala_potential_new_adversarial(d: usize, eta: f64, out: *mut *mut MalaPotential) -> MalaStatus {
    guard(|| emit_potential(Potential::adversarial(d, eta)?, out))
}

/// Potential from a `key=value` spec such as `"kind=adversarial;d=64;eta=0.2"`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` as for the other constructors.
#[no_mangle]
pub unsafe extern "C" fn mala_potential_parse(spec: *const c_char, out: *mut *mut MalaPotential) -> MalaStatus {
    guard(|| {
        if spec.is_null() {
            return Err(Failure::Null("spec"));
        }
        let text = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Error::Input("spec is not UTF-8".into()))?;
        emit_potential(text.parse::<Potential>()?, out)
    })
}

/// # Safety
/// `p` must come from a `mala_potential_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mala_potential_free(p: *mut MalaPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Dimension of `p`, or 0 for NULL.
///
/// # Safety
/// `p` must be NULL or a live potential.
#[no_mangle]
pub unsafe extern "C" fn mala_potential_dim(p: *const MalaPotential) -> usize {
    p.as_ref().map_or(0, |p| p.inner.dim())
}

/// `V(x)` and `∇V(x)`. `grad_out` may be NULL.
///
/// # Safety
/// `x` must point to `len` doubles, `grad_out` (if not NULL) to `len`
/// writable doubles, `value_out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn mala_potential_evaluate(
    p: *const MalaPotential,
    x: *const f64,
    len: usize,
    value_out: *mut f64,
    grad_out: *mut f64,
) -> MalaStatus {
    guard(|| {
        let p = &as_ref(p, "potential")?.inner;
        check_len(len, p.dim())?;
        let x = as_slice(x, len, "x")?;
        let value_out = as_mut(value_out, "value_out")?;
        let (v, g) = p.evaluate(x)?;
        *value_out = v;
        if !grad_out.is_null() {
            slice::from_raw_parts_mut(grad_out, len).copy_from_slice(&g);
        }
        Ok(())
    })
}

/// `ln a(x, y)` for the MALA proposal with step `h`.
///
/// # Safety
/// `x`, `y` must point to `len` doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn mala_log_accept_ratio(
    p: *const MalaPotential,
    h: f64,
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut f64,
) -> MalaStatus {
    guard(|| {
        let p = &as_ref(p, "potential")?.inner;
        check_len(len, p.dim())?;
        let (x, y) = (as_slice(x, len, "x")?, as_slice(y, len, "y")?);
        *as_mut(out, "out")? = kernels::log_accept_ratio(p, h, x, y)?;
        Ok(())
    })
}

/// New chain at `x0`. The chain keeps its own copy of the potential.
///
/// # Safety
/// `x0` must point to `len` doubles; `out` to storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mala_chain_new(
    p: *const MalaPotential,
    kernel: u32,
    h: f64,
    x0: *const f64,
    len: usize,
    seed: u64,
    out: *mut *mut MalaChain,
) -> MalaStatus {
    guard(|| {
        let p = &as_ref(p, "potential")?.inner;
        check_len(len, p.dim())?;
        let x0 = as_slice(x0, len, "x0")?;
        let out = as_mut(out, "out")?;
        let params = kernel_params(kernel, h)?;
        let state = ChainState::new(p, x0, seed)?;
        *out = Box::into_raw(Box::new(MalaChain { potential: p.clone(), params, state }));
        Ok(())
    })
}

/// Advance one transition. `accepted_out` (may be NULL) receives 1 if the
/// proposal was accepted, 0 otherwise.
///
/// # Safety
/// `chain` must be a live chain; `accepted_out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mala_chain_step(chain: *mut MalaChain, accepted_out: *mut i32) -> MalaStatus {
    guard(|| {
        let c = as_mut(chain, "chain")?;
        let rec = kernels::step(&c.potential, &c.params, &mut c.state)?;
        if let Some(a) = accepted_out.as_mut() {
            *a = rec.accepted as i32;
        }
        Ok(())
    })
}

/// Copy the current state into `x_out`.
///
/// # Safety
/// `x_out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mala_chain_state(chain: *const MalaChain, x_out: *mut f64, len: usize) -> MalaStatus {
    guard(|| {
        let c = as_ref(chain, "chain")?;
        check_len(len, c.state.x().len())?;
        as_slice_mut(x_out, len, "x_out")?.copy_from_slice(c.state.x());
        Ok(())
    })
}

/// # Safety
/// `chain` must come from [`mala_chain_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mala_chain_free(chain: *mut MalaChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Run `n_steps` transitions from `x0` and summarise them.
///
/// # Safety
/// `x0` must point to `len` doubles; `out` to one writable summary.
#[no_mangle]
pub unsafe extern "C" fn mala_run_chain(
    p: *const MalaPotential,
    kernel: u32,
    h: f64,
    x0: *const f64,
    len: usize,
    n_steps: u64,
    seed: u64,
    out: *mut MalaChainSummary,
) -> MalaStatus {
    guard(|| {
        let p = &as_ref(p, "potential")?.inner;
        check_len(len, p.dim())?;
        let x0 = as_slice(x0, len, "x0")?;
        let out = as_mut(out, "out")?;
        let params = kernel_params(kernel, h)?;
        let s = kernels::run_chain(p, &params, x0, n_steps as usize, seed, None)?;
        *out = MalaChainSummary {
            n_steps,
            acceptance_rate: s.acceptance_rate.unwrap_or(f64::NAN),
            mean_accept_prob: s.mean_accept_prob.unwrap_or(f64::NAN),
            coord1_second_moment: s.coord1_second_moment.map_or(f64::NAN, |e| e.value),
            coord1_second_moment_se: s.coord1_second_moment.map_or(f64::NAN, |e| e.std_error),
        };
        Ok(())
    })
}

/// Mean acceptance over exact stationary draws (separable targets only).
/// `filter` nonzero applies the typical-set filter.
///
/// # Safety
/// `value_out` and `se_out` must point to writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mala_mean_acceptance(
    p: *const MalaPotential,
    h: f64,
    n_states: usize,
    n_mc: usize,
    filter: i32,
    seed: u64,
    value_out: *mut f64,
    se_out: *mut f64,
) -> MalaStatus {
    guard(|| {
        let p = &as_ref(p, "potential")?.inner;
        let value_out = as_mut(value_out, "value_out")?;
        let se_out = as_mut(se_out, "se_out")?;
        let f = if filter != 0 { TypicalSetFilter::for_dim(p.dim()) } else { TypicalSetFilter::disabled() };
        let m = diagnostics::mean_acceptance(p, h, n_states, n_mc, f, seed)?;
        *value_out = m.estimate.value;
        *se_out = m.estimate.std_error;
        Ok(())
    })
}

/// Spectral gap and conductance of the Metropolis chain built from the
/// row-major `n×n` proposal `q` and stationary vector `pi`.
///
/// # Safety
/// `pi` must point to `n` doubles, `q` to `n*n` doubles, outputs to
/// writable doubles (`conductance_out` may be NULL).
#[no_mangle]
pub unsafe extern "C" fn mala_finite_spectral_gap(
    n: usize,
    pi: *const f64,
    q: *const f64,
    gap_out: *mut f64,
    conductance_out: *mut f64,
) -> MalaStatus {
    guard(|| {
        let pi = DVector::from_column_slice(as_slice(pi, n, "pi")?);
        let q = DMatrix::from_row_slice(n, n, as_slice(q, n * n, "q")?);
        let gap_out = as_mut(gap_out, "gap_out")?;
        let chain: FiniteChain = finite_chain::metropolize(&q, &pi)?;
        if conductance_out.is_null() {
            *gap_out = finite_chain::spectral_gap(&chain);
        } else {
            let sq = finite_chain::spectral_quantities(&chain)?;
            *gap_out = sq.gap;
            *conductance_out = sq.conductance;
        }
        Ok(())
    })
}
