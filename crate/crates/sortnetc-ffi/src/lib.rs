//! C ABI over the sortnetc library. Handles are opaque pointers owned by
//! the caller and released with the matching `_free` function; strings
//! returned as `*mut c_char` are released with [`snc_string_free`].
//!
//! Every fallible call returns an [`SncStatus`]. On any status other
//! than `Ok` the thread-local message behind [`snc_last_error`] explains
//! what went wrong; it stays valid until the next failing call on the
//! same thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use libc::c_char;

use sortnetc::nncompiler::{self, DepthRule};
use sortnetc::nnruntime::{Counting, DenseNetwork};
use sortnetc::patchcodec::{self, Patch, PrecisionModel};
use sortnetc::sortnet::{self, SortingNetwork};
use sortnetc::{locality, Error};

/// Outcome of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SncStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Inputs were rejected before any work started.
    InvalidArgument = 2,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 3,
    /// A buffer length did not match what the handle expects.
    LengthMismatch = 4,
    /// The operation itself failed; see `snc_last_error`.
    Failure = 5,
}

/// Which construction `snc_sortnet_new` uses.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SncNetKind {
    /// Hand-minimal networks, 2 to 4 wires.
    Optimal = 0,
    /// Odd-even mergesort, any width.
    Merge = 1,
    /// Two alternating layers; x applications sort x wires.
    Brick = 2,
}

/// Opaque sorting-network handle.
pub struct SncSortNet {
    inner: SortingNetwork,
}

/// Opaque dense-model handle.
pub struct SncModel {
    inner: DenseNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes stripped");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn fail(err: Error) -> SncStatus {
    let status = match &err {
        Error::LengthMismatch { .. } | Error::DimensionMismatch { .. } => {
            SncStatus::LengthMismatch
        }
        Error::Io(_) | Error::Json(_) => SncStatus::Failure,
        _ => SncStatus::InvalidArgument,
    };
    set_error(&err.to_string());
    status
}

fn null_argument(name: &str) -> SncStatus {
    set_error(&format!("{name} must not be null"));
    SncStatus::NullArgument
}

/// Runs `f`, converting a panic into a `Failure` status instead of
/// unwinding across the ABI.
fn guarded(f: impl FnOnce() -> SncStatus) -> SncStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SncStatus::Failure
        }
    }
}

fn precision_from_bits(mantissa: u32) -> PrecisionModel {
    // 0 selects the lossless encoding
    if mantissa == 0 {
        PrecisionModel::Exact
    } else {
        PrecisionModel::Mantissa(mantissa)
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, SncStatus> {
    if ptr.is_null() {
        return Err(null_argument(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        SncStatus::InvalidUtf8
    })
}

fn leak_string(text: String) -> *mut c_char {
    match CString::new(text) {
        Ok(c) => c.into_raw(),
        Err(_) => {
            set_error("string contains an interior nul byte");
            std::ptr::null_mut()
        }
    }
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn snc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. Valid until the
/// next failing call on the same thread; never freed by the caller.
#[no_mangle]
pub extern "C" fn snc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `text` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn snc_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Builds a sorting network and stores the new handle in `out`.
///
/// # Safety
/// `out` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn snc_sortnet_new(
    kind: SncNetKind,
    wires: usize,
    out: *mut *mut SncSortNet,
) -> SncStatus {
    if out.is_null() {
        return null_argument("out");
    }
    guarded(|| {
        let built = match kind {
            SncNetKind::Optimal => sortnet::make_optimal_small(wires),
            SncNetKind::Merge => sortnet::make_merge_network(wires),
            SncNetKind::Brick => sortnet::make_brick_network(wires),
        };
        match built {
            Ok(net) => {
                *out = Box::into_raw(Box::new(SncSortNet { inner: net }));
                SncStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Parses a network from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snc_sortnet_from_json(
    json: *const c_char,
    out: *mut *mut SncSortNet,
) -> SncStatus {
    if out.is_null() {
        return null_argument("out");
    }
    let text = match str_arg(json, "json") {
        Ok(t) => t,
        Err(status) => return status,
    };
    guarded(|| match SortingNetwork::from_json(text) {
        Ok(net) => {
            *out = Box::into_raw(Box::new(SncSortNet { inner: net }));
            SncStatus::Ok
        }
        Err(err) => fail(err),
    })
}

/// Serializes the network; the caller frees the result. Null on error.
///
/// # Safety
/// `net` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn snc_sortnet_to_json(net: *const SncSortNet) -> *mut c_char {
    if net.is_null() {
        null_argument("net");
        return std::ptr::null_mut();
    }
    leak_string((*net).inner.to_json())
}

/// Releases a network handle.
///
/// # Safety
/// `net` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn snc_sortnet_free(net: *mut SncSortNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Wire count, or 0 for a null handle.
///
/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn snc_sortnet_wires(net: *const SncSortNet) -> usize {
    if net.is_null() {
        return 0;
    }
    (*net).inner.wires()
}

/// Layer count, or 0 for a null handle.
///
/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn snc_sortnet_depth(net: *const SncSortNet) -> usize {
    if net.is_null() {
        return 0;
    }
    (*net).inner.depth()
}

/// Comparator count, or 0 for a null handle.
///
/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn snc_sortnet_comparators(net: *const SncSortNet) -> usize {
    if net.is_null() {
        return 0;
    }
    (*net).inner.comparator_count()
}

/// Runs the network over `values` in place, `applications` times.
///
/// # Safety
/// `values` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn snc_sortnet_apply(
    net: *const SncSortNet,
    values: *mut f64,
    len: usize,
    applications: usize,
) -> SncStatus {
    if net.is_null() {
        return null_argument("net");
    }
    if values.is_null() {
        return null_argument("values");
    }
    let slice = std::slice::from_raw_parts_mut(values, len);
    guarded(|| match (*net).inner.apply_repeated(slice, applications) {
        Ok(sorted) => {
            slice.copy_from_slice(&sorted);
            SncStatus::Ok
        }
        Err(err) => fail(err),
    })
}

/// Checks the sorting property after `applications` passes and writes
/// the verdict to `pass`. Widths above `cap` fall back to randomized
/// checking driven by `seed`.
///
/// # Safety
/// `pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snc_sortnet_verify(
    net: *const SncSortNet,
    applications: usize,
    cap: usize,
    seed: u64,
    pass: *mut bool,
) -> SncStatus {
    if net.is_null() {
        return null_argument("net");
    }
    if pass.is_null() {
        return null_argument("pass");
    }
    guarded(|| {
        let report = sortnet::verify_sorts(&(*net).inner, applications, cap, seed);
        *pass = report.pass;
        SncStatus::Ok
    })
}

/// Compiles a network into a dense ReLU model handle.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snc_compile(
    net: *const SncSortNet,
    prune: bool,
    out: *mut *mut SncModel,
) -> SncStatus {
    if net.is_null() {
        return null_argument("net");
    }
    if out.is_null() {
        return null_argument("out");
    }
    guarded(|| {
        let model = nncompiler::compile(&(*net).inner, prune);
        *out = Box::into_raw(Box::new(SncModel { inner: model }));
        SncStatus::Ok
    })
}

/// Parses a model from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snc_model_from_json(
    json: *const c_char,
    out: *mut *mut SncModel,
) -> SncStatus {
    if out.is_null() {
        return null_argument("out");
    }
    let text = match str_arg(json, "json") {
        Ok(t) => t,
        Err(status) => return status,
    };
    guarded(|| match DenseNetwork::from_json(text) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(SncModel { inner: model }));
            SncStatus::Ok
        }
        Err(err) => fail(err),
    })
}

/// Serializes the model; the caller frees the result. Null on error.
///
/// # Safety
/// `model` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn snc_model_to_json(model: *const SncModel) -> *mut c_char {
    if model.is_null() {
        null_argument("model");
        return std::ptr::null_mut();
    }
    leak_string((*model).inner.to_json())
}

/// Releases a model handle.
///
/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn snc_model_free(model: *mut SncModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs the model on `input` and writes the result to `output`. Both
/// lengths must match the model exactly.
///
/// # Safety
/// `input` must hold `input_len` doubles; `output` must have room for
/// `output_len`.
#[no_mangle]
pub unsafe extern "C" fn snc_model_forward(
    model: *const SncModel,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> SncStatus {
    if model.is_null() {
        return null_argument("model");
    }
    if input.is_null() {
        return null_argument("input");
    }
    if output.is_null() {
        return null_argument("output");
    }
    let input = std::slice::from_raw_parts(input, input_len);
    guarded(|| match (*model).inner.forward(input) {
        Ok(result) => {
            if result.len() != output_len {
                return fail(Error::LengthMismatch {
                    expected: result.len(),
                    actual: output_len,
                });
            }
            std::slice::from_raw_parts_mut(output, output_len).copy_from_slice(&result);
            SncStatus::Ok
        }
        Err(err) => fail(err),
    })
}

/// Parameter count, with or without biases. 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn snc_model_parameters(
    model: *const SncModel,
    weights_only: bool,
) -> u64 {
    if model.is_null() {
        return 0;
    }
    let counting = if weights_only { Counting::WeightsOnly } else { Counting::WeightsAndBiases };
    (*model).inner.parameter_count(counting) as u64
}

/// Closed-form weight counts for sorting every patch code of an image.
/// `depth` below 0 selects the information-theoretic default.
///
/// # Safety
/// `feedforward` and `iterative` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snc_estimate(
    image_side: usize,
    patch_side: usize,
    attention: bool,
    depth: i64,
    feedforward: *mut u64,
    iterative: *mut u64,
) -> SncStatus {
    if feedforward.is_null() {
        return null_argument("feedforward");
    }
    if iterative.is_null() {
        return null_argument("iterative");
    }
    let rule = if depth < 0 {
        DepthRule::InfoTheoreticCeil
    } else {
        DepthRule::Explicit(depth as usize)
    };
    guarded(
        || match nncompiler::estimate_parameters(image_side, patch_side, attention, rule) {
            Ok(scenario) => {
                *feedforward = scenario.p_feedforward;
                *iterative = scenario.p_iterative;
                SncStatus::Ok
            }
            Err(err) => fail(err),
        },
    )
}

/// Encodes a row-major 0/1 pixel grid as one real number. `mantissa` is
/// the bit budget to emulate; 0 keeps every bit.
///
/// # Safety
/// `bits` must hold `side * side` bytes; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snc_patch_encode(
    bits: *const u8,
    side: usize,
    mantissa: u32,
    value: *mut f64,
) -> SncStatus {
    if bits.is_null() {
        return null_argument("bits");
    }
    if value.is_null() {
        return null_argument("value");
    }
    let pixels = std::slice::from_raw_parts(bits, side.saturating_mul(side));
    guarded(|| {
        let patch = match Patch::new(side, pixels.to_vec()) {
            Ok(p) => p,
            Err(err) => return fail(err),
        };
        match patchcodec::encode(&patch, precision_from_bits(mantissa)) {
            Ok(code) => {
                *value = code.value();
                SncStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Whether every patch of this size keeps a distinct code under the
/// given bit budget (0 keeps every bit).
///
/// # Safety
/// `injective` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snc_codes_injective(
    side: usize,
    mantissa: u32,
    injective: *mut bool,
) -> SncStatus {
    if injective.is_null() {
        return null_argument("injective");
    }
    guarded(|| match patchcodec::codes_injective(side, precision_from_bits(mantissa)) {
        Ok(report) => {
            *injective = report.injective;
            SncStatus::Ok
        }
        Err(err) => fail(err),
    })
}

/// Distance of the level-`levels` compression factor above 1 for a
/// patch alphabet of the given side.
///
/// # Safety
/// `estimate` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snc_locality_estimate(
    patch_side: usize,
    levels: usize,
    estimate: *mut f64,
) -> SncStatus {
    if estimate.is_null() {
        return null_argument("estimate");
    }
    guarded(|| match locality::trace_identity_locality(patch_side, levels) {
        Ok(trace) => {
            *estimate = trace.locality_estimate;
            SncStatus::Ok
        }
        Err(err) => fail(err),
    })
}
