//! C ABI over trained models.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! `paco_model_free`. Every fallible call returns a `PacoStatus` and leaves a
//! message readable through `paco_last_error` on the calling thread.
//! Indices are the dense 0-based user and item indices of the model file;
//! `paco_model_user_index` and `paco_model_item_index` map external ids.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use paco::model::{read_model, write_model, PacoModel};
use paco::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    OutOfRange = 5,
    NotFound = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Opaque loaded model.
pub struct PacoModelHandle {
    model: PacoModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PacoStatus, msg: impl Into<String>) -> PacoStatus {
    set_error(msg);
    status
}

fn from_error(err: Error) -> PacoStatus {
    let status = match &err {
        Error::Io { .. } => PacoStatus::Io,
        Error::Format(_) => PacoStatus::Format,
        Error::OutOfRange(_) => PacoStatus::OutOfRange,
        Error::Config(_) | Error::Data(_) => PacoStatus::InvalidArgument,
        Error::Invariant(_) => PacoStatus::Internal,
    };
    fail(status, err.to_string())
}

/// Clears the last error, runs `f`, and turns panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), PacoStatus>) -> PacoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PacoStatus::Ok,
        Ok(Err(status)) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            fail(PacoStatus::Internal, format!("panic: {msg}"))
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, PacoStatus> {
    // SAFETY: caller promises `p` is null or valid for the call.
    unsafe { p.as_ref() }.ok_or_else(|| fail(PacoStatus::NullPointer, format!("{what} is null")))
}

fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, PacoStatus> {
    // SAFETY: as above.
    unsafe { p.as_mut() }.ok_or_else(|| fail(PacoStatus::NullPointer, format!("{what} is null")))
}

fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, PacoStatus> {
    if p.is_null() {
        return Err(fail(PacoStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated per contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(PacoStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn boxed(model: PacoModel, handle: *mut *mut PacoModelHandle) -> Result<(), PacoStatus> {
    let slot = out(handle, "out")?;
    *slot = Box::into_raw(Box::new(PacoModelHandle { model }));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn paco_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn paco_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file. On success `*out` receives a new handle.
#[no_mangle]
pub extern "C" fn paco_model_load(path: *const c_char, out: *mut *mut PacoModelHandle) -> PacoStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let model = read_model(Path::new(path)).map_err(from_error)?;
        boxed(model, out)
    })
}

/// Decodes a model from `len` bytes in memory.
#[no_mangle]
pub extern "C" fn paco_model_from_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut PacoModelHandle,
) -> PacoStatus {
    guard(|| {
        non_null(data, "data")?;
        // SAFETY: `data` points to `len` readable bytes per contract.
        let bytes = unsafe { std::slice::from_raw_parts(data, len) };
        let model = PacoModel::from_bytes(bytes).map_err(from_error)?;
        boxed(model, out)
    })
}

/// Writes the model to `path`.
#[no_mangle]
pub extern "C" fn paco_model_save(model: *const PacoModelHandle, path: *const c_char) -> PacoStatus {
    guard(|| {
        let h = non_null(model, "model")?;
        let path = c_str(path, "path")?;
        write_model(Path::new(path), &h.model).map_err(from_error)
    })
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub extern "C" fn paco_model_free(model: *mut PacoModelHandle) {
    if !model.is_null() {
        // SAFETY: handle came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of users, items and vocabulary words. Any out pointer may be null.
#[no_mangle]
pub extern "C" fn paco_model_dims(
    model: *const PacoModelHandle,
    n_users: *mut usize,
    n_items: *mut usize,
    vocab_size: *mut usize,
) -> PacoStatus {
    guard(|| {
        let m = &non_null(model, "model")?.model;
        for (p, v) in [(n_users, m.n_users()), (n_items, m.n_items()), (vocab_size, m.vocab_size())] {
            if let Some(p) = unsafe { p.as_mut() } {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Description length of the stencils in bits.
#[no_mangle]
pub extern "C" fn paco_model_size_bits(model: *const PacoModelHandle, bits: *mut u64) -> PacoStatus {
    guard(|| {
        let m = &non_null(model, "model")?.model;
        *out(bits, "bits")? = m.model_size_bits();
        Ok(())
    })
}

fn lookup(
    model: *const PacoModelHandle,
    id: *const c_char,
    index: *mut u32,
    users: bool,
) -> PacoStatus {
    guard(|| {
        let m = &non_null(model, "model")?.model;
        let id = c_str(id, "id")?;
        let map = if users { &m.users } else { &m.items };
        let found = map.get(id).ok_or_else(|| {
            let kind = if users { "user" } else { "item" };
            fail(PacoStatus::NotFound, format!("unknown {kind} id {id:?}"))
        })?;
        *out(index, "index")? = found;
        Ok(())
    })
}

/// Dense index of an external user id.
#[no_mangle]
pub extern "C" fn paco_model_user_index(
    model: *const PacoModelHandle,
    id: *const c_char,
    index: *mut u32,
) -> PacoStatus {
    lookup(model, id, index, true)
}

/// Dense index of an external item id.
#[no_mangle]
pub extern "C" fn paco_model_item_index(
    model: *const PacoModelHandle,
    id: *const c_char,
    index: *mut u32,
) -> PacoStatus {
    lookup(model, id, index, false)
}

/// Predicted rating on the native scale.
#[no_mangle]
pub extern "C" fn paco_model_predict(
    model: *const PacoModelHandle,
    user: u32,
    item: u32,
    rating: *mut f64,
) -> PacoStatus {
    guard(|| {
        let m = &non_null(model, "model")?.model;
        *out(rating, "rating")? = m.predict_rating(user as usize, item as usize).map_err(from_error)?;
        Ok(())
    })
}

/// Predicts `n` pairs. Fails without writing anything if any pair is out of range.
#[no_mangle]
pub extern "C" fn paco_model_predict_batch(
    model: *const PacoModelHandle,
    users: *const u32,
    items: *const u32,
    n: usize,
    ratings: *mut f64,
) -> PacoStatus {
    guard(|| {
        let m = &non_null(model, "model")?.model;
        if n == 0 {
            return Ok(());
        }
        non_null(users, "users")?;
        non_null(items, "items")?;
        out(ratings, "ratings")?;
        // SAFETY: each buffer holds `n` elements per contract.
        let (us, is) = unsafe { (std::slice::from_raw_parts(users, n), std::slice::from_raw_parts(items, n)) };
        let preds = us
            .iter()
            .zip(is)
            .map(|(&u, &i)| m.predict_rating(u as usize, i as usize))
            .collect::<paco::Result<Vec<f64>>>()
            .map_err(from_error)?;
        unsafe { std::slice::from_raw_parts_mut(ratings, n) }.copy_from_slice(&preds);
        Ok(())
    })
}

/// Full Poisson rate vector of a review, one entry per vocabulary word.
/// `len` must be at least the vocabulary size; otherwise `BufferTooSmall` is
/// returned and the required length is reported in the error message.
#[no_mangle]
pub extern "C" fn paco_model_rate_vector(
    model: *const PacoModelHandle,
    user: u32,
    item: u32,
    rates: *mut f64,
    len: usize,
) -> PacoStatus {
    guard(|| {
        let m = &non_null(model, "model")?.model;
        let w = m.vocab_size();
        if len < w {
            return Err(fail(PacoStatus::BufferTooSmall, format!("need {w} slots, got {len}")));
        }
        out(rates, "rates")?;
        let v = m.rate_vector(user as usize, item as usize).map_err(from_error)?;
        // SAFETY: `rates` holds at least `len >= w` elements.
        unsafe { std::slice::from_raw_parts_mut(rates, w) }.copy_from_slice(&v);
        Ok(())
    })
}
