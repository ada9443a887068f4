//! C ABI over `modelkit`.
//!
//! Models and random streams are opaque heap handles. Every fallible call
//! returns an [`MkStatus`]; on failure the message is kept per thread and
//! read with [`mk_last_error_message`]. Data and parameters cross the
//! boundary as row-major `double` buffers with explicit lengths.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use modelkit::cli::{default_params, eval_model_expr, parse_model_expr, EvalContext};
use modelkit::{DataDim, DataSet, Error, Model, Params, RandomStream};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Syntax = 3,
    UnknownName = 4,
    BadArgument = 5,
    DimensionMismatch = 6,
    Numerical = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// A model built from an expression.
pub struct MkModel {
    model: Model,
    defaults: Params,
}

/// A seeded random stream.
pub struct MkStream {
    stream: RandomStream,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> MkStatus {
    match e {
        Error::Syntax { .. } => MkStatus::Syntax,
        Error::UnknownName(_) => MkStatus::UnknownName,
        Error::BadKeyword { .. } | Error::InvalidArgument(_) | Error::SpaceMismatch { .. } => MkStatus::BadArgument,
        Error::DimensionMismatch { .. } | Error::ParamMismatch { .. } => MkStatus::DimensionMismatch,
        Error::Io(_) | Error::Csv(_) => MkStatus::Io,
        _ => MkStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (MkStatus, String)>) -> MkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            MkStatus::Panic
        }
    }
}

fn lib(e: Error) -> (MkStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MkStatus, String) {
    (MkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn doubles<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (MkStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn doubles_mut<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], (MkStatus, String)> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn model_ref<'a>(m: *const MkModel) -> Result<&'a MkModel, (MkStatus, String)> {
    m.as_ref().ok_or_else(|| null("model"))
}

fn params_from(m: &MkModel, vals: &[f64]) -> Result<Params, (MkStatus, String)> {
    m.defaults.with_values(vals).map_err(lib)
}

unsafe fn dataset_from(data: *const f64, rows: usize, cols: usize) -> Result<DataSet, (MkStatus, String)> {
    let flat = doubles(data, rows * cols, "data")?;
    let rows: Vec<Vec<f64>> = if cols == 0 {
        vec![Vec::new(); rows]
    } else {
        flat.chunks(cols).map(<[f64]>::to_vec).collect()
    };
    DataSet::new(rows).map_err(lib)
}

/// Builds a model from an expression such as `truncate(normal, min=0)`.
/// On success `*out` owns a handle to release with [`mk_model_free`].
///
/// # Safety
/// `expr` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mk_model_from_expr(expr: *const c_char, out: *mut *mut MkModel) -> MkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if expr.is_null() {
            return Err(null("expr"));
        }
        let text = CStr::from_ptr(expr)
            .to_str()
            .map_err(|e| (MkStatus::InvalidUtf8, e.to_string()))?;
        let model = eval_model_expr(&parse_model_expr(text).map_err(lib)?, &EvalContext::default()).map_err(lib)?;
        let defaults = default_params(&model);
        *out = Box::into_raw(Box::new(MkModel { model, defaults }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `m` must come from [`mk_model_from_expr`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mk_model_free(m: *mut MkModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of parameter values, pinned ones included.
///
/// # Safety
/// `m` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mk_model_param_count(m: *const MkModel, out: *mut usize) -> MkStatus {
    guard(|| {
        let m = model_ref(m)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = m.defaults.values().len();
        Ok(())
    })
}

/// Width of one data row, or 0 when rows vary in length.
///
/// # Safety
/// `m` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mk_model_data_dim(m: *const MkModel, out: *mut usize) -> MkStatus {
    guard(|| {
        let m = model_ref(m)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match m.model.data_dim() {
            DataDim::Fixed(d) => d,
            DataDim::Variable => 0,
        };
        Ok(())
    })
}

/// Copies the model's default parameter values into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mk_model_default_params(m: *const MkModel, buf: *mut f64, len: usize) -> MkStatus {
    guard(|| {
        let m = model_ref(m)?;
        let v = m.defaults.values();
        if len < v.len() {
            return Err((MkStatus::BufferTooSmall, format!("need {} values, got {len}", v.len())));
        }
        doubles_mut(buf, len, "buf")?[..v.len()].copy_from_slice(v);
        Ok(())
    })
}

/// Log-likelihood of `rows` x `cols` row-major data at `params`.
///
/// # Safety
/// Buffers must hold the stated number of doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mk_model_log_likelihood(
    m: *const MkModel,
    data: *const f64,
    rows: usize,
    cols: usize,
    params: *const f64,
    n_params: usize,
    out: *mut f64,
) -> MkStatus {
    guard(|| {
        let m = model_ref(m)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = params_from(m, doubles(params, n_params, "params")?)?;
        let d = dataset_from(data, rows, cols)?;
        *out = m.model.log_likelihood(&d, &p).map_err(lib)?;
        Ok(())
    })
}

/// Estimates parameters on `rows` x `cols` data and writes all parameter
/// values (pinned ones unchanged) into `params_out`.
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn mk_model_estimate(
    m: *const MkModel,
    data: *const f64,
    rows: usize,
    cols: usize,
    params_out: *mut f64,
    n_params: usize,
) -> MkStatus {
    guard(|| {
        let m = model_ref(m)?;
        let d = dataset_from(data, rows, cols)?;
        let fit = m.model.estimate(&d).map_err(lib)?;
        let v = fit.params.values();
        if n_params < v.len() {
            return Err((MkStatus::BufferTooSmall, format!("need {} values, got {n_params}", v.len())));
        }
        doubles_mut(params_out, n_params, "params_out")?[..v.len()].copy_from_slice(v);
        Ok(())
    })
}

/// Draws one row into `out`, which holds `out_len` doubles; `*written`
/// receives the row length.
///
/// # Safety
/// Buffers must hold the stated number of doubles; handles must be valid.
#[no_mangle]
pub unsafe extern "C" fn mk_model_draw(
    m: *const MkModel,
    params: *const f64,
    n_params: usize,
    s: *mut MkStream,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> MkStatus {
    guard(|| {
        let m = model_ref(m)?;
        let s = s.as_mut().ok_or_else(|| null("stream"))?;
        let written = written.as_mut().ok_or_else(|| null("written"))?;
        let p = params_from(m, doubles(params, n_params, "params")?)?;
        let row = m.model.draw(&p, &mut s.stream).map_err(lib)?;
        *written = row.len();
        if out_len < row.len() {
            return Err((MkStatus::BufferTooSmall, format!("row has {} values, buffer {out_len}", row.len())));
        }
        doubles_mut(out, out_len, "out")?[..row.len()].copy_from_slice(&row);
        Ok(())
    })
}

/// Probability of the orthant at or below `point`.
///
/// # Safety
/// Buffers must hold the stated number of doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mk_model_cdf(
    m: *const MkModel,
    point: *const f64,
    dim: usize,
    params: *const f64,
    n_params: usize,
    out: *mut f64,
) -> MkStatus {
    guard(|| {
        let m = model_ref(m)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = params_from(m, doubles(params, n_params, "params")?)?;
        *out = m.model.cdf(doubles(point, dim, "point")?, &p).map_err(lib)?;
        Ok(())
    })
}

/// A new stream; the same seed gives the same draws. Release with
/// [`mk_stream_free`].
#[no_mangle]
pub extern "C" fn mk_stream_new(seed: u64) -> *mut MkStream {
    Box::into_raw(Box::new(MkStream {
        stream: RandomStream::new(seed),
    }))
}

/// Releases a stream. Null is ignored.
///
/// # Safety
/// `s` must come from [`mk_stream_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mk_stream_free(s: *mut MkStream) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to fit, into `buf`. Returns the full message length without
/// the terminator, so a call with `len == 0` sizes the buffer.
///
/// # Safety
/// `buf` must hold `len` bytes, or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn mk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
