//! C ABI over the integer inference path and the energy model.
//!
//! Every function returns an [`NhStatus`]; on failure a message is kept per
//! thread and can be read with [`nh_last_error_message`]. Panics never cross
//! the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nanohydra::energy::{self, Battery, PowerProfile};
use nanohydra::{Engine, Error, QuantizedModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque handle to a loaded model.
pub struct NhModel {
    engine: Engine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
    Ok(s) => s,
    Err(_) => panic!("version string"),
};

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> NhStatus {
    match e {
        Error::Io { .. } => NhStatus::Io,
        Error::Format(_) => NhStatus::Format,
        Error::Shape(_) => NhStatus::Shape,
        _ => NhStatus::InvalidArgument,
    }
}

fn fail(status: NhStatus, msg: impl Into<String>) -> NhStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> NhStatus) -> NhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == NhStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            fail(NhStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn from_result<T>(r: nanohydra::Result<T>, out: impl FnOnce(T)) -> NhStatus {
    match r {
        Ok(v) => {
            out(v);
            NhStatus::Ok
        }
        Err(e) => fail(status_of(&e), e.to_string()),
    }
}

fn into_handle(model: QuantizedModel, out: *mut *mut NhModel) -> NhStatus {
    from_result(Engine::new(model), |engine| unsafe {
        *out = Box::into_raw(Box::new(NhModel { engine }));
    })
}

unsafe fn window<'a>(model: *const NhModel, data: *const f64, len: usize) -> Result<(&'a NhModel, &'a [f64]), NhStatus> {
    if model.is_null() || data.is_null() {
        return Err(fail(NhStatus::NullPointer, "null model or sample pointer"));
    }
    Ok((&*model, std::slice::from_raw_parts(data, len)))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nh_version() -> *const c_char {
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn nh_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a model file. On success `*out` owns a handle to release with
/// [`nh_model_free`].
#[no_mangle]
pub unsafe extern "C" fn nh_model_load(path: *const c_char, out: *mut *mut NhModel) -> NhStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(NhStatus::NullPointer, "null path or output pointer");
        }
        *out = ptr::null_mut();
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(NhStatus::InvalidArgument, "path is not valid UTF-8");
        };
        match QuantizedModel::load(path) {
            Ok(m) => into_handle(m, out),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Loads a model from an in-memory buffer.
#[no_mangle]
pub unsafe extern "C" fn nh_model_load_bytes(data: *const u8, len: usize, out: *mut *mut NhModel) -> NhStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(NhStatus::NullPointer, "null buffer or output pointer");
        }
        *out = ptr::null_mut();
        match QuantizedModel::from_bytes(std::slice::from_raw_parts(data, len)) {
            Ok(m) => into_handle(m, out),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a handle. NULL is accepted.
#[no_mangle]
pub unsafe extern "C" fn nh_model_free(model: *mut NhModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Expected number of samples per input window; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn nh_model_input_len(model: *const NhModel) -> usize {
    model.as_ref().map_or(0, |m| m.engine.config().input_len)
}

#[no_mangle]
pub unsafe extern "C" fn nh_model_num_classes(model: *const NhModel) -> usize {
    model.as_ref().map_or(0, |m| m.engine.config().num_classes)
}

#[no_mangle]
pub unsafe extern "C" fn nh_model_feature_len(model: *const NhModel) -> usize {
    model.as_ref().map_or(0, |m| m.engine.config().feature_len())
}

/// Serialized model size in bytes; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn nh_model_size_bytes(model: *const NhModel) -> usize {
    model.as_ref().map_or(0, |m| m.engine.model.size_bytes())
}

/// Classifies one window of raw samples. `scores` may be NULL; otherwise
/// it receives `nh_model_num_classes` int32 scores and `scores_cap` must be
/// at least that.
#[no_mangle]
pub unsafe extern "C" fn nh_model_predict(
    model: *const NhModel,
    samples: *const f64,
    len: usize,
    class_out: *mut u32,
    scores: *mut i32,
    scores_cap: usize,
) -> NhStatus {
    guard(|| {
        let (m, x) = match window(model, samples, len) {
            Ok(v) => v,
            Err(s) => return s,
        };
        if class_out.is_null() {
            return fail(NhStatus::NullPointer, "null class output pointer");
        }
        let classes = m.engine.config().num_classes;
        if !scores.is_null() && scores_cap < classes {
            return fail(NhStatus::BufferTooSmall, format!("scores buffer holds {scores_cap}, need {classes}"));
        }
        from_result(m.engine.scores(x), |s| {
            let best = nanohydra::classifier::argmax_i32(&s);
            *class_out = best as u32;
            if !scores.is_null() {
                std::slice::from_raw_parts_mut(scores, classes).copy_from_slice(&s);
            }
        })
    })
}

/// Writes the scaled int16 feature vector (the classifier input) of one
/// window. `cap` must be at least `nh_model_feature_len`.
#[no_mangle]
pub unsafe extern "C" fn nh_model_extract_features(
    model: *const NhModel,
    samples: *const f64,
    len: usize,
    out: *mut i16,
    cap: usize,
) -> NhStatus {
    guard(|| {
        let (m, x) = match window(model, samples, len) {
            Ok(v) => v,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(NhStatus::NullPointer, "null feature buffer");
        }
        let lf = m.engine.config().feature_len();
        if cap < lf {
            return fail(NhStatus::BufferTooSmall, format!("feature buffer holds {cap}, need {lf}"));
        }
        from_result(m.engine.scaled(x), |f| {
            std::slice::from_raw_parts_mut(out, lf).copy_from_slice(&f);
        })
    })
}

/// Average power in µW of a duty-cycled node. Powers in µW, times in s.
#[no_mangle]
pub unsafe extern "C" fn nh_avg_power_uw(
    p_inf: f64,
    p_sleep: f64,
    p_adc: f64,
    dt_inf: f64,
    dt_acq: f64,
    out: *mut f64,
) -> NhStatus {
    guard(|| {
        if out.is_null() {
            return fail(NhStatus::NullPointer, "null output pointer");
        }
        let p = PowerProfile {
            label: String::new(),
            p_inf,
            p_sleep,
            p_adc,
            dt_inf,
            dt_acq,
        };
        from_result(energy::avg_power(&p), |v| *out = v)
    })
}

/// Years of operation at `avg_uw` from a battery of the given capacity and
/// voltage.
#[no_mangle]
pub unsafe extern "C" fn nh_lifetime_years(avg_uw: f64, capacity_mah: f64, voltage: f64, out: *mut f64) -> NhStatus {
    guard(|| {
        if out.is_null() {
            return fail(NhStatus::NullPointer, "null output pointer");
        }
        let battery = Battery { capacity_mah, voltage };
        from_result(energy::lifetime_hours_at(avg_uw, &battery), |h| {
            *out = h / energy::HOURS_PER_YEAR
        })
    })
}

/// Relative energy per inference from power and latency ratios.
#[no_mangle]
pub extern "C" fn nh_energy_ratio(power_ratio: f64, latency_ratio: f64) -> f64 {
    energy::energy_ratio(power_ratio, latency_ratio)
}
