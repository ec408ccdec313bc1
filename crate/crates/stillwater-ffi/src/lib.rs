//! C ABI for the stillwater restoration pipeline.
//!
//! All objects cross the boundary as opaque handles created and destroyed
//! by this library. Every function returns a [`SwStatus`]; on failure a
//! thread-local message is readable through [`sw_last_error`]. No function
//! unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use stillwater::imaging::{load_sequence, mean_frame, save_sequence, Frame, Video};
use stillwater::pipeline::{self, PipelineConfig};
use stillwater::Error;

/// Result of every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwStatus {
    SwOk = 0,
    /// Null pointer, malformed string, or invalid configuration.
    SwInvalidArgument = 1,
    /// I/O failure or malformed data.
    SwDataError = 2,
    /// The solver failed to produce a finite answer.
    SwNumericalError = 3,
    /// An internal invariant was violated.
    SwInternalError = 4,
}

/// Scores of a restoration against a clean reference. Fields that could not
/// be computed are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwQuality {
    pub rmse: f64,
    pub nmi: f64,
    pub ssim: f64,
    pub motion_reduction_percent: f64,
    pub sigma_motion_px: f64,
}

/// An opaque video handle.
pub struct SwVideo {
    inner: Video,
}

/// An opaque single-image handle.
pub struct SwFrame {
    inner: Frame,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> SwStatus {
    match err {
        Error::NonFiniteObjective { .. } | Error::DegenerateSampling { .. } => {
            SwStatus::SwNumericalError
        }
        Error::InvalidInput(_) => SwStatus::SwInvalidArgument,
        _ => SwStatus::SwDataError,
    }
}

fn fail(err: Error) -> SwStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guard(f: impl FnOnce() -> SwStatus + std::panic::UnwindSafe) -> SwStatus {
    match catch_unwind(f) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            SwStatus::SwInternalError
        }
    }
}

unsafe fn cstr<'a>(s: *const c_char) -> Result<&'a str, SwStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(SwStatus::SwInvalidArgument);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        SwStatus::SwInvalidArgument
    })
}

/// Copies the message of the most recent failure on this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn sw_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Loads a numbered PNG sequence directory into a new video handle.
#[no_mangle]
pub unsafe extern "C" fn sw_video_load(dir: *const c_char, out: *mut *mut SwVideo) -> SwStatus {
    guard(AssertUnwindSafe(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SwStatus::SwInvalidArgument;
        }
        let dir = match cstr(dir) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match load_sequence(Path::new(dir)) {
            Ok(video) => {
                *out = Box::into_raw(Box::new(SwVideo { inner: video }));
                SwStatus::SwOk
            }
            Err(e) => fail(e),
        }
    }))
}

/// Builds a video handle from packed row-major grayscale frames in [0, 1].
/// `data` must hold `width * height * frame_count` floats.
#[no_mangle]
pub unsafe extern "C" fn sw_video_from_frames(
    data: *const f32,
    width: usize,
    height: usize,
    frame_count: usize,
    fps: f32,
    out: *mut *mut SwVideo,
) -> SwStatus {
    guard(AssertUnwindSafe(|| {
        if data.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SwStatus::SwInvalidArgument;
        }
        let frame_len = width * height;
        let all = std::slice::from_raw_parts(data, frame_len * frame_count);
        let frames: Result<Vec<Frame>, Error> = all
            .chunks(frame_len)
            .map(|chunk| Frame::from_data(width, height, chunk.to_vec()))
            .collect();
        let video = frames.and_then(|f| Video::new(f, fps));
        match video {
            Ok(v) => {
                *out = Box::into_raw(Box::new(SwVideo { inner: v }));
                SwStatus::SwOk
            }
            Err(e) => fail(e),
        }
    }))
}

/// Writes the video as a numbered PNG sequence directory.
#[no_mangle]
pub unsafe extern "C" fn sw_video_save(video: *const SwVideo, dir: *const c_char) -> SwStatus {
    guard(AssertUnwindSafe(|| {
        if video.is_null() {
            set_error("null video handle");
            return SwStatus::SwInvalidArgument;
        }
        let dir = match cstr(dir) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match save_sequence(&(*video).inner, Path::new(dir)) {
            Ok(()) => SwStatus::SwOk,
            Err(e) => fail(e),
        }
    }))
}

/// Reads the dimensions of a video handle.
#[no_mangle]
pub unsafe extern "C" fn sw_video_dims(
    video: *const SwVideo,
    width: *mut usize,
    height: *mut usize,
    frame_count: *mut usize,
) -> SwStatus {
    guard(AssertUnwindSafe(|| {
        if video.is_null() {
            set_error("null video handle");
            return SwStatus::SwInvalidArgument;
        }
        let v = &(*video).inner;
        if !width.is_null() {
            *width = v.width();
        }
        if !height.is_null() {
            *height = v.height();
        }
        if !frame_count.is_null() {
            *frame_count = v.len();
        }
        SwStatus::SwOk
    }))
}

#[no_mangle]
pub unsafe extern "C" fn sw_video_free(video: *mut SwVideo) {
    if !video.is_null() {
        drop(Box::from_raw(video));
    }
}

/// Copies one frame's pixels into `buf` (`width * height` floats).
#[no_mangle]
pub unsafe extern "C" fn sw_frame_read(
    frame: *const SwFrame,
    buf: *mut f32,
    len: usize,
) -> SwStatus {
    guard(AssertUnwindSafe(|| {
        if frame.is_null() || buf.is_null() {
            set_error("null pointer argument");
            return SwStatus::SwInvalidArgument;
        }
        let data = (*frame).inner.data();
        if len < data.len() {
            set_error(format!("buffer holds {len} floats, frame needs {}", data.len()));
            return SwStatus::SwInvalidArgument;
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        SwStatus::SwOk
    }))
}

#[no_mangle]
pub unsafe extern "C" fn sw_frame_dims(
    frame: *const SwFrame,
    width: *mut usize,
    height: *mut usize,
) -> SwStatus {
    guard(AssertUnwindSafe(|| {
        if frame.is_null() {
            set_error("null frame handle");
            return SwStatus::SwInvalidArgument;
        }
        if !width.is_null() {
            *width = (*frame).inner.width();
        }
        if !height.is_null() {
            *height = (*frame).inner.height();
        }
        SwStatus::SwOk
    }))
}

#[no_mangle]
pub unsafe extern "C" fn sw_frame_free(frame: *mut SwFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

fn parse_config(toml_text: Option<&str>) -> Result<PipelineConfig, Error> {
    match toml_text {
        None => Ok(PipelineConfig::default()),
        Some(text) => {
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("bad config: {e}")))
        }
    }
}

/// Restores a distorted video. `config_toml` may be NULL for defaults; see
/// the library documentation for the schema. On success `*out_restored`
/// holds the restored video and, if non-NULL, `*out_mean` the aggregated
/// still image.
#[no_mangle]
pub unsafe extern "C" fn sw_restore(
    video: *const SwVideo,
    config_toml: *const c_char,
    out_restored: *mut *mut SwVideo,
    out_mean: *mut *mut SwFrame,
) -> SwStatus {
    guard(AssertUnwindSafe(|| {
        if video.is_null() || out_restored.is_null() {
            set_error("null pointer argument");
            return SwStatus::SwInvalidArgument;
        }
        let cfg_text = if config_toml.is_null() {
            None
        } else {
            match cstr(config_toml) {
                Ok(s) => Some(s),
                Err(st) => return st,
            }
        };
        let cfg = match parse_config(cfg_text) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        match pipeline::run_restore(&(*video).inner, &cfg) {
            Ok(out) => {
                *out_restored = Box::into_raw(Box::new(SwVideo { inner: out.restored }));
                if !out_mean.is_null() {
                    *out_mean = Box::into_raw(Box::new(SwFrame { inner: out.mean_image }));
                }
                SwStatus::SwOk
            }
            Err(e) => fail(e),
        }
    }))
}

/// Scores a restored video against a clean reference (the first frame of
/// `clean` if it is a video handle is not accepted here; pass a single
/// frame produced by `sw_restore` or loaded separately). Missing metrics
/// are returned as NaN.
#[no_mangle]
pub unsafe extern "C" fn sw_evaluate(
    clean: *const SwFrame,
    distorted: *const SwVideo,
    restored: *const SwVideo,
    config_toml: *const c_char,
    out: *mut SwQuality,
) -> SwStatus {
    guard(AssertUnwindSafe(|| {
        if clean.is_null() || distorted.is_null() || restored.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SwStatus::SwInvalidArgument;
        }
        let cfg_text = if config_toml.is_null() {
            None
        } else {
            match cstr(config_toml) {
                Ok(s) => Some(s),
                Err(st) => return st,
            }
        };
        let cfg = match parse_config(cfg_text) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let mean = mean_frame(&(*restored).inner);
        match pipeline::evaluate(
            &(*clean).inner,
            &(*distorted).inner,
            &mean,
            &(*restored).inner,
            &cfg,
        ) {
            Ok(report) => {
                *out = SwQuality {
                    rmse: report.rmse,
                    nmi: report.nmi,
                    ssim: report.ssim,
                    motion_reduction_percent: report.motion_reduction.unwrap_or(f64::NAN),
                    sigma_motion_px: report.sigma_motion.unwrap_or(f64::NAN),
                };
                SwStatus::SwOk
            }
            Err(e) => fail(e),
        }
    }))
}

/// Loads a single grayscale PNG into a frame handle.
#[no_mangle]
pub unsafe extern "C" fn sw_frame_load(path: *const c_char, out: *mut *mut SwFrame) -> SwStatus {
    guard(AssertUnwindSafe(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SwStatus::SwInvalidArgument;
        }
        let path = match cstr(path) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match stillwater::imaging::load_frame(Path::new(path)) {
            Ok(frame) => {
                *out = Box::into_raw(Box::new(SwFrame { inner: frame }));
                SwStatus::SwOk
            }
            Err(e) => fail(e),
        }
    }))
}
