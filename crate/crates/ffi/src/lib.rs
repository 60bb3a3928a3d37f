//! C interface to the `uncommon` detector.
//!
//! Images and analyses are opaque handles created and released through this
//! API. Every fallible function returns an [`UncStatus`]; on failure the
//! message is available from [`unc_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use uncommon::{
    analyze, compute_rates, load_image, preprocess, Analysis, Error, PipelineConfig, RasterImage,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Dimension = 5,
    Contract = 6,
    Degenerate = 7,
    UndefinedRates = 8,
    Mismatch = 9,
    Json = 10,
    Panic = 11,
}

/// Point list produced from the blurred interest map.
pub const UNC_SCALE_BLURRED: u32 = 0;
/// Point list produced from the unblurred interest map.
pub const UNC_SCALE_RAW: u32 = 1;

/// Pipeline parameters. Obtain defaults from [`unc_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncConfig {
    pub downsample_factor: usize,
    pub crop_width: usize,
    pub crop_height: usize,
    pub quantization_bins: usize,
    pub histogram_sigma: f64,
    pub min_peak_fraction: f64,
    pub max_classes: usize,
    pub blur_width: f64,
    /// Interest blur standard deviation; zero or less means `blur_width / 2`.
    pub blur_sigma: f64,
    pub top_k: usize,
    pub suppression_radius: f64,
    pub match_radius: f64,
}

impl From<&PipelineConfig> for UncConfig {
    fn from(c: &PipelineConfig) -> Self {
        UncConfig {
            downsample_factor: c.downsample_factor,
            crop_width: c.crop_width,
            crop_height: c.crop_height,
            quantization_bins: c.quantization_bins,
            histogram_sigma: c.histogram_sigma,
            min_peak_fraction: c.min_peak_fraction,
            max_classes: c.max_classes,
            blur_width: c.blur_width,
            blur_sigma: c.blur_sigma.unwrap_or(0.0),
            top_k: c.top_k,
            suppression_radius: c.suppression_radius,
            match_radius: c.match_radius,
        }
    }
}

impl From<&UncConfig> for PipelineConfig {
    fn from(c: &UncConfig) -> Self {
        PipelineConfig {
            downsample_factor: c.downsample_factor,
            crop_width: c.crop_width,
            crop_height: c.crop_height,
            quantization_bins: c.quantization_bins,
            histogram_sigma: c.histogram_sigma,
            min_peak_fraction: c.min_peak_fraction,
            max_classes: c.max_classes,
            blur_width: c.blur_width,
            blur_sigma: (c.blur_sigma > 0.0).then_some(c.blur_sigma),
            top_k: c.top_k,
            suppression_radius: c.suppression_radius,
            match_radius: c.match_radius,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncPoint {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncRates {
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// Opaque RGB image.
pub struct UncImage(RasterImage);

/// Opaque analysis result.
pub struct UncAnalysis(Analysis);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(UncStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => UncStatus::Io,
            Error::Format { .. } => UncStatus::Format,
            Error::Dimension(_) => UncStatus::Dimension,
            Error::Contract(_) => UncStatus::Contract,
            Error::Degenerate(_) => UncStatus::Degenerate,
            Error::UndefinedRates => UncStatus::UndefinedRates,
            Error::Mismatch(_) => UncStatus::Mismatch,
            Error::Json { .. } => UncStatus::Json,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(UncStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(UncStatus::InvalidArgument, msg.into())
}

/// Run `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UncStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UncStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_else(|| "unknown panic".to_owned());
            set_last_error(format!("internal panic: {msg}"));
            UncStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn point_list(a: &Analysis, scale: u32) -> Result<&uncommon::PointList, Failure> {
    match scale {
        UNC_SCALE_BLURRED => Ok(&a.points.blurred),
        UNC_SCALE_RAW => Ok(&a.points.raw),
        other => Err(invalid(format!("unknown scale {other}"))),
    }
}

/// The message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn unc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn unc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn unc_config_default() -> UncConfig {
    UncConfig::from(&PipelineConfig::default())
}

/// Load a PPM, PGM or PNG file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn unc_image_load(path: *const c_char, out: *mut *mut UncImage) -> UncStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| invalid("path is not valid UTF-8"))?;
        let img = load_image(path)?;
        unsafe { write_out(out, UncImage(img)) }
    })
}

/// Wrap interleaved 8-bit RGB samples (`width * height * 3` bytes).
///
/// # Safety
/// `data` must point to `width * height * 3` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn unc_image_from_rgb8(
    data: *const u8,
    width: usize,
    height: usize,
    out: *mut *mut UncImage,
) -> UncStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| invalid("image size overflows"))?;
        if len == 0 {
            return Err(invalid("image must not be empty"));
        }
        let bytes = unsafe { std::slice::from_raw_parts(data, len) };
        let img = RasterImage::from_rgb8(width, height, bytes)?;
        unsafe { write_out(out, UncImage(img)) }
    })
}

/// Downsample and center-crop according to `config`.
///
/// # Safety
/// All pointers must be valid; `out` receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn unc_image_preprocess(
    image: *const UncImage,
    config: *const UncConfig,
    out: *mut *mut UncImage,
) -> UncStatus {
    guard(|| {
        let img = unsafe { deref(image, "image") }?;
        let config = PipelineConfig::from(unsafe { deref(config, "config") }?);
        config.validate()?;
        let pre = preprocess(
            &img.0,
            config.downsample_factor,
            config.crop_width,
            config.crop_height,
        )?;
        unsafe { write_out(out, UncImage(pre)) }
    })
}

/// Width in pixels, or 0 for a null handle.
///
/// # Safety
/// `image` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn unc_image_width(image: *const UncImage) -> usize {
    unsafe { image.as_ref() }.map_or(0, |i| i.0.width())
}

/// Height in pixels, or 0 for a null handle.
///
/// # Safety
/// `image` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn unc_image_height(image: *const UncImage) -> usize {
    unsafe { image.as_ref() }.map_or(0, |i| i.0.height())
}

/// # Safety
/// `image` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn unc_image_free(image: *mut UncImage) {
    if !image.is_null() {
        drop(unsafe { Box::from_raw(image) });
    }
}

/// Run the detector on an already preprocessed image.
///
/// # Safety
/// All pointers must be valid; `out` receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn unc_analyze(
    image: *const UncImage,
    config: *const UncConfig,
    out: *mut *mut UncAnalysis,
) -> UncStatus {
    guard(|| {
        let img = unsafe { deref(image, "image") }?;
        let config = PipelineConfig::from(unsafe { deref(config, "config") }?);
        let analysis = analyze(&img.0, &config)?;
        unsafe { write_out(out, UncAnalysis(analysis)) }
    })
}

/// Number of points at `scale`, or 0 for a null handle or unknown scale.
///
/// # Safety
/// `analysis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn unc_analysis_point_count(
    analysis: *const UncAnalysis,
    scale: u32,
) -> usize {
    unsafe { analysis.as_ref() }
        .and_then(|a| point_list(&a.0, scale).ok())
        .map_or(0, |l| l.points.len())
}

/// Copy point `index` (0 = strongest) at `scale` into `out`.
///
/// # Safety
/// `analysis` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn unc_analysis_point(
    analysis: *const UncAnalysis,
    scale: u32,
    index: usize,
    out: *mut UncPoint,
) -> UncStatus {
    guard(|| {
        let a = unsafe { deref(analysis, "analysis") }?;
        let list = point_list(&a.0, scale)?;
        let p = list
            .points
            .get(index)
            .ok_or_else(|| invalid(format!("point index {index} out of range")))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        unsafe {
            *out = UncPoint {
                x: p.x,
                y: p.y,
                score: p.score,
            }
        };
        Ok(())
    })
}

/// True when the interest map at `scale` was constant, so the points are
/// tie-break positions only.
///
/// # Safety
/// `analysis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn unc_analysis_is_degenerate(
    analysis: *const UncAnalysis,
    scale: u32,
) -> bool {
    unsafe { analysis.as_ref() }
        .and_then(|a| point_list(&a.0, scale).ok())
        .is_some_and(|l| l.degenerate)
}

/// Copy the unblurred interest map (row-major, values 0..=24) into `buf`,
/// which must hold at least `width * height` bytes.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn unc_analysis_copy_raw_interest(
    analysis: *const UncAnalysis,
    buf: *mut u8,
    len: usize,
) -> UncStatus {
    guard(|| {
        let a = unsafe { deref(analysis, "analysis") }?;
        let src = a.0.interest.raw.as_slice();
        if buf.is_null() {
            return Err(null("buffer"));
        }
        if len < src.len() {
            return Err(invalid(format!(
                "buffer holds {len} bytes, need {}",
                src.len()
            )));
        }
        unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
        Ok(())
    })
}

/// Copy the blurred interest map (row-major) into `buf`, which must hold
/// at least `width * height` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn unc_analysis_copy_blurred_interest(
    analysis: *const UncAnalysis,
    buf: *mut f64,
    len: usize,
) -> UncStatus {
    guard(|| {
        let a = unsafe { deref(analysis, "analysis") }?;
        let src = a.0.interest.blurred.as_slice();
        if buf.is_null() {
            return Err(null("buffer"));
        }
        if len < src.len() {
            return Err(invalid(format!(
                "buffer holds {len} values, need {}",
                src.len()
            )));
        }
        unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
        Ok(())
    })
}

/// # Safety
/// `analysis` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn unc_analysis_free(analysis: *mut UncAnalysis) {
    if !analysis.is_null() {
        drop(unsafe { Box::from_raw(analysis) });
    }
}

/// Concurrence rates; all three share the denominator `tp + fp`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn unc_compute_rates(
    tp: usize,
    fp: usize,
    fn_count: usize,
    out: *mut UncRates,
) -> UncStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let r = compute_rates(tp, fp, fn_count)?;
        unsafe {
            *out = UncRates {
                tpr: r.tpr,
                fpr: r.fpr,
                fnr: r.fnr,
            }
        };
        Ok(())
    })
}
