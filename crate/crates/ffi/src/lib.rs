//! C ABI over `reloc-core`.
//!
//! Every function returns a [`RelocStatus`]. On failure a human-readable
//! message is stored per thread and can be fetched with
//! [`reloc_last_error_message`]. Maps and scans are opaque handles owned by
//! the caller and released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use reloc_core::map::{load_map, OccupancyGrid};
use reloc_core::pipeline::{relocalize, PipelineConfig};
use reloc_core::scan::{load_scan, LidarScan};
use reloc_core::sim::{generate_map, simulate_scan, LidarModel, MapKind};
use reloc_core::{Pose, RelocError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelocStatus {
    Ok = 0,
    NullArg = 1,
    InvalidArg = 2,
    Io = 3,
    Parse = 4,
    Infeasible = 5,
    NoValidBeams = 6,
    Internal = 99,
}

/// Opaque occupancy grid.
pub struct RelocMap {
    grid: OccupancyGrid,
}

/// Opaque range scan.
pub struct RelocScan {
    scan: LidarScan,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelocPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelocMapInfo {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: RelocPose,
    pub occupied_cells: usize,
    pub free_cells: usize,
    pub unknown_cells: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelocLidarModel {
    /// Radians.
    pub fov: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub noise_sigma: f64,
    /// Probability in `[0, 1)` that a beam is reported invalid.
    pub dropout: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelocResult {
    pub pose: RelocPose,
    pub confidence: f64,
    pub terminated_early: bool,
    pub batches_processed: usize,
    pub hypotheses_evaluated: usize,
    pub hypothesis_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &RelocError) -> RelocStatus {
    match err {
        RelocError::Io { .. } => RelocStatus::Io,
        RelocError::MapLoad(_) | RelocError::ScanParse(_) | RelocError::Json(_) | RelocError::Csv(_) => {
            RelocStatus::Parse
        }
        RelocError::InvalidConfig(_) | RelocError::OutOfBounds { .. } | RelocError::EmptyMap => {
            RelocStatus::InvalidArg
        }
        RelocError::Infeasible { .. } => RelocStatus::Infeasible,
        RelocError::NoValidBeams => RelocStatus::NoValidBeams,
    }
}

struct Failure(RelocStatus, String);

impl From<RelocError> for Failure {
    fn from(e: RelocError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null_arg(name: &str) -> Failure {
    Failure(RelocStatus::NullArg, format!("`{name}` must not be NULL"))
}

fn guarded(body: impl FnOnce() -> Result<(), Failure>) -> RelocStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RelocStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            RelocStatus::Internal
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string valid for reads.
unsafe fn c_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(RelocStatus::InvalidArg, format!("`{name}` is not valid UTF-8")))
}

fn out_ptr<T>(out: *mut *mut T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(null_arg(name))
    } else {
        Ok(())
    }
}

/// Loads a map from a YAML descriptor and its raster.
///
/// # Safety
/// `yaml_path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reloc_map_load(yaml_path: *const c_char, out: *mut *mut RelocMap) -> RelocStatus {
    guarded(|| {
        out_ptr(out, "out")?;
        let path = PathBuf::from(c_str(yaml_path, "yaml_path")?);
        let grid = load_map(path)?;
        *out = Box::into_raw(Box::new(RelocMap { grid }));
        Ok(())
    })
}

/// Generates a synthetic map. `kind` is one of `empty_room`,
/// `cluttered_office`, `corridor_loop` or `split_rooms`.
///
/// # Safety
/// `kind` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reloc_map_generate(
    kind: *const c_char,
    width: f64,
    height: f64,
    resolution: f64,
    seed: u64,
    out: *mut *mut RelocMap,
) -> RelocStatus {
    guarded(|| {
        out_ptr(out, "out")?;
        let kind: MapKind = c_str(kind, "kind")?.parse()?;
        let grid = generate_map(kind, (width, height), resolution, seed)?;
        *out = Box::into_raw(Box::new(RelocMap { grid }));
        Ok(())
    })
}

/// # Safety
/// `map` must be NULL or a handle obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn reloc_map_free(map: *mut RelocMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reloc_map_info(map: *const RelocMap, out: *mut RelocMapInfo) -> RelocStatus {
    guarded(|| {
        let map = map.as_ref().ok_or_else(|| null_arg("map"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let g = &map.grid;
        let o = g.origin();
        *out = RelocMapInfo {
            width: g.width(),
            height: g.height(),
            resolution: g.resolution(),
            origin: RelocPose {
                x: o.x,
                y: o.y,
                theta: o.theta,
            },
            occupied_cells: g.count(reloc_core::map::CellState::Occupied),
            free_cells: g.count(reloc_core::map::CellState::Free),
            unknown_cells: g.count(reloc_core::map::CellState::Unknown),
        };
        Ok(())
    })
}

/// Builds a scan from `len` ranges. Ranges outside `(0, range_max]` or
/// non-finite become invalid beams.
///
/// # Safety
/// `ranges` must point to `len` readable doubles (it may be NULL when `len` is 0);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reloc_scan_new(
    angle_min: f64,
    angle_increment: f64,
    range_max: f64,
    ranges: *const f64,
    len: usize,
    out: *mut *mut RelocScan,
) -> RelocStatus {
    guarded(|| {
        out_ptr(out, "out")?;
        let values: &[f64] = if len == 0 {
            &[]
        } else if ranges.is_null() {
            return Err(null_arg("ranges"));
        } else {
            std::slice::from_raw_parts(ranges, len)
        };
        let scan = LidarScan::new(angle_min, angle_increment, range_max, values.iter().copied())?;
        *out = Box::into_raw(Box::new(RelocScan { scan }));
        Ok(())
    })
}

/// Loads a scan from its JSON form.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reloc_scan_load(path: *const c_char, out: *mut *mut RelocScan) -> RelocStatus {
    guarded(|| {
        out_ptr(out, "out")?;
        let scan = load_scan(PathBuf::from(c_str(path, "path")?))?;
        *out = Box::into_raw(Box::new(RelocScan { scan }));
        Ok(())
    })
}

/// # Safety
/// `scan` must be NULL or a handle obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn reloc_scan_free(scan: *mut RelocScan) {
    if !scan.is_null() {
        drop(Box::from_raw(scan));
    }
}

/// Number of beams (valid or not) in `scan`, or 0 for NULL.
///
/// # Safety
/// `scan` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn reloc_scan_len(scan: *const RelocScan) -> usize {
    scan.as_ref().map_or(0, |s| s.scan.len())
}

/// Copies up to `capacity` ranges into `buf`; invalid beams are written as NaN.
/// `written` receives the number of values copied.
///
/// # Safety
/// `scan` must be a live handle; `buf` must hold `capacity` doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reloc_scan_ranges(
    scan: *const RelocScan,
    buf: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> RelocStatus {
    guarded(|| {
        let scan = scan.as_ref().ok_or_else(|| null_arg("scan"))?;
        if written.is_null() {
            return Err(null_arg("written"));
        }
        let ranges = scan.scan.ranges();
        let n = ranges.len().min(capacity);
        if n > 0 {
            if buf.is_null() {
                return Err(null_arg("buf"));
            }
            std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&ranges[..n]);
        }
        *written = n;
        Ok(())
    })
}

/// Fills `out` with the default sensor model (220° field of view, 1° steps,
/// 20 m range, 0.02 m noise, 2% dropout).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reloc_lidar_default(out: *mut RelocLidarModel) -> RelocStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let m = LidarModel::default();
        *out = RelocLidarModel {
            fov: m.fov,
            angle_increment: m.angle_increment,
            range_max: m.range_max,
            noise_sigma: m.noise_sigma,
            dropout: m.dropout,
        };
        Ok(())
    })
}

/// Simulates a scan taken at `pose`. A NULL `lidar` selects the default model.
///
/// # Safety
/// `map` must be a live handle; `lidar` must be NULL or readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reloc_simulate_scan(
    map: *const RelocMap,
    pose: RelocPose,
    lidar: *const RelocLidarModel,
    seed: u64,
    out: *mut *mut RelocScan,
) -> RelocStatus {
    guarded(|| {
        out_ptr(out, "out")?;
        let map = map.as_ref().ok_or_else(|| null_arg("map"))?;
        let model = match lidar.as_ref() {
            Some(l) => LidarModel {
                fov: l.fov,
                angle_increment: l.angle_increment,
                range_max: l.range_max,
                noise_sigma: l.noise_sigma,
                dropout: l.dropout,
            },
            None => LidarModel::default(),
        };
        let scan = simulate_scan(&map.grid, &Pose::new(pose.x, pose.y, pose.theta), &model, seed)?;
        *out = Box::into_raw(Box::new(RelocScan { scan }));
        Ok(())
    })
}

/// Runs global relocalization. `config_json` may be NULL for defaults; it
/// otherwise holds a JSON object whose fields override the defaults.
///
/// # Safety
/// `map` and `scan` must be live handles; `config_json` must be NULL or a
/// valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reloc_relocalize(
    map: *const RelocMap,
    scan: *const RelocScan,
    config_json: *const c_char,
    seed: u64,
    out: *mut RelocResult,
) -> RelocStatus {
    guarded(|| {
        let map = map.as_ref().ok_or_else(|| null_arg("map"))?;
        let scan = scan.as_ref().ok_or_else(|| null_arg("scan"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let cfg = if config_json.is_null() {
            PipelineConfig::default()
        } else {
            PipelineConfig::from_json(c_str(config_json, "config_json")?)?
        };
        let r = relocalize(&map.grid, &scan.scan, &cfg, seed)?;
        *out = RelocResult {
            pose: RelocPose {
                x: r.pose.x,
                y: r.pose.y,
                theta: r.pose.theta,
            },
            confidence: r.confidence,
            terminated_early: r.terminated_early,
            batches_processed: r.batches_processed,
            hypotheses_evaluated: r.hypotheses_evaluated,
            hypothesis_count: r.hypothesis_count,
        };
        Ok(())
    })
}

/// Message describing the most recent failure on this thread, or NULL if the
/// last call succeeded. The pointer stays valid until the next call into
/// this library from the same thread.
#[no_mangle]
pub extern "C" fn reloc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn reloc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
