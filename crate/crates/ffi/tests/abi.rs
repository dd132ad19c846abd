use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use reloc_ffi::*;

fn last_error() -> String {
    let p = reloc_last_error_message();
    assert!(!p.is_null(), "an error message should be set");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn generated(kind: &str, seed: u64) -> *mut RelocMap {
    let kind = CString::new(kind).unwrap();
    let mut map = ptr::null_mut();
    let st = unsafe { reloc_map_generate(kind.as_ptr(), 16.0, 10.0, 0.05, seed, &mut map) };
    assert_eq!(st, RelocStatus::Ok);
    assert!(!map.is_null());
    map
}

#[test]
fn round_trip_recovers_simulated_pose() {
    let map = generated("cluttered_office", 3);
    let truth = RelocPose { x: 4.0, y: 3.0, theta: 0.7 };
    let mut scan = ptr::null_mut();
    assert_eq!(unsafe { reloc_simulate_scan(map, truth, ptr::null(), 5, &mut scan) }, RelocStatus::Ok);
    let mut out = std::mem::MaybeUninit::<RelocResult>::uninit();
    let st = unsafe { reloc_relocalize(map, scan, ptr::null(), 11, out.as_mut_ptr()) };
    assert_eq!(st, RelocStatus::Ok);
    let r = unsafe { out.assume_init() };
    let d = ((r.pose.x - truth.x).powi(2) + (r.pose.y - truth.y).powi(2)).sqrt();
    let dtheta = reloc_core::wrap_angle(r.pose.theta - truth.theta).abs();
    assert!(d < 0.5 && dtheta < 30f64.to_radians(), "estimate {:?}", r.pose);
    assert!(r.confidence > 0.0 && r.confidence <= 1.0);
    assert!(r.hypotheses_evaluated <= r.hypothesis_count);
    unsafe {
        reloc_scan_free(scan);
        reloc_map_free(map);
    }
}

#[test]
fn results_match_the_library() {
    let kind = CString::new("split_rooms").unwrap();
    let mut map = ptr::null_mut();
    assert_eq!(unsafe { reloc_map_generate(kind.as_ptr(), 16.0, 10.0, 0.05, 1, &mut map) }, RelocStatus::Ok);
    let grid = reloc_core::sim::generate_map(reloc_core::sim::MapKind::SplitRooms, (16.0, 10.0), 0.05, 1).unwrap();
    let pose = reloc_core::Pose::new(3.0, 3.5, -0.4);
    let scan = reloc_core::sim::simulate_scan(&grid, &pose, &Default::default(), 2).unwrap();

    let mut handle = ptr::null_mut();
    let st = unsafe {
        reloc_scan_new(scan.angle_min(), scan.angle_increment(), scan.range_max(), scan.ranges().as_ptr(), scan.len(), &mut handle)
    };
    assert_eq!(st, RelocStatus::Ok);
    assert_eq!(unsafe { reloc_scan_len(handle) }, scan.len());

    let config = CString::new(r#"{"batch_size": 100}"#).unwrap();
    let mut out = std::mem::MaybeUninit::<RelocResult>::uninit();
    assert_eq!(unsafe { reloc_relocalize(map, handle, config.as_ptr(), 4, out.as_mut_ptr()) }, RelocStatus::Ok);
    let via_ffi = unsafe { out.assume_init() };

    let cfg = reloc_core::pipeline::PipelineConfig { batch_size: 100, ..Default::default() };
    let direct = reloc_core::pipeline::relocalize(&grid, &scan, &cfg, 4).unwrap();
    assert_eq!(via_ffi.pose.x.to_bits(), direct.pose.x.to_bits());
    assert_eq!(via_ffi.pose.y.to_bits(), direct.pose.y.to_bits());
    assert_eq!(via_ffi.pose.theta.to_bits(), direct.pose.theta.to_bits());
    assert_eq!(via_ffi.batches_processed, direct.batches_processed);
    unsafe {
        reloc_scan_free(handle);
        reloc_map_free(map);
    }
}

#[test]
fn scan_ranges_copy_respects_capacity() {
    let ranges = [1.0, 2.0, -1.0, 3.0];
    let mut scan = ptr::null_mut();
    assert_eq!(unsafe { reloc_scan_new(0.0, 0.1, 10.0, ranges.as_ptr(), 4, &mut scan) }, RelocStatus::Ok);
    let mut buf = [0.0; 3];
    let mut written = 0;
    assert_eq!(unsafe { reloc_scan_ranges(scan, buf.as_mut_ptr(), 3, &mut written) }, RelocStatus::Ok);
    assert_eq!(written, 3);
    assert_eq!(&buf[..2], &[1.0, 2.0]);
    assert!(buf[2].is_nan());
    unsafe { reloc_scan_free(scan) };
}

#[test]
fn map_info_and_disk_round_trip() {
    let map = generated("empty_room", 0);
    let mut info = std::mem::MaybeUninit::<RelocMapInfo>::uninit();
    assert_eq!(unsafe { reloc_map_info(map, info.as_mut_ptr()) }, RelocStatus::Ok);
    let info = unsafe { info.assume_init() };
    assert_eq!(info.width * info.height, info.occupied_cells + info.free_cells + info.unknown_cells);
    assert!((info.resolution - 0.05).abs() < 1e-12);

    let grid = reloc_core::sim::generate_map(reloc_core::sim::MapKind::EmptyRoom, (16.0, 10.0), 0.05, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let yaml = dir.path().join("room.yaml");
    reloc_core::map::save_map(&grid, &yaml).unwrap();
    let path = CString::new(yaml.to_str().unwrap()).unwrap();
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { reloc_map_load(path.as_ptr(), &mut loaded) }, RelocStatus::Ok);
    let mut info2 = std::mem::MaybeUninit::<RelocMapInfo>::uninit();
    assert_eq!(unsafe { reloc_map_info(loaded, info2.as_mut_ptr()) }, RelocStatus::Ok);
    assert_eq!(unsafe { info2.assume_init() }, info);
    unsafe {
        reloc_map_free(loaded);
        reloc_map_free(map);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut map = ptr::null_mut();
    assert_eq!(unsafe { reloc_map_load(ptr::null(), &mut map) }, RelocStatus::NullArg);
    assert!(last_error().contains("yaml_path"));

    let missing = CString::new("/definitely/not/here.yaml").unwrap();
    assert_eq!(unsafe { reloc_map_load(missing.as_ptr(), &mut map) }, RelocStatus::Io);
    assert!(map.is_null());

    let bogus = CString::new("castle").unwrap();
    assert_eq!(unsafe { reloc_map_generate(bogus.as_ptr(), 10.0, 10.0, 0.05, 0, &mut map) }, RelocStatus::InvalidArg);

    let mut scan = ptr::null_mut();
    assert_eq!(unsafe { reloc_scan_new(0.0, -0.1, 10.0, ptr::null(), 0, &mut scan) }, RelocStatus::Parse);
    assert_eq!(unsafe { reloc_scan_new(0.0, 0.1, 10.0, ptr::null(), 3, &mut scan) }, RelocStatus::NullArg);

    let good = generated("empty_room", 0);
    let nan = [f64::NAN; 8];
    assert_eq!(unsafe { reloc_scan_new(0.0, 0.1, 10.0, nan.as_ptr(), 8, &mut scan) }, RelocStatus::Ok);
    let mut out = std::mem::MaybeUninit::<RelocResult>::uninit();
    assert_eq!(unsafe { reloc_relocalize(good, scan, ptr::null(), 0, out.as_mut_ptr()) }, RelocStatus::NoValidBeams);

    let bad_cfg = CString::new("{not json").unwrap();
    assert_eq!(unsafe { reloc_relocalize(good, scan, bad_cfg.as_ptr(), 0, out.as_mut_ptr()) }, RelocStatus::Parse);
    let far = CString::new(r#"{"start": [500.0, 500.0]}"#).unwrap();
    let ones = [2.0; 200];
    let mut scan2 = ptr::null_mut();
    assert_eq!(unsafe { reloc_scan_new(-1.9, 0.019, 10.0, ones.as_ptr(), 200, &mut scan2) }, RelocStatus::Ok);
    let st = unsafe { reloc_relocalize(good, scan2, far.as_ptr(), 0, out.as_mut_ptr()) };
    assert!(matches!(st, RelocStatus::Infeasible | RelocStatus::InvalidArg), "{st:?}");
    assert!(!last_error().is_empty());
    unsafe {
        reloc_scan_free(scan);
        reloc_scan_free(scan2);
        reloc_map_free(good);
        reloc_map_free(ptr::null_mut());
        reloc_scan_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(reloc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/reloc.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["reloc_map_load", "reloc_relocalize", "reloc_last_error_message", "RELOC_STATUS_INTERNAL"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler available; skipping syntax check");
        return;
    };
    assert!(status.success(), "reloc.h does not compile");
}
