//! Map descriptor (YAML) plus 8-bit grayscale image, in the usual map-server layout.

use std::fs;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageReader};
use serde::{Deserialize, Deserializer, Serialize};

use super::{CellState, GridGeometry, OccupancyGrid};
use crate::error::{RelocError, Result};
use crate::geometry::Pose;

const FREE_PIXEL: u8 = 254;
const OCCUPIED_PIXEL: u8 = 0;
const UNKNOWN_PIXEL: u8 = 205;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDescriptor {
    pub image: PathBuf,
    pub resolution: f64,
    pub origin: [f64; 3],
    #[serde(default = "default_occupied_thresh")]
    pub occupied_thresh: f64,
    #[serde(default = "default_free_thresh")]
    pub free_thresh: f64,
    #[serde(default, deserialize_with = "flag_from_int_or_bool")]
    pub negate: u8,
}

fn default_occupied_thresh() -> f64 {
    0.65
}

fn default_free_thresh() -> f64 {
    0.196
}

fn flag_from_int_or_bool<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u8, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Int(i64),
        Bool(bool),
    }
    match Flag::deserialize(d)? {
        Flag::Int(0) | Flag::Bool(false) => Ok(0),
        Flag::Int(1) | Flag::Bool(true) => Ok(1),
        Flag::Int(other) => Err(serde::de::Error::custom(format!(
            "negate must be 0 or 1, got {other}"
        ))),
    }
}

impl MapDescriptor {
    pub fn classify(&self, pixel: u8) -> CellState {
        let value = f64::from(pixel) / 255.0;
        let occupancy = if self.negate == 0 { 1.0 - value } else { value };
        if occupancy > self.occupied_thresh {
            CellState::Occupied
        } else if occupancy < self.free_thresh {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }
}

/// Loads a map from its descriptor file; the image path is resolved relative
/// to the descriptor's directory.
pub fn load_map(descriptor_path: impl AsRef<Path>) -> Result<OccupancyGrid> {
    let descriptor_path = descriptor_path.as_ref();
    let text = fs::read_to_string(descriptor_path)
        .map_err(|e| RelocError::io(descriptor_path, e))?;
    let descriptor: MapDescriptor = serde_yaml::from_str(&text).map_err(|e| {
        RelocError::MapLoad(format!("{}: {e}", descriptor_path.display()))
    })?;
    if !(descriptor.free_thresh <= descriptor.occupied_thresh) {
        return Err(RelocError::MapLoad(format!(
            "free_thresh {} exceeds occupied_thresh {}",
            descriptor.free_thresh, descriptor.occupied_thresh
        )));
    }

    let image_path = match descriptor_path.parent() {
        Some(dir) if descriptor.image.is_relative() => dir.join(&descriptor.image),
        _ => descriptor.image.clone(),
    };
    let bytes = fs::read(&image_path).map_err(|e| RelocError::io(&image_path, e))?;
    let decoded = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| RelocError::io(&image_path, e))?
        .decode()
        .map_err(|e| RelocError::MapLoad(format!("{}: {e}", image_path.display())))?
        .into_luma8();
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let raw = decoded.into_raw();
    if raw.len() != width * height {
        return Err(RelocError::MapLoad(format!(
            "{}: {} pixels for a {width}x{height} image",
            image_path.display(),
            raw.len()
        )));
    }
    let cells = classify_raster(&descriptor, &raw, width, height)?;

    let [ox, oy, oyaw] = descriptor.origin;
    let geometry = GridGeometry {
        width,
        height,
        resolution: descriptor.resolution,
        origin: Pose::new(ox, oy, oyaw),
    };
    OccupancyGrid::new(geometry, cells)
}

/// Turns a row-major raster with the top row first into bottom-up cells.
pub(crate) fn classify_raster(
    descriptor: &MapDescriptor,
    raw: &[u8],
    width: usize,
    height: usize,
) -> Result<Vec<CellState>> {
    if raw.len() != width * height {
        return Err(RelocError::MapLoad(format!(
            "{} pixels for a {width}x{height} image",
            raw.len()
        )));
    }
    let mut cells = Vec::with_capacity(raw.len());
    for iy in 0..height {
        let row = &raw[(height - 1 - iy) * width..(height - iy) * width];
        cells.extend(row.iter().map(|&px| descriptor.classify(px)));
    }
    Ok(cells)
}

/// Writes `<stem>.yaml` and `<stem>.pgm` side by side.
pub fn save_map(grid: &OccupancyGrid, descriptor_path: impl AsRef<Path>) -> Result<()> {
    let descriptor_path = descriptor_path.as_ref();
    let image_path = descriptor_path.with_extension("pgm");
    let image_name = image_path
        .file_name()
        .map(PathBuf::from)
        .ok_or_else(|| RelocError::MapLoad("descriptor path has no file name".into()))?;

    let (w, h) = (grid.width(), grid.height());
    let mut raw = Vec::with_capacity(w * h);
    for row in (0..h).rev() {
        raw.extend((0..w).map(|ix| match grid.get(ix, row) {
            CellState::Free => FREE_PIXEL,
            CellState::Occupied => OCCUPIED_PIXEL,
            CellState::Unknown => UNKNOWN_PIXEL,
        }));
    }
    let mut encoded = Vec::new();
    PnmEncoder::new(&mut encoded)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&raw, w as u32, h as u32, ExtendedColorType::L8)
        .map_err(|e| RelocError::MapLoad(format!("encoding {}: {e}", image_path.display())))?;
    fs::write(&image_path, encoded).map_err(|e| RelocError::io(&image_path, e))?;

    let origin = grid.origin();
    let descriptor = MapDescriptor {
        image: image_name,
        resolution: grid.resolution(),
        origin: [origin.x, origin.y, origin.theta],
        occupied_thresh: default_occupied_thresh(),
        free_thresh: default_free_thresh(),
        negate: 0,
    };
    let text = serde_yaml::to_string(&descriptor)
        .map_err(|e| RelocError::MapLoad(format!("serializing descriptor: {e}")))?;
    fs::write(descriptor_path, text).map_err(|e| RelocError::io(descriptor_path, e))
}
