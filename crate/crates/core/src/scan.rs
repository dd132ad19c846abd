//! LiDAR scans, stride downsampling, and valid-beam sections on the panoramic index grid.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{RelocError, Result};

/// One planar LiDAR sweep. Invalid returns are stored as `NaN`.
#[derive(Debug, Clone)]
pub struct LidarScan {
    angle_min: f64,
    angle_increment: f64,
    range_max: f64,
    ranges: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScanFile {
    angle_min: f64,
    angle_increment: f64,
    range_max: f64,
    ranges: Vec<Option<f64>>,
}

impl LidarScan {
    /// Builds a scan; any range outside `(0, range_max]` (or non-finite)
    /// becomes the invalid sentinel.
    pub fn new(
        angle_min: f64,
        angle_increment: f64,
        range_max: f64,
        ranges: impl IntoIterator<Item = f64>,
    ) -> Result<Self> {
        if !(angle_increment > 0.0 && angle_increment.is_finite()) {
            return Err(RelocError::ScanParse(format!(
                "angle_increment must be positive, got {angle_increment}"
            )));
        }
        if !angle_min.is_finite() {
            return Err(RelocError::ScanParse("angle_min must be finite".into()));
        }
        if !(range_max > 0.0 && range_max.is_finite()) {
            return Err(RelocError::ScanParse(format!(
                "range_max must be positive, got {range_max}"
            )));
        }
        let ranges = ranges
            .into_iter()
            .map(|z| if z > 0.0 && z <= range_max { z } else { f64::NAN })
            .collect();
        Ok(Self {
            angle_min,
            angle_increment,
            range_max,
            ranges,
        })
    }

    pub fn angle_min(&self) -> f64 {
        self.angle_min
    }

    pub fn angle_increment(&self) -> f64 {
        self.angle_increment
    }

    pub fn range_max(&self) -> f64 {
        self.range_max
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn angle(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment
    }

    pub fn valid_count(&self) -> usize {
        self.ranges.iter().filter(|z| !z.is_nan()).count()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScanFile =
            serde_json::from_str(text).map_err(|e| RelocError::ScanParse(e.to_string()))?;
        Self::new(
            file.angle_min,
            file.angle_increment,
            file.range_max,
            file.ranges.into_iter().map(|z| z.unwrap_or(f64::NAN)),
        )
    }

    pub fn to_json(&self) -> String {
        let file = ScanFile {
            angle_min: self.angle_min,
            angle_increment: self.angle_increment,
            range_max: self.range_max,
            ranges: self
                .ranges
                .iter()
                .map(|&z| if z.is_nan() { None } else { Some(z) })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("scan serializes")
    }
}

impl PartialEq for LidarScan {
    fn eq(&self, other: &Self) -> bool {
        self.angle_min == other.angle_min
            && self.angle_increment == other.angle_increment
            && self.range_max == other.range_max
            && self.ranges.len() == other.ranges.len()
            && self
                .ranges
                .iter()
                .zip(&other.ranges)
                .all(|(a, b)| a == b || (a.is_nan() && b.is_nan()))
    }
}

pub fn load_scan(path: impl AsRef<Path>) -> Result<LidarScan> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| RelocError::io(path, e))?;
    LidarScan::from_json(&text)
        .map_err(|e| RelocError::ScanParse(format!("{}: {e}", path.display())))
}

pub fn save_scan(scan: &LidarScan, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scan.to_json()).map_err(|e| RelocError::io(path, e))
}

/// A scan reduced to every `stride`-th beam, starting at beam 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DownsampledScan {
    stride: usize,
    source_increment: f64,
    range_max: f64,
    angles: Vec<f64>,
    ranges: Vec<f64>,
}

impl DownsampledScan {
    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Angular spacing of consecutive kept beams.
    pub fn beam_spacing(&self) -> f64 {
        self.source_increment * self.stride as f64
    }

    pub fn range_max(&self) -> f64 {
        self.range_max
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// `(angle, range)` of every valid beam, in beam order.
    pub fn valid_beams(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.angles
            .iter()
            .zip(&self.ranges)
            .filter(|(_, z)| !z.is_nan())
            .map(|(&a, &z)| (a, z))
    }

    pub fn valid_count(&self) -> usize {
        self.ranges.iter().filter(|z| !z.is_nan()).count()
    }

    /// Size of the panoramic index grid whose bin equals the beam spacing.
    /// The spacing must divide a full turn.
    pub fn panoramic_count(&self) -> Result<usize> {
        let exact = 2.0 * PI / self.beam_spacing();
        let rounded = exact.round();
        if rounded < 1.0 || (exact - rounded).abs() > 1e-6 {
            return Err(RelocError::InvalidConfig(format!(
                "beam spacing {:.9} rad (increment x stride {}) does not divide 2*pi",
                self.beam_spacing(),
                self.stride
            )));
        }
        Ok(rounded as usize)
    }

    /// Panoramic slot of beam `i` on an `n_s`-bin grid starting at `-pi`.
    pub fn panoramic_index(&self, i: usize, n_s: usize) -> usize {
        let bin = 2.0 * PI / n_s as f64;
        let j = ((self.angles[i] + PI) / bin).round() as i64;
        j.rem_euclid(n_s as i64) as usize
    }

    /// Re-expresses the downsampled beams as a plain scan.
    pub fn to_scan(&self) -> LidarScan {
        LidarScan {
            angle_min: self.angles.first().copied().unwrap_or(0.0),
            angle_increment: self.beam_spacing(),
            range_max: self.range_max,
            ranges: self.ranges.clone(),
        }
    }
}

pub fn downsample_scan(scan: &LidarScan, n_skip_beam: usize) -> Result<DownsampledScan> {
    if n_skip_beam == 0 {
        return Err(RelocError::InvalidConfig("n_skip_beam must be >= 1".into()));
    }
    let indices: Vec<usize> = (0..scan.len()).step_by(n_skip_beam).collect();
    Ok(DownsampledScan {
        stride: n_skip_beam,
        source_increment: scan.angle_increment,
        range_max: scan.range_max,
        angles: indices.iter().map(|&i| scan.angle(i)).collect(),
        ranges: indices.iter().map(|&i| scan.ranges[i]).collect(),
    })
}

/// Maximal runs of valid slots on the panoramic index grid `[0, n_s)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FovSections {
    n_s: usize,
    sections: Vec<(usize, usize)>,
    valid_count: usize,
}

impl FovSections {
    /// Builds sections from a per-slot validity mask. A run touching both ends
    /// of the mask stays split in two.
    pub fn from_mask(mask: &[bool]) -> Self {
        let mut sections = Vec::new();
        let mut start = None;
        for (j, &valid) in mask.iter().enumerate() {
            match (valid, start) {
                (true, None) => start = Some(j),
                (false, Some(u)) => {
                    sections.push((u, j - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(u) = start {
            sections.push((u, mask.len() - 1));
        }
        Self {
            n_s: mask.len(),
            valid_count: mask.iter().filter(|&&v| v).count(),
            sections,
        }
    }

    pub fn panoramic_count(&self) -> usize {
        self.n_s
    }

    /// Inclusive `(u, v)` index intervals, ascending and disjoint.
    pub fn sections(&self) -> &[(usize, usize)] {
        &self.sections
    }

    pub fn valid_count(&self) -> usize {
        self.valid_count
    }

    /// Ratio of valid slots to the panoramic slot count.
    pub fn coverage(&self) -> f64 {
        if self.n_s == 0 {
            0.0
        } else {
            self.valid_count as f64 / self.n_s as f64
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.sections.iter().flat_map(|&(u, v)| u..=v)
    }
}

pub fn extract_fov_sections(scan: &DownsampledScan, n_s: usize) -> FovSections {
    let mut mask = vec![false; n_s];
    for i in 0..scan.len() {
        if !scan.ranges[i].is_nan() {
            mask[scan.panoramic_index(i, n_s)] = true;
        }
    }
    FovSections::from_mask(&mask)
}

/// Range of the valid beam that lands in each panoramic slot (`NaN` if none).
pub fn panoramic_ranges(scan: &DownsampledScan, n_s: usize) -> Vec<f64> {
    let mut slots = vec![f64::NAN; n_s];
    for i in 0..scan.len() {
        if !scan.ranges[i].is_nan() {
            slots[scan.panoramic_index(i, n_s)] = scan.ranges[i];
        }
    }
    slots
}
