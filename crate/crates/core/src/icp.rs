//! Point-to-point ICP of scan endpoints against the occupied cells of the map.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{RelocError, Result};
use crate::geometry::{wrap_angle, Pose, WorldPoint};
use crate::map::{CellState, OccupancyGrid};
use crate::scan::DownsampledScan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Largest point-to-point distance accepted as a correspondence (meters).
    pub correspondence_cutoff: f64,
    /// Stop once an update moves less than this (meters plus radians).
    pub convergence_eps: f64,
    pub min_correspondences: usize,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            correspondence_cutoff: 1.0,
            convergence_eps: 1e-4,
            min_correspondences: 10,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || !(self.correspondence_cutoff > 0.0)
            || !(self.convergence_eps > 0.0)
            || self.min_correspondences == 0
        {
            return Err(RelocError::InvalidConfig("ICP parameters must all be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedPose {
    pub pose: Pose,
    pub converged: bool,
    /// Root mean of squared endpoint residuals, each capped at the cutoff.
    pub mean_residual: f64,
    pub iterations_used: usize,
    /// Residual before each update and after the last one.
    pub residual_history: Vec<f64>,
}

/// World-frame centers of every occupied cell.
pub fn map_occupied_points(grid: &OccupancyGrid) -> Result<Vec<WorldPoint>> {
    let g = grid.geometry();
    let points: Vec<WorldPoint> = (0..g.height)
        .flat_map(|iy| (0..g.width).map(move |ix| (ix, iy)))
        .filter(|&(ix, iy)| grid.get(ix, iy) == CellState::Occupied)
        .map(|(ix, iy)| g.cell_center(ix, iy))
        .collect();
    if points.is_empty() {
        return Err(RelocError::EmptyMap);
    }
    Ok(points)
}

/// Uniform hash grid over a point set for fixed-radius nearest-neighbor queries.
#[derive(Debug, Clone)]
pub struct PointIndex {
    points: Vec<WorldPoint>,
    bucket: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl PointIndex {
    pub fn new(points: Vec<WorldPoint>, bucket: f64) -> Self {
        assert!(bucket > 0.0, "bucket size must be positive");
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(*p, bucket)).or_default().push(i);
        }
        Self { points, bucket, cells }
    }

    fn key(p: WorldPoint, bucket: f64) -> (i64, i64) {
        ((p.x / bucket).floor() as i64, (p.y / bucket).floor() as i64)
    }

    pub fn points(&self) -> &[WorldPoint] {
        &self.points
    }

    pub fn bucket(&self) -> f64 {
        self.bucket
    }

    /// Nearest point within `radius` (which must not exceed the bucket size);
    /// the lowest index wins ties.
    pub fn nearest_within(&self, q: WorldPoint, radius: f64) -> Option<(usize, f64)> {
        debug_assert!(radius <= self.bucket * (1.0 + 1e-12));
        let (kx, ky) = Self::key(q, self.bucket);
        let r2 = radius * radius;
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(members) = self.cells.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                for &i in members {
                    let d2 = self.points[i].distance_sq(q);
                    if d2 > r2 {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bi, bd)) => d2 < bd || (d2 == bd && i < bi),
                    };
                    if better {
                        best = Some((i, d2));
                    }
                }
            }
        }
        best
    }
}

/// Rigid transform `(angle, translation)` minimizing the squared distance
/// from rotated-and-shifted `src` points to their paired `dst` points.
pub fn rigid_align(src: &[WorldPoint], dst: &[WorldPoint]) -> (f64, WorldPoint) {
    let n = src.len() as f64;
    let mean = |v: &[WorldPoint]| v.iter().fold(WorldPoint::default(), |a, &b| a + b) * (1.0 / n);
    let (ms, md) = (mean(src), mean(dst));
    let (mut h00, mut h01, mut h10, mut h11) = (0.0, 0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let (a, b) = (*s - ms, *d - md);
        h00 += a.x * b.x;
        h01 += a.x * b.y;
        h10 += a.y * b.x;
        h11 += a.y * b.y;
    }
    let angle = (h01 - h10).atan2(h00 + h11);
    (angle, md - ms.rotated(angle))
}

struct Matching {
    src: Vec<WorldPoint>,
    dst: Vec<WorldPoint>,
    residual: f64,
}

fn match_points(world: &[WorldPoint], index: &PointIndex, cutoff: f64) -> Matching {
    let mut m = Matching {
        src: Vec::with_capacity(world.len()),
        dst: Vec::with_capacity(world.len()),
        residual: 0.0,
    };
    let cap = cutoff * cutoff;
    let mut total = 0.0;
    for &q in world {
        match index.nearest_within(q, cutoff) {
            Some((i, d2)) => {
                total += d2.min(cap);
                m.src.push(q);
                m.dst.push(index.points[i]);
            }
            None => total += cap,
        }
    }
    m.residual = (total / world.len() as f64).sqrt();
    m
}

/// ICP against a prebuilt index whose bucket is at least the cutoff.
pub fn icp_refine_indexed(
    scan: &DownsampledScan,
    initial: Pose,
    index: &PointIndex,
    params: &IcpParams,
) -> RefinedPose {
    let local: Vec<WorldPoint> = scan
        .valid_beams()
        .map(|(phi, z)| WorldPoint::new(z * phi.cos(), z * phi.sin()))
        .collect();
    let unchanged = |residual: f64| RefinedPose {
        pose: initial,
        converged: false,
        mean_residual: residual,
        iterations_used: 0,
        residual_history: vec![residual],
    };
    if local.is_empty() {
        return unchanged(params.correspondence_cutoff);
    }
    let to_world = |pose: &Pose| -> Vec<WorldPoint> { local.iter().map(|&p| pose.transform_point(p)).collect() };

    let mut pose = initial;
    let mut matching = match_points(&to_world(&pose), index, params.correspondence_cutoff);
    if matching.src.len() < params.min_correspondences {
        return unchanged(matching.residual);
    }
    let mut history = vec![matching.residual];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        if matching.src.len() < params.min_correspondences {
            break;
        }
        let (angle, t) = rigid_align(&matching.src, &matching.dst);
        let position = pose.position().rotated(angle) + t;
        let candidate = Pose::new(position.x, position.y, wrap_angle(pose.theta + angle));
        let next = match_points(&to_world(&candidate), index, params.correspondence_cutoff);
        iterations += 1;
        // rounding can make a converged step worse by an ulp; keep the better pose
        if next.residual > matching.residual {
            converged = matching.src.len() >= params.min_correspondences;
            break;
        }
        pose = candidate;
        matching = next;
        history.push(matching.residual);
        if t.norm() + angle.abs() < params.convergence_eps {
            converged = matching.src.len() >= params.min_correspondences;
            break;
        }
    }
    RefinedPose {
        pose,
        converged,
        mean_residual: matching.residual,
        iterations_used: iterations,
        residual_history: history,
    }
}

pub fn icp_refine(
    scan: &DownsampledScan,
    initial: Pose,
    map_points: &[WorldPoint],
    params: &IcpParams,
) -> Result<RefinedPose> {
    params.validate()?;
    if !initial.is_finite() {
        return Err(RelocError::InvalidConfig("initial pose must be finite".into()));
    }
    let index = PointIndex::new(map_points.to_vec(), params.correspondence_cutoff);
    Ok(icp_refine_indexed(scan, initial, &index, params))
}
