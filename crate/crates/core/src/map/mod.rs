//! Occupancy grid maps, their file format, and the obstacle distance field.

mod distance_field;
mod io;

pub use distance_field::{
    in_sampling_boundary, min_dist_to_obstacle, traversability_check, DistanceField,
};
pub use io::{load_map, save_map, MapDescriptor};

use serde::{Deserialize, Serialize};

use crate::error::{RelocError, Result};
use crate::geometry::{Pose, WorldPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

/// Placement and resolution of a raster in the world frame.
///
/// Cell `(ix, iy)` covers the local square `[ix*r, (ix+1)*r) x [iy*r, (iy+1)*r)`,
/// where the local frame has its origin at the `(0, 0)` cell corner and is
/// rotated by `origin.theta` relative to the world. Row `iy = 0` is the bottom
/// (minimum y) row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose,
}

impl GridGeometry {
    pub fn world_to_local(&self, p: WorldPoint) -> WorldPoint {
        if self.origin.theta == 0.0 {
            p - self.origin.position()
        } else {
            self.origin.inverse_transform_point(p)
        }
    }

    pub fn local_to_world(&self, p: WorldPoint) -> WorldPoint {
        if self.origin.theta == 0.0 {
            p + self.origin.position()
        } else {
            self.origin.transform_point(p)
        }
    }

    pub fn width_m(&self) -> f64 {
        self.width as f64 * self.resolution
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.resolution
    }

    /// Cell containing `p`, or `None` outside the raster.
    pub fn cell_of(&self, p: WorldPoint) -> Option<(usize, usize)> {
        let local = self.world_to_local(p);
        let fx = (local.x / self.resolution).floor();
        let fy = (local.y / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> WorldPoint {
        let local = WorldPoint::new(
            (ix as f64 + 0.5) * self.resolution,
            (iy as f64 + 0.5) * self.resolution,
        );
        self.local_to_world(local)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The world-frame center of the raster.
    pub fn center(&self) -> WorldPoint {
        self.local_to_world(WorldPoint::new(self.width_m() / 2.0, self.height_m() / 2.0))
    }
}

/// A tri-state occupancy raster.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(geometry: GridGeometry, cells: Vec<CellState>) -> Result<Self> {
        if geometry.width == 0 || geometry.height == 0 {
            return Err(RelocError::MapLoad("grid dimensions must be positive".into()));
        }
        if !(geometry.resolution > 0.0 && geometry.resolution.is_finite()) {
            return Err(RelocError::MapLoad(format!(
                "resolution must be positive, got {}",
                geometry.resolution
            )));
        }
        if cells.len() != geometry.len() {
            return Err(RelocError::MapLoad(format!(
                "cell count {} does not match {}x{}",
                cells.len(),
                geometry.width,
                geometry.height
            )));
        }
        if !geometry.origin.is_finite() {
            return Err(RelocError::MapLoad("origin must be finite".into()));
        }
        Ok(Self { geometry, cells })
    }

    /// A grid with every cell set to `fill`.
    pub fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose,
        fill: CellState,
    ) -> Result<Self> {
        let geometry = GridGeometry {
            width,
            height,
            resolution,
            origin,
        };
        Self::new(geometry, vec![fill; width * height])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    pub fn origin(&self) -> Pose {
        self.geometry.origin
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn get(&self, ix: usize, iy: usize) -> CellState {
        self.cells[self.geometry.index(ix, iy)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, state: CellState) {
        let idx = self.geometry.index(ix, iy);
        self.cells[idx] = state;
    }

    pub fn state_at(&self, p: WorldPoint) -> Option<CellState> {
        self.geometry.cell_of(p).map(|(ix, iy)| self.get(ix, iy))
    }

    #[inline]
    pub fn is_blocked(&self, ix: usize, iy: usize, unknown_as_occupied: bool) -> bool {
        match self.get(ix, iy) {
            CellState::Occupied => true,
            CellState::Unknown => unknown_as_occupied,
            CellState::Free => false,
        }
    }

    /// Sets every cell whose center falls inside the world-frame axis-aligned
    /// rectangle `[min, max]`.
    pub fn fill_rect(&mut self, min: WorldPoint, max: WorldPoint, state: CellState) {
        for iy in 0..self.height() {
            for ix in 0..self.width() {
                let c = self.geometry.cell_center(ix, iy);
                if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                    self.set(ix, iy, state);
                }
            }
        }
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }
}
