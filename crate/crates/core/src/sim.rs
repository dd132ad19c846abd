//! Synthetic worlds: parametric map generators, a simulated planar LiDAR, and
//! localized map edits for changed-environment experiments.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{RelocError, Result};
use crate::geometry::{Pose, WorldPoint};
use crate::map::{CellState, OccupancyGrid};
use crate::raycast::RayCaster;
use crate::scan::LidarScan;

/// World pose of the lower-left corner of every generated map, chosen so the
/// world origin sits inside the free space.
pub const GENERATED_ORIGIN: Pose = Pose {
    x: -1.5,
    y: -1.5,
    theta: 0.0,
};

const WALL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarModel {
    pub fov: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub noise_sigma: f64,
    pub dropout: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            fov: 220f64.to_radians(),
            angle_increment: 1f64.to_radians(),
            range_max: 20.0,
            noise_sigma: 0.02,
            dropout: 0.02,
        }
    }
}

impl LidarModel {
    pub fn noiseless(self) -> Self {
        Self {
            noise_sigma: 0.0,
            dropout: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fov > 0.0
            && self.fov <= 2.0 * PI + 1e-9
            && self.angle_increment > 0.0
            && self.range_max > 0.0
            && self.noise_sigma >= 0.0
            && (0.0..=1.0).contains(&self.dropout);
        if !ok {
            return Err(RelocError::InvalidConfig(
                "lidar needs 0 < fov <= 2pi, positive increment and range, sigma >= 0, dropout in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn beam_count(&self) -> usize {
        ((self.fov / self.angle_increment).round() as usize).max(1)
    }

    /// Beam angle relative to the sensor heading.
    pub fn beam_angle(&self, i: usize) -> f64 {
        -self.fov / 2.0 + i as f64 * self.angle_increment
    }
}

/// Casts every beam of `model` from `true_pose`, then applies Gaussian range
/// noise and random dropout. Beams that hit nothing within range are invalid.
pub fn simulate_scan(grid: &OccupancyGrid, true_pose: &Pose, model: &LidarModel, seed: u64) -> Result<LidarScan> {
    model.validate()?;
    let p = true_pose.position();
    let (ix, iy) = grid
        .geometry()
        .cell_of(p)
        .ok_or(RelocError::OutOfBounds { x: p.x, y: p.y })?;
    if grid.is_blocked(ix, iy, true) {
        return Err(RelocError::Infeasible {
            x: p.x,
            y: p.y,
            reason: "inside an obstacle".into(),
        });
    }
    let caster = RayCaster::new(grid, true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, model.noise_sigma).map_err(|e| RelocError::InvalidConfig(e.to_string()))?;
    let mut ranges = Vec::with_capacity(model.beam_count());
    for i in 0..model.beam_count() {
        let z = caster.cast(p, true_pose.theta + model.beam_angle(i), model.range_max)?;
        // draw both variates for every beam so the noise stream does not depend on geometry
        let eps = noise.sample(&mut rng);
        let dropped = rng.gen::<f64>() < model.dropout;
        ranges.push(if dropped || z >= model.range_max {
            f64::NAN
        } else {
            (z + eps).max(0.0)
        });
    }
    LidarScan::new(model.beam_angle(0), model.angle_increment, model.range_max, ranges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    EmptyRoom,
    ClutteredOffice,
    CorridorLoop,
    SplitRooms,
}

impl MapKind {
    pub const ALL: [MapKind; 4] = [
        MapKind::EmptyRoom,
        MapKind::ClutteredOffice,
        MapKind::CorridorLoop,
        MapKind::SplitRooms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MapKind::EmptyRoom => "empty_room",
            MapKind::ClutteredOffice => "cluttered_office",
            MapKind::CorridorLoop => "corridor_loop",
            MapKind::SplitRooms => "split_rooms",
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MapKind {
    type Err = RelocError;

    fn from_str(s: &str) -> Result<Self> {
        MapKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| RelocError::InvalidConfig(format!("unknown map kind '{s}'")))
    }
}

/// Axis-aligned rectangle in map-local meters.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    fn expanded(&self, m: f64) -> Rect {
        Rect::new(self.x0 - m, self.y0 - m, self.x1 + m, self.y1 + m)
    }

    fn intersects(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Sets cells whose centers fall in a local-frame rectangle.
fn fill_local(g: &mut OccupancyGrid, r: Rect, state: CellState) {
    let res = g.resolution();
    let ix0 = ((r.x0 / res - 0.5).ceil().max(0.0)) as usize;
    let iy0 = ((r.y0 / res - 0.5).ceil().max(0.0)) as usize;
    let ix1 = ((r.x1 / res - 0.5).floor()).min(g.width() as f64 - 1.0);
    let iy1 = ((r.y1 / res - 0.5).floor()).min(g.height() as f64 - 1.0);
    if ix1 < 0.0 || iy1 < 0.0 {
        return;
    }
    for iy in iy0..=iy1 as usize {
        for ix in ix0..=ix1 as usize {
            g.set(ix, iy, state);
        }
    }
}

fn blank(width_m: f64, height_m: f64, resolution: f64) -> Result<OccupancyGrid> {
    if !(width_m > 0.0 && height_m > 0.0 && resolution > 0.0) {
        return Err(RelocError::InvalidConfig("map size and resolution must be positive".into()));
    }
    let w = (width_m / resolution).round() as usize;
    let h = (height_m / resolution).round() as usize;
    if w < 8 || h < 8 {
        return Err(RelocError::InvalidConfig("map must span at least 8 cells per side".into()));
    }
    let mut g = OccupancyGrid::filled(w, h, resolution, GENERATED_ORIGIN, CellState::Free)?;
    let (wm, hm) = (w as f64 * resolution, h as f64 * resolution);
    let t = WALL.max(resolution);
    for r in [
        Rect::new(0.0, 0.0, wm, t),
        Rect::new(0.0, hm - t, wm, hm),
        Rect::new(0.0, 0.0, t, hm),
        Rect::new(wm - t, 0.0, wm, hm),
    ] {
        fill_local(&mut g, r, CellState::Occupied);
    }
    Ok(g)
}

/// The world origin in map-local meters.
fn start_local() -> (f64, f64) {
    (-GENERATED_ORIGIN.x, -GENERATED_ORIGIN.y)
}

/// Places up to `count` random boxes inside `area`, each at least `gap` away
/// from every rectangle in `placed` and from the start keep-out.
#[allow(clippy::too_many_arguments)]
fn scatter_boxes(
    g: &mut OccupancyGrid,
    rng: &mut ChaCha8Rng,
    area: Rect,
    count: usize,
    size: (f64, f64),
    gap: f64,
    placed: &mut Vec<Rect>,
    keep_out: Rect,
) -> usize {
    let mut added = 0;
    for _ in 0..count * 200 {
        if added == count {
            break;
        }
        let (w, h) = (rng.gen_range(size.0..size.1), rng.gen_range(size.0..size.1));
        if area.x1 - area.x0 <= w || area.y1 - area.y0 <= h {
            continue;
        }
        let x0 = rng.gen_range(area.x0..area.x1 - w);
        let y0 = rng.gen_range(area.y0..area.y1 - h);
        let r = Rect::new(x0, y0, x0 + w, y0 + h);
        if r.intersects(&keep_out) || placed.iter().any(|p| r.expanded(gap).intersects(p)) {
            continue;
        }
        fill_local(g, r, CellState::Occupied);
        placed.push(r);
        added += 1;
    }
    added
}

/// Deterministic parametric map of `size` = (width, height) meters.
pub fn generate_map(kind: MapKind, size: (f64, f64), resolution: f64, seed: u64) -> Result<OccupancyGrid> {
    let mut g = blank(size.0, size.1, resolution)?;
    let (wm, hm) = (g.geometry().width_m(), g.geometry().height_m());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = WALL.max(resolution);
    let (sx, sy) = start_local();
    let keep_out = Rect::new(sx - 1.0, sy - 1.0, sx + 1.0, sy + 1.0);
    let gap = 0.8;
    match kind {
        MapKind::EmptyRoom => {}
        MapKind::ClutteredOffice => {
            let mut placed = vec![
                Rect::new(0.0, 0.0, wm, t),
                Rect::new(0.0, hm - t, wm, hm),
                Rect::new(0.0, 0.0, t, hm),
                Rect::new(wm - t, 0.0, wm, hm),
            ];
            // short partition walls jutting out of the perimeter
            let spurs = ((wm + hm) / 8.0).round().max(2.0) as usize;
            for _ in 0..spurs * 50 {
                if placed.len() >= 4 + spurs {
                    break;
                }
                let len = rng.gen_range(1.0..(wm.min(hm) / 4.0).max(1.1));
                let r = match rng.gen_range(0..4) {
                    0 => {
                        let x = rng.gen_range(1.0..wm - 1.0);
                        Rect::new(x, t, x + t, t + len)
                    }
                    1 => {
                        let x = rng.gen_range(1.0..wm - 1.0);
                        Rect::new(x, hm - t - len, x + t, hm - t)
                    }
                    2 => {
                        let y = rng.gen_range(1.0..hm - 1.0);
                        Rect::new(t, y, t + len, y + t)
                    }
                    _ => {
                        let y = rng.gen_range(1.0..hm - 1.0);
                        Rect::new(wm - t - len, y, wm - t, y + t)
                    }
                };
                if r.intersects(&keep_out) || placed[4..].iter().any(|p| r.expanded(gap).intersects(p)) {
                    continue;
                }
                // keep a passage between the spur tip and the opposite wall
                fill_local(&mut g, r, CellState::Occupied);
                placed.push(r);
            }
            let count = ((wm * hm) / 30.0).round().max(10.0) as usize;
            let inner = Rect::new(t + gap, t + gap, wm - t - gap, hm - t - gap);
            scatter_boxes(&mut g, &mut rng, inner, count, (0.3, 1.5), gap, &mut placed, keep_out);
        }
        MapKind::CorridorLoop => {
            let c = 3.0f64.min(wm / 4.0).min(hm / 4.0);
            let block = Rect::new(t + c, t + c, wm - t - c, hm - t - c);
            fill_local(&mut g, block, CellState::Occupied);
            fill_local(&mut g, block.expanded(-t), CellState::Unknown);
            // boxes standing against the walls, leaving most of the corridor open
            let depth = (c / 3.0).min(1.0);
            let n = ((wm + hm) / 2.5).round().max(4.0) as usize;
            let mut placed: Vec<Rect> = Vec::new();
            for _ in 0..n * 100 {
                if placed.len() >= n {
                    break;
                }
                let len = rng.gen_range(0.4..2.0);
                let d = rng.gen_range(0.3..depth.max(0.31));
                let r = match rng.gen_range(0..8) {
                    0 => {
                        let x = rng.gen_range(t..wm - t - len);
                        Rect::new(x, t, x + len, t + d)
                    }
                    1 => {
                        let x = rng.gen_range(t..wm - t - len);
                        Rect::new(x, hm - t - d, x + len, hm - t)
                    }
                    2 => {
                        let y = rng.gen_range(t..hm - t - len);
                        Rect::new(t, y, t + d, y + len)
                    }
                    3 => {
                        let y = rng.gen_range(t..hm - t - len);
                        Rect::new(wm - t - d, y, wm - t, y + len)
                    }
                    4 => {
                        let x = rng.gen_range(block.x0..block.x1 - len);
                        Rect::new(x, block.y0 - d, x + len, block.y0)
                    }
                    5 => {
                        let x = rng.gen_range(block.x0..block.x1 - len);
                        Rect::new(x, block.y1, x + len, block.y1 + d)
                    }
                    6 => {
                        let y = rng.gen_range(block.y0..block.y1 - len);
                        Rect::new(block.x0 - d, y, block.x0, y + len)
                    }
                    _ => {
                        let y = rng.gen_range(block.y0..block.y1 - len);
                        Rect::new(block.x1, y, block.x1 + d, y + len)
                    }
                };
                if r.intersects(&keep_out) || placed.iter().any(|p| r.expanded(1.2).intersects(p)) {
                    continue;
                }
                fill_local(&mut g, r, CellState::Occupied);
                placed.push(r);
            }
        }
        MapKind::SplitRooms => {
            let x = (wm / 2.0).max(sx + 1.5);
            let wall = Rect::new(x, 0.0, x + t, hm);
            fill_local(&mut g, wall, CellState::Occupied);
            let mut placed = vec![wall];
            let per_room = ((wm * hm) / 60.0).round().max(2.0) as usize;
            let left = Rect::new(t + gap, t + gap, x - gap, hm - t - gap);
            let right = Rect::new(x + t + gap, t + gap, wm - t - gap, hm - t - gap);
            scatter_boxes(&mut g, &mut rng, left, per_room, (0.3, 1.0), gap, &mut placed, keep_out);
            scatter_boxes(&mut g, &mut rng, right, per_room, (0.3, 1.0), gap, &mut placed, keep_out);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    OpenDoor,
    AddClutter,
    RemoveWallSegment,
}

impl FromStr for PerturbKind {
    type Err = RelocError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open_door" => Ok(PerturbKind::OpenDoor),
            "add_clutter" => Ok(PerturbKind::AddClutter),
            "remove_wall_segment" => Ok(PerturbKind::RemoveWallSegment),
            _ => Err(RelocError::InvalidConfig(format!("unknown perturbation '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbParams {
    /// Opening length for doors and removed wall segments (meters).
    pub span: f64,
    /// Thickest wall that may be cut through (meters).
    pub max_wall_thickness: f64,
    pub clutter_count: usize,
    pub clutter_size: (f64, f64),
    /// Edits are placed as close as possible to this point when given.
    pub near: Option<WorldPoint>,
    /// Clutter never lands within this distance of `near`.
    pub keep_clear: f64,
    /// Clutter centers fall within this distance of `near`.
    pub clutter_radius: f64,
    /// Upper bound on the number of square meters edited.
    pub max_area: f64,
}

impl Default for PerturbParams {
    fn default() -> Self {
        Self {
            span: 1.0,
            max_wall_thickness: 0.4,
            clutter_count: 3,
            clutter_size: (0.2, 0.5),
            near: None,
            keep_clear: 0.6,
            clutter_radius: 4.0,
            max_area: 2.0,
        }
    }
}

/// A straight cut through a wall: `len` consecutive lines (rows for a wall
/// crossed along x, columns otherwise), each cutting cells `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WallCut {
    along_x: bool,
    first_line: usize,
    len: usize,
    lo: usize,
    hi: usize,
}

impl WallCut {
    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.first_line..self.first_line + self.len).flat_map(move |line| {
            (self.lo..=self.hi).map(move |k| if self.along_x { (k, line) } else { (line, k) })
        })
    }

    fn center(&self, g: &OccupancyGrid) -> WorldPoint {
        let line = self.first_line as f64 + self.len as f64 / 2.0;
        let k = (self.lo + self.hi) as f64 / 2.0 + 0.5;
        let (lx, ly) = if self.along_x { (k, line) } else { (line, k) };
        let res = g.resolution();
        g.geometry().local_to_world(WorldPoint::new(lx * res, ly * res))
    }
}

/// Wall cuts of `len` lines whose occupied run is at most `max_cells` thick
/// and borders free space on both sides (`both`) or on at least one side.
fn wall_cuts(g: &OccupancyGrid, len: usize, max_cells: usize, both: bool) -> Vec<WallCut> {
    let mut out = Vec::new();
    for along_x in [true, false] {
        let (lines, across) = if along_x { (g.height(), g.width()) } else { (g.width(), g.height()) };
        let at = |line: usize, k: usize| if along_x { g.get(k, line) } else { g.get(line, k) };
        // runs[line] = list of (lo, hi) qualifying runs on that line
        let runs: Vec<Vec<(usize, usize)>> = (0..lines)
            .map(|line| {
                let mut v = Vec::new();
                let mut k = 0;
                while k < across {
                    if at(line, k) != CellState::Occupied {
                        k += 1;
                        continue;
                    }
                    let lo = k;
                    while k < across && at(line, k) == CellState::Occupied {
                        k += 1;
                    }
                    let hi = k - 1;
                    let before = lo.checked_sub(1).map(|b| at(line, b));
                    let after = (k < across).then(|| at(line, k));
                    let free_before = before == Some(CellState::Free);
                    let free_after = after == Some(CellState::Free);
                    let open_before = free_before || before.is_none();
                    let open_after = free_after || after.is_none();
                    let sides_ok = if both {
                        free_before && free_after
                    } else {
                        (free_before || free_after) && open_before && open_after
                    };
                    if hi - lo < max_cells && sides_ok {
                        v.push((lo, hi));
                    }
                }
                v
            })
            .collect();
        for first in 0..lines.saturating_sub(len - 1) {
            for &(lo, hi) in &runs[first] {
                if (first + 1..first + len).all(|l| runs[l].contains(&(lo, hi))) {
                    out.push(WallCut {
                        along_x,
                        first_line: first,
                        len,
                        lo,
                        hi,
                    });
                }
            }
        }
    }
    out
}

fn pick<'a, T>(items: &'a [T], rng: &mut ChaCha8Rng, near: Option<WorldPoint>, pos: impl Fn(&T) -> WorldPoint) -> Option<&'a T> {
    if items.is_empty() {
        return None;
    }
    Some(match near {
        Some(p) => items
            .iter()
            .min_by(|a, b| pos(a).distance_sq(p).total_cmp(&pos(b).distance_sq(p)))
            .expect("non-empty"),
        None => &items[rng.gen_range(0..items.len())],
    })
}

/// Returns an edited copy of `grid`. When no suitable wall exists for a cut
/// the copy is unchanged.
pub fn perturb_map(grid: &OccupancyGrid, kind: PerturbKind, seed: u64) -> OccupancyGrid {
    perturb_map_with(grid, kind, seed, &PerturbParams::default())
}

pub fn perturb_map_with(grid: &OccupancyGrid, kind: PerturbKind, seed: u64, params: &PerturbParams) -> OccupancyGrid {
    let mut g = grid.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = g.resolution();
    let cell_area = res * res;
    let budget = (params.max_area / cell_area).floor() as usize;
    match kind {
        PerturbKind::OpenDoor | PerturbKind::RemoveWallSegment => {
            let len = ((params.span / res).round() as usize).max(1);
            let max_cells = ((params.max_wall_thickness / res).round() as usize).max(1);
            let cuts = wall_cuts(grid, len, max_cells, kind == PerturbKind::OpenDoor);
            if let Some(cut) = pick(&cuts, &mut rng, params.near, |c| c.center(grid)) {
                for (ix, iy) in cut.cells().take(budget) {
                    g.set(ix, iy, CellState::Free);
                }
            }
        }
        PerturbKind::AddClutter => {
            let local_near = params.near.map(|p| grid.geometry().world_to_local(p));
            let (wm, hm) = (grid.geometry().width_m(), grid.geometry().height_m());
            let mut used = 0usize;
            let mut added = 0;
            for _ in 0..params.clutter_count * 500 {
                if added == params.clutter_count {
                    break;
                }
                let (lo, hi) = params.clutter_size;
                let (w, h) = (rng.gen_range(lo..=hi), rng.gen_range(lo..=hi));
                let (x0, y0) = match local_near {
                    Some(n) => {
                        let ang = rng.gen_range(-PI..PI);
                        let dist = params.clutter_radius * rng.gen::<f64>().sqrt();
                        (n.x + dist * ang.cos() - w / 2.0, n.y + dist * ang.sin() - h / 2.0)
                    }
                    None => (rng.gen_range(0.0..(wm - w).max(1e-9)), rng.gen_range(0.0..(hm - h).max(1e-9))),
                };
                if x0 < 0.0 || y0 < 0.0 || x0 + w > wm || y0 + h > hm {
                    continue;
                }
                let r = Rect::new(x0, y0, x0 + w, y0 + h);
                if let Some(n) = local_near {
                    if r.expanded(params.keep_clear).contains(n.x, n.y) {
                        continue;
                    }
                }
                let cells: Vec<(usize, usize)> = (0..grid.height())
                    .flat_map(|iy| (0..grid.width()).map(move |ix| (ix, iy)))
                    .filter(|&(ix, iy)| {
                        let c = WorldPoint::new((ix as f64 + 0.5) * res, (iy as f64 + 0.5) * res);
                        r.contains(c.x, c.y)
                    })
                    .collect();
                // only boxes standing entirely in free space
                if cells.is_empty() || cells.iter().any(|&(ix, iy)| grid.get(ix, iy) != CellState::Free) {
                    continue;
                }
                if used + cells.len() > budget {
                    continue;
                }
                for &(ix, iy) in &cells {
                    g.set(ix, iy, CellState::Occupied);
                }
                used += cells.len();
                added += 1;
            }
        }
    }
    g
}
