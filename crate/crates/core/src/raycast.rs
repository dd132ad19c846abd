//! Grid ray casting and panoramic map-synthesized scans.

use std::f64::consts::PI;

use crate::error::{RelocError, Result};
use crate::geometry::WorldPoint;
use crate::map::OccupancyGrid;

/// Casts rays through an occupancy grid with an incremental DDA that visits
/// every crossed cell exactly once.
#[derive(Debug, Clone, Copy)]
pub struct RayCaster<'a> {
    grid: &'a OccupancyGrid,
    unknown_as_occupied: bool,
}

impl<'a> RayCaster<'a> {
    pub fn new(grid: &'a OccupancyGrid, unknown_as_occupied: bool) -> Self {
        Self {
            grid,
            unknown_as_occupied,
        }
    }

    pub fn grid(&self) -> &'a OccupancyGrid {
        self.grid
    }

    /// Distance from `origin` to where the ray enters the first blocked cell.
    ///
    /// Returns `range_max` when nothing is hit within range and 0 when the
    /// origin cell itself is blocked. Leaving the raster counts as a hit at
    /// the exit point.
    pub fn cast(&self, origin: WorldPoint, angle: f64, range_max: f64) -> Result<f64> {
        let geometry = self.grid.geometry();
        if geometry.cell_of(origin).is_none() {
            return Err(RelocError::OutOfBounds {
                x: origin.x,
                y: origin.y,
            });
        }
        let res = geometry.resolution;
        let max_t = range_max / res;
        let mut hit = None;
        self.walk(origin, angle - geometry.origin.theta, max_t, |t, ix, iy| {
            let blocked = match (ix, iy) {
                (Some(ix), Some(iy)) => self.grid.is_blocked(ix, iy, self.unknown_as_occupied),
                _ => true,
            };
            if blocked {
                hit = Some(t);
            }
            !blocked
        });
        Ok(match hit {
            Some(t) => (t * res).min(range_max),
            None => range_max,
        })
    }

    /// Cells crossed by the ray, in order, up to `length` meters (origin cell first).
    pub fn cells_along(&self, origin: WorldPoint, angle: f64, length: f64) -> Vec<(i64, i64)> {
        let geometry = self.grid.geometry();
        let local = geometry.world_to_local(origin) * (1.0 / geometry.resolution);
        let mut cells = vec![(local.x.floor() as i64, local.y.floor() as i64)];
        let mut raw = Vec::new();
        self.walk_raw(
            origin,
            angle - geometry.origin.theta,
            length / geometry.resolution,
            |_, ix, iy| {
                raw.push((ix, iy));
                true
            },
        );
        cells.extend(raw);
        cells
    }

    fn walk<F>(&self, origin: WorldPoint, local_angle: f64, max_t: f64, mut visit: F)
    where
        F: FnMut(f64, Option<usize>, Option<usize>) -> bool,
    {
        let (w, h) = (self.grid.width() as i64, self.grid.height() as i64);
        let ix0 = {
            let geometry = self.grid.geometry();
            let local = geometry.world_to_local(origin) * (1.0 / geometry.resolution);
            (local.x.floor() as i64, local.y.floor() as i64)
        };
        if self
            .grid
            .is_blocked(ix0.0 as usize, ix0.1 as usize, self.unknown_as_occupied)
        {
            visit(0.0, Some(ix0.0 as usize), Some(ix0.1 as usize));
            return;
        }
        self.walk_raw(origin, local_angle, max_t, |t, ix, iy| {
            let in_x = (0..w).contains(&ix);
            let in_y = (0..h).contains(&iy);
            if !(in_x && in_y) {
                visit(t, None, None);
                return false;
            }
            visit(t, Some(ix as usize), Some(iy as usize))
        });
    }

    /// DDA over integer cells in grid units; `visit(t_entry, ix, iy)` is
    /// called for each cell after the origin cell until it returns false or
    /// the entry parameter exceeds `max_t`.
    fn walk_raw<F>(&self, origin: WorldPoint, local_angle: f64, max_t: f64, mut visit: F)
    where
        F: FnMut(f64, i64, i64) -> bool,
    {
        let geometry = self.grid.geometry();
        let local = geometry.world_to_local(origin) * (1.0 / geometry.resolution);
        let (dx, dy) = (local_angle.cos(), local_angle.sin());
        let mut ix = local.x.floor() as i64;
        let mut iy = local.y.floor() as i64;

        let (step_x, mut t_max_x, t_delta_x) = axis_setup(local.x, ix, dx);
        let (step_y, mut t_max_y, t_delta_y) = axis_setup(local.y, iy, dy);

        loop {
            let t = if t_max_x < t_max_y {
                ix += step_x;
                let t = t_max_x;
                t_max_x += t_delta_x;
                t
            } else {
                iy += step_y;
                let t = t_max_y;
                t_max_y += t_delta_y;
                t
            };
            if t > max_t || !visit(t, ix, iy) {
                return;
            }
        }
    }
}

fn axis_setup(pos: f64, cell: i64, dir: f64) -> (i64, f64, f64) {
    if dir > 0.0 {
        (1, ((cell + 1) as f64 - pos) / dir, 1.0 / dir)
    } else if dir < 0.0 {
        (-1, (pos - cell as f64) / -dir, -1.0 / dir)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// [`RayCaster::cast`] with unknown cells treated as obstacles.
pub fn cast_ray(grid: &OccupancyGrid, origin: WorldPoint, angle: f64, range_max: f64) -> Result<f64> {
    RayCaster::new(grid, true).cast(origin, angle, range_max)
}

/// A panoramic virtual scan: beam `j` points at `-pi + j * 2pi / n` in the map frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScan {
    pub origin: WorldPoint,
    pub ranges: Vec<f64>,
}

impl SynthScan {
    pub fn beam_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn beam_angle(&self, j: usize) -> f64 {
        panoramic_angle(j, self.ranges.len())
    }
}

pub fn panoramic_angle(j: usize, n_s: usize) -> f64 {
    -PI + j as f64 * (2.0 * PI / n_s as f64)
}

impl RayCaster<'_> {
    pub fn panoramic(&self, p: WorldPoint, n_s: usize, range_max: f64) -> Result<SynthScan> {
        let geometry = self.grid.geometry();
        let (ix, iy) = geometry
            .cell_of(p)
            .ok_or(RelocError::OutOfBounds { x: p.x, y: p.y })?;
        if self.grid.is_blocked(ix, iy, self.unknown_as_occupied) {
            return Err(RelocError::Infeasible {
                x: p.x,
                y: p.y,
                reason: "inside an obstacle".into(),
            });
        }
        let ranges = (0..n_s)
            .map(|j| self.cast(p, panoramic_angle(j, n_s), range_max))
            .collect::<Result<Vec<_>>>()?;
        Ok(SynthScan { origin: p, ranges })
    }
}

pub fn synthesize_panoramic_scan(
    grid: &OccupancyGrid,
    p: WorldPoint,
    n_s: usize,
    range_max: f64,
) -> Result<SynthScan> {
    RayCaster::new(grid, true).panoramic(p, n_s, range_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::map::CellState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn room(size_m: f64, res: f64) -> OccupancyGrid {
        let n = (size_m / res).round() as usize;
        let mut g = OccupancyGrid::filled(n, n, res, Pose::default(), CellState::Free).unwrap();
        for i in 0..n {
            g.set(i, 0, CellState::Occupied);
            g.set(i, n - 1, CellState::Occupied);
            g.set(0, i, CellState::Occupied);
            g.set(n - 1, i, CellState::Occupied);
        }
        g
    }

    fn random_grid(rng: &mut ChaCha8Rng, n: usize, res: f64, density: f64) -> OccupancyGrid {
        let mut g = OccupancyGrid::filled(n, n, res, Pose::default(), CellState::Free).unwrap();
        for iy in 0..n {
            for ix in 0..n {
                if rng.gen::<f64>() < density {
                    g.set(ix, iy, CellState::Occupied);
                }
            }
        }
        g
    }

    #[test]
    fn empty_room_center_toward_wall() {
        let g = room(10.0, 0.05);
        let z = cast_ray(&g, WorldPoint::new(5.0, 5.0), 0.0, 20.0).unwrap();
        // the wall cell starts at 9.95
        assert!((z - 5.0).abs() <= 0.05, "{z}");
        assert!((z - 4.95).abs() < 1e-9);
    }

    #[test]
    fn origin_in_obstacle_is_zero() {
        let g = room(10.0, 0.05);
        assert_eq!(cast_ray(&g, WorldPoint::new(0.01, 5.0), 1.0, 20.0).unwrap(), 0.0);
        assert!(cast_ray(&g, WorldPoint::new(-1.0, 5.0), 1.0, 20.0).is_err());
    }

    #[test]
    fn no_hit_clamps_to_range_max() {
        let g = room(10.0, 0.05);
        assert_eq!(cast_ray(&g, WorldPoint::new(5.0, 5.0), 0.3, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn unknown_blocking_is_configurable() {
        let mut g = room(10.0, 0.1);
        for iy in 1..99 {
            g.set(70, iy, CellState::Unknown);
        }
        let p = WorldPoint::new(5.0, 5.0);
        let blocked = RayCaster::new(&g, true).cast(p, 0.0, 20.0).unwrap();
        let open = RayCaster::new(&g, false).cast(p, 0.0, 20.0).unwrap();
        assert!((blocked - 2.0).abs() < 1e-9);
        assert!((open - 4.9).abs() < 1e-9);
    }

    /// Entry distance of the ray into an axis-aligned box by the slab method.
    fn slab_entry(p: WorldPoint, dir: WorldPoint, lo: WorldPoint, hi: WorldPoint) -> Option<f64> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for (o, d, a, b) in [(p.x, dir.x, lo.x, hi.x), (p.y, dir.y, lo.y, hi.y)] {
            if d.abs() < 1e-15 {
                if o < a || o > b {
                    return None;
                }
            } else {
                let (ta, tb) = ((a - o) / d, (b - o) / d);
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
        }
        (t0 <= t1 && t1 >= 0.0).then_some(t0.max(0.0))
    }

    #[test]
    fn matches_slab_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, res) = (40, 0.1);
        for _ in 0..300 {
            let g = random_grid(&mut rng, n, res, 0.03);
            let p = WorldPoint::new(rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0));
            let angle = rng.gen_range(-PI..PI);
            let fast = cast_ray(&g, p, angle, 6.0).unwrap();
            let dir = WorldPoint::new(angle.cos(), angle.sin());
            // exit distance of the raster itself
            let side = n as f64 * res;
            let mut exact = [
                (dir.x > 0.0).then(|| (side - p.x) / dir.x),
                (dir.x < 0.0).then(|| -p.x / dir.x),
                (dir.y > 0.0).then(|| (side - p.y) / dir.y),
                (dir.y < 0.0).then(|| -p.y / dir.y),
            ]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
            for iy in 0..n {
                for ix in 0..n {
                    if g.get(ix, iy) != CellState::Occupied {
                        continue;
                    }
                    let lo = WorldPoint::new(ix as f64 * res, iy as f64 * res);
                    let hi = lo + WorldPoint::new(res, res);
                    if let Some(t) = slab_entry(p, dir, lo, hi) {
                        exact = exact.min(t);
                    }
                }
            }
            let exact = exact.min(6.0);
            assert!((fast - exact).abs() <= 1e-9, "dda {fast} vs slab {exact}");
        }
    }

    /// Cells whose interior the segment passes through, by dense sampling.
    fn supercover(p: WorldPoint, q: WorldPoint, res: f64) -> BTreeSet<(i64, i64)> {
        let n = 20_000;
        (0..=n)
            .map(|k| {
                let s = p.lerp(q, k as f64 / n as f64);
                ((s.x / res).floor() as i64, (s.y / res).floor() as i64)
            })
            .collect()
    }

    #[test]
    fn traversal_visits_every_crossed_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = OccupancyGrid::filled(32, 32, 1.0, Pose::default(), CellState::Free).unwrap();
        let caster = RayCaster::new(&g, true);
        for _ in 0..200 {
            let p = WorldPoint::new(rng.gen_range(1.0..31.0), rng.gen_range(1.0..31.0));
            let angle = rng.gen_range(-PI..PI);
            let len = rng.gen_range(0.5..10.0);
            let q = p + WorldPoint::new(angle.cos(), angle.sin()) * len;
            let visited = caster.cells_along(p, angle, len);
            let unique: BTreeSet<_> = visited.iter().copied().collect();
            assert_eq!(unique.len(), visited.len(), "a cell was visited twice");
            let expected = supercover(p, q, 1.0);
            // dense sampling can miss a corner sliver; never the other way round
            assert!(expected.is_subset(&unique));
            assert!(unique.len() - expected.len() <= 1);
        }
    }

    #[test]
    fn circular_room_center() {
        let res = 0.05;
        let n = 200;
        let radius = 4.0;
        let mut g = OccupancyGrid::filled(n, n, res, Pose::default(), CellState::Free).unwrap();
        let c = WorldPoint::new(5.0, 5.0);
        for iy in 0..n {
            for ix in 0..n {
                if g.geometry().cell_center(ix, iy).distance(c) > radius {
                    g.set(ix, iy, CellState::Occupied);
                }
            }
        }
        let synth = synthesize_panoramic_scan(&g, c, 90, 20.0).unwrap();
        assert_eq!(synth.beam_count(), 90);
        for &z in &synth.ranges {
            assert!((z - radius).abs() <= res * std::f64::consts::SQRT_2, "{z}");
        }
    }

    #[test]
    fn rotating_map_permutes_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let n = 41;
            let mut g = random_grid(&mut rng, n, 0.1, 0.04);
            let center = (n / 2, n / 2);
            g.set(center.0, center.1, CellState::Free);
            // rotate 90 degrees counter-clockwise about the center cell
            let mut r = g.clone();
            for iy in 0..n {
                for ix in 0..n {
                    let (dx, dy) = (ix as i64 - center.0 as i64, iy as i64 - center.1 as i64);
                    let (rx, ry) = (center.0 as i64 - dy, center.1 as i64 + dx);
                    r.set(rx as usize, ry as usize, g.get(ix, iy));
                }
            }
            let p = g.geometry().cell_center(center.0, center.1);
            let a = synthesize_panoramic_scan(&g, p, 76, 10.0).unwrap();
            let b = synthesize_panoramic_scan(&r, p, 76, 10.0).unwrap();
            for j in 0..76 {
                let diff = (a.ranges[j] - b.ranges[(j + 19) % 76]).abs();
                assert!(diff < 1e-9, "beam {j}: {} vs {}", a.ranges[j], b.ranges[(j + 19) % 76]);
            }
        }
    }

    #[test]
    fn synth_rejects_infeasible_points() {
        let g = room(10.0, 0.05);
        assert!(matches!(
            synthesize_panoramic_scan(&g, WorldPoint::new(0.01, 0.01), 90, 20.0),
            Err(RelocError::Infeasible { .. })
        ));
        assert!(synthesize_panoramic_scan(&g, WorldPoint::new(11.0, 1.0), 90, 20.0).is_err());
    }

    #[test]
    fn ranges_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = random_grid(&mut rng, 60, 0.1, 0.01);
        for _ in 0..50 {
            let p = WorldPoint::new(rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0));
            if let Ok(s) = synthesize_panoramic_scan(&g, p, 36, 3.0) {
                assert!(s.ranges.iter().all(|&z| (0.0..=3.0).contains(&z)));
            }
        }
    }
}
