//! Exact Euclidean distance transform and the geometric predicates built on it.

use super::{GridGeometry, OccupancyGrid};
use crate::geometry::WorldPoint;

// Stand-in for "no site" inside the lower-envelope passes; keeps the parabola
// intersection arithmetic finite.
const FAR: f64 = 1e30;

/// Per-cell Euclidean distance (meters) from each cell center to the nearest
/// blocked cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    geometry: GridGeometry,
    distances: Vec<f64>,
    has_obstacle: bool,
    unknown_as_occupied: bool,
}

impl DistanceField {
    /// Builds the field with a two-pass lower-envelope transform (rows, then
    /// columns). Unknown cells count as obstacles when `unknown_as_occupied`.
    pub fn build(grid: &OccupancyGrid, unknown_as_occupied: bool) -> Self {
        let geometry = *grid.geometry();
        let (w, h) = (geometry.width, geometry.height);
        let mut sq = vec![FAR; w * h];
        let mut has_obstacle = false;
        for iy in 0..h {
            for ix in 0..w {
                if grid.is_blocked(ix, iy, unknown_as_occupied) {
                    sq[iy * w + ix] = 0.0;
                    has_obstacle = true;
                }
            }
        }

        let n = w.max(h);
        let mut scratch = EnvelopeScratch::new(n);
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];

        for iy in 0..h {
            line[..w].copy_from_slice(&sq[iy * w..(iy + 1) * w]);
            scratch.transform(&line[..w], &mut out[..w]);
            sq[iy * w..(iy + 1) * w].copy_from_slice(&out[..w]);
        }
        for ix in 0..w {
            for iy in 0..h {
                line[iy] = sq[iy * w + ix];
            }
            scratch.transform(&line[..h], &mut out[..h]);
            for iy in 0..h {
                sq[iy * w + ix] = out[iy];
            }
        }

        let res = geometry.resolution;
        let distances = sq
            .into_iter()
            .map(|d2| {
                if d2 >= FAR / 2.0 {
                    f64::INFINITY
                } else {
                    d2.sqrt() * res
                }
            })
            .collect();

        Self {
            geometry,
            distances,
            has_obstacle,
            unknown_as_occupied,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    /// `false` when the source grid had no blocked cell; every in-bounds
    /// query then returns `f64::INFINITY`.
    pub fn has_obstacle(&self) -> bool {
        self.has_obstacle
    }

    pub fn unknown_as_occupied(&self) -> bool {
        self.unknown_as_occupied
    }

    #[inline]
    pub fn at_cell(&self, ix: usize, iy: usize) -> f64 {
        self.distances[self.geometry.index(ix, iy)]
    }

    pub fn values(&self) -> &[f64] {
        &self.distances
    }

    /// Distance stored for the cell containing `p`; `None` outside the raster.
    #[inline]
    pub fn lookup(&self, p: WorldPoint) -> Option<f64> {
        self.geometry
            .cell_of(p)
            .map(|(ix, iy)| self.distances[self.geometry.index(ix, iy)])
    }
}

/// Scratch buffers for the 1-D squared-distance lower envelope.
struct EnvelopeScratch {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl EnvelopeScratch {
    fn new(n: usize) -> Self {
        Self {
            vertices: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        if n == 0 {
            return;
        }
        let v = &mut self.vertices;
        let z = &mut self.bounds;
        let mut k = 0usize;
        v[0] = 0;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in 1..n {
            let qf = q as f64;
            let mut s;
            loop {
                let p = v[k];
                let pf = p as f64;
                s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
                // z[0] is -inf, so this never underflows k
                if s <= z[k] {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for (q, slot) in out.iter_mut().enumerate() {
            let qf = q as f64;
            while z[k + 1] < qf {
                k += 1;
            }
            let p = v[k];
            let dq = qf - p as f64;
            *slot = dq * dq + f[p];
        }
    }
}

/// Distance to the nearest obstacle for the cell containing `p`. Points
/// outside the raster report 0, as if they were on an obstacle.
#[inline]
pub fn min_dist_to_obstacle(field: &DistanceField, p: WorldPoint) -> f64 {
    field.lookup(p).unwrap_or(0.0)
}

/// Whether `p` lies inside the closed bounding rectangle of the raster.
pub fn in_sampling_boundary(geometry: &GridGeometry, p: WorldPoint) -> bool {
    let local = geometry.world_to_local(p);
    local.x >= 0.0 && local.y >= 0.0 && local.x <= geometry.width_m() && local.y <= geometry.height_m()
}

/// Whether every sample along `[p0, p1]`, spaced at most half a cell apart,
/// keeps at least `r_robot` of clearance.
pub fn traversability_check(
    field: &DistanceField,
    p0: WorldPoint,
    p1: WorldPoint,
    r_robot: f64,
) -> bool {
    // Sample from a canonical endpoint so the result does not depend on direction.
    let (a, b) = if (p0.x, p0.y) <= (p1.x, p1.y) {
        (p0, p1)
    } else {
        (p1, p0)
    };
    let step = field.resolution() / 2.0;
    let steps = (a.distance(b) / step).ceil().max(0.0) as usize;
    if steps == 0 {
        return min_dist_to_obstacle(field, a) >= r_robot
            && min_dist_to_obstacle(field, b) >= r_robot;
    }
    (0..=steps).all(|i| {
        let p = a.lerp(b, i as f64 / steps as f64);
        min_dist_to_obstacle(field, p) >= r_robot
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::map::CellState;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(w: usize, h: usize, res: f64) -> OccupancyGrid {
        OccupancyGrid::filled(w, h, res, Pose::default(), CellState::Free).unwrap()
    }

    fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> OccupancyGrid {
        let mut g = grid(w, h, 0.1);
        for iy in 0..h {
            for ix in 0..w {
                let r: f64 = rng.gen();
                if r < density {
                    g.set(ix, iy, CellState::Occupied);
                } else if r < density * 1.3 {
                    g.set(ix, iy, CellState::Unknown);
                }
            }
        }
        g
    }

    /// Brute force over every blocked cell center, in cell units.
    fn brute_force(g: &OccupancyGrid, unknown_as_occupied: bool) -> Vec<f64> {
        let blocked: Vec<(i64, i64)> = (0..g.height())
            .flat_map(|iy| (0..g.width()).map(move |ix| (ix, iy)))
            .filter(|&(ix, iy)| g.is_blocked(ix, iy, unknown_as_occupied))
            .map(|(ix, iy)| (ix as i64, iy as i64))
            .collect();
        let mut out = Vec::new();
        for iy in 0..g.height() as i64 {
            for ix in 0..g.width() as i64 {
                let best = blocked
                    .iter()
                    .map(|&(bx, by)| (bx - ix).pow(2) + (by - iy).pow(2))
                    .min();
                out.push(match best {
                    Some(d2) => (d2 as f64).sqrt() * g.resolution(),
                    None => f64::INFINITY,
                });
            }
        }
        out
    }

    #[test]
    fn single_obstacle_corner() {
        let mut g = grid(3, 3, 1.0);
        g.set(0, 0, CellState::Occupied);
        let f = DistanceField::build(&g, true);
        assert_eq!(f.at_cell(2, 2), 2.0 * std::f64::consts::SQRT_2);
        assert_eq!(f.at_cell(0, 0), 0.0);
    }

    #[test]
    fn empty_grid_is_infinite() {
        let f = DistanceField::build(&grid(5, 4, 0.1), true);
        assert!(!f.has_obstacle());
        assert!(f.values().iter().all(|d| d.is_infinite()));
        assert!(min_dist_to_obstacle(&f, WorldPoint::new(0.25, 0.25)).is_infinite());
    }

    #[test]
    fn matches_brute_force_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let (w, h) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
            let density = [0.002, 0.02, 0.2][trial % 3];
            let g = random_grid(&mut rng, w, h, density);
            for unknown in [true, false] {
                let f = DistanceField::build(&g, unknown);
                assert_eq!(f.values(), brute_force(&g, unknown).as_slice());
            }
        }
    }

    #[test]
    fn fifty_by_fifty_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let g = random_grid(&mut rng, 50, 50, 0.05);
            let f = DistanceField::build(&g, true);
            assert_eq!(f.values(), brute_force(&g, true).as_slice());
        }
    }

    #[test]
    fn point_queries() {
        let mut g = grid(10, 10, 0.1);
        g.set(4, 4, CellState::Occupied);
        let f = DistanceField::build(&g, true);
        assert_eq!(min_dist_to_obstacle(&f, WorldPoint::new(0.45, 0.45)), 0.0);
        assert_eq!(min_dist_to_obstacle(&f, WorldPoint::new(-0.1, 0.5)), 0.0);
        assert_eq!(min_dist_to_obstacle(&f, WorldPoint::new(0.5, 1.01)), 0.0);
    }

    #[test]
    fn point_queries_track_nearest_obstacle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_grid(&mut rng, 40, 30, 0.01);
        let f = DistanceField::build(&g, true);
        let blocked: Vec<WorldPoint> = (0..g.height())
            .flat_map(|iy| (0..g.width()).map(move |ix| (ix, iy)))
            .filter(|&(ix, iy)| g.is_blocked(ix, iy, true))
            .map(|(ix, iy)| g.geometry().cell_center(ix, iy))
            .collect();
        let half_diag = g.resolution() * std::f64::consts::SQRT_2 / 2.0;
        for _ in 0..500 {
            let p = WorldPoint::new(rng.gen_range(0.0..4.0), rng.gen_range(0.0..3.0));
            let truth = blocked.iter().map(|b| b.distance(p)).fold(f64::INFINITY, f64::min);
            assert!((min_dist_to_obstacle(&f, p) - truth).abs() <= half_diag + 1e-12);
        }
    }

    #[test]
    fn boundary_is_closed() {
        let g = grid(10, 20, 0.5);
        let geo = g.geometry();
        assert!(in_sampling_boundary(geo, WorldPoint::new(2.5, 5.0)));
        assert!(in_sampling_boundary(geo, WorldPoint::new(5.0, 10.0)));
        assert!(in_sampling_boundary(geo, WorldPoint::new(0.0, 3.0)));
        assert!(!in_sampling_boundary(geo, WorldPoint::new(6.0, 11.0)));
    }

    #[test]
    fn traversability_basics() {
        let mut g = grid(40, 40, 0.1);
        for iy in 0..40 {
            g.set(20, iy, CellState::Occupied);
        }
        let f = DistanceField::build(&g, true);
        let p = WorldPoint::new(0.5, 2.0);
        assert!(traversability_check(&f, p, p, 0.21));
        assert!(!traversability_check(&f, p, WorldPoint::new(3.5, 2.0), 0.21));
        assert!(traversability_check(&f, p, WorldPoint::new(1.5, 3.0), 0.21));
    }

    #[test]
    fn traversability_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut agree = 0;
        let total = 400;
        for _ in 0..total {
            let g = random_grid(&mut rng, 30, 30, 0.01);
            let f = DistanceField::build(&g, true);
            let p0 = WorldPoint::new(rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
            let p1 = WorldPoint::new(rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
            let r = rng.gen_range(0.05..0.3);
            let dense = (0..=1000).all(|i| {
                min_dist_to_obstacle(&f, p0.lerp(p1, i as f64 / 1000.0)) >= r
            });
            let fast = traversability_check(&f, p0, p1, r);
            // the two samplings only disagree where the segment clips a cell corner
            if fast == dense {
                agree += 1;
            }
        }
        assert!(agree as f64 >= 0.97 * total as f64, "agreement {agree}/{total}");
    }

    #[test]
    fn adding_obstacle_never_increases_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut g = random_grid(&mut rng, 25, 25, 0.02);
            let before = DistanceField::build(&g, true);
            g.set(rng.gen_range(0..25), rng.gen_range(0..25), CellState::Occupied);
            let after = DistanceField::build(&g, true);
            assert!(after
                .values()
                .iter()
                .zip(before.values())
                .all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn field_is_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_grid(&mut rng, 40, 40, 0.01);
        let f = DistanceField::build(&g, true);
        let bound = g.resolution() * std::f64::consts::SQRT_2 + 1e-12;
        for iy in 0..39 {
            for ix in 0..39 {
                let d = f.at_cell(ix, iy);
                assert!((d - f.at_cell(ix + 1, iy)).abs() <= bound);
                assert!((d - f.at_cell(ix, iy + 1)).abs() <= bound);
                assert!((d - f.at_cell(ix + 1, iy + 1)).abs() <= bound);
            }
        }
    }

    proptest! {
        #[test]
        fn traversability_is_symmetric(
            seed in 0u64..1000,
            x0 in -0.5f64..3.5, y0 in -0.5f64..3.5,
            x1 in -0.5f64..3.5, y1 in -0.5f64..3.5,
            r in 0.01f64..0.4,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_grid(&mut rng, 30, 30, 0.01);
            let f = DistanceField::build(&g, true);
            let a = WorldPoint::new(x0, y0);
            let b = WorldPoint::new(x1, y1);
            prop_assert_eq!(traversability_check(&f, a, b, r), traversability_check(&f, b, a, r));
        }
    }
}
