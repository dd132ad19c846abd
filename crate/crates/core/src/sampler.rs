//! Traversability-constrained RRT coverage of the reachable free space,
//! voxel-downsampled into a sparse set of positional hypotheses.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RelocError, Result};
use crate::geometry::WorldPoint;
use crate::map::{in_sampling_boundary, min_dist_to_obstacle, traversability_check, DistanceField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Voxel spacing of the output hypotheses (meters).
    pub rho: f64,
    /// Stop once a round adds at most this many new voxels.
    pub eps_gain: usize,
    /// Largest RRT extension step (meters).
    pub eta_max: f64,
    pub r_robot: f64,
    pub rng_seed: u64,
    pub max_rounds: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            eps_gain: 2,
            eta_max: 0.6,
            r_robot: 0.21,
            rng_seed: 0,
            max_rounds: 50,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(RelocError::InvalidConfig("rho must be positive".into()));
        }
        if !(self.r_robot > 0.0 && self.eta_max >= self.r_robot) {
            return Err(RelocError::InvalidConfig(
                "need eta_max >= r_robot > 0".into(),
            ));
        }
        if self.max_rounds == 0 {
            return Err(RelocError::InvalidConfig("max_rounds must be >= 1".into()));
        }
        Ok(())
    }
}

/// Expansion step that shrinks linearly from `eta_max` (clearance `2 r`) down
/// to `r_robot` (clearance `r`).
pub fn adaptive_expand_dist(field: &DistanceField, p: WorldPoint, r_robot: f64, eta_max: f64) -> f64 {
    let d_obs = min_dist_to_obstacle(field, p);
    if d_obs >= 2.0 * r_robot {
        eta_max
    } else if d_obs <= r_robot {
        r_robot
    } else {
        r_robot + (d_obs - r_robot) / r_robot * (eta_max - r_robot)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RrtTree {
    nodes: Vec<WorldPoint>,
    parents: Vec<Option<usize>>,
}

impl RrtTree {
    pub fn new(root: WorldPoint) -> Self {
        Self {
            nodes: vec![root],
            parents: vec![None],
        }
    }

    pub fn nodes(&self) -> &[WorldPoint] {
        &self.nodes
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, p: WorldPoint, parent: usize) {
        self.nodes.push(p);
        self.parents.push(Some(parent));
    }

    /// Index of the closest node; ties go to the oldest node.
    pub fn nearest(&self, p: WorldPoint) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.distance_sq(p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Integer voxel key of `p` on a `rho` lattice anchored at `anchor`.
pub fn voxel_key(p: WorldPoint, rho: f64, anchor: WorldPoint) -> (i64, i64) {
    (
        ((p.x - anchor.x) / rho).floor() as i64,
        ((p.y - anchor.y) / rho).floor() as i64,
    )
}

/// Groups point indices by voxel, ordered by key.
pub fn voxelize(points: &[WorldPoint], rho: f64, anchor: WorldPoint) -> BTreeMap<(i64, i64), Vec<usize>> {
    let mut voxels: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, &p) in points.iter().enumerate() {
        voxels.entry(voxel_key(p, rho, anchor)).or_default().push(i);
    }
    voxels
}

fn centroid(points: &[WorldPoint], members: &[usize]) -> WorldPoint {
    let sum = members
        .iter()
        .fold(WorldPoint::default(), |acc, &i| acc + points[i]);
    sum * (1.0 / members.len() as f64)
}

/// Centroid of the points in each non-empty `rho` voxel, ordered by voxel key.
pub fn voxel_downsample(points: &[WorldPoint], rho: f64, anchor: WorldPoint) -> Vec<WorldPoint> {
    voxelize(points, rho, anchor)
        .values()
        .map(|members| centroid(points, members))
        .collect()
}

/// The sparse positional hypothesis set.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionSet {
    pub positions: Vec<WorldPoint>,
    pub voxel_keys: Vec<(i64, i64)>,
    /// Tree node each hypothesis is attached to (the member nearest the voxel centroid).
    pub source_nodes: Vec<usize>,
}

impl PositionSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::fs::File::create(path).map_err(|e| RelocError::io(path, e))?;
        let mut text = String::from("x,y\n");
        for p in &self.positions {
            text.push_str(&format!("{},{}\n", p.x, p.y));
        }
        out.write_all(text.as_bytes())
            .map_err(|e| RelocError::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct SamplingOutcome {
    pub positions: PositionSet,
    pub tree: RrtTree,
    pub rounds: usize,
    /// New voxels added in each round.
    pub gains: Vec<usize>,
    pub terminated_by_gain: bool,
    pub attempts_per_round: usize,
}

/// Expansion attempts per round: enough for one representative per voxel
/// over the whole map.
pub fn attempts_per_round(field: &DistanceField, rho: f64) -> usize {
    let g = field.geometry();
    let area_cells = (g.width * g.height) as f64;
    let r = g.resolution;
    (area_cells * r * r / (rho * rho)).ceil().max(1.0) as usize
}

pub fn sample_hypotheses(
    field: &DistanceField,
    p0: WorldPoint,
    cfg: &SamplerConfig,
) -> Result<SamplingOutcome> {
    cfg.validate()?;
    let geometry = *field.geometry();
    if !in_sampling_boundary(&geometry, p0) {
        return Err(RelocError::Infeasible {
            x: p0.x,
            y: p0.y,
            reason: "start lies outside the map".into(),
        });
    }
    let clearance = min_dist_to_obstacle(field, p0);
    if clearance < cfg.r_robot {
        return Err(RelocError::Infeasible {
            x: p0.x,
            y: p0.y,
            reason: format!("start clearance {clearance:.3} m below robot radius"),
        });
    }

    let anchor = geometry.origin.position();
    let n_sampling = attempts_per_round(field, cfg.rho);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut tree = RrtTree::new(p0);
    let mut covered: HashSet<(i64, i64)> = HashSet::new();
    covered.insert(voxel_key(p0, cfg.rho, anchor));
    let mut gains = Vec::new();
    let mut terminated_by_gain = false;
    let (w, h) = (geometry.width_m(), geometry.height_m());

    while gains.len() < cfg.max_rounds {
        let mut gain = if gains.is_empty() { 1 } else { 0 };
        for _ in 0..n_sampling {
            let local = WorldPoint::new(rng.gen::<f64>() * w, rng.gen::<f64>() * h);
            let p_rand = geometry.local_to_world(local);
            let nearest_idx = tree.nearest(p_rand);
            let p_nearest = tree.nodes[nearest_idx];
            let eta = adaptive_expand_dist(field, p_nearest, cfg.r_robot, cfg.eta_max);
            let dist = p_nearest.distance(p_rand);
            if dist <= f64::EPSILON {
                continue;
            }
            let p_new = p_nearest.lerp(p_rand, eta.min(dist) / dist);
            if !(in_sampling_boundary(&geometry, p_new)
                && traversability_check(field, p_nearest, p_new, cfg.r_robot))
            {
                continue;
            }
            tree.push(p_new, nearest_idx);
            if covered.insert(voxel_key(p_new, cfg.rho, anchor)) {
                gain += 1;
            }
        }
        gains.push(gain);
        if gain <= cfg.eps_gain {
            terminated_by_gain = true;
            break;
        }
    }

    let positions = representatives(field, &tree, cfg, anchor);
    Ok(SamplingOutcome {
        positions,
        rounds: gains.len(),
        tree,
        gains,
        terminated_by_gain,
        attempts_per_round: n_sampling,
    })
}

/// One hypothesis per voxel: the centroid of its tree nodes when that point
/// is itself feasible and reachable from the nearest member, otherwise that
/// nearest member node.
fn representatives(field: &DistanceField, tree: &RrtTree, cfg: &SamplerConfig, anchor: WorldPoint) -> PositionSet {
    let voxels = voxelize(&tree.nodes, cfg.rho, anchor);
    let mut set = PositionSet {
        positions: Vec::with_capacity(voxels.len()),
        voxel_keys: Vec::with_capacity(voxels.len()),
        source_nodes: Vec::with_capacity(voxels.len()),
    };
    for (key, members) in voxels {
        let c = centroid(&tree.nodes, &members);
        let nearest = *members
            .iter()
            .min_by(|&&a, &&b| {
                tree.nodes[a]
                    .distance_sq(c)
                    .total_cmp(&tree.nodes[b].distance_sq(c))
                    .then(a.cmp(&b))
            })
            .expect("voxel has members");
        let position = if traversability_check(field, tree.nodes[nearest], c, cfg.r_robot) {
            c
        } else {
            tree.nodes[nearest]
        };
        set.positions.push(position);
        set.voxel_keys.push(key);
        set.source_nodes.push(nearest);
    }
    set
}
