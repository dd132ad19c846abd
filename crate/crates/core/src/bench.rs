//! Kidnapped-robot trials on synthetic worlds, the ordering and metric
//! ablations, and heatmap grids for external plotting.

use std::collections::hash_map::DefaultHasher;
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RelocError, Result};
use crate::geometry::{angle_diff, Pose, WorldPoint};
use crate::map::{load_map, DistanceField, OccupancyGrid};
use crate::pipeline::{relocalize, smad_scores, HypothesisOrdering, PipelineConfig};
use crate::sampler::{sample_hypotheses, SamplerConfig};
use crate::scan::{downsample_scan, LidarScan};
use crate::sim::{generate_map, perturb_map_with, simulate_scan, LidarModel, MapKind, PerturbKind, PerturbParams};
use crate::smad::{rank_positions, SmadMode};
use crate::tam::{AlignmentMetric, PoseScorer};

/// A map either generated on the fly or loaded from a descriptor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSource {
    File { path: PathBuf },
    Generated {
        kind: MapKind,
        #[serde(default = "default_size")]
        size: [f64; 2],
        #[serde(default = "default_resolution")]
        resolution: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_size() -> [f64; 2] {
    [30.0, 20.0]
}

fn default_resolution() -> f64 {
    0.05
}

impl MapSource {
    pub fn generated(kind: MapKind, size: [f64; 2], resolution: f64, seed: u64) -> Self {
        MapSource::Generated {
            kind,
            size,
            resolution,
            seed,
        }
    }

    pub fn load(&self) -> Result<OccupancyGrid> {
        match self {
            MapSource::File { path } => load_map(path),
            MapSource::Generated {
                kind,
                size,
                resolution,
                seed,
            } => generate_map(*kind, (size[0], size[1]), *resolution, *seed),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MapSource::File { path } => path.display().to_string(),
            MapSource::Generated { kind, seed, .. } => format!("{kind}#{seed}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialSpec {
    pub maps: Vec<MapSource>,
    pub trials_per_map: usize,
    /// Fixed ground-truth poses `[x, y, theta]` used on every map instead of random draws.
    pub poses: Option<Vec<[f64; 3]>>,
    pub repetitions: usize,
    pub lidar: LidarModel,
    pub config: PipelineConfig,
    /// Seconds; slower trials count as failures.
    pub time_budget: f64,
    pub seed: u64,
    /// Applied to the world the scan is simulated in, never to the map used for relocalization.
    pub world_perturbation: Option<PerturbKind>,
    pub perturb: PerturbParams,
    pub success_distance: f64,
    pub success_angle_deg: f64,
    /// Random ground truths keep at least this distance from the raster border.
    pub border_margin: f64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            maps: vec![MapSource::generated(MapKind::ClutteredOffice, default_size(), 0.05, 0)],
            trials_per_map: 10,
            poses: None,
            repetitions: 1,
            lidar: LidarModel::default(),
            config: PipelineConfig::default(),
            time_budget: 30.0,
            seed: 0,
            world_perturbation: None,
            perturb: PerturbParams::default(),
            success_distance: 0.5,
            success_angle_deg: 30.0,
            border_margin: 1.0,
        }
    }
}

impl TrialSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.maps.is_empty() {
            return Err(RelocError::InvalidConfig("trial spec lists no maps".into()));
        }
        if self.repetitions == 0 {
            return Err(RelocError::InvalidConfig("repetitions must be >= 1".into()));
        }
        if !(self.time_budget > 0.0) {
            return Err(RelocError::InvalidConfig("time_budget must be positive".into()));
        }
        self.lidar.validate()?;
        self.config.validate()
    }
}

/// Everything that determines one trial, fixed before any relocalization runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedTrial {
    pub map_index: usize,
    pub trial: usize,
    pub repetition: usize,
    pub truth: Pose,
    pub scan_seed: u64,
    pub reloc_seed: u64,
    pub perturb_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub map: String,
    pub trial: usize,
    pub repetition: usize,
    pub seed: u64,
    pub true_x: f64,
    pub true_y: f64,
    pub true_theta: f64,
    pub est_x: Option<f64>,
    pub est_y: Option<f64>,
    pub est_theta: Option<f64>,
    pub d_err: Option<f64>,
    pub phi_err_deg: Option<f64>,
    pub success: bool,
    pub over_budget: bool,
    pub time_s: Option<f64>,
    pub confidence: Option<f64>,
    pub terminated_early: Option<bool>,
    pub batches: Option<usize>,
    pub hypotheses_evaluated: Option<usize>,
    pub hypothesis_count: Option<usize>,
    pub scan_digest: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub successes: usize,
    /// Success rate in percent.
    pub sr: f64,
    /// Mean wall time of successful trials.
    pub t_avg: Option<f64>,
    pub t_avg_all: Option<f64>,
    pub t_median_all: Option<f64>,
    /// Errors averaged over successful trials only.
    pub d_avg_err: Option<f64>,
    pub phi_avg_err_deg: Option<f64>,
    pub mean_batches: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub map: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    #[serde(flatten)]
    pub overall: Summary,
    pub per_map: Vec<MapSummary>,
    pub spec: TrialSpec,
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub records: Vec<TrialRecord>,
    pub report: TrialReport,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 })
}

pub fn aggregate(records: &[TrialRecord]) -> Summary {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.success).collect();
    let times_ok: Vec<f64> = ok.iter().filter_map(|r| r.time_s).collect();
    let times_all: Vec<f64> = records.iter().filter_map(|r| r.time_s).collect();
    let d: Vec<f64> = ok.iter().filter_map(|r| r.d_err).collect();
    let phi: Vec<f64> = ok.iter().filter_map(|r| r.phi_err_deg).collect();
    let batches: Vec<f64> = records.iter().filter_map(|r| r.batches.map(|b| b as f64)).collect();
    Summary {
        trials: records.len(),
        successes: ok.len(),
        sr: if records.is_empty() {
            0.0
        } else {
            100.0 * ok.len() as f64 / records.len() as f64
        },
        t_avg: mean(&times_ok),
        t_avg_all: mean(&times_all),
        t_median_all: median(&times_all),
        d_avg_err: mean(&d),
        phi_avg_err_deg: mean(&phi),
        mean_batches: mean(&batches),
    }
}

/// Free cells whose clearance is at least `r_robot` and that connect to
/// `start` through such cells (4-neighborhood).
pub fn reachable_cells(field: &DistanceField, start: WorldPoint, r_robot: f64) -> Vec<bool> {
    let g = *field.geometry();
    let mut seen = vec![false; g.len()];
    let Some((sx, sy)) = g.cell_of(start) else {
        return seen;
    };
    if field.at_cell(sx, sy) < r_robot {
        return seen;
    }
    seen[g.index(sx, sy)] = true;
    let mut queue = VecDeque::from([(sx, sy)]);
    while let Some((x, y)) = queue.pop_front() {
        let neighbors = [
            (x.wrapping_sub(1), y),
            (x + 1, y),
            (x, y.wrapping_sub(1)),
            (x, y + 1),
        ];
        for (nx, ny) in neighbors {
            if nx >= g.width || ny >= g.height {
                continue;
            }
            let i = g.index(nx, ny);
            if !seen[i] && field.at_cell(nx, ny) >= r_robot {
                seen[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    seen
}

/// Cells eligible as random ground truth: reachable and away from the border.
fn truth_candidates(grid: &OccupancyGrid, spec: &TrialSpec) -> Vec<(usize, usize)> {
    let field = DistanceField::build(grid, spec.config.unknown_as_occupied);
    let reach = reachable_cells(&field, spec.config.start_point(), spec.config.sampler.r_robot);
    let g = grid.geometry();
    let margin = (spec.border_margin / g.resolution).ceil() as usize;
    (0..g.height)
        .flat_map(|iy| (0..g.width).map(move |ix| (ix, iy)))
        .filter(|&(ix, iy)| {
            ix >= margin && iy >= margin && ix + margin < g.width && iy + margin < g.height && reach[g.index(ix, iy)]
        })
        .collect()
}

/// Deterministic trial plan for map `map_index`.
pub fn plan_trials(grid: &OccupancyGrid, map_index: usize, spec: &TrialSpec) -> Result<Vec<PlannedTrial>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(map_index as u64 + 1);
    let truths: Vec<Pose> = match &spec.poses {
        Some(poses) => poses.iter().map(|p| Pose::new(p[0], p[1], p[2])).collect(),
        None => {
            let cells = truth_candidates(grid, spec);
            if cells.is_empty() {
                return Err(RelocError::Infeasible {
                    x: spec.config.start_point().x,
                    y: spec.config.start_point().y,
                    reason: "no reachable cell for ground-truth poses".into(),
                });
            }
            let res = grid.resolution();
            (0..spec.trials_per_map)
                .map(|_| {
                    let (ix, iy) = cells[rng.gen_range(0..cells.len())];
                    let local = WorldPoint::new(
                        (ix as f64 + rng.gen_range(0.25..0.75)) * res,
                        (iy as f64 + rng.gen_range(0.25..0.75)) * res,
                    );
                    let p = grid.geometry().local_to_world(local);
                    Pose::from_position(p, rng.gen_range(-PI..PI))
                })
                .collect()
        }
    };
    let mut plan = Vec::new();
    for (trial, truth) in truths.into_iter().enumerate() {
        for repetition in 0..spec.repetitions {
            plan.push(PlannedTrial {
                map_index,
                trial,
                repetition,
                truth,
                scan_seed: rng.gen(),
                reloc_seed: rng.gen(),
                perturb_seed: rng.gen(),
            });
        }
    }
    Ok(plan)
}

/// The scan the robot would see in the (possibly perturbed) world.
pub fn trial_scan(grid: &OccupancyGrid, planned: &PlannedTrial, spec: &TrialSpec) -> Result<LidarScan> {
    match spec.world_perturbation {
        Some(kind) => {
            let params = PerturbParams {
                near: Some(planned.truth.position()),
                ..spec.perturb
            };
            let world = perturb_map_with(grid, kind, planned.perturb_seed, &params);
            simulate_scan(&world, &planned.truth, &spec.lidar, planned.scan_seed)
        }
        None => simulate_scan(grid, &planned.truth, &spec.lidar, planned.scan_seed),
    }
}

pub fn scan_digest(scan: &LidarScan) -> String {
    let mut h = DefaultHasher::new();
    scan.angle_min().to_bits().hash(&mut h);
    scan.angle_increment().to_bits().hash(&mut h);
    for z in scan.ranges() {
        z.to_bits().hash(&mut h);
    }
    format!("{:016x}", h.finish())
}

fn run_one(grid: &OccupancyGrid, label: &str, planned: &PlannedTrial, spec: &TrialSpec, with_time: bool) -> TrialRecord {
    let truth = planned.truth;
    let mut record = TrialRecord {
        map: label.to_string(),
        trial: planned.trial,
        repetition: planned.repetition,
        seed: planned.reloc_seed,
        true_x: truth.x,
        true_y: truth.y,
        true_theta: truth.theta,
        est_x: None,
        est_y: None,
        est_theta: None,
        d_err: None,
        phi_err_deg: None,
        success: false,
        over_budget: false,
        time_s: None,
        confidence: None,
        terminated_early: None,
        batches: None,
        hypotheses_evaluated: None,
        hypothesis_count: None,
        scan_digest: String::new(),
        error: None,
    };
    let scan = match trial_scan(grid, planned, spec) {
        Ok(s) => s,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.scan_digest = scan_digest(&scan);
    let started = Instant::now();
    let outcome = relocalize(grid, &scan, &spec.config, planned.reloc_seed);
    let elapsed = started.elapsed().as_secs_f64();
    record.over_budget = elapsed > spec.time_budget;
    if with_time {
        record.time_s = Some(elapsed);
    }
    match outcome {
        Ok(r) => {
            let d = r.pose.position().distance(truth.position());
            let phi = angle_diff(r.pose.theta, truth.theta).abs().to_degrees();
            record.est_x = Some(r.pose.x);
            record.est_y = Some(r.pose.y);
            record.est_theta = Some(r.pose.theta);
            record.d_err = Some(d);
            record.phi_err_deg = Some(phi);
            record.confidence = Some(r.confidence);
            record.terminated_early = Some(r.terminated_early);
            record.batches = Some(r.batches_processed);
            record.hypotheses_evaluated = Some(r.hypotheses_evaluated);
            record.hypothesis_count = Some(r.hypothesis_count);
            record.success = !record.over_budget && d < spec.success_distance && phi < spec.success_angle_deg;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs every planned trial in order. With `with_time` false no wall-clock
/// values are recorded, which makes the output a pure function of the `TrialSpec`.
pub fn run_trials(spec: &TrialSpec, with_time: bool) -> Result<TrialRun> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut per_map = Vec::new();
    for (i, source) in spec.maps.iter().enumerate() {
        let grid = source.load()?;
        let label = source.label();
        let plan = plan_trials(&grid, i, spec)?;
        let map_records: Vec<TrialRecord> = plan.iter().map(|p| run_one(&grid, &label, p, spec, with_time)).collect();
        per_map.push(MapSummary {
            map: label,
            summary: aggregate(&map_records),
        });
        records.extend(map_records);
    }
    let report = TrialReport {
        overall: aggregate(&records),
        per_map,
        spec: spec.clone(),
    };
    Ok(TrialRun { records, report })
}

pub fn write_records_csv(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| RelocError::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| RelocError::io(path, e))
}

impl TrialRun {
    /// Writes `trials.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| RelocError::io(dir, e))?;
        write_records_csv(&self.records, dir.join("trials.csv"))?;
        write_json(&self.report, dir.join("report.json"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationVariant {
    pub name: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmadAblationReport {
    pub variants: Vec<AblationVariant>,
    /// Prefix-sum and direct coarse scores produced the same ordering on every trial.
    pub orderings_identical: bool,
    pub max_score_difference: f64,
    pub spec: TrialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamAblationRow {
    pub rho: f64,
    pub metric: AlignmentMetric,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamAblationReport {
    pub rows: Vec<TamAblationRow>,
    /// Every variant consumed exactly the same scans.
    pub scans_identical: bool,
    pub spec: TrialSpec,
}

/// Largest coarse-score gap between the prefix-sum and direct evaluations,
/// and whether their orderings agree, over every planned trial.
pub fn ordering_agreement(spec: &TrialSpec) -> Result<(bool, f64)> {
    let mut identical = true;
    let mut max_diff = 0.0f64;
    for (i, source) in spec.maps.iter().enumerate() {
        let grid = source.load()?;
        let field = DistanceField::build(&grid, spec.config.unknown_as_occupied);
        for planned in plan_trials(&grid, i, spec)? {
            let scan = downsample_scan(&trial_scan(&grid, &planned, spec)?, spec.config.n_skip_beam)?;
            if scan.valid_count() == 0 {
                continue;
            }
            let sampler = SamplerConfig {
                rng_seed: planned.reloc_seed,
                ..spec.config.sampler.clone()
            };
            let positions = sample_hypotheses(&field, spec.config.start_point(), &sampler)?.positions.positions;
            let a = smad_scores(&grid, &scan, &positions, &spec.config, SmadMode::PrefixSum)?;
            let b = smad_scores(&grid, &scan, &positions, &spec.config, SmadMode::Direct)?;
            for (x, y) in a.iter().zip(&b) {
                if x.is_finite() && y.is_finite() {
                    max_diff = max_diff.max((x - y).abs());
                }
            }
            identical &= rank_positions(&a) == rank_positions(&b);
        }
    }
    Ok((identical, max_diff))
}

pub fn ablation_smad(spec: &TrialSpec, with_time: bool) -> Result<SmadAblationReport> {
    let mut variants = Vec::new();
    for (name, ordering) in [
        ("random", HypothesisOrdering::Random),
        ("smad_direct", HypothesisOrdering::SmadDirect),
        ("smad_prefix", HypothesisOrdering::SmadPrefix),
    ] {
        let mut s = spec.clone();
        s.config.ordering = ordering;
        let run = run_trials(&s, with_time)?;
        variants.push(AblationVariant {
            name: name.to_string(),
            summary: run.report.overall,
        });
    }
    let (orderings_identical, max_score_difference) = ordering_agreement(spec)?;
    Ok(SmadAblationReport {
        variants,
        orderings_identical,
        max_score_difference,
        spec: spec.clone(),
    })
}

pub fn ablation_tam(spec: &TrialSpec, with_time: bool) -> Result<TamAblationReport> {
    let mut rows = Vec::new();
    let mut digests: Option<Vec<String>> = None;
    let mut scans_identical = true;
    for rho in [1.0, 0.5] {
        for metric in [AlignmentMetric::Tam, AlignmentMetric::Baseline] {
            let mut s = spec.clone();
            s.config.sampler.rho = rho;
            s.config.metric = metric;
            let run = run_trials(&s, with_time)?;
            let d: Vec<String> = run.records.iter().map(|r| r.scan_digest.clone()).collect();
            match &digests {
                Some(first) => scans_identical &= *first == d,
                None => digests = Some(d),
            }
            rows.push(TamAblationRow {
                rho,
                metric,
                summary: run.report.overall,
            });
        }
    }
    Ok(TamAblationReport {
        rows,
        scans_identical,
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapKind {
    SmadSpatial,
    TamTranslationSweep,
}

impl std::str::FromStr for HeatmapKind {
    type Err = RelocError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smad_spatial" => Ok(HeatmapKind::SmadSpatial),
            "tam_translation_sweep" => Ok(HeatmapKind::TamTranslationSweep),
            _ => Err(RelocError::InvalidConfig(format!("unknown heatmap kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatmapSpec {
    pub map: MapSource,
    /// Ground-truth pose `[x, y, theta]` the scan is simulated from.
    pub pose: [f64; 3],
    pub lidar: LidarModel,
    pub config: PipelineConfig,
    pub seed: u64,
    pub world_perturbation: Option<PerturbKind>,
    pub perturb: PerturbParams,
    /// Spacing of the spatial grid (meters).
    pub grid_step: f64,
    /// Translation offsets along x, in steps of `offset_step` centered on zero.
    pub offset_count: usize,
    pub offset_step: f64,
    pub angle_step_deg: f64,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        Self {
            map: MapSource::generated(MapKind::SplitRooms, [16.0, 10.0], 0.05, 0),
            pose: [3.0, 3.5, 0.0],
            lidar: LidarModel::default().noiseless(),
            config: PipelineConfig::default(),
            seed: 0,
            world_perturbation: Some(PerturbKind::OpenDoor),
            perturb: PerturbParams::default(),
            grid_step: 0.25,
            offset_count: 15,
            offset_step: 0.1,
            angle_step_deg: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmadCell {
    pub x: f64,
    pub y: f64,
    pub smad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dx: f64,
    pub dy: f64,
    pub dtheta_deg: f64,
    pub tam: f64,
    pub baseline: f64,
    /// Orientation error of each metric's best heading at this offset.
    pub tam_argmax_err_deg: f64,
    pub baseline_argmax_err_deg: f64,
}

impl HeatmapSpec {
    fn scan(&self, grid: &OccupancyGrid) -> Result<LidarScan> {
        let truth = Pose::new(self.pose[0], self.pose[1], self.pose[2]);
        match self.world_perturbation {
            Some(kind) => {
                let params = PerturbParams {
                    near: Some(truth.position()),
                    ..self.perturb
                };
                simulate_scan(&perturb_map_with(grid, kind, self.seed, &params), &truth, &self.lidar, self.seed)
            }
            None => simulate_scan(grid, &truth, &self.lidar, self.seed),
        }
    }
}

/// Coarse score at every reachable grid point spaced `grid_step` apart.
pub fn smad_spatial(spec: &HeatmapSpec) -> Result<Vec<SmadCell>> {
    let grid = spec.map.load()?;
    let scan = downsample_scan(&spec.scan(&grid)?, spec.config.n_skip_beam)?;
    let field = DistanceField::build(&grid, spec.config.unknown_as_occupied);
    let reach = reachable_cells(&field, spec.config.start_point(), spec.config.sampler.r_robot);
    let g = *grid.geometry();
    let step = ((spec.grid_step / g.resolution).round() as usize).max(1);
    let mut positions = Vec::new();
    for iy in (step / 2..g.height).step_by(step) {
        for ix in (step / 2..g.width).step_by(step) {
            if reach[g.index(ix, iy)] {
                positions.push(g.cell_center(ix, iy));
            }
        }
    }
    let scores = smad_scores(&grid, &scan, &positions, &spec.config, SmadMode::PrefixSum)?;
    Ok(positions
        .into_iter()
        .zip(scores)
        .map(|(p, smad)| SmadCell { x: p.x, y: p.y, smad })
        .collect())
}

/// Scores on a grid of x-offsets from the true position and heading offsets
/// over a full turn, plus each metric's heading-argmax error per offset.
pub fn tam_translation_sweep(spec: &HeatmapSpec) -> Result<Vec<SweepRow>> {
    let grid = spec.map.load()?;
    let scan = downsample_scan(&spec.scan(&grid)?, spec.config.n_skip_beam)?;
    let field = DistanceField::build(&grid, spec.config.unknown_as_occupied);
    let scorer = PoseScorer::new(&field, &scan, spec.config.lparams, spec.config.tparams)?;
    let truth = Pose::new(spec.pose[0], spec.pose[1], spec.pose[2]);
    let n_angles = (360.0 / spec.angle_step_deg).round() as usize;
    let dthetas: Vec<f64> = (0..n_angles).map(|k| k as f64 * spec.angle_step_deg - 180.0).collect();
    let mut rows = Vec::with_capacity(spec.offset_count * n_angles);
    let half = (spec.offset_count as f64 - 1.0) / 2.0;
    for i in 0..spec.offset_count {
        let dx = (i as f64 - half) * spec.offset_step;
        let p = WorldPoint::new(truth.x + dx, truth.y);
        let scored: Vec<(f64, f64)> = dthetas
            .iter()
            .map(|dt| {
                let pose = Pose::from_position(p, truth.theta + dt.to_radians());
                (scorer.score(&pose, AlignmentMetric::Tam), scorer.score(&pose, AlignmentMetric::Baseline))
            })
            .collect();
        let argmax = |pick: fn(&(f64, f64)) -> f64| {
            let mut best = 0;
            for (k, s) in scored.iter().enumerate() {
                if pick(s) > pick(&scored[best]) {
                    best = k;
                }
            }
            dthetas[best].abs()
        };
        let tam_err = argmax(|s| s.0);
        let base_err = argmax(|s| s.1);
        for (dt, (tam, baseline)) in dthetas.iter().zip(&scored) {
            rows.push(SweepRow {
                dx,
                dy: 0.0,
                dtheta_deg: *dt,
                tam: *tam,
                baseline: *baseline,
                tam_argmax_err_deg: tam_err,
                baseline_argmax_err_deg: base_err,
            });
        }
    }
    Ok(rows)
}

pub fn write_rows_csv<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| RelocError::io(path, e))
}

pub fn emit_heatmap(kind: HeatmapKind, spec: &HeatmapSpec, out: impl AsRef<Path>) -> Result<usize> {
    match kind {
        HeatmapKind::SmadSpatial => {
            let rows = smad_spatial(spec)?;
            write_rows_csv(&rows, out)?;
            Ok(rows.len())
        }
        HeatmapKind::TamTranslationSweep => {
            let rows = tam_translation_sweep(spec)?;
            write_rows_csv(&rows, out)?;
            Ok(rows.len())
        }
    }
}
