//! End-to-end relocalization: sample, coarse-rank, then batch-wise
//! orientation selection, local top-k refinement and early termination.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RelocError, Result};
use crate::geometry::{Pose, WorldPoint};
use crate::icp::{icp_refine_indexed, map_occupied_points, IcpParams, PointIndex, RefinedPose};
use crate::map::{DistanceField, OccupancyGrid};
use crate::raycast::RayCaster;
use crate::sampler::{sample_hypotheses, SamplerConfig};
use crate::scan::{downsample_scan, extract_fov_sections, DownsampledScan, LidarScan};
use crate::smad::{rank_positions, OrientationEnum, SmadMode, SmadScorer};
use crate::tam::{heading_set, AlignmentMetric, LikelihoodParams, PoseScorer, TamParams};

/// How positions are ordered before batching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisOrdering {
    #[default]
    SmadPrefix,
    SmadDirect,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub batch_size: usize,
    pub top_k: usize,
    pub tau: f64,
    /// Headings tried per position when selecting orientation.
    pub orientation_count: usize,
    pub heading_phase: f64,
    /// Approximate number of index shifts tried by the coarse metric.
    pub smad_orientation_count: usize,
    /// Field-of-view ratio at or above which the coarse metric skips the shift search.
    pub full_fov_ratio: f64,
    pub n_skip_beam: usize,
    pub sampler: SamplerConfig,
    pub lparams: LikelihoodParams,
    pub tparams: TamParams,
    pub icp: IcpParams,
    /// Refine against every beam of the raw scan instead of the downsampled one.
    pub icp_full_resolution: bool,
    pub ordering: HypothesisOrdering,
    pub metric: AlignmentMetric,
    /// Threads for intra-batch work; 0 uses the global pool.
    pub worker_count: usize,
    /// Sampler root in world coordinates; the world origin when absent.
    pub start: Option<[f64; 2]>,
    pub unknown_as_occupied: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            batch_size: 200,
            top_k: 20,
            tau: 0.95,
            orientation_count: 32,
            heading_phase: 0.0,
            smad_orientation_count: 32,
            full_fov_ratio: 0.9,
            n_skip_beam: 4,
            sampler: SamplerConfig::default(),
            lparams: LikelihoodParams::default(),
            tparams: TamParams::default(),
            icp: IcpParams::default(),
            icp_full_resolution: false,
            ordering: HypothesisOrdering::default(),
            metric: AlignmentMetric::default(),
            worker_count: 0,
            start: None,
            unknown_as_occupied: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.top_k == 0 || self.top_k > self.batch_size {
            return Err(RelocError::InvalidConfig("need 1 <= top_k <= batch_size".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(RelocError::InvalidConfig("tau must be positive and finite".into()));
        }
        if self.orientation_count == 0 || self.smad_orientation_count == 0 {
            return Err(RelocError::InvalidConfig("orientation counts must be >= 1".into()));
        }
        if self.n_skip_beam == 0 {
            return Err(RelocError::InvalidConfig("n_skip_beam must be >= 1".into()));
        }
        self.sampler.validate()?;
        self.lparams.validate()?;
        self.tparams.validate()?;
        self.icp.validate()
    }

    pub fn start_point(&self) -> WorldPoint {
        self.start.map_or(WorldPoint::default(), |[x, y]| WorldPoint::new(x, y))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sampled,
    CoarseRanked,
    Oriented,
    Refined,
    Reevaluated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseHypothesis {
    pub position_index: usize,
    /// Position in the coarse ordering.
    pub rank: usize,
    pub batch: usize,
    pub position: WorldPoint,
    /// Coarse score; absent when positions were shuffled instead.
    pub smad: Option<f64>,
    pub oriented: Option<Pose>,
    pub oriented_score: Option<f64>,
    pub refined: Option<RefinedPose>,
    /// Pose and score that competed for the batch best.
    pub final_pose: Option<Pose>,
    pub final_score: Option<f64>,
    pub stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub preprocessing: f64,
    pub sampling: f64,
    pub coarse_ranking: f64,
    pub orientation: f64,
    pub refinement: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelocalizationResult {
    pub pose: Pose,
    pub confidence: f64,
    pub terminated_early: bool,
    pub batches_processed: usize,
    pub hypotheses_evaluated: usize,
    /// Size of the sampled position set.
    pub hypothesis_count: usize,
    pub sampler_rounds: usize,
    pub timings: StageTimings,
    pub seed: u64,
    #[serde(skip)]
    pub hypotheses: Vec<PoseHypothesis>,
}

/// On-disk form of a result; timings may be dropped for byte-stable output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub pose: PoseRecord,
    pub confidence: f64,
    pub terminated_early: bool,
    pub batches_processed: usize,
    pub hypotheses_evaluated: usize,
    pub hypothesis_count: usize,
    pub timings: Option<StageTimings>,
    pub config: PipelineConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoseRecord {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RelocalizationResult {
    pub fn to_file(&self, cfg: &PipelineConfig, with_timings: bool) -> ResultFile {
        ResultFile {
            pose: PoseRecord {
                x: self.pose.x,
                y: self.pose.y,
                theta: self.pose.theta,
            },
            confidence: self.confidence,
            terminated_early: self.terminated_early,
            batches_processed: self.batches_processed,
            hypotheses_evaluated: self.hypotheses_evaluated,
            hypothesis_count: self.hypothesis_count,
            timings: with_timings.then_some(self.timings),
            config: cfg.clone(),
            seed: self.seed,
        }
    }

    pub fn write_audit_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_audit_csv(&self.hypotheses, path)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_audit_csv(hypotheses: &[PoseHypothesis], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "position_index", "rank", "batch", "x", "y", "smad", "oriented_theta", "oriented_score",
        "refined_x", "refined_y", "refined_theta", "icp_converged", "icp_iterations", "final_x",
        "final_y", "final_theta", "final_score", "stage",
    ])?;
    for h in hypotheses {
        let stage = serde_json::to_value(h.stage)?;
        w.write_record([
            h.position_index.to_string(),
            h.rank.to_string(),
            h.batch.to_string(),
            h.position.x.to_string(),
            h.position.y.to_string(),
            opt(h.smad),
            opt(h.oriented.map(|p| p.theta)),
            opt(h.oriented_score),
            opt(h.refined.as_ref().map(|r| r.pose.x)),
            opt(h.refined.as_ref().map(|r| r.pose.y)),
            opt(h.refined.as_ref().map(|r| r.pose.theta)),
            h.refined.as_ref().map(|r| r.converged.to_string()).unwrap_or_default(),
            h.refined.as_ref().map(|r| r.iterations_used.to_string()).unwrap_or_default(),
            opt(h.final_pose.map(|p| p.x)),
            opt(h.final_pose.map(|p| p.y)),
            opt(h.final_pose.map(|p| p.theta)),
            opt(h.final_score),
            stage.as_str().unwrap_or_default().to_string(),
        ])?;
    }
    w.flush().map_err(|e| RelocError::io(path, e))
}

/// Read-only state shared by every batch.
pub struct BatchContext<'a> {
    pub scorer: PoseScorer<'a>,
    pub icp_scan: &'a DownsampledScan,
    pub index: &'a PointIndex,
    pub headings: &'a [f64],
    pub cfg: &'a PipelineConfig,
}

/// Orients every position, keeps the local top-k, refines and re-scores them.
/// Returns the index (into `batch`) of the best re-evaluated hypothesis.
pub fn process_batch(batch: &mut [PoseHypothesis], ctx: &BatchContext<'_>) -> (usize, f64, f64) {
    assert!(!batch.is_empty(), "batch must be non-empty");
    let t0 = Instant::now();
    let metric = ctx.cfg.metric;
    let oriented: Vec<(f64, f64)> = batch
        .par_iter()
        .map(|h| ctx.scorer.best_heading(h.position, ctx.headings, metric))
        .collect();
    for (h, &(theta, score)) in batch.iter_mut().zip(&oriented) {
        h.oriented = Some(Pose::from_position(h.position, theta));
        h.oriented_score = Some(score);
        h.stage = Stage::Oriented;
    }
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.sort_by(|&a, &b| {
        oriented[b]
            .1
            .total_cmp(&oriented[a].1)
            .then(batch[a].position_index.cmp(&batch[b].position_index))
    });
    order.truncate(ctx.cfg.top_k);
    let t_orient = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let refined: Vec<(RefinedPose, Pose, f64)> = order
        .par_iter()
        .map(|&i| {
            let start = batch[i].oriented.expect("oriented above");
            let r = icp_refine_indexed(ctx.icp_scan, start, ctx.index, &ctx.cfg.icp);
            // a refinement that never found enough correspondences is a failure;
            // one that ran out of iterations still moved toward the map
            if r.iterations_used > 0 {
                let s = ctx.scorer.score(&r.pose, metric);
                (r.clone(), r.pose, s)
            } else {
                (r, start, oriented[i].1)
            }
        })
        .collect();
    let mut best = (order[0], f64::NEG_INFINITY);
    for (&i, (r, pose, score)) in order.iter().zip(refined) {
        let h = &mut batch[i];
        h.refined = Some(r);
        h.final_pose = Some(pose);
        h.final_score = Some(score);
        h.stage = Stage::Reevaluated;
        if score > best.1 {
            best = (i, score);
        }
    }
    (best.0, t_orient, t1.elapsed().as_secs_f64())
}

pub fn relocalize(grid: &OccupancyGrid, scan: &LidarScan, cfg: &PipelineConfig, seed: u64) -> Result<RelocalizationResult> {
    cfg.validate()?;
    match cfg.worker_count {
        0 => relocalize_inner(grid, scan, cfg, seed),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RelocError::InvalidConfig(format!("cannot start worker pool: {e}")))?
            .install(|| relocalize_inner(grid, scan, cfg, seed)),
    }
}

fn relocalize_inner(grid: &OccupancyGrid, scan: &LidarScan, cfg: &PipelineConfig, seed: u64) -> Result<RelocalizationResult> {
    let t_total = Instant::now();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    if scan.valid_count() == 0 {
        return Err(RelocError::NoValidBeams);
    }
    let reduced = downsample_scan(scan, cfg.n_skip_beam)?;
    if reduced.valid_count() == 0 {
        return Err(RelocError::NoValidBeams);
    }
    let full = downsample_scan(scan, 1)?;
    let field = DistanceField::build(grid, cfg.unknown_as_occupied);
    let index = PointIndex::new(map_occupied_points(grid)?, cfg.icp.correspondence_cutoff);
    let scorer = PoseScorer::new(&field, &reduced, cfg.lparams, cfg.tparams)?;
    let headings = heading_set(cfg.orientation_count, cfg.heading_phase);
    timings.preprocessing = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let sampler_cfg = SamplerConfig {
        rng_seed: seed,
        ..cfg.sampler.clone()
    };
    let outcome = sample_hypotheses(&field, cfg.start_point(), &sampler_cfg)?;
    let positions = outcome.positions.positions;
    timings.sampling = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (order, smad) = coarse_order(grid, &reduced, &positions, cfg, seed)?;
    timings.coarse_ranking = t.elapsed().as_secs_f64();

    let mut hypotheses: Vec<PoseHypothesis> = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| PoseHypothesis {
            position_index: i,
            rank,
            batch: rank / cfg.batch_size,
            position: positions[i],
            smad: smad.as_ref().map(|s| s[i]),
            oriented: None,
            oriented_score: None,
            refined: None,
            final_pose: None,
            final_score: None,
            stage: Stage::CoarseRanked,
        })
        .collect();

    let ctx = BatchContext {
        scorer,
        icp_scan: if cfg.icp_full_resolution { &full } else { &reduced },
        index: &index,
        headings: &headings,
        cfg,
    };
    let mut best: Option<(usize, f64)> = None;
    let mut batches = 0;
    let mut evaluated = 0;
    let mut terminated_early = false;
    for (b, chunk) in hypotheses.chunks_mut(cfg.batch_size).enumerate() {
        let (local, t_orient, t_refine) = process_batch(chunk, &ctx);
        timings.orientation += t_orient;
        timings.refinement += t_refine;
        batches += 1;
        evaluated += chunk.len();
        let score = chunk[local].final_score.expect("batch best is re-evaluated");
        let global = b * cfg.batch_size + local;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((global, score));
        }
        if score >= cfg.tau {
            best = Some((global, score));
            terminated_early = true;
            break;
        }
    }
    let (best_idx, confidence) = best.ok_or(RelocError::EmptyMap)?;
    let pose = hypotheses[best_idx].final_pose.expect("best is re-evaluated");
    timings.total = t_total.elapsed().as_secs_f64();
    Ok(RelocalizationResult {
        pose,
        confidence,
        terminated_early,
        batches_processed: batches,
        hypotheses_evaluated: evaluated,
        hypothesis_count: positions.len(),
        sampler_rounds: outcome.rounds,
        timings,
        seed,
        hypotheses,
    })
}

/// Processing order of `positions` and, when ranked by the coarse metric,
/// their scores.
pub fn coarse_order(
    grid: &OccupancyGrid,
    scan: &DownsampledScan,
    positions: &[WorldPoint],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(Vec<usize>, Option<Vec<f64>>)> {
    let mode = match cfg.ordering {
        HypothesisOrdering::Random => {
            let mut order: Vec<usize> = (0..positions.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            order.shuffle(&mut rng);
            return Ok((order, None));
        }
        HypothesisOrdering::SmadPrefix => SmadMode::PrefixSum,
        HypothesisOrdering::SmadDirect => SmadMode::Direct,
    };
    let scores = smad_scores(grid, scan, positions, cfg, mode)?;
    Ok((rank_positions(&scores), Some(scores)))
}

/// Coarse score of every position; positions that cannot be scored rank last.
pub fn smad_scores(
    grid: &OccupancyGrid,
    scan: &DownsampledScan,
    positions: &[WorldPoint],
    cfg: &PipelineConfig,
    mode: SmadMode,
) -> Result<Vec<f64>> {
    let n_s = scan.panoramic_count()?;
    let sections = extract_fov_sections(scan, n_s);
    let orientations = OrientationEnum::with_count(n_s, cfg.smad_orientation_count)?;
    let smad = SmadScorer::new(scan, sections, orientations, cfg.full_fov_ratio, mode)?;
    let caster = RayCaster::new(grid, cfg.unknown_as_occupied);
    Ok(positions
        .par_iter()
        .map(|&p| smad.score(&caster, p).map_or(f64::INFINITY, |e| e.score))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_diff;
    use crate::map::CellState;
    use crate::raycast::cast_ray;
    use std::f64::consts::PI;

    fn office() -> OccupancyGrid {
        let (w, h, res) = (240, 160, 0.05);
        let mut g = OccupancyGrid::filled(w, h, res, Pose::new(-2.0, -2.0, 0.0), CellState::Free).unwrap();
        for ix in 0..w {
            g.set(ix, 0, CellState::Occupied);
            g.set(ix, h - 1, CellState::Occupied);
        }
        for iy in 0..h {
            g.set(0, iy, CellState::Occupied);
            g.set(w - 1, iy, CellState::Occupied);
        }
        for (x0, y0, x1, y1) in [(2.0, 1.0, 2.6, 2.2), (5.0, -1.0, 5.4, 0.5), (0.5, 3.0, 2.0, 3.4), (7.0, 3.5, 8.0, 4.0), (-1.5, 1.0, -1.0, 1.3)] {
            g.fill_rect(WorldPoint::new(x0, y0), WorldPoint::new(x1, y1), CellState::Occupied);
        }
        g
    }

    fn simulate(g: &OccupancyGrid, pose: &Pose) -> LidarScan {
        let fov = 220f64.to_radians();
        let inc = 1f64.to_radians();
        let n = 220;
        let ranges = (0..n)
            .map(|i| {
                let z = cast_ray(g, pose.position(), pose.theta - fov / 2.0 + i as f64 * inc, 20.0).unwrap();
                if z >= 20.0 { f64::NAN } else { z }
            })
            .collect::<Vec<_>>();
        LidarScan::new(-fov / 2.0, inc, 20.0, ranges).unwrap()
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg = PipelineConfig::from_json("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        let cfg = PipelineConfig::from_json(r#"{"batch_size": 50, "ordering": "random", "metric": "baseline"}"#).unwrap();
        assert_eq!(cfg.batch_size, 50);
        assert_eq!(cfg.ordering, HypothesisOrdering::Random);
        assert_eq!(cfg.metric, AlignmentMetric::Baseline);
        assert!(PipelineConfig::from_json(r#"{"top_k": 300}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"tau": 0}"#).is_err());
        let back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn recovers_pose_and_terminates_early() {
        let g = office();
        let truth = Pose::new(3.7, 1.4, 0.8);
        let scan = simulate(&g, &truth);
        let r = relocalize(&g, &scan, &PipelineConfig::default(), 3).unwrap();
        assert!(r.terminated_early, "{r:?}");
        assert!(r.confidence >= 0.95);
        assert!(r.pose.position().distance(truth.position()) < 0.5);
        assert!(angle_diff(r.pose.theta, truth.theta).abs() < PI / 6.0);
        assert_eq!(r.batches_processed, 1);
    }

    #[test]
    fn unreachable_tau_is_exhaustive() {
        let g = office();
        let scan = simulate(&g, &Pose::new(3.7, 1.4, 0.8));
        let cfg = PipelineConfig {
            tau: 1.0 + 1e-9,
            batch_size: 20,
            top_k: 5,
            ..Default::default()
        };
        let r = relocalize(&g, &scan, &cfg, 3).unwrap();
        assert!(!r.terminated_early);
        assert_eq!(r.batches_processed, r.hypothesis_count.div_ceil(20));
        assert_eq!(r.hypotheses_evaluated, r.hypothesis_count);
        let max = r
            .hypotheses
            .iter()
            .filter_map(|h| h.final_score)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.confidence, max);
        for h in &r.hypotheses {
            assert!(h.stage >= Stage::Oriented);
        }
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let g = office();
        let scan = simulate(&g, &Pose::new(0.5, 1.5, -2.0));
        let mut cfg = PipelineConfig {
            worker_count: 1,
            ..Default::default()
        };
        let a = relocalize(&g, &scan, &cfg, 11).unwrap();
        cfg.worker_count = 8;
        let b = relocalize(&g, &scan, &cfg, 11).unwrap();
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.confidence, b.confidence);
        assert_eq!(a.hypotheses, b.hypotheses);
    }

    #[test]
    fn single_hypothesis_batch() {
        let g = office();
        let scan = simulate(&g, &Pose::new(3.7, 1.4, 0.8));
        let field = DistanceField::build(&g, true);
        let reduced = downsample_scan(&scan, 4).unwrap();
        let index = PointIndex::new(map_occupied_points(&g).unwrap(), 1.0);
        let cfg = PipelineConfig::default();
        let headings = heading_set(32, 0.0);
        let ctx = BatchContext {
            scorer: PoseScorer::new(&field, &reduced, cfg.lparams, cfg.tparams).unwrap(),
            icp_scan: &reduced,
            index: &index,
            headings: &headings,
            cfg: &cfg,
        };
        let h = PoseHypothesis {
            position_index: 0,
            rank: 0,
            batch: 0,
            position: WorldPoint::new(3.6, 1.5),
            smad: None,
            oriented: None,
            oriented_score: None,
            refined: None,
            final_pose: None,
            final_score: None,
            stage: Stage::CoarseRanked,
        };
        let mut one = vec![h.clone()];
        let (best, _, _) = process_batch(&mut one, &ctx);
        assert_eq!(best, 0);
        assert_eq!(one[0].stage, Stage::Reevaluated);
        let mut many = vec![h; 5];
        for (i, m) in many.iter_mut().enumerate() {
            m.position_index = i;
        }
        let (best, _, _) = process_batch(&mut many, &ctx);
        assert_eq!(best, 0);
        assert_eq!(many[0].final_pose, one[0].final_pose);
        assert_eq!(many[0].final_score, one[0].final_score);
    }

    #[test]
    fn prefix_and_direct_orderings_agree() {
        let g = office();
        let scan = simulate(&g, &Pose::new(1.0, 0.0, 2.5));
        let reduced = downsample_scan(&scan, 4).unwrap();
        let field = DistanceField::build(&g, true);
        let positions = sample_hypotheses(&field, WorldPoint::default(), &SamplerConfig::default())
            .unwrap()
            .positions
            .positions;
        let cfg = PipelineConfig::default();
        let a = smad_scores(&g, &reduced, &positions, &cfg, SmadMode::PrefixSum).unwrap();
        let b = smad_scores(&g, &reduced, &positions, &cfg, SmadMode::Direct).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9);
        }
        assert_eq!(rank_positions(&a), rank_positions(&b));
    }

    #[test]
    fn audit_log_has_row_per_hypothesis() {
        let g = office();
        let scan = simulate(&g, &Pose::new(3.7, 1.4, 0.8));
        let r = relocalize(&g, &scan, &PipelineConfig::default(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.csv");
        r.write_audit_csv(&path).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        assert_eq!(reader.records().count(), r.hypothesis_count);
        let file = r.to_file(&PipelineConfig::default(), false);
        let json = serde_json::to_value(&file).unwrap();
        assert!(json["timings"].is_null());
        assert!(json["pose"]["theta"].is_number());
    }

    #[test]
    fn empty_scan_rejected() {
        let g = office();
        let scan = LidarScan::new(-1.0, 0.01, 20.0, vec![f64::NAN; 200]).unwrap();
        assert!(matches!(relocalize(&g, &scan, &PipelineConfig::default(), 0), Err(RelocError::NoValidBeams)));
    }
}
