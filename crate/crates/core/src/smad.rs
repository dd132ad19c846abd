//! Coarse ranking by scan mean absolute difference (SMAD), with the
//! prefix-sum acceleration over a cyclically extended synthesized scan, and
//! the per-beam CAER baseline.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{RelocError, Result};
use crate::geometry::{wrap_angle, WorldPoint};
use crate::map::OccupancyGrid;
use crate::raycast::{RayCaster, SynthScan};
use crate::scan::{panoramic_ranges, DownsampledScan, FovSections};

/// Heading offsets enumerated by shifting panoramic beam indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientationEnum {
    n_s: usize,
    stride: usize,
    offsets: Vec<usize>,
}

impl OrientationEnum {
    pub fn new(n_s: usize, stride: usize) -> Result<Self> {
        if n_s == 0 || stride == 0 {
            return Err(RelocError::InvalidConfig(
                "orientation enumeration needs n_s >= 1 and stride >= 1".into(),
            ));
        }
        Ok(Self {
            n_s,
            stride,
            offsets: (0..n_s).step_by(stride).collect(),
        })
    }

    /// Stride chosen so that roughly `count` orientations are enumerated
    /// (at least `count` when `n_s` allows it).
    pub fn with_count(n_s: usize, count: usize) -> Result<Self> {
        let stride = (n_s / count.max(1)).max(1);
        Self::new(n_s, stride)
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn panoramic_count(&self) -> usize {
        self.n_s
    }

    /// Heading that corresponds to index shift `m`.
    pub fn angle(&self, m: usize) -> f64 {
        wrap_angle(m as f64 * 2.0 * PI / self.n_s as f64)
    }
}

/// Mean range of the real scan over its valid sections.
pub fn actual_mean_range(scan: &DownsampledScan, sections: &FovSections) -> Result<f64> {
    if sections.valid_count() == 0 {
        return Err(RelocError::NoValidBeams);
    }
    let slots = panoramic_ranges(scan, sections.panoramic_count());
    let sum: f64 = sections.indices().map(|j| slots[j]).sum();
    Ok(sum / sections.valid_count() as f64)
}

/// `sums[t]` is the sum of the first `t` ranges of the synthesized scan
/// repeated twice, so any cyclic window is a difference of two entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSums {
    pub position: WorldPoint,
    sums: Vec<f64>,
    n_s: usize,
}

impl PrefixSums {
    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn panoramic_count(&self) -> usize {
        self.n_s
    }

    /// Sum of extended-scan entries `u..=v` (0-based, `v < 2 n_s`).
    #[inline]
    pub fn window_sum(&self, u: usize, v: usize) -> f64 {
        self.sums[v + 1] - self.sums[u]
    }
}

pub fn build_prefix_sums(synth: &SynthScan) -> PrefixSums {
    let n_s = synth.ranges.len();
    let mut sums = Vec::with_capacity(2 * n_s + 1);
    sums.push(0.0);
    let mut acc = 0.0;
    for t in 0..2 * n_s {
        acc += synth.ranges[t % n_s];
        sums.push(acc);
    }
    PrefixSums {
        position: synth.origin,
        sums,
        n_s,
    }
}

/// Mean synthesized range over the sections shifted by `m`, in O(K).
pub fn synth_mean_range(prefix: &PrefixSums, sections: &FovSections, m: usize) -> f64 {
    debug_assert!(m < prefix.n_s);
    let total: f64 = sections
        .sections()
        .iter()
        .map(|&(u, v)| prefix.window_sum(u + m, v + m))
        .sum();
    total / sections.valid_count() as f64
}

/// Same quantity as [`synth_mean_range`], summed beam by beam.
pub fn synth_mean_range_direct(synth: &SynthScan, sections: &FovSections, m: usize) -> f64 {
    let n_s = synth.ranges.len();
    let total: f64 = sections
        .indices()
        .map(|j| synth.ranges[(j + m) % n_s])
        .sum();
    total / sections.valid_count() as f64
}

pub fn smad_at_orientation(actual_mean: f64, synth_mean: f64) -> f64 {
    (actual_mean - synth_mean).abs()
}

/// Cumulative absolute error per ray between the real scan and the
/// synthesized scan shifted by `m`.
pub fn caer(scan: &DownsampledScan, synth: &SynthScan, sections: &FovSections, m: usize) -> Result<f64> {
    if sections.valid_count() == 0 {
        return Err(RelocError::NoValidBeams);
    }
    let n_s = synth.ranges.len();
    let slots = panoramic_ranges(scan, n_s);
    let total: f64 = sections
        .indices()
        .map(|i| (slots[i] - synth.ranges[(i + m) % n_s]).abs())
        .sum();
    Ok(total / sections.valid_count() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmadMode {
    #[default]
    PrefixSum,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmadEvaluation {
    pub score: f64,
    pub best_offset: usize,
    /// Number of synthesized-mean queries performed.
    pub queries: usize,
}

/// Everything needed to score positions against one real scan.
#[derive(Debug, Clone)]
pub struct SmadScorer {
    sections: FovSections,
    actual_mean: f64,
    orientations: OrientationEnum,
    full_fov_ratio: f64,
    range_max: f64,
    mode: SmadMode,
}

impl SmadScorer {
    pub fn new(
        scan: &DownsampledScan,
        sections: FovSections,
        orientations: OrientationEnum,
        full_fov_ratio: f64,
        mode: SmadMode,
    ) -> Result<Self> {
        if orientations.panoramic_count() != sections.panoramic_count() {
            return Err(RelocError::InvalidConfig(
                "orientation enumeration and sections disagree on panoramic size".into(),
            ));
        }
        let actual_mean = actual_mean_range(scan, &sections)?;
        Ok(Self {
            sections,
            actual_mean,
            orientations,
            full_fov_ratio,
            range_max: scan.range_max(),
            mode,
        })
    }

    pub fn actual_mean(&self) -> f64 {
        self.actual_mean
    }

    pub fn sections(&self) -> &FovSections {
        &self.sections
    }

    pub fn orientations(&self) -> &OrientationEnum {
        &self.orientations
    }

    pub fn mode(&self) -> SmadMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: SmadMode) -> Self {
        self.mode = mode;
        self
    }

    /// Scores a synthesized scan: a single unshifted query when the real
    /// scan is (nearly) panoramic, else the minimum over all enumerated shifts.
    pub fn evaluate(&self, synth: &SynthScan) -> SmadEvaluation {
        let offsets: &[usize] = if self.sections.coverage() >= self.full_fov_ratio {
            &[0]
        } else {
            self.orientations.offsets()
        };
        let mut best = SmadEvaluation {
            score: f64::INFINITY,
            best_offset: 0,
            queries: 0,
        };
        let prefix = match self.mode {
            SmadMode::PrefixSum => Some(build_prefix_sums(synth)),
            SmadMode::Direct => None,
        };
        for &m in offsets {
            let synth_mean = match &prefix {
                Some(prefix) => synth_mean_range(prefix, &self.sections, m),
                None => synth_mean_range_direct(synth, &self.sections, m),
            };
            let score = smad_at_orientation(self.actual_mean, synth_mean);
            best.queries += 1;
            if score < best.score {
                best.score = score;
                best.best_offset = m;
            }
        }
        best
    }

    pub fn score(&self, caster: &RayCaster<'_>, p: WorldPoint) -> Result<SmadEvaluation> {
        let synth = caster.panoramic(p, self.sections.panoramic_count(), self.range_max)?;
        Ok(self.evaluate(&synth))
    }
}

/// SMAD of position `p` with unknown cells blocking rays.
pub fn smad_score(
    grid: &OccupancyGrid,
    p: WorldPoint,
    scan: &DownsampledScan,
    sections: &FovSections,
    orientations: &OrientationEnum,
) -> Result<f64> {
    let scorer = SmadScorer::new(
        scan,
        sections.clone(),
        orientations.clone(),
        0.9,
        SmadMode::PrefixSum,
    )?;
    Ok(scorer.score(&RayCaster::new(grid, true), p)?.score)
}

/// Indices ordered by ascending score; equal scores keep their input order.
pub fn rank_positions(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

pub fn write_smad_csv(path: impl AsRef<Path>, positions: &[WorldPoint], scores: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "smad"])?;
    for (p, s) in positions.iter().zip(scores) {
        w.write_record([p.x.to_string(), p.y.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| RelocError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::{downsample_scan, LidarScan};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synth(ranges: Vec<f64>) -> SynthScan {
        SynthScan {
            origin: WorldPoint::default(),
            ranges,
        }
    }

    fn random_mask(rng: &mut ChaCha8Rng, n: usize) -> FovSections {
        loop {
            let p = rng.gen_range(0.2..0.95);
            let mask: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < p).collect();
            let f = FovSections::from_mask(&mask);
            if f.valid_count() > 0 {
                return f;
            }
        }
    }

    /// Shifted mean by direct enumeration of the section slots.
    fn brute_shifted_mean(ranges: &[f64], sections: &FovSections, m: usize) -> f64 {
        let n = ranges.len();
        let mut sum = 0.0;
        let mut count = 0;
        for &(u, v) in sections.sections() {
            for i in u..=v {
                sum += ranges[(i + m) % n];
                count += 1;
            }
        }
        sum / count as f64
    }

    #[test]
    fn prefix_sums_of_ones() {
        let p = build_prefix_sums(&synth(vec![1.0; 4]));
        assert_eq!(p.sums(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn prefix_sums_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ranges: Vec<f64> = (0..90).map(|_| rng.gen_range(0.1..20.0)).collect();
        let total: f64 = ranges.iter().sum();
        let p = build_prefix_sums(&synth(ranges.clone()));
        assert!((p.sums()[90] - total).abs() < 1e-9);
        assert!(p.sums().windows(2).all(|w| w[1] >= w[0]));
        for t in 0..=90 {
            assert!((p.sums()[t + 90] - p.sums()[t] - p.sums()[90]).abs() < 1e-9);
        }
        for _ in 0..1000 {
            let u = rng.gen_range(0..180);
            let v = rng.gen_range(u..180);
            let direct: f64 = (u..=v).map(|t| ranges[t % 90]).sum();
            assert!((p.window_sum(u, v) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn synth_mean_trivial_cases() {
        let ranges: Vec<f64> = (0..8).map(|i| i as f64 + 1.0).collect();
        let p = build_prefix_sums(&synth(ranges));
        let full = FovSections::from_mask(&[true; 8]);
        assert_eq!(synth_mean_range(&p, &full, 0), 36.0 / 8.0);

        let c = build_prefix_sums(&synth(vec![2.5; 12]));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = random_mask(&mut rng, 12);
            for m in 0..12 {
                assert!((synth_mean_range(&c, &s, m) - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prefix_query_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.gen_range(4..200);
            let ranges: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..20.0)).collect();
            let s = random_mask(&mut rng, n);
            let prefix = build_prefix_sums(&synth(ranges.clone()));
            for m in 0..n {
                let brute = brute_shifted_mean(&ranges, &s, m);
                assert!((synth_mean_range(&prefix, &s, m) - brute).abs() <= 1e-9);
                assert!((synth_mean_range_direct(&synth(ranges.clone()), &s, m) - brute).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn smad_arithmetic() {
        assert_eq!(smad_at_orientation(3.0, 3.0), 0.0);
        assert_eq!(smad_at_orientation(5.0, 3.5), 1.5);
        assert_eq!(smad_at_orientation(3.5, 5.0), smad_at_orientation(5.0, 3.5));
    }

    fn scan_from_slots(slots: &[Option<f64>]) -> DownsampledScan {
        let n = slots.len();
        let inc = 2.0 * PI / n as f64;
        let s = LidarScan::new(-PI, inc, 30.0, slots.iter().map(|z| z.unwrap_or(f64::NAN))).unwrap();
        downsample_scan(&s, 1).unwrap()
    }

    #[test]
    fn actual_mean_examples() {
        let mut slots = vec![None; 10];
        slots[1] = Some(2.0);
        slots[2] = Some(4.0);
        slots[6] = Some(6.0);
        let d = scan_from_slots(&slots);
        let f = crate::scan::extract_fov_sections(&d, 10);
        assert_eq!(f.sections().len(), 2);
        assert!((actual_mean_range(&d, &f).unwrap() - 4.0).abs() < 1e-12);

        let d = scan_from_slots(&[Some(5.0); 6]);
        let f = crate::scan::extract_fov_sections(&d, 6);
        assert!((actual_mean_range(&d, &f).unwrap() - 5.0).abs() < 1e-12);

        let d = scan_from_slots(&[None; 6]);
        let f = crate::scan::extract_fov_sections(&d, 6);
        assert!(matches!(actual_mean_range(&d, &f), Err(RelocError::NoValidBeams)));
    }

    #[test]
    fn actual_mean_matches_mask_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = 90;
            let slots: Vec<Option<f64>> = (0..n)
                .map(|_| (rng.gen::<f64>() < 0.7).then(|| rng.gen_range(0.1..20.0)))
                .collect();
            let valid: Vec<f64> = slots.iter().flatten().copied().collect();
            if valid.is_empty() {
                continue;
            }
            let d = scan_from_slots(&slots);
            let f = crate::scan::extract_fov_sections(&d, n);
            let direct = valid.iter().sum::<f64>() / valid.len() as f64;
            assert!((actual_mean_range(&d, &f).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn caer_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 60;
        for _ in 0..200 {
            let slots: Vec<Option<f64>> = (0..n)
                .map(|_| (rng.gen::<f64>() < 0.6).then(|| rng.gen_range(0.1..10.0)))
                .collect();
            if slots.iter().all(Option::is_none) {
                continue;
            }
            let d = scan_from_slots(&slots);
            let f = crate::scan::extract_fov_sections(&d, n);
            let sy = synth((0..n).map(|_| rng.gen_range(0.1..10.0)).collect());
            let m = rng.gen_range(0..n);
            let value = caer(&d, &sy, &f, m).unwrap();
            // naive double loop
            let mut sum = 0.0;
            let mut count = 0;
            for &(u, v) in f.sections() {
                for (i, slot) in slots.iter().enumerate().take(v + 1).skip(u) {
                    sum += (slot.unwrap() - sy.ranges[(i + m) % n]).abs();
                    count += 1;
                }
            }
            assert!((value - sum / count as f64).abs() < 1e-9);
            let smad = smad_at_orientation(
                actual_mean_range(&d, &f).unwrap(),
                synth_mean_range(&build_prefix_sums(&sy), &f, m),
            );
            assert!(value + 1e-12 >= smad);
        }
        let ranges: Vec<Option<f64>> = (0..n).map(|i| Some(1.0 + i as f64 * 0.1)).collect();
        let d = scan_from_slots(&ranges);
        let f = crate::scan::extract_fov_sections(&d, n);
        let same = synth(ranges.iter().map(|z| z.unwrap()).collect());
        assert!(caer(&d, &same, &f, 0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn wide_fov_uses_single_query() {
        let n = 40;
        let mut slots: Vec<Option<f64>> = vec![Some(3.0); n];
        slots[5] = None;
        slots[6] = None;
        let d = scan_from_slots(&slots);
        let f = crate::scan::extract_fov_sections(&d, n);
        assert!((f.coverage() - 0.95).abs() < 1e-12);
        let scorer = SmadScorer::new(&d, f, OrientationEnum::new(n, 1).unwrap(), 0.9, SmadMode::PrefixSum).unwrap();
        let ev = scorer.evaluate(&synth(vec![2.0; n]));
        assert_eq!(ev.queries, 1);
        assert_eq!(ev.best_offset, 0);
        assert!((ev.score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn narrow_fov_takes_minimum_over_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 90;
        for _ in 0..50 {
            let slots: Vec<Option<f64>> = (0..n)
                .map(|j| (10..60).contains(&j).then(|| rng.gen_range(0.5..8.0)))
                .collect();
            let d = scan_from_slots(&slots);
            let f = crate::scan::extract_fov_sections(&d, n);
            let orient = OrientationEnum::with_count(n, 32).unwrap();
            let sy = synth((0..n).map(|_| rng.gen_range(0.5..8.0)).collect());
            let actual = actual_mean_range(&d, &f).unwrap();
            let brute = orient
                .offsets()
                .iter()
                .map(|&m| (actual - brute_shifted_mean(&sy.ranges, &f, m)).abs())
                .fold(f64::INFINITY, f64::min);
            for mode in [SmadMode::PrefixSum, SmadMode::Direct] {
                let scorer = SmadScorer::new(&d, f.clone(), orient.clone(), 0.9, mode).unwrap();
                let ev = scorer.evaluate(&sy);
                assert_eq!(ev.queries, orient.offsets().len());
                assert!((ev.score - brute).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orientation_enum_layout() {
        let e = OrientationEnum::with_count(90, 32).unwrap();
        assert_eq!(e.stride(), 2);
        assert_eq!(e.offsets().len(), 45);
        assert!(e.offsets().windows(2).all(|w| w[0] < w[1]));
        assert!(e.offsets().iter().all(|&m| m < 90));
        let e = OrientationEnum::with_count(64, 32).unwrap();
        assert_eq!(e.offsets().len(), 32);
        assert!((e.angle(16) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ranking() {
        assert_eq!(rank_positions(&[3.0, 1.0, 2.0]), vec![1, 2, 0]);
        assert_eq!(rank_positions(&[0.5; 5]), vec![0, 1, 2, 3, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scores: Vec<f64> = (0..300).map(|_| (rng.gen_range(0..50) as f64) * 0.1).collect();
        let mut oracle: Vec<(f64, usize)> = scores.iter().copied().zip(0..).collect();
        oracle.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let expected: Vec<usize> = oracle.into_iter().map(|(_, i)| i).collect();
        assert_eq!(rank_positions(&scores), expected);
    }
}
