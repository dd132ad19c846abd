//! Translation-affinity likelihood-field metric (TAM), orientation selection
//! over a discrete heading set, and the plain likelihood-field baselines.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{RelocError, Result};
use crate::geometry::{wrap_angle, Pose, WorldPoint};
use crate::map::DistanceField;
use crate::scan::DownsampledScan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LikelihoodParams {
    pub z_hit: f64,
    pub sigma_hit: f64,
    pub z_rand: f64,
    pub epsilon: f64,
}

impl Default for LikelihoodParams {
    fn default() -> Self {
        Self {
            z_hit: 1.0,
            sigma_hit: 0.2,
            z_rand: 0.0,
            epsilon: 1e-6,
        }
    }
}

impl LikelihoodParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_hit > 0.0 && self.sigma_hit > 0.0 && self.z_rand >= 0.0 && self.epsilon > 0.0) {
            return Err(RelocError::InvalidConfig(
                "likelihood needs z_hit > 0, sigma_hit > 0, z_rand >= 0, epsilon > 0".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn log_likelihood(&self, d: f64) -> f64 {
        let s2 = self.sigma_hit * self.sigma_hit;
        (self.z_hit * (-d * d / (2.0 * s2)).exp() + self.z_rand + self.epsilon).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TamParams {
    pub alpha_mid_min: f64,
    pub alpha_mid_max: f64,
    pub alpha_low_min: f64,
    pub alpha_low_max: f64,
    pub d_max: f64,
    /// Defaults to half the map resolution when absent.
    pub d_min: Option<f64>,
    pub s_d_floor: f64,
}

impl Default for TamParams {
    fn default() -> Self {
        Self {
            alpha_mid_min: 0.80,
            alpha_mid_max: 0.90,
            alpha_low_min: 0.60,
            alpha_low_max: 0.75,
            d_max: 1.0,
            d_min: None,
            s_d_floor: 1e-6,
        }
    }
}

impl TamParams {
    pub fn validate(&self) -> Result<()> {
        let ordered = 1.0 > self.alpha_mid_max
            && self.alpha_mid_max >= self.alpha_mid_min
            && self.alpha_mid_min > self.alpha_low_max
            && self.alpha_low_max >= self.alpha_low_min
            && self.alpha_low_min > 0.0;
        if !ordered {
            return Err(RelocError::InvalidConfig(
                "retention ratios must satisfy 1 > alpha_mid > alpha_low > 0".into(),
            ));
        }
        if let Some(d_min) = self.d_min {
            if !(d_min > 0.0 && self.d_max > d_min) {
                return Err(RelocError::InvalidConfig("need d_max > d_min > 0".into()));
            }
        }
        if !(self.s_d_floor > 0.0 && self.s_d_floor <= 1.0) {
            return Err(RelocError::InvalidConfig("s_d_floor must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn resolved_d_min(&self, resolution: f64) -> f64 {
        self.d_min.unwrap_or(resolution / 2.0)
    }

    /// `(alpha_mid, alpha_low)` for field-of-view ratio `lambda`.
    pub fn alphas(&self, lambda: f64) -> (f64, f64) {
        let l = lambda.clamp(0.0, 1.0);
        (
            self.alpha_mid_min + l * (self.alpha_mid_max - self.alpha_mid_min),
            self.alpha_low_min + l * (self.alpha_low_max - self.alpha_low_min),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TamBreakdown {
    pub ell_bar: f64,
    pub p: f64,
    pub s_d: f64,
    pub c: f64,
    pub tam: f64,
    pub mean_distance: f64,
    pub variance: f64,
}

/// Which pose score drives orientation selection and ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMetric {
    #[default]
    Tam,
    Baseline,
}

/// Endpoints of the valid beams of `scan` placed at `pose`.
pub fn beam_endpoints(pose: &Pose, scan: &DownsampledScan) -> Vec<WorldPoint> {
    scan.valid_beams()
        .map(|(phi, z)| {
            let a = pose.theta + phi;
            WorldPoint::new(pose.x + z * a.cos(), pose.y + z * a.sin())
        })
        .collect()
}

/// Fraction of the full turn covered by valid beams.
pub fn fov_ratio(scan: &DownsampledScan) -> f64 {
    (scan.valid_count() as f64 * scan.beam_spacing() / (2.0 * PI)).min(1.0)
}

/// Endpoint clearance for scoring: off-map or obstacle-free lookups count as `d_max`.
#[inline]
pub fn endpoint_distance(field: &DistanceField, q: WorldPoint, d_max: f64) -> f64 {
    match field.lookup(q) {
        Some(d) if d.is_finite() => d,
        _ => d_max,
    }
}

pub fn beam_distances(field: &DistanceField, pose: &Pose, scan: &DownsampledScan, d_max: f64) -> Vec<f64> {
    beam_endpoints(pose, scan)
        .into_iter()
        .map(|q| endpoint_distance(field, q, d_max))
        .collect()
}

pub fn beam_log_likelihoods(
    field: &DistanceField,
    pose: &Pose,
    scan: &DownsampledScan,
    lparams: &LikelihoodParams,
    d_max: f64,
) -> Result<Vec<f64>> {
    if scan.valid_count() == 0 {
        return Err(RelocError::NoValidBeams);
    }
    Ok(beam_distances(field, pose, scan, d_max)
        .into_iter()
        .map(|d| lparams.log_likelihood(d))
        .collect())
}

/// Median of the means of the top `N`, top `alpha_mid N` and top
/// `alpha_low N` log-likelihoods.
pub fn fov_adaptive_response(ells: &[f64], lambda: f64, tparams: &TamParams) -> f64 {
    assert!(!ells.is_empty(), "response needs at least one beam");
    let mut sorted = ells.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    let (alpha_mid, alpha_low) = tparams.alphas(lambda);
    let k = |alpha: f64| ((alpha * n as f64).floor() as usize).clamp(1, n);
    let top_mean = |k: usize| sorted[..k].iter().sum::<f64>() / k as f64;
    let mut means = [top_mean(n), top_mean(k(alpha_mid)), top_mean(k(alpha_low))];
    means.sort_by(f64::total_cmp);
    means[1]
}

/// Full breakdown from per-beam endpoint distances.
pub fn tam_from_distances(
    distances: &[f64],
    lambda: f64,
    d_min: f64,
    lparams: &LikelihoodParams,
    tparams: &TamParams,
) -> Result<TamBreakdown> {
    if distances.is_empty() {
        return Err(RelocError::NoValidBeams);
    }
    let n = distances.len() as f64;
    let ells: Vec<f64> = distances.iter().map(|&d| lparams.log_likelihood(d)).collect();
    let ell_bar = fov_adaptive_response(&ells, lambda, tparams);
    let p = ell_bar.exp();
    let mean_distance = distances.iter().sum::<f64>() / n;
    let variance = distances
        .iter()
        .map(|d| (d - mean_distance).powi(2))
        .sum::<f64>()
        / n;
    let s_d = distance_term(mean_distance, d_min, tparams);
    let c = (-variance / 2.0).exp();
    let tam = (p * s_d * c).cbrt().min(1.0);
    Ok(TamBreakdown {
        ell_bar,
        p,
        s_d,
        c,
        tam,
        mean_distance,
        variance,
    })
}

fn distance_term(mean_distance: f64, d_min: f64, tparams: &TamParams) -> f64 {
    let clamped = mean_distance.clamp(d_min, tparams.d_max);
    (1.0 - (clamped - d_min) / (tparams.d_max - d_min)).max(tparams.s_d_floor)
}

pub fn tam_score(
    field: &DistanceField,
    pose: &Pose,
    scan: &DownsampledScan,
    lparams: &LikelihoodParams,
    tparams: &TamParams,
) -> Result<TamBreakdown> {
    if scan.valid_count() == 0 {
        return Err(RelocError::NoValidBeams);
    }
    let d = beam_distances(field, pose, scan, tparams.d_max);
    tam_from_distances(
        &d,
        fov_ratio(scan),
        tparams.resolved_d_min(field.resolution()),
        lparams,
        tparams,
    )
}

/// Sum of per-beam log-likelihoods.
pub fn baseline_lf_score(
    field: &DistanceField,
    pose: &Pose,
    scan: &DownsampledScan,
    lparams: &LikelihoodParams,
) -> Result<f64> {
    Ok(beam_log_likelihoods(field, pose, scan, lparams, TamParams::default().d_max)?
        .iter()
        .sum())
}

/// Geometric mean of the per-beam likelihood and the distance term.
pub fn baseline_normalized(
    field: &DistanceField,
    pose: &Pose,
    scan: &DownsampledScan,
    lparams: &LikelihoodParams,
    tparams: &TamParams,
) -> Result<f64> {
    if scan.valid_count() == 0 {
        return Err(RelocError::NoValidBeams);
    }
    let d = beam_distances(field, pose, scan, tparams.d_max);
    Ok(baseline_from_distances(&d, tparams.resolved_d_min(field.resolution()), lparams, tparams))
}

pub fn baseline_from_distances(distances: &[f64], d_min: f64, lparams: &LikelihoodParams, tparams: &TamParams) -> f64 {
    let n = distances.len() as f64;
    let p_lf: f64 = distances.iter().map(|&d| lparams.log_likelihood(d)).sum();
    let mean_distance = distances.iter().sum::<f64>() / n;
    ((p_lf / n).exp() * distance_term(mean_distance, d_min, tparams))
        .sqrt()
        .min(1.0)
}

/// `count` headings spaced evenly over a full turn, starting at `-pi + phase`.
pub fn heading_set(count: usize, phase: f64) -> Vec<f64> {
    (0..count)
        .map(|m| wrap_angle(-PI + phase + m as f64 * 2.0 * PI / count as f64))
        .collect()
}

/// Pose scoring against one scan with its valid beams precomputed.
#[derive(Debug, Clone)]
pub struct PoseScorer<'a> {
    field: &'a DistanceField,
    beams: Vec<(f64, f64)>,
    lambda: f64,
    d_min: f64,
    lparams: LikelihoodParams,
    tparams: TamParams,
}

impl<'a> PoseScorer<'a> {
    pub fn new(
        field: &'a DistanceField,
        scan: &DownsampledScan,
        lparams: LikelihoodParams,
        tparams: TamParams,
    ) -> Result<Self> {
        lparams.validate()?;
        tparams.validate()?;
        let beams: Vec<(f64, f64)> = scan.valid_beams().collect();
        if beams.is_empty() {
            return Err(RelocError::NoValidBeams);
        }
        let d_min = tparams.resolved_d_min(field.resolution());
        if !(tparams.d_max > d_min) {
            return Err(RelocError::InvalidConfig(format!(
                "d_max {} must exceed d_min {d_min}",
                tparams.d_max
            )));
        }
        Ok(Self {
            field,
            beams,
            lambda: fov_ratio(scan),
            d_min,
            lparams,
            tparams,
        })
    }

    pub fn field(&self) -> &'a DistanceField {
        self.field
    }

    fn distances(&self, pose: &Pose) -> Vec<f64> {
        self.beams
            .iter()
            .map(|&(phi, z)| {
                let a = pose.theta + phi;
                let q = WorldPoint::new(pose.x + z * a.cos(), pose.y + z * a.sin());
                endpoint_distance(self.field, q, self.tparams.d_max)
            })
            .collect()
    }

    pub fn breakdown(&self, pose: &Pose) -> TamBreakdown {
        tam_from_distances(&self.distances(pose), self.lambda, self.d_min, &self.lparams, &self.tparams)
            .expect("scorer holds at least one beam")
    }

    pub fn baseline(&self, pose: &Pose) -> f64 {
        baseline_from_distances(&self.distances(pose), self.d_min, &self.lparams, &self.tparams)
    }

    pub fn score(&self, pose: &Pose, metric: AlignmentMetric) -> f64 {
        match metric {
            AlignmentMetric::Tam => self.breakdown(pose).tam,
            AlignmentMetric::Baseline => self.baseline(pose),
        }
    }

    /// Heading maximizing `metric` at `p`; the earliest heading wins ties.
    pub fn best_heading(&self, p: WorldPoint, headings: &[f64], metric: AlignmentMetric) -> (f64, f64) {
        assert!(!headings.is_empty(), "heading set must be non-empty");
        let mut best = (headings[0], f64::NEG_INFINITY);
        for &theta in headings {
            let s = self.score(&Pose::from_position(p, theta), metric);
            if s > best.1 {
                best = (theta, s);
            }
        }
        best
    }
}

/// TAM-maximizing heading at `p` and its breakdown.
pub fn best_orientation(
    field: &DistanceField,
    p: WorldPoint,
    scan: &DownsampledScan,
    headings: &[f64],
    lparams: &LikelihoodParams,
    tparams: &TamParams,
) -> Result<(f64, TamBreakdown)> {
    if headings.is_empty() {
        return Err(RelocError::InvalidConfig("heading set is empty".into()));
    }
    let scorer = PoseScorer::new(field, scan, *lparams, *tparams)?;
    let (theta, _) = scorer.best_heading(p, headings, AlignmentMetric::Tam);
    Ok((theta, scorer.breakdown(&Pose::from_position(p, theta))))
}
