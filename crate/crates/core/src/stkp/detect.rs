//! Spatio-temporal keypoint detection: eigenratio screening, quality
//! ranking and greedy locality suppression.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use super::scale::{resolve_scales, ScaleParams};
use crate::eigen::{disambiguate_signs, eigenratios, scatter, Eigensystem};
use crate::error::{Error, Result};
use crate::geom::{within, DirectionSet, Point3, PointCloudSequence, SequenceIndex, SupportVolume};
use crate::hopc::{eigen_histograms, DESCRIPTOR_LEN};

/// Suppression neighbourhood: a sphere of radius `r_prime` intersected with
/// the frame window `[t - tau_prime, t + tau_prime]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalityParams {
    pub r_prime: f64,
    pub tau_prime: usize,
}

impl LocalityParams {
    /// `r' = r / 4`, `τ' = τ`.
    pub fn defaults_for(r: f64, tau: usize) -> Self {
        LocalityParams { r_prime: r / 4.0, tau_prime: tau }
    }

    pub fn validate(&self, r: f64, tau: usize) -> Result<()> {
        if !(self.r_prime > 0.0 && self.r_prime < r) {
            return Err(Error::config(format!("suppression radius must lie in (0, {r}), got {}", self.r_prime)));
        }
        if self.tau_prime > tau {
            return Err(Error::config(format!("suppression half-window {} exceeds tau {tau}", self.tau_prime)));
        }
        Ok(())
    }
}

/// Oriented eigensystems of a point that passed screening.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub spatial: Eigensystem,
    pub st: Eigensystem,
    pub spatial_support: SupportVolume,
    pub st_support: SupportVolume,
}

/// Keeps `(p, t)` only if all four eigenratios of its spatial (single
/// frame) and spatio-temporal supports exceed `theta`.
pub fn candidate_filter(index: &SequenceIndex, p: &Point3, t: usize, r: f64, tau: usize, theta: f64) -> Result<Option<Candidate>> {
    let spatial_support = index.support(p, t, r, 0)?;
    let Some(spatial) = screen(&spatial_support, p, theta)? else {
        return Ok(None);
    };
    let st_support = index.support(p, t, r, tau)?;
    let Some(st) = screen(&st_support, p, theta)? else {
        return Ok(None);
    };
    Ok(Some(Candidate { spatial, st, spatial_support, st_support }))
}

fn screen(support: &SupportVolume, p: &Point3, theta: f64) -> Result<Option<Eigensystem>> {
    if support.len() < 2 {
        return Ok(None);
    }
    let e = scatter(&support.points)?.eigen()?;
    if e.lambdas[0] <= 0.0 || !eigenratios(&e, None).all_above(theta) {
        return Ok(None);
    }
    Ok(Some(disambiguate_signs(&e, &support.points, p)))
}

/// Half the chi-squared distance between the spatial and spatio-temporal
/// descriptors. Bins where both are zero are skipped.
pub fn quality(h_spatial: &[f64], h_st: &[f64]) -> f64 {
    debug_assert_eq!(h_spatial.len(), h_st.len());
    0.5 * h_spatial
        .iter()
        .zip(h_st)
        .filter(|(a, b)| *a + *b > 0.0)
        .map(|(a, b)| (a - b) * (a - b) / (a + b))
        .sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct Keypoint {
    pub p: Point3,
    /// 1-based frame position.
    pub t: usize,
    pub r: f64,
    pub tau: usize,
    pub eta: f64,
    pub h_spatial: [f64; DESCRIPTOR_LEN],
    pub h_st: [f64; DESCRIPTOR_LEN],
    /// Oriented eigensystem of the spatial support; the keypoint's frame.
    pub spatial_eigen: Eigensystem,
}

#[derive(Debug, Clone)]
pub struct DetectorParams {
    pub scales: ScaleParams,
    pub theta: f64,
    /// Defaults to [`LocalityParams::defaults_for`] the fixed scales.
    pub locality: Option<LocalityParams>,
    pub eta_min: f64,
    pub top_n: Option<usize>,
    /// Screen every `stride`-th point of each frame.
    pub stride: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            scales: ScaleParams::default(),
            theta: crate::hopc::DEFAULT_THETA,
            locality: None,
            eta_min: 0.05,
            top_n: None,
            stride: 1,
        }
    }
}

impl DetectorParams {
    pub fn locality(&self) -> LocalityParams {
        self.locality.unwrap_or_else(|| LocalityParams::defaults_for(self.scales.r, self.scales.tau))
    }

    pub fn validate(&self) -> Result<()> {
        self.scales.validate()?;
        if self.theta <= 1.0 {
            return Err(Error::config("theta must exceed 1"));
        }
        if self.stride == 0 {
            return Err(Error::config("stride must be >= 1"));
        }
        if self.eta_min < 0.0 {
            return Err(Error::config("eta_min must be non-negative"));
        }
        let tau_bound = self.scales.delta_max.unwrap_or(self.scales.tau);
        let r_bound = self.scales.radii.as_ref().and_then(|r| r.last().copied()).unwrap_or(self.scales.r);
        self.locality().validate(r_bound, tau_bound)
    }
}

/// Evaluates a screened point: both descriptors and their quality.
pub fn score_candidate(p: &Point3, t: usize, r: f64, tau: usize, cand: &Candidate, axes: &DirectionSet) -> Keypoint {
    let (h_spatial, _) = eigen_histograms(&cand.spatial, axes, [true; 3]);
    let (h_st, _) = eigen_histograms(&cand.st, axes, [true; 3]);
    Keypoint {
        p: *p,
        t,
        r,
        tau,
        eta: quality(&h_spatial, &h_st),
        h_spatial,
        h_st,
        spatial_eigen: cand.spatial.clone(),
    }
}

/// Every screened candidate of a sequence with its quality, unsorted.
pub fn candidates(seq: &PointCloudSequence, axes: &DirectionSet, params: &DetectorParams) -> Result<Vec<Keypoint>> {
    params.validate()?;
    let index = SequenceIndex::new(seq, params.scales.r);
    let per_frame: Vec<Result<Vec<Keypoint>>> = (1..=seq.n_frames())
        .into_par_iter()
        .map(|t| {
            let mut out = Vec::new();
            for p in seq.frame(t).points.iter().step_by(params.stride) {
                let Some((r, tau)) = resolve_scales(&index, p, t, &params.scales)? else {
                    continue;
                };
                if let Some(c) = candidate_filter(&index, p, t, r, tau, params.theta)? {
                    out.push(score_candidate(p, t, r, tau, &c, axes));
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for f in per_frame {
        all.extend(f?);
    }
    Ok(all)
}

/// Ranking order: quality descending, then frame, then coordinates.
pub fn rank_order(a: &Keypoint, b: &Keypoint) -> Ordering {
    b.eta
        .total_cmp(&a.eta)
        .then(a.t.cmp(&b.t))
        .then(a.p.x.total_cmp(&b.p.x))
        .then(a.p.y.total_cmp(&b.p.y))
        .then(a.p.z.total_cmp(&b.p.z))
}

/// Greedy suppression over candidates already in rank order: a candidate
/// is dropped when a retained keypoint lies within `r'` and `τ'` frames.
pub fn suppress(ranked: Vec<Keypoint>, locality: &LocalityParams) -> Vec<Keypoint> {
    let mut kept: Vec<Keypoint> = Vec::new();
    let mut by_frame: HashMap<usize, Vec<usize>> = HashMap::new();
    for c in ranked {
        let lo = c.t.saturating_sub(locality.tau_prime);
        let hi = c.t + locality.tau_prime;
        let blocked = (lo..=hi).any(|f| {
            by_frame
                .get(&f)
                .is_some_and(|ids| ids.iter().any(|&k| within(&kept[k].p, &c.p, locality.r_prime)))
        });
        if !blocked {
            by_frame.entry(c.t).or_default().push(kept.len());
            kept.push(c);
        }
    }
    kept
}

/// Detects keypoints: screen every point, rank by quality, drop those
/// below `eta_min`, suppress within the locality, optionally keep the top N.
pub fn detect_stkp(seq: &PointCloudSequence, axes: &DirectionSet, params: &DetectorParams) -> Result<Vec<Keypoint>> {
    let mut cands = candidates(seq, axes, params)?;
    cands.retain(|k| k.eta >= params.eta_min);
    cands.sort_by(rank_order);
    let mut kept = suppress(cands, &params.locality());
    if let Some(n) = params.top_n {
        kept.truncate(n);
    }
    Ok(kept)
}
