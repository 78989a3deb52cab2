//! Adaptive spatial and temporal support scales.
//!
//! The spatial scale is the first radius on a ladder where `λ1/λ2` of the
//! single-frame support peaks. The temporal scale is the first half-window
//! where `λ2/λ1 + λ3/λ2` of the merged support has a strict local minimum.

use crate::eigen::{default_floor, floored_ratio, MomentAccumulator};
use crate::error::{Error, Result};
use crate::geom::{window_bounds, Point3, PointCloudSequence, Positioned, SequenceIndex, TaggedPoint};

/// Relative margin a neighbour must be beaten by to count as a strict
/// extremum. Keeps round-off on flat profiles from producing extrema.
pub const EXTREMUM_MARGIN: f64 = 1e-9;

/// How the support radius and half-window are chosen for each point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleParams {
    /// Fixed radius; also the voxel cell size of sequence indices.
    pub r: f64,
    /// Fixed temporal half-window.
    pub tau: usize,
    /// Ascending radius ladder for adaptive spatial scale.
    pub radii: Option<Vec<f64>>,
    /// Largest half-window searched by adaptive temporal scale.
    pub delta_max: Option<usize>,
}

impl Default for ScaleParams {
    fn default() -> Self {
        ScaleParams { r: 1.0, tau: 2, radii: None, delta_max: None }
    }
}

impl ScaleParams {
    pub fn fixed(r: f64, tau: usize) -> Self {
        ScaleParams { r, tau, radii: None, delta_max: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::config(format!("support radius must be positive, got {}", self.r)));
        }
        if let Some(radii) = &self.radii {
            if radii.len() < 3 {
                return Err(Error::config("adaptive radius ladder needs at least 3 radii"));
            }
            if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config("radius ladder must be positive and strictly ascending"));
            }
        }
        if let Some(d) = self.delta_max {
            if d < 2 {
                return Err(Error::config("adaptive temporal scale needs delta_max >= 2"));
            }
        }
        Ok(())
    }
}

/// Index of the first strict interior local maximum.
pub fn first_interior_max(values: &[f64]) -> Option<usize> {
    (1..values.len().saturating_sub(1)).find(|&i| {
        let v = values[i];
        v > values[i - 1] * (1.0 + EXTREMUM_MARGIN) && v > values[i + 1] * (1.0 + EXTREMUM_MARGIN)
    })
}

/// Index of the first strict interior local minimum.
pub fn first_interior_min(values: &[f64]) -> Option<usize> {
    (1..values.len().saturating_sub(1)).find(|&i| {
        let v = values[i];
        v < values[i - 1] * (1.0 - EXTREMUM_MARGIN) && v < values[i + 1] * (1.0 - EXTREMUM_MARGIN)
    })
}

/// `λ1/λ2` of the spatial support at each radius; `None` where the support
/// has fewer than 3 points or no spread.
pub fn spatial_ratio_profile<P: Positioned>(cloud: &[P], p: &Point3, radii: &[f64]) -> Vec<Option<f64>> {
    let mut by_dist: Vec<(f64, Point3)> = cloud
        .iter()
        .map(|q| {
            let q = q.position();
            ((q - p).norm_squared(), q)
        })
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = MomentAccumulator::new(*p);
    let mut next = 0;
    radii
        .iter()
        .map(|&r| {
            while next < by_dist.len() && by_dist[next].0 <= r * r {
                acc.add(&by_dist[next].1);
                next += 1;
            }
            if acc.len() < 3 {
                return None;
            }
            let e = acc.scatter()?.eigen().ok()?;
            if e.lambdas[0] <= 0.0 {
                return None;
            }
            Some(floored_ratio(e.lambdas[0], e.lambdas[1], default_floor(&e.lambdas)))
        })
        .collect()
}

/// Radius at which `λ1/λ2` of the spatial support first peaks. Radii with
/// invalid supports are skipped; fewer than 3 valid radii gives `None`.
pub fn adaptive_spatial_scale<P: Positioned>(cloud: &[P], p: &Point3, radii: &[f64]) -> Option<f64> {
    let profile = spatial_ratio_profile(cloud, p, radii);
    let valid: Vec<(f64, f64)> = radii.iter().zip(profile).filter_map(|(&r, v)| v.map(|v| (r, v))).collect();
    if valid.len() < 3 {
        return None;
    }
    let values: Vec<f64> = valid.iter().map(|v| v.1).collect();
    first_interior_max(&values).map(|i| valid[i].0)
}

/// Adaptive spatial scale over frame `t` of an indexed sequence.
pub fn spatial_scale_at(index: &SequenceIndex, p: &Point3, t: usize, radii: &[f64]) -> Option<f64> {
    let r_max = *radii.last()?;
    let mut cloud: Vec<TaggedPoint> = Vec::new();
    index.frame_query(t, p, r_max, &mut cloud);
    adaptive_spatial_scale(&cloud, p, radii)
}

/// `A(τ) = λ2/λ1 + λ3/λ2` of the support merged over `[t-τ, t+τ]`, for
/// `τ = 1..=delta_max`. Frames beyond the sequence ends are not added.
pub fn temporal_profile(index: &SequenceIndex, p: &Point3, t: usize, r: f64, delta_max: usize) -> Result<Vec<f64>> {
    let seq = index.sequence();
    window_bounds(seq, t, 0)?;
    let n = seq.n_frames();
    let mut acc = MomentAccumulator::new(*p);
    let mut buf = Vec::new();
    let mut add_frame = |f: usize, acc: &mut MomentAccumulator| {
        buf.clear();
        index.frame_query(f, p, r, &mut buf);
        buf.iter().for_each(|q| acc.add(&q.pos));
    };
    add_frame(t, &mut acc);
    let mut out = Vec::with_capacity(delta_max);
    for tau in 1..=delta_max {
        if tau < t {
            add_frame(t - tau, &mut acc);
        }
        if t + tau <= n {
            add_frame(t + tau, &mut acc);
        }
        let value = match acc.scatter() {
            Some(s) => {
                let e = s.eigen()?;
                let floor = default_floor(&e.lambdas);
                floored_ratio(e.lambdas[1], e.lambdas[0], floor) + floored_ratio(e.lambdas[2], e.lambdas[1], floor)
            }
            None => f64::NAN,
        };
        out.push(value);
    }
    Ok(out)
}

/// First half-window at which `A(τ)` has a strict interior local minimum.
pub fn adaptive_temporal_scale_at(index: &SequenceIndex, p: &Point3, t: usize, r: f64, delta_max: usize) -> Result<Option<usize>> {
    let profile = temporal_profile(index, p, t, r, delta_max)?;
    if profile.iter().any(|v| v.is_nan()) {
        return Ok(None);
    }
    Ok(first_interior_min(&profile).map(|i| i + 1))
}

/// Convenience form over a bare sequence.
pub fn adaptive_temporal_scale(seq: &PointCloudSequence, p: &Point3, t: usize, r: f64, delta_max: usize) -> Result<Option<usize>> {
    let index = SequenceIndex::new(seq, r);
    adaptive_temporal_scale_at(&index, p, t, r, delta_max)
}

/// Resolves `(r, tau)` for a point, `None` when an adaptive search finds no
/// extremum (such points are not described).
pub fn resolve_scales(index: &SequenceIndex, p: &Point3, t: usize, params: &ScaleParams) -> Result<Option<(f64, usize)>> {
    let r = match &params.radii {
        Some(radii) => match spatial_scale_at(index, p, t, radii) {
            Some(r) => r,
            None => return Ok(None),
        },
        None => params.r,
    };
    let tau = match params.delta_max {
        Some(d) => match adaptive_temporal_scale_at(index, p, t, r, d)? {
            Some(tau) => tau,
            None => return Ok(None),
        },
        None => params.tau,
    };
    Ok(Some((r, tau)))
}
