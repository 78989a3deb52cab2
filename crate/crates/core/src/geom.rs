//! Geometric primitives: points, frames, sequences, the icosahedral direction
//! set, temporal window accumulation and radius queries over a voxel hash.

use std::collections::HashMap;

use nalgebra::{Point3 as NaPoint3, Vector3};

use crate::error::{Error, Result};

pub type Point3 = NaPoint3<f64>;
pub type Vec3 = Vector3<f64>;

/// Number of histogram bins (icosahedron facets). The only supported value.
pub const BINS: usize = 20;

/// One pointcloud of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Frame tag carried through I/O; temporal operations address frames by
    /// 1-based position in the sequence.
    pub index: u32,
    pub points: Vec<Point3>,
}

impl Frame {
    pub fn new(index: u32, points: Vec<Point3>) -> Self {
        Frame { index, points }
    }
}

/// An ordered sequence of pointclouds.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudSequence {
    frames: Vec<Frame>,
    pub frame_rate: f64,
    pub subject_id: Option<u32>,
    pub action_label: Option<u32>,
}

impl PointCloudSequence {
    /// Validates ordering (strictly increasing, 1-based frame tags) and
    /// finiteness of every coordinate.
    pub fn new(frames: Vec<Frame>, frame_rate: f64) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::data(format!("frame rate must be positive, got {frame_rate}")));
        }
        let mut prev = 0u32;
        for f in &frames {
            if f.index <= prev {
                return Err(Error::data(format!(
                    "frame indices must be >= 1 and strictly increasing (got {} after {})",
                    f.index, prev
                )));
            }
            prev = f.index;
            if let Some(p) = f.points.iter().find(|p| !p.coords.iter().all(|c| c.is_finite())) {
                return Err(Error::data(format!("non-finite point {p:?} in frame {}", f.index)));
            }
        }
        Ok(PointCloudSequence { frames, frame_rate, subject_id: None, action_label: None })
    }

    pub fn with_tags(mut self, subject_id: Option<u32>, action_label: Option<u32>) -> Self {
        self.subject_id = subject_id;
        self.action_label = action_label;
        self
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame at 1-based position `t`.
    pub fn frame(&self, t: usize) -> &Frame {
        &self.frames[t - 1]
    }

    pub fn total_points(&self) -> usize {
        self.frames.iter().map(|f| f.points.len()).sum()
    }

    /// Keeps every `factor`-th frame starting with the first, re-tags frames
    /// 1..n and divides the frame rate.
    pub fn decimate(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::config("decimation factor must be >= 1"));
        }
        let frames = self
            .frames
            .iter()
            .step_by(factor)
            .enumerate()
            .map(|(i, f)| Frame::new(i as u32 + 1, f.points.clone()))
            .collect();
        Ok(PointCloudSequence {
            frames,
            frame_rate: self.frame_rate / factor as f64,
            subject_id: self.subject_id,
            action_label: self.action_label,
        })
    }

    /// Applies `f` to every point of every frame.
    pub fn map_points(&self, f: impl Fn(&Point3) -> Point3) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|fr| Frame::new(fr.index, fr.points.iter().map(&f).collect()))
            .collect();
        PointCloudSequence { frames, ..self.clone() }
    }
}

/// A point tagged with the 1-based position of the frame it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedPoint {
    pub pos: Point3,
    pub frame: usize,
}

/// Anything with a 3D position.
pub trait Positioned {
    fn position(&self) -> Point3;
}

impl Positioned for Point3 {
    #[inline]
    fn position(&self) -> Point3 {
        *self
    }
}

impl Positioned for TaggedPoint {
    #[inline]
    fn position(&self) -> Point3 {
        self.pos
    }
}

/// Points within radius `r` of `center`, optionally merged over the frame
/// window `[t - tau, t + tau]`.
#[derive(Debug, Clone)]
pub struct SupportVolume {
    pub center: Point3,
    pub points: Vec<TaggedPoint>,
    pub r: f64,
    pub tau: usize,
}

impl SupportVolume {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Unit facet-centre directions of the regular icosahedron.
#[derive(Debug, Clone)]
pub struct DirectionSet {
    pub axes: [Vec3; BINS],
    pub psi: f64,
}

const PHI: f64 = 1.618_033_988_749_895;

/// The 20 facet centres of the regular icosahedron (the dodecahedron
/// vertices), normalised.
///
/// Order is fixed: first the eight `(±1, ±1, ±1)` directions, then the
/// groups `(0, ±1/φ, ±φ)`, `(±1/φ, ±φ, 0)` and `(±φ, 0, ±1/φ)`. Inside each
/// group signs are enumerated lexicographically with `+` before `-` and the
/// first coordinate varying slowest.
pub fn icosahedron_axes(m: usize) -> Result<DirectionSet> {
    if m != BINS {
        return Err(Error::config(format!("unsupported bin count {m}; only {BINS} is supported")));
    }
    let inv = 1.0 / PHI;
    let len = (PHI * PHI + inv * inv).sqrt();
    let signs2 = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
    let mut axes = Vec::with_capacity(BINS);
    for &sx in &[1.0, -1.0] {
        for &(sy, sz) in &signs2 {
            axes.push(Vec3::new(sx, sy, sz) / len);
        }
    }
    for &(a, b) in &signs2 {
        axes.push(Vec3::new(0.0, a * inv, b * PHI) / len);
    }
    for &(a, b) in &signs2 {
        axes.push(Vec3::new(a * inv, b * PHI, 0.0) / len);
    }
    for &(a, b) in &signs2 {
        axes.push(Vec3::new(a * PHI, 0.0, b * inv) / len);
    }
    let axes: [Vec3; BINS] = axes.try_into().expect("20 axes");
    let mut set = DirectionSet { axes, psi: 0.0 };
    set.psi = neighbor_threshold(&set);
    Ok(set)
}

/// Dot product of two neighbouring facet axes, `(φ + 1/φ) / L²` with
/// `L² = φ² + 1/φ²`, i.e. `√5 / 3`.
pub fn neighbor_threshold(_axes: &DirectionSet) -> f64 {
    let inv = 1.0 / PHI;
    (PHI + inv) / (PHI * PHI + inv * inv)
}

impl DirectionSet {
    pub fn m(&self) -> usize {
        BINS
    }

    /// Index of the axis pointing opposite to axis `i`.
    pub fn antipode(&self, i: usize) -> usize {
        let target = -self.axes[i];
        self.axes
            .iter()
            .position(|u| (u - target).norm() < 1e-12)
            .expect("direction set is centrally symmetric")
    }
}

/// Union of the points of frames `max(1, t - tau) ..= min(n_f, t + tau)`,
/// in frame order. `t` is a 1-based frame position.
pub fn accumulate_window(seq: &PointCloudSequence, t: usize, tau: usize) -> Result<Vec<TaggedPoint>> {
    let (lo, hi) = window_bounds(seq, t, tau)?;
    let mut out = Vec::new();
    for pos in lo..=hi {
        out.extend(seq.frame(pos).points.iter().map(|&p| TaggedPoint { pos: p, frame: pos }));
    }
    Ok(out)
}

/// Clamped 1-based frame range of the window around `t`.
pub fn window_bounds(seq: &PointCloudSequence, t: usize, tau: usize) -> Result<(usize, usize)> {
    let n = seq.n_frames();
    if n == 0 {
        return Err(Error::data("empty sequence"));
    }
    if t == 0 || t > n {
        return Err(Error::data(format!("frame position {t} outside 1..={n}")));
    }
    Ok((t.saturating_sub(tau).max(1), (t + tau).min(n)))
}

#[inline]
pub(crate) fn within(q: &Point3, p: &Point3, r: f64) -> bool {
    (q - p).norm_squared() <= r * r
}

type CellKey = (i64, i64, i64);

/// Uniform voxel hash over a fixed point list. Queries return indices in
/// ascending order, so results match a linear scan element for element.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    cell: f64,
    order: Vec<u32>,
    cells: HashMap<CellKey, (u32, u32)>,
}

impl VoxelGrid {
    pub fn build<P: Positioned>(points: &[P], cell: f64) -> Self {
        let cell = if cell.is_finite() && cell > 0.0 { cell } else { f64::INFINITY };
        let mut keyed: Vec<(CellKey, u32)> =
            points.iter().enumerate().map(|(i, p)| (key_of(&p.position(), cell), i as u32)).collect();
        keyed.sort_unstable();
        let mut cells = HashMap::new();
        let mut start = 0usize;
        while start < keyed.len() {
            let k = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == k {
                end += 1;
            }
            cells.insert(k, (start as u32, end as u32));
            start = end;
        }
        VoxelGrid { cell, order: keyed.into_iter().map(|(_, i)| i).collect(), cells }
    }

    /// Appends to `out` the indices of all points `q` with `‖q − center‖ ≤ r`.
    pub fn query_into<P: Positioned>(&self, points: &[P], center: &Point3, r: f64, out: &mut Vec<usize>) {
        let first = out.len();
        let lo = key_of(&(center - Vec3::repeat(r)), self.cell);
        let hi = key_of(&(center + Vec3::repeat(r)), self.cell);
        let span = |a: i64, b: i64| (b as f64 - a as f64 + 1.0).max(0.0);
        let n_range = span(lo.0, hi.0) * span(lo.1, hi.1) * span(lo.2, hi.2);
        let mut visit = |&(s, e): &(u32, u32)| {
            for &i in &self.order[s as usize..e as usize] {
                if within(&points[i as usize].position(), center, r) {
                    out.push(i as usize);
                }
            }
        };
        if n_range > self.cells.len() as f64 {
            self.cells.values().for_each(&mut visit);
        } else {
            for x in lo.0..=hi.0 {
                for y in lo.1..=hi.1 {
                    for z in lo.2..=hi.2 {
                        if let Some(range) = self.cells.get(&(x, y, z)) {
                            visit(range);
                        }
                    }
                }
            }
        }
        out[first..].sort_unstable();
    }

    pub fn query<P: Positioned>(&self, points: &[P], center: &Point3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.query_into(points, center, r, &mut out);
        out
    }
}

#[inline]
fn key_of(p: &Point3, cell: f64) -> CellKey {
    let k = |v: f64| (v / cell).floor() as i64;
    (k(p.x), k(p.y), k(p.z))
}

/// All points of `cloud` within distance `r` of `p`, found through a voxel
/// hash with cell edge `r`.
pub fn spherical_support(cloud: &[TaggedPoint], p: &Point3, r: f64) -> SupportVolume {
    let grid = VoxelGrid::build(cloud, r);
    let points = grid.query(cloud, p, r).into_iter().map(|i| cloud[i]).collect();
    SupportVolume { center: *p, points, r, tau: 0 }
}

/// Per-frame voxel hashes over a whole sequence, for repeated support
/// queries without re-merging windows.
#[derive(Debug, Clone)]
pub struct SequenceIndex<'a> {
    seq: &'a PointCloudSequence,
    grids: Vec<VoxelGrid>,
}

impl<'a> SequenceIndex<'a> {
    pub fn new(seq: &'a PointCloudSequence, cell: f64) -> Self {
        let grids = seq.frames().iter().map(|f| VoxelGrid::build(&f.points, cell)).collect();
        SequenceIndex { seq, grids }
    }

    pub fn sequence(&self) -> &'a PointCloudSequence {
        self.seq
    }

    /// Points of frame `t` within `r` of `p`.
    pub fn frame_query(&self, t: usize, p: &Point3, r: f64, out: &mut Vec<TaggedPoint>) {
        let pts = &self.seq.frame(t).points;
        let mut idx = Vec::new();
        self.grids[t - 1].query_into(pts, p, r, &mut idx);
        out.extend(idx.into_iter().map(|i| TaggedPoint { pos: pts[i], frame: t }));
    }

    /// Equivalent to `spherical_support(accumulate_window(seq, t, tau), p, r)`
    /// with the window's tau recorded.
    pub fn support(&self, p: &Point3, t: usize, r: f64, tau: usize) -> Result<SupportVolume> {
        let (lo, hi) = window_bounds(self.seq, t, tau)?;
        let mut points = Vec::new();
        for pos in lo..=hi {
            self.frame_query(pos, p, r, &mut points);
        }
        Ok(SupportVolume { center: *p, points, r, tau })
    }
}
