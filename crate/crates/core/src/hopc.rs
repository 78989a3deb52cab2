//! Histogram of oriented principal components: per-point descriptor,
//! eigenratio pruning and the holistic cell-grid sequence descriptor.

use rayon::prelude::*;

use crate::eigen::{disambiguate_signs, eigenratios, scatter, Eigensystem};
use crate::error::{Error, Result};
use crate::geom::{DirectionSet, Point3, PointCloudSequence, Positioned, SequenceIndex, Vec3, BINS};
use crate::stkp::scale::{resolve_scales, ScaleParams};

/// Length of a point descriptor: three blocks of `BINS` bins.
pub const DESCRIPTOR_LEN: usize = 3 * BINS;

/// Projections within this distance of the neighbour threshold count as
/// being at the threshold.
pub const QUANT_TOLERANCE: f64 = 1e-12;

/// Default eigenratio pruning threshold.
pub const DEFAULT_THETA: f64 = 1.12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedProjection {
    pub bins: [f64; BINS],
    /// True when every bin quantized to zero (including zero input).
    pub degenerate: bool,
}

/// Projects a unit vector onto the facet axes and keeps only the part of
/// each projection exceeding the neighbour threshold.
pub fn project_and_quantize(v: &Vec3, axes: &DirectionSet) -> QuantizedProjection {
    let mut bins = [0.0; BINS];
    for (b, u) in bins.iter_mut().zip(axes.axes.iter()) {
        let d = u.dot(v);
        if d > axes.psi + QUANT_TOLERANCE {
            *b = d - axes.psi;
        }
    }
    let degenerate = bins.iter().all(|&b| b == 0.0);
    QuantizedProjection { bins, degenerate }
}

/// Which eigenvector blocks survive eigenratio pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneCase {
    /// Both ratios exceed the threshold: all three blocks.
    All,
    /// Only the first two eigenvalues are ambiguous: the smallest block.
    SmallestOnly,
    /// Only the last two eigenvalues are ambiguous: the largest block.
    LargestOnly,
    /// Both ratios ambiguous (or the support collapsed to a point).
    Discarded,
}

impl PruneCase {
    pub fn from_ratios(d12: f64, d23: f64, theta: f64) -> Self {
        match (d12 > theta, d23 > theta) {
            (true, true) => PruneCase::All,
            (false, true) => PruneCase::SmallestOnly,
            (true, false) => PruneCase::LargestOnly,
            (false, false) => PruneCase::Discarded,
        }
    }

    fn keep(self) -> [bool; 3] {
        match self {
            PruneCase::All => [true; 3],
            PruneCase::SmallestOnly => [false, false, true],
            PruneCase::LargestOnly => [true, false, false],
            PruneCase::Discarded => [false; 3],
        }
    }
}

#[derive(Debug, Clone)]
pub struct HopcDescriptor {
    pub h: [f64; DESCRIPTOR_LEN],
    /// `true` marks a zeroed block (pruned, or degenerate after quantization).
    pub block_mask: [bool; 3],
    pub discarded: bool,
    pub case: PruneCase,
    pub eigen: Eigensystem,
}

impl HopcDescriptor {
    pub fn block(&self, j: usize) -> &[f64] {
        &self.h[j * BINS..(j + 1) * BINS]
    }
}

/// Scaled histograms of an oriented eigensystem. Blocks not in `keep`, and
/// blocks whose quantized projection vanishes, are zero and masked.
pub fn eigen_histograms(eigs: &Eigensystem, axes: &DirectionSet, keep: [bool; 3]) -> ([f64; DESCRIPTOR_LEN], [bool; 3]) {
    let mut h = [0.0; DESCRIPTOR_LEN];
    let mut mask = [true; 3];
    for j in 0..3 {
        if !keep[j] {
            continue;
        }
        let q = project_and_quantize(&eigs.vectors[j], axes);
        if q.degenerate {
            continue;
        }
        let norm = q.bins.iter().map(|b| b * b).sum::<f64>().sqrt();
        let scale = eigs.lambdas[j] / norm;
        for (dst, b) in h[j * BINS..(j + 1) * BINS].iter_mut().zip(q.bins.iter()) {
            *dst = b * scale;
        }
        mask[j] = false;
    }
    (h, mask)
}

/// HOPC of point `p` over `support`, with eigenratio pruning at `theta`.
pub fn hopc_point<P: Positioned>(p: &Point3, support: &[P], axes: &DirectionSet, theta: f64) -> Result<HopcDescriptor> {
    if theta <= 1.0 || !theta.is_finite() {
        return Err(Error::config(format!("pruning threshold must exceed 1, got {theta}")));
    }
    let eig = scatter(support)?.eigen()?;
    let oriented = disambiguate_signs(&eig, support, p);
    let case = if oriented.lambdas[0] <= 0.0 {
        PruneCase::Discarded
    } else {
        let r = eigenratios(&oriented, None);
        PruneCase::from_ratios(r.d12, r.d23, theta)
    };
    let (h, block_mask) = eigen_histograms(&oriented, axes, case.keep());
    Ok(HopcDescriptor { h, block_mask, discarded: case == PruneCase::Discarded, case, eigen: oriented })
}

/// Spatio-temporal cell partition of a sequence along X, Y and T.
///
/// X/Y bounds are the bounding box of every point of every frame; T is split
/// uniformly over frame positions. Cells are numbered x-fastest, then y,
/// then t. A point on an inner cell boundary belongs to the higher cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub n_x: usize,
    pub n_y: usize,
    pub n_t: usize,
    pub x_bounds: (f64, f64),
    pub y_bounds: (f64, f64),
    pub n_frames: usize,
}

impl CellGrid {
    pub fn for_sequence(seq: &PointCloudSequence, n_x: usize, n_y: usize, n_t: usize) -> Result<Self> {
        if n_x == 0 || n_y == 0 || n_t == 0 {
            return Err(Error::config("cell counts must be >= 1"));
        }
        if seq.total_points() == 0 {
            return Err(Error::data("cannot build a cell grid over an empty sequence"));
        }
        let mut xb = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yb = xb;
        for p in seq.frames().iter().flat_map(|f| f.points.iter()) {
            xb = (xb.0.min(p.x), xb.1.max(p.x));
            yb = (yb.0.min(p.y), yb.1.max(p.y));
        }
        Ok(CellGrid { n_x, n_y, n_t, x_bounds: xb, y_bounds: yb, n_frames: seq.n_frames() })
    }

    pub fn n_cells(&self) -> usize {
        self.n_x * self.n_y * self.n_t
    }

    /// Cell of point `p` observed at 1-based frame position `t`.
    pub fn cell_of(&self, p: &Point3, t: usize) -> usize {
        fn bin(v: f64, (lo, hi): (f64, f64), n: usize) -> usize {
            let ext = hi - lo;
            if ext <= 0.0 {
                return 0;
            }
            (((v - lo) / ext * n as f64).floor().max(0.0) as usize).min(n - 1)
        }
        let ix = bin(p.x, self.x_bounds, self.n_x);
        let iy = bin(p.y, self.y_bounds, self.n_y);
        let it = ((t - 1) * self.n_t / self.n_frames).min(self.n_t - 1);
        ix + self.n_x * (iy + self.n_y * it)
    }
}

#[derive(Debug, Clone)]
pub struct HolisticParams {
    pub n_x: usize,
    pub n_y: usize,
    pub n_t: usize,
    pub scales: ScaleParams,
    pub theta: f64,
    /// Describe every `stride`-th point of each frame.
    pub stride: usize,
}

impl Default for HolisticParams {
    fn default() -> Self {
        HolisticParams { n_x: 6, n_y: 5, n_t: 3, scales: ScaleParams::default(), theta: DEFAULT_THETA, stride: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct HolisticDescriptor {
    pub h: Vec<f64>,
    pub grid: CellGrid,
    /// Points that contributed (not discarded, scales resolved).
    pub points_used: usize,
    /// Per cell: whether any point contributed.
    pub occupied: Vec<bool>,
}

impl HolisticDescriptor {
    pub fn cell_block(&self, s: usize) -> &[f64] {
        &self.h[s * DESCRIPTOR_LEN..(s + 1) * DESCRIPTOR_LEN]
    }
}

/// Holistic sequence descriptor: spatio-temporal HOPC of every point summed
/// per cell, each cell block L2-normalised, blocks concatenated in cell
/// order. Discarded points contribute nothing.
pub fn holistic_descriptor(seq: &PointCloudSequence, axes: &DirectionSet, params: &HolisticParams) -> Result<HolisticDescriptor> {
    if seq.is_empty() {
        return Err(Error::data("empty sequence"));
    }
    params.scales.validate()?;
    if params.theta <= 1.0 {
        return Err(Error::config("theta must exceed 1"));
    }
    if params.stride == 0 {
        return Err(Error::config("stride must be >= 1"));
    }
    let grid = CellGrid::for_sequence(seq, params.n_x, params.n_y, params.n_t)?;
    let gamma = grid.n_cells();
    let index = SequenceIndex::new(seq, params.scales.r);

    // Per-frame partial sums, merged below in frame order so the result does
    // not depend on thread scheduling.
    let partials: Vec<Result<(Vec<f64>, Vec<bool>, usize)>> = (1..=seq.n_frames())
        .into_par_iter()
        .map(|t| {
            let mut acc = vec![0.0; gamma * DESCRIPTOR_LEN];
            let mut occ = vec![false; gamma];
            let mut used = 0;
            for p in seq.frame(t).points.iter().step_by(params.stride) {
                let Some((r, tau)) = resolve_scales(&index, p, t, &params.scales)? else {
                    continue;
                };
                let support = index.support(p, t, r, tau)?;
                let d = hopc_point(p, &support.points, axes, params.theta)?;
                if d.discarded {
                    continue;
                }
                let s = grid.cell_of(p, t);
                for (a, v) in acc[s * DESCRIPTOR_LEN..(s + 1) * DESCRIPTOR_LEN].iter_mut().zip(d.h.iter()) {
                    *a += v;
                }
                occ[s] = true;
                used += 1;
            }
            Ok((acc, occ, used))
        })
        .collect();

    let mut h = vec![0.0; gamma * DESCRIPTOR_LEN];
    let mut occupied = vec![false; gamma];
    let mut points_used = 0;
    for part in partials {
        let (acc, occ, used) = part?;
        for (a, v) in h.iter_mut().zip(acc) {
            *a += v;
        }
        for (o, v) in occupied.iter_mut().zip(occ) {
            *o |= v;
        }
        points_used += used;
    }
    for block in h.chunks_mut(DESCRIPTOR_LEN) {
        let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            block.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(HolisticDescriptor { h, grid, points_used, occupied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{icosahedron_axes, Frame};

    fn axes() -> DirectionSet {
        icosahedron_axes(20).unwrap()
    }

    #[test]
    fn axis_projects_into_single_bin() {
        let a = axes();
        for i in 0..BINS {
            let q = project_and_quantize(&a.axes[i], &a);
            for z in 0..BINS {
                let expect = if z == i { 1.0 - a.psi } else { 0.0 };
                assert!((q.bins[z] - expect).abs() < 1e-15, "axis {i} bin {z}: {}", q.bins[z]);
            }
            let neg = project_and_quantize(&-a.axes[i], &a);
            let nz: Vec<usize> = (0..BINS).filter(|&z| neg.bins[z] > 0.0).collect();
            assert_eq!(nz, vec![a.antipode(i)]);
        }
    }

    #[test]
    fn zero_vector_is_degenerate() {
        let q = project_and_quantize(&Vec3::zeros(), &axes());
        assert!(q.degenerate);
        assert!(q.bins.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn prune_cases() {
        assert_eq!(PruneCase::from_ratios(2.0, 2.0, 1.12), PruneCase::All);
        assert_eq!(PruneCase::from_ratios(1.0, 2.0, 1.12), PruneCase::SmallestOnly);
        assert_eq!(PruneCase::from_ratios(2.0, 1.1, 1.12), PruneCase::LargestOnly);
        assert_eq!(PruneCase::from_ratios(1.12, 1.12, 1.12), PruneCase::Discarded);
    }

    #[test]
    fn coincident_support_discarded() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0); 5];
        let d = hopc_point(&pts[0], &pts, &axes(), 1.12).unwrap();
        assert!(d.discarded);
        assert!(d.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn theta_must_exceed_one() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0); 2];
        assert!(hopc_point(&pts[0], &pts, &axes(), 1.0).is_err());
    }

    #[test]
    fn cell_assignment_boundaries() {
        let frames = vec![
            Frame::new(1, vec![Point3::new(0.0, 0.0, 0.0)]),
            Frame::new(2, vec![Point3::new(6.0, 5.0, 0.0)]),
            Frame::new(3, vec![Point3::new(1.0, 1.0, 0.0)]),
        ];
        let seq = PointCloudSequence::new(frames, 30.0).unwrap();
        let g = CellGrid::for_sequence(&seq, 6, 5, 3).unwrap();
        assert_eq!(g.cell_of(&Point3::new(0.0, 0.0, 0.0), 1), 0);
        // exactly on the x=1 boundary goes up
        assert_eq!(g.cell_of(&Point3::new(1.0, 0.0, 0.0), 1), 1);
        // far corner clamps into the last cell
        assert_eq!(g.cell_of(&Point3::new(6.0, 5.0, 0.0), 3), g.n_cells() - 1);
        assert_eq!(g.cell_of(&Point3::new(0.0, 0.0, 0.0), 2), 30);
    }
}
