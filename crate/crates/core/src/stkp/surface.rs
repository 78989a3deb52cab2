//! Hyper-surface sampling of an aligned support, and the keypoint
//! descriptor backends built on aligned supports.

use super::align::{align_support, AlignedSupport};
use super::detect::Keypoint;
use crate::error::{Error, Result};
use crate::geom::{DirectionSet, Point3, SequenceIndex};
use crate::hopc::{eigen_histograms, DESCRIPTOR_LEN};

/// Nearest neighbours blended per grid node.
pub const IDW_NEIGHBOURS: usize = 4;

/// A node is occupied when its nearest slab point lies within this many
/// node spacings.
pub const OCCUPANCY_SPACINGS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurfaceGrid {
    pub m_x: usize,
    pub m_y: usize,
    pub m_t: usize,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        SurfaceGrid { m_x: 20, m_y: 20, m_t: 3 }
    }
}

impl SurfaceGrid {
    pub fn len(&self) -> usize {
        self.m_x * self.m_y * self.m_t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Depth of the support surface sampled on a regular grid spanning
/// `[-r, r]²` in the first two aligned axes and `[-τ, τ]` in time. Nodes
/// sit at cell centres, raster order is x-fastest, then y, then t.
#[derive(Debug, Clone)]
pub struct SurfaceDescriptor {
    pub g: Vec<f64>,
    /// Empty nodes hold 0 and are `false` here.
    pub occupied: Vec<bool>,
    pub grid: SurfaceGrid,
    pub r: f64,
    pub tau: usize,
}

/// Samples the aligned depth coordinate on the grid. Within each temporal
/// slab a node takes the inverse-squared-distance blend of the depth of the
/// [`IDW_NEIGHBOURS`] nearest points in the aligned plane.
pub fn surface_descriptor(aligned: &AlignedSupport, grid: SurfaceGrid, r: f64, tau: usize) -> Result<SurfaceDescriptor> {
    if aligned.points.is_empty() {
        return Err(Error::data("surface descriptor of an empty support"));
    }
    if grid.is_empty() || !(r > 0.0) {
        return Err(Error::config("surface grid needs positive sizes and radius"));
    }
    let window = 2 * tau + 1;
    let mut slabs: Vec<Vec<[f64; 3]>> = vec![Vec::new(); grid.m_t];
    for a in &aligned.points {
        let off = a.dt + tau as i64;
        if off < 0 || off >= window as i64 {
            continue;
        }
        let s = (off as usize * grid.m_t / window).min(grid.m_t - 1);
        slabs[s].push([a.coords.x, a.coords.y, a.coords.z]);
    }
    let dx = 2.0 * r / grid.m_x as f64;
    let dy = 2.0 * r / grid.m_y as f64;
    let reach = OCCUPANCY_SPACINGS * dx.max(dy);
    let mut g = vec![0.0; grid.len()];
    let mut occupied = vec![false; grid.len()];
    let mut nearest: Vec<(f64, f64)> = Vec::with_capacity(IDW_NEIGHBOURS + 1);
    for (k, slab) in slabs.iter().enumerate() {
        if slab.is_empty() {
            continue;
        }
        for j in 0..grid.m_y {
            let y = -r + (j as f64 + 0.5) * dy;
            for i in 0..grid.m_x {
                let x = -r + (i as f64 + 0.5) * dx;
                nearest.clear();
                for p in slab {
                    let d2 = (p[0] - x).powi(2) + (p[1] - y).powi(2);
                    if nearest.len() < IDW_NEIGHBOURS || d2 < nearest[nearest.len() - 1].0 {
                        let at = nearest.partition_point(|e| e.0 <= d2);
                        nearest.insert(at, (d2, p[2]));
                        nearest.truncate(IDW_NEIGHBOURS);
                    }
                }
                if nearest[0].0 > reach * reach {
                    continue;
                }
                let node = i + grid.m_x * (j + grid.m_y * k);
                occupied[node] = true;
                g[node] = if nearest[0].0 < 1e-24 {
                    nearest[0].1
                } else {
                    let (num, den) = nearest.iter().fold((0.0, 0.0), |(n, d), &(d2, z)| (n + z / d2, d + 1.0 / d2));
                    num / den
                };
            }
        }
    }
    Ok(SurfaceDescriptor { g, occupied, grid, r, tau })
}

/// HOPC of the aligned support about the keypoint (which sits at the
/// aligned origin), all three blocks kept.
pub fn aligned_hopc(aligned: &AlignedSupport, axes: &DirectionSet) -> Result<[f64; DESCRIPTOR_LEN]> {
    let pts: Vec<Point3> = aligned.points.iter().map(|a| Point3::from(a.coords)).collect();
    let e = crate::eigen::scatter(&pts)?.eigen()?;
    let oriented = crate::eigen::disambiguate_signs(&e, &pts, &Point3::origin());
    Ok(eigen_histograms(&oriented, axes, [true; 3]).0)
}

/// View-invariant keypoint description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorBackend {
    /// Raw sampled hyper-surface values.
    Surface(SurfaceGrid),
    /// HOPC recomputed on the aligned support.
    AlignedHopc,
}

impl DescriptorBackend {
    pub fn dim(&self) -> usize {
        match self {
            DescriptorBackend::Surface(g) => g.len(),
            DescriptorBackend::AlignedHopc => DESCRIPTOR_LEN,
        }
    }
}

/// Describes a detected keypoint from its spatio-temporal support.
pub fn describe_keypoint(index: &SequenceIndex, kp: &Keypoint, backend: DescriptorBackend, axes: &DirectionSet) -> Result<Vec<f64>> {
    let support = index.support(&kp.p, kp.t, kp.r, kp.tau)?;
    let aligned = align_support(&kp.p, kp.t, &support, &kp.spatial_eigen)?;
    match backend {
        DescriptorBackend::Surface(grid) => Ok(surface_descriptor(&aligned, grid, kp.r, kp.tau)?.g),
        DescriptorBackend::AlignedHopc => Ok(aligned_hopc(&aligned, axes)?.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::stkp::align::AlignedPoint;
    use nalgebra::Matrix3;

    fn plane(slope: f64, n: usize, frames: i64) -> AlignedSupport {
        let mut points = Vec::new();
        for dt in -frames..=frames {
            for i in 0..n {
                for j in 0..n {
                    let x = -1.0 + 2.0 * (i as f64 + 0.37) / n as f64;
                    let y = -1.0 + 2.0 * (j as f64 + 0.61) / n as f64;
                    points.push(AlignedPoint { coords: Vec3::new(x, y, slope * x), dt });
                }
            }
        }
        AlignedSupport { points, origin: Point3::origin(), t: 5, basis: Matrix3::identity() }
    }

    #[test]
    fn default_length() {
        let d = surface_descriptor(&plane(0.0, 30, 1), SurfaceGrid::default(), 1.0, 1).unwrap();
        assert_eq!(d.g.len(), 1200);
    }

    #[test]
    fn flat_plane_samples_zero() {
        let d = surface_descriptor(&plane(0.0, 30, 1), SurfaceGrid::default(), 1.0, 1).unwrap();
        assert!(d.occupied.iter().all(|&o| o));
        assert!(d.g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn sloped_plane_matches_analytic_depth() {
        let r = 1.0;
        let grid = SurfaceGrid::default();
        let d = surface_descriptor(&plane(0.5, 40, 1), grid, r, 1).unwrap();
        let dx = 2.0 * r / grid.m_x as f64;
        for k in 0..grid.m_t {
            for j in 0..grid.m_y {
                for i in 0..grid.m_x {
                    let node = i + grid.m_x * (j + grid.m_y * k);
                    assert!(d.occupied[node]);
                    let x = -r + (i as f64 + 0.5) * dx;
                    assert!((d.g[node] - 0.5 * x).abs() <= 0.05 * r, "node {node}: {} vs {}", d.g[node], 0.5 * x);
                }
            }
        }
    }

    #[test]
    fn sparse_slab_leaves_empty_nodes() {
        let aligned = AlignedSupport {
            points: vec![AlignedPoint { coords: Vec3::new(0.0, 0.0, 0.3), dt: 0 }],
            origin: Point3::origin(),
            t: 1,
            basis: Matrix3::identity(),
        };
        let d = surface_descriptor(&aligned, SurfaceGrid::default(), 1.0, 1).unwrap();
        let occ = d.occupied.iter().filter(|&&o| o).count();
        assert!(occ > 0 && occ < 40);
        assert!(d.g.iter().zip(&d.occupied).all(|(v, &o)| o || *v == 0.0));
    }

    #[test]
    fn empty_support_errors() {
        let aligned = AlignedSupport { points: vec![], origin: Point3::origin(), t: 1, basis: Matrix3::identity() };
        assert!(surface_descriptor(&aligned, SurfaceGrid::default(), 1.0, 1).is_err());
    }
}
