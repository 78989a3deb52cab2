//! Expressing a keypoint's spatio-temporal support in the keypoint's own
//! spatial eigenbasis.

use nalgebra::Matrix3;

use crate::eigen::Eigensystem;
use crate::error::{Error, Result};
use crate::geom::{Point3, SupportVolume, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedPoint {
    /// Offset from the keypoint in eigenbasis coordinates.
    pub coords: Vec3,
    /// Frame offset from the keypoint's frame.
    pub dt: i64,
}

#[derive(Debug, Clone)]
pub struct AlignedSupport {
    pub points: Vec<AlignedPoint>,
    pub origin: Point3,
    pub t: usize,
    /// Columns are the oriented spatial eigenvectors.
    pub basis: Matrix3<f64>,
}

impl AlignedSupport {
    /// Maps aligned points back to world coordinates.
    pub fn reconstruct(&self) -> Vec<Point3> {
        self.points.iter().map(|a| self.origin + self.basis * a.coords).collect()
    }
}

/// Maps each support point `q` to `(q - origin)ᵀ V'`.
pub fn align_support(origin: &Point3, t: usize, support: &SupportVolume, spatial: &Eigensystem) -> Result<AlignedSupport> {
    if !spatial.oriented {
        return Err(Error::config("alignment requires a sign-disambiguated eigenbasis"));
    }
    let basis = spatial.basis();
    let bt = basis.transpose();
    let points = support
        .points
        .iter()
        .map(|q| AlignedPoint { coords: bt * (q.pos - origin), dt: q.frame as i64 - t as i64 })
        .collect();
    Ok(AlignedSupport { points, origin: *origin, t, basis })
}
