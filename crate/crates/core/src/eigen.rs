//! Scatter matrices, a closed-form 3x3 symmetric eigensolver, eigenvector
//! sign disambiguation and eigenratios.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geom::{Point3, Positioned, Vec3};

/// Relative gap below which two eigenvalues are treated as repeated.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Mean-centred second moment of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrix {
    pub c: Matrix3<f64>,
    pub mu: Point3,
    pub n: usize,
}

/// Two-pass scatter matrix with compensated accumulation.
pub fn scatter<P: Positioned>(points: &[P]) -> Result<ScatterMatrix> {
    if points.is_empty() {
        return Err(Error::data("scatter matrix of an empty support"));
    }
    let n = points.len() as f64;
    let mut s = [CompensatedSum::default(); 3];
    for p in points {
        let q = p.position();
        s[0].add(q.x);
        s[1].add(q.y);
        s[2].add(q.z);
    }
    let mu = Point3::new(s[0].value() / n, s[1].value() / n, s[2].value() / n);
    let mut acc = [CompensatedSum::default(); 6];
    for p in points {
        let d = p.position() - mu;
        acc[0].add(d.x * d.x);
        acc[1].add(d.x * d.y);
        acc[2].add(d.x * d.z);
        acc[3].add(d.y * d.y);
        acc[4].add(d.y * d.z);
        acc[5].add(d.z * d.z);
    }
    let v: Vec<f64> = acc.iter().map(|a| a.value() / n).collect();
    let c = Matrix3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5]);
    Ok(ScatterMatrix { c, mu, n: points.len() })
}

/// Incrementally accumulated raw moments about a fixed origin. Used where
/// supports grow frame by frame (temporal scale search).
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    origin: Point3,
    n: usize,
    first: [CompensatedSum; 3],
    second: [CompensatedSum; 6],
}

impl MomentAccumulator {
    pub fn new(origin: Point3) -> Self {
        MomentAccumulator {
            origin,
            n: 0,
            first: Default::default(),
            second: Default::default(),
        }
    }

    pub fn add(&mut self, q: &Point3) {
        let o = q - self.origin;
        self.n += 1;
        self.first[0].add(o.x);
        self.first[1].add(o.y);
        self.first[2].add(o.z);
        self.second[0].add(o.x * o.x);
        self.second[1].add(o.x * o.y);
        self.second[2].add(o.x * o.z);
        self.second[3].add(o.y * o.y);
        self.second[4].add(o.y * o.z);
        self.second[5].add(o.z * o.z);
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn scatter(&self) -> Option<ScatterMatrix> {
        if self.n == 0 {
            return None;
        }
        let n = self.n as f64;
        let m = Vec3::new(self.first[0].value() / n, self.first[1].value() / n, self.first[2].value() / n);
        let s: Vec<f64> = self.second.iter().map(|a| a.value() / n).collect();
        let c = Matrix3::new(
            s[0] - m.x * m.x,
            s[1] - m.x * m.y,
            s[2] - m.x * m.z,
            s[1] - m.x * m.y,
            s[3] - m.y * m.y,
            s[4] - m.y * m.z,
            s[2] - m.x * m.z,
            s[4] - m.y * m.z,
            s[5] - m.z * m.z,
        );
        Some(ScatterMatrix { c, mu: self.origin + m, n: self.n })
    }
}

/// Eigenvalues in descending order with unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    pub lambdas: [f64; 3],
    pub vectors: [Vec3; 3],
    /// Set once signs have been disambiguated against a support.
    pub oriented: bool,
    /// Magnitude of the signed squared-projection mass behind each
    /// eigenvector's orientation; zero until oriented.
    pub sign_scores: [f64; 3],
}

impl Eigensystem {
    /// Columns are the eigenvectors in descending eigenvalue order.
    pub fn basis(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.vectors)
    }

    pub fn handedness(&self) -> f64 {
        self.vectors[0].cross(&self.vectors[1]).dot(&self.vectors[2])
    }
}

impl ScatterMatrix {
    pub fn eigen(&self) -> Result<Eigensystem> {
        eig3(&self.c)
    }
}

/// Symmetric 3x3 eigendecomposition.
///
/// Eigenvalues come from the trigonometric solution of the characteristic
/// cubic, polished with one Newton step. Eigenvectors are built starting
/// from the best-isolated eigenvalue (cross products of rows of `A - λI`),
/// the second one from a 2x2 problem in its orthogonal complement, the third
/// by a cross product. Final eigenvalues are Rayleigh quotients.
///
/// Repeated eigenvalues (relative gap below [`TIE_TOLERANCE`]) get a
/// canonical basis: inside the tied subspace the first vector is the
/// projection of the coordinate axis closest to the subspace (lowest axis
/// index on ties), the second completes it. Every vector is then signed so
/// its first non-negligible component is positive. Negative eigenvalues from
/// round-off are clamped to zero.
pub fn eig3(m: &Matrix3<f64>) -> Result<Eigensystem> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical("non-finite entry in scatter matrix"));
    }
    let sym = |i: usize, j: usize| 0.5 * (m[(i, j)] + m[(j, i)]);
    let (a00, a01, a02, a11, a12, a22) = (sym(0, 0), sym(0, 1), sym(0, 2), sym(1, 1), sym(1, 2), sym(2, 2));
    let max_abs = [a00, a01, a02, a11, a12, a22].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let identity = [Vec3::x(), Vec3::y(), Vec3::z()];
    if max_abs == 0.0 {
        return Ok(finish([0.0; 3], identity));
    }
    let s = 1.0 / max_abs;
    let a = Matrix3::new(
        a00 * s,
        a01 * s,
        a02 * s,
        a01 * s,
        a11 * s,
        a12 * s,
        a02 * s,
        a12 * s,
        a22 * s,
    );
    let q = a.trace() / 3.0;
    let b = a - Matrix3::identity() * q;
    let p2 = (b[(0, 0)].powi(2)
        + b[(1, 1)].powi(2)
        + b[(2, 2)].powi(2)
        + 2.0 * (b[(0, 1)].powi(2) + b[(0, 2)].powi(2) + b[(1, 2)].powi(2)))
        / 6.0;
    let p = p2.sqrt();
    if p <= 1e-14 {
        return Ok(finish([q * max_abs; 3], identity));
    }
    let half_det = ((b / p).determinant() * 0.5).clamp(-1.0, 1.0);
    let angle = half_det.acos() / 3.0;
    let beta2 = 2.0 * angle.cos();
    let beta0 = 2.0 * (angle + 2.0 * PI / 3.0).cos();
    let beta1 = -(beta0 + beta2);
    // ascending
    let mut ev = [q + p * beta0, q + p * beta1, q + p * beta2];
    for i in 0..3 {
        ev[i] = newton_polish(&a, ev[i]);
    }
    let (v0, v1, v2);
    if half_det >= 0.0 {
        v2 = isolated_eigenvector(&a, ev[2]);
        v1 = complement_eigenvector(&a, &v2, ev[1]);
        v0 = v1.cross(&v2);
    } else {
        v0 = isolated_eigenvector(&a, ev[0]);
        v1 = complement_eigenvector(&a, &v0, ev[1]);
        v2 = v0.cross(&v1);
    }
    let mut pairs = [(v2, rayleigh(&a, &v2)), (v1, rayleigh(&a, &v1)), (v0, rayleigh(&a, &v0))];
    pairs.sort_by(|x, y| y.1.total_cmp(&x.1));
    let lambdas = [pairs[0].1 * max_abs, pairs[1].1 * max_abs, pairs[2].1 * max_abs];
    Ok(finish(lambdas, [pairs[0].0, pairs[1].0, pairs[2].0]))
}

fn finish(mut lambdas: [f64; 3], mut vectors: [Vec3; 3]) -> Eigensystem {
    for l in lambdas.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    let scale = lambdas[0].abs().max(f64::MIN_POSITIVE);
    let tied = |i: usize| (lambdas[i] - lambdas[i + 1]).abs() <= TIE_TOLERANCE * scale;
    match (tied(0), tied(1)) {
        (true, true) => vectors = [Vec3::x(), Vec3::y(), Vec3::z()],
        (true, false) => {
            let (a, b) = canonical_pair(&vectors[2]);
            vectors[0] = a;
            vectors[1] = b;
        }
        (false, true) => {
            let (a, b) = canonical_pair(&vectors[0]);
            vectors[1] = a;
            vectors[2] = b;
        }
        (false, false) => {}
    }
    for v in vectors.iter_mut() {
        if let Some(c) = v.iter().find(|c| c.abs() > 1e-12) {
            if *c < 0.0 {
                *v = -*v;
            }
        }
    }
    Eigensystem { lambdas, vectors, oriented: false, sign_scores: [0.0; 3] }
}

/// Canonical orthonormal basis of the plane orthogonal to `w`.
fn canonical_pair(w: &Vec3) -> (Vec3, Vec3) {
    let mut k = 0;
    for i in 1..3 {
        if w[i].abs() < w[k].abs() {
            k = i;
        }
    }
    let mut e = Vec3::zeros();
    e[k] = 1.0;
    let a = (e - w * w[k]).normalize();
    let b = w.cross(&a).normalize();
    (a, b)
}

fn char_poly(a: &Matrix3<f64>, l: f64) -> (f64, f64) {
    let d0 = a[(0, 0)] - l;
    let d1 = a[(1, 1)] - l;
    let d2 = a[(2, 2)] - l;
    let (a01, a02, a12) = (a[(0, 1)], a[(0, 2)], a[(1, 2)]);
    let m0 = d1 * d2 - a12 * a12;
    let f = d0 * m0 - a01 * (a01 * d2 - a12 * a02) + a02 * (a01 * a12 - d1 * a02);
    let df = -(m0 + (d0 * d2 - a02 * a02) + (d0 * d1 - a01 * a01));
    (f, df)
}

fn newton_polish(a: &Matrix3<f64>, l: f64) -> f64 {
    let (f, df) = char_poly(a, l);
    if df.abs() <= 1e-12 {
        return l;
    }
    let next = l - f / df;
    if char_poly(a, next).0.abs() < f.abs() {
        next
    } else {
        l
    }
}

fn rayleigh(a: &Matrix3<f64>, v: &Vec3) -> f64 {
    v.dot(&(a * v))
}

fn isolated_eigenvector(a: &Matrix3<f64>, l: f64) -> Vec3 {
    let m = a - Matrix3::identity() * l;
    let r0 = m.row(0).transpose();
    let r1 = m.row(1).transpose();
    let r2 = m.row(2).transpose();
    let c = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
    let best = c
        .iter()
        .copied()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
        .unwrap();
    let n = best.norm();
    if n > 0.0 {
        best / n
    } else {
        Vec3::x()
    }
}

fn orthogonal_complement(w: &Vec3) -> (Vec3, Vec3) {
    let u = if w.x.abs() > w.y.abs() {
        let inv = 1.0 / (w.x * w.x + w.z * w.z).sqrt();
        Vec3::new(-w.z * inv, 0.0, w.x * inv)
    } else {
        let inv = 1.0 / (w.y * w.y + w.z * w.z).sqrt();
        Vec3::new(0.0, w.z * inv, -w.y * inv)
    };
    (u, w.cross(&u))
}

fn complement_eigenvector(a: &Matrix3<f64>, v0: &Vec3, l: f64) -> Vec3 {
    let (u, v) = orthogonal_complement(v0);
    let au = a * u;
    let av = a * v;
    let mut m00 = u.dot(&au) - l;
    let mut m01 = u.dot(&av);
    let mut m11 = v.dot(&av) - l;
    let (abs00, abs01, abs11) = (m00.abs(), m01.abs(), m11.abs());
    if abs00 >= abs11 {
        if abs00.max(abs01) > 0.0 {
            if abs00 >= abs01 {
                m01 /= m00;
                m00 = 1.0 / (1.0 + m01 * m01).sqrt();
                m01 *= m00;
            } else {
                m00 /= m01;
                m01 = 1.0 / (1.0 + m00 * m00).sqrt();
                m00 *= m01;
            }
            (u * m01 - v * m00).normalize()
        } else {
            u
        }
    } else if abs11.max(abs01) > 0.0 {
        if abs11 >= abs01 {
            m01 /= m11;
            m11 = 1.0 / (1.0 + m01 * m01).sqrt();
            m01 *= m11;
        } else {
            m11 /= m01;
            m01 = 1.0 / (1.0 + m11 * m11).sqrt();
            m11 *= m01;
        }
        (u * m11 - v * m01).normalize()
    } else {
        u
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Signed projection mass at most this fraction of the total squared
/// offset of the support counts as zero.
pub const SIGN_TOLERANCE: f64 = 1e-9;

/// Orients each eigenvector toward the side of `center` carrying more
/// squared-projection mass of the support offsets (zero mass counts as
/// positive), then restores a right-handed triad by flipping the vector
/// whose mass is least decisive (the later vector on ties).
pub fn disambiguate_signs<P: Positioned>(eigs: &Eigensystem, support: &[P], center: &Point3) -> Eigensystem {
    let mut scores = [CompensatedSum::default(); 3];
    let mut mass = 0.0;
    for q in support {
        let o = q.position() - center;
        mass += o.norm_squared();
        for (j, s) in scores.iter_mut().enumerate() {
            let d = o.dot(&eigs.vectors[j]);
            s.add(sign(d) * d * d);
        }
    }
    let mut out = eigs.clone();
    for j in 0..3 {
        let mut s = scores[j].value();
        if s.abs() <= SIGN_TOLERANCE * mass {
            s = 0.0;
        }
        out.sign_scores[j] = s.abs();
        if sign(s) < 0.0 {
            out.vectors[j] = -out.vectors[j];
        }
    }
    if out.handedness() < 0.0 {
        let mut weakest = 2;
        for j in (0..2).rev() {
            if out.sign_scores[j] < out.sign_scores[weakest] {
                weakest = j;
            }
        }
        out.vectors[weakest] = -out.vectors[weakest];
    }
    out.oriented = true;
    out
}

/// Ratios of consecutive eigenvalues. A ratio whose denominator falls below
/// the floor is infinite, or 1 when the numerator is below the floor too
/// (both eigenvalues vanish, so they are equal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenRatios {
    pub d12: f64,
    pub d23: f64,
}

impl EigenRatios {
    pub fn all_above(&self, theta: f64) -> bool {
        self.d12 > theta && self.d23 > theta
    }
}

/// Default denominator floor: `1e-12 * λ1`, or `1e-15` when `λ1 = 0`.
pub fn default_floor(lambdas: &[f64; 3]) -> f64 {
    if lambdas[0] > 0.0 {
        1e-12 * lambdas[0]
    } else {
        1e-15
    }
}

#[inline]
pub(crate) fn floored_ratio(num: f64, den: f64, floor: f64) -> f64 {
    if den < floor {
        if num < floor {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

pub fn eigenratios(eigs: &Eigensystem, floor: Option<f64>) -> EigenRatios {
    let l = &eigs.lambdas;
    let floor = floor.unwrap_or_else(|| default_floor(l));
    EigenRatios { d12: floored_ratio(l[0], l[1], floor), d23: floored_ratio(l[1], l[2], floor) }
}
