#![allow(dead_code)]

use hopc::geom::{Point3, Vec3};
use nalgebra::{Matrix3, Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cyclic Jacobi sweeps until the off-diagonal mass vanishes. Returns
/// eigenvalues in descending order.
pub fn jacobi_eigenvalues(m: &Matrix3<f64>) -> [f64; 3] {
    let mut a = *m;
    for _ in 0..100 {
        let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        if off <= 1e-300 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[(p, q)] == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut j = Matrix3::identity();
            j[(p, p)] = c;
            j[(q, q)] = c;
            j[(p, q)] = s;
            j[(q, p)] = -s;
            a = j.transpose() * a * j;
        }
    }
    let mut l = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
    l.sort_by(|x, y| y.total_cmp(x));
    l
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> Rotation3<f64> {
    let axis = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), rng.random_range(0.0..std::f64::consts::TAU))
}

/// `R diag(l) Rᵀ` with random rotation and eigenvalues in `[0, scale)`.
pub fn random_psd<R: Rng>(rng: &mut R, scale: f64) -> Matrix3<f64> {
    let rot = random_rotation(rng).into_inner();
    let d = Matrix3::from_diagonal(&Vec3::new(
        rng.random_range(0.0..scale),
        rng.random_range(0.0..scale),
        rng.random_range(0.0..scale),
    ));
    let m = rot * d * rot.transpose();
    (m + m.transpose()) * 0.5
}

/// Gaussian blob with standard deviations `sd` along a random frame.
pub fn anisotropic_cloud<R: Rng>(rng: &mut R, n: usize, sd: [f64; 3]) -> Vec<Point3> {
    let rot = random_rotation(rng);
    (0..n)
        .map(|_| {
            let z: [f64; 3] = std::array::from_fn(|i| sd[i] * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng));
            Point3::from(rot * Vec3::new(z[0], z[1], z[2]))
        })
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    d / (na * nb)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Fraction of `query[i]` whose nearest gallery row is `gallery[i]`.
pub fn nn_match_rate(query: &[Vec<f64>], gallery: &[Vec<f64>]) -> f64 {
    let hits = query
        .iter()
        .enumerate()
        .filter(|(i, q)| {
            let j = (0..gallery.len()).min_by(|&a, &b| sq_dist(q, &gallery[a]).total_cmp(&sq_dist(q, &gallery[b]))).unwrap();
            j == *i
        })
        .count();
    hits as f64 / query.len() as f64
}

/// Minimum eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let d = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
    d.symmetric_eigen().eigenvalues.min()
}
