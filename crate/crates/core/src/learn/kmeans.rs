//! Seeded k-means++ / Lloyd codebook construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Relative cost decrease below which Lloyd iterations stop.
pub const KMEANS_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centers: Vec<Vec<f64>>,
    pub dim: usize,
}

impl Codebook {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centers.first().map(|c| c.len()).ok_or_else(|| Error::data("codebook needs at least one center"))?;
        if centers.iter().any(|c| c.len() != dim || c.iter().any(|v| !v.is_finite())) {
            return Err(Error::data("codebook centers must be finite and share one dimension"));
        }
        Ok(Codebook { centers, dim })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Index and squared distance of the nearest center, lowest index on ties.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centers.iter().enumerate() {
            let d = sq_dist(c, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Total squared distance after each assignment step.
    pub cost_history: Vec<f64>,
    pub assignment: Vec<usize>,
}

pub fn kmeans_codebook(descriptors: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<Codebook> {
    Ok(kmeans_fit(descriptors, k, seed, max_iter)?.codebook)
}

/// Lloyd iterations from a k-means++ start. Clusters left empty by an
/// assignment are re-seeded with the points farthest from their centers.
pub fn kmeans_fit(descriptors: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::config("k must be >= 1"));
    }
    if descriptors.len() < k {
        return Err(Error::data(format!("k-means needs at least k={k} descriptors, got {}", descriptors.len())));
    }
    let dim = descriptors[0].len();
    if descriptors.iter().any(|d| d.len() != dim || d.iter().any(|v| !v.is_finite())) {
        return Err(Error::data("descriptors must be finite and share one dimension"));
    }
    if count_distinct(descriptors) < k {
        return Err(Error::data(format!("fewer than k={k} distinct descriptors")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(descriptors, k, &mut rng);
    let mut history = Vec::new();
    let mut assignment = vec![0usize; descriptors.len()];
    for iter in 0..max_iter.max(1) {
        let book = Codebook { centers: centers.clone(), dim };
        let nearest: Vec<(usize, f64)> = descriptors.par_iter().map(|d| book.nearest(d)).collect();
        let mut dist: Vec<f64> = nearest.iter().map(|n| n.1).collect();
        assignment.iter_mut().zip(&nearest).for_each(|(a, n)| *a = n.0);

        let mut counts = vec![0usize; k];
        assignment.iter().for_each(|&a| counts[a] += 1);
        let mut taken = vec![false; descriptors.len()];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..descriptors.len())
                .filter(|&i| !taken[i] && counts[assignment[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                counts[assignment[i]] -= 1;
                counts[c] = 1;
                assignment[i] = c;
                dist[i] = 0.0;
                taken[i] = true;
                centers[c] = descriptors[i].clone();
            }
        }
        let cost: f64 = dist.iter().sum();
        let converged = history.last().is_some_and(|&prev: &f64| prev - cost <= KMEANS_REL_TOL * prev);
        history.push(cost);
        if converged || iter + 1 == max_iter.max(1) {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for (d, &a) in descriptors.iter().zip(&assignment) {
            sums[a].iter_mut().zip(d).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(KMeansFit { codebook: Codebook { centers, dim }, cost_history: history, assignment })
}

fn count_distinct(descriptors: &[Vec<f64>]) -> usize {
    let mut refs: Vec<&Vec<f64>> = descriptors.iter().collect();
    let cmp = |a: &&Vec<f64>, b: &&Vec<f64>| {
        a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    };
    refs.sort_by(cmp);
    refs.dedup_by(|a, b| cmp(a, b).is_eq());
    refs.len()
}

fn plus_plus_init(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![data[rng.random_range(0..data.len())].clone()];
    let mut d2: Vec<f64> = data.par_iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("distinct points remain");
        centers.push(data[pick].clone());
        let c = centers.last().unwrap();
        d2.par_iter_mut().zip(data.par_iter()).for_each(|(w, x)| *w = w.min(sq_dist(x, c)));
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_center_is_mean() {
        let data = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]];
        let cb = kmeans_codebook(&data, 1, 7, 50).unwrap();
        assert!((cb.centers[0][0] - 2.0).abs() < 1e-12);
        assert!((cb.centers[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_equals_distinct_points() {
        let data = vec![vec![0.0], vec![5.0], vec![5.0], vec![9.0], vec![0.0]];
        let fit = kmeans_fit(&data, 3, 1, 50).unwrap();
        assert_eq!(*fit.cost_history.last().unwrap(), 0.0);
        let mut c: Vec<f64> = fit.codebook.centers.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 5.0, 9.0]);
    }

    #[test]
    fn too_few_points() {
        let data = vec![vec![0.0], vec![1.0]];
        assert!(kmeans_codebook(&data, 3, 0, 10).is_err());
        let dup = vec![vec![1.0], vec![1.0], vec![1.0]];
        assert!(kmeans_codebook(&dup, 2, 0, 10).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let data: Vec<Vec<f64>> = (0..60).map(|i| vec![(i * 37 % 11) as f64, (i * 13 % 7) as f64]).collect();
        let a = kmeans_fit(&data, 5, 42, 100).unwrap();
        let b = kmeans_fit(&data, 5, 42, 100).unwrap();
        assert_eq!(a.codebook, b.codebook);
        assert_eq!(a.cost_history, b.cost_history);
    }
}
