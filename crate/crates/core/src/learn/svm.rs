//! One-vs-rest kernel SVM trained by sequential minimal optimisation on a
//! precomputed kernel matrix.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// KKT violation tolerance of the dual solver.
pub const KKT_TOLERANCE: f64 = 1e-3;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    HistogramIntersection,
    Linear,
}

impl KernelKind {
    pub fn id(self) -> u8 {
        match self {
            KernelKind::HistogramIntersection => 0,
            KernelKind::Linear => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(KernelKind::HistogramIntersection),
            1 => Some(KernelKind::Linear),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::HistogramIntersection => "hik",
            KernelKind::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hik" => Some(KernelKind::HistogramIntersection),
            "linear" => Some(KernelKind::Linear),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelKind::HistogramIntersection => x.iter().zip(y).map(|(a, b)| a.min(*b)).sum(),
            KernelKind::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

/// Histogram intersection `Σ min(x_i, y_i)`.
pub fn hik(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::data("histogram lengths differ"));
    }
    if x.iter().chain(y).any(|v| *v < 0.0) {
        return Err(Error::data("histogram intersection needs non-negative entries"));
    }
    Ok(KernelKind::HistogramIntersection.eval(x, y))
}

/// Dense symmetric kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    pub n: usize,
    pub k: Vec<f64>,
}

impl Gram {
    pub fn compute(kind: KernelKind, xs: &[Vec<f64>]) -> Self {
        let n = xs.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| kind.eval(&xs[i], &xs[j])).collect())
            .collect();
        Gram { n, k: rows.concat() }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    /// Sub-matrix over `idx` (rows and columns).
    pub fn select(&self, idx: &[usize]) -> Gram {
        let k = idx.iter().flat_map(|&i| idx.iter().map(move |&j| (i, j))).map(|(i, j)| self.at(i, j)).collect();
        Gram { n: idx.len(), k }
    }
}

#[derive(Debug, Clone)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// C-SVC dual, `min ½αᵀQα − eᵀα` s.t. `yᵀα = 0`, `0 ≤ α ≤ C`, with second
/// order working-set selection and no shrinking.
pub fn smo_binary(gram: &Gram, y: &[f64], c: f64, tol: f64) -> BinarySolution {
    let n = gram.n;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = (100 * n).max(10_000_000);
    let kd: Vec<f64> = (0..n).map(|i| gram.at(i, i)).collect();
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // working set: i maximises -y G over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
            if !low {
                continue;
            }
            let yg = y[t] * grad[t];
            gmax2 = gmax2.max(yg);
            let diff = gmax + yg;
            if diff > 0.0 {
                let quad = kd[i] + kd[t] - 2.0 * gram.at(i, t);
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        if gmax + gmax2 < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * gram.at(i, j);
        if y[i] != y[j] {
            let quad = (kd[i] + kd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (kd[i] + kd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * gram.at(i, t) * dai + y[j] * gram.at(j, t) * daj);
        }
    }

    // rho from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    BinarySolution { alpha, rho, iterations, converged }
}

/// One-vs-rest dual coefficients over a fixed training set.
#[derive(Debug, Clone, PartialEq)]
pub struct DualModel {
    /// Ascending class ids.
    pub classes: Vec<u32>,
    /// Per class, `α_i y_i` for every training sample.
    pub coef: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl DualModel {
    pub fn fit(gram: &Gram, labels: &[u32], c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::config(format!("SVM regularisation C must be positive, got {c}")));
        }
        if labels.len() != gram.n {
            return Err(Error::data("label count does not match kernel matrix"));
        }
        if gram.k.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite kernel entry"));
        }
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::data("SVM training needs at least two classes"));
        }
        let heads: Vec<(Vec<f64>, f64)> = classes
            .par_iter()
            .map(|&cls| {
                let y: Vec<f64> = labels.iter().map(|&l| if l == cls { 1.0 } else { -1.0 }).collect();
                let sol = smo_binary(gram, &y, c, KKT_TOLERANCE);
                if !sol.converged {
                    log::warn!("SMO hit its iteration cap for class {cls}");
                }
                (sol.alpha.iter().zip(&y).map(|(a, y)| a * y).collect(), -sol.rho)
            })
            .collect();
        let (coef, bias) = heads.into_iter().unzip();
        Ok(DualModel { classes, coef, bias })
    }

    /// Per-class decision values given kernel values against the training set.
    pub fn scores(&self, krow: &[f64]) -> Vec<f64> {
        self.coef
            .iter()
            .zip(&self.bias)
            .map(|(co, b)| co.iter().zip(krow).map(|(a, k)| a * k).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, krow: &[f64]) -> Prediction {
        let scores = self.scores(krow);
        Prediction { label: self.classes[argmax(&scores)], scores }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: u32,
    pub scores: Vec<f64>,
}

/// Trained classifier with its support set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub kernel: KernelKind,
    pub c: f64,
    pub support: Vec<Vec<f64>>,
    pub dual: DualModel,
}

/// Trains one-vs-rest heads. Samples are put in a canonical order (label,
/// then feature values) first, so the model does not depend on input order.
pub fn svm_train(histograms: &[Vec<f64>], labels: &[u32], c: f64, kernel: KernelKind) -> Result<ClassifierModel> {
    if histograms.len() != labels.len() || histograms.is_empty() {
        return Err(Error::data("need one label per training sample"));
    }
    let dim = histograms[0].len();
    if histograms.iter().any(|h| h.len() != dim) {
        return Err(Error::data("training samples differ in dimension"));
    }
    if kernel == KernelKind::HistogramIntersection && histograms.iter().flatten().any(|v| *v < 0.0) {
        return Err(Error::data("histogram intersection needs non-negative entries"));
    }
    let mut order: Vec<usize> = (0..histograms.len()).collect();
    order.sort_by(|&a, &b| {
        labels[a].cmp(&labels[b]).then_with(|| {
            histograms[a]
                .iter()
                .zip(&histograms[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let support: Vec<Vec<f64>> = order.iter().map(|&i| histograms[i].clone()).collect();
    let sorted_labels: Vec<u32> = order.iter().map(|&i| labels[i]).collect();
    let gram = Gram::compute(kernel, &support);
    let dual = DualModel::fit(&gram, &sorted_labels, c)?;
    Ok(ClassifierModel { kernel, c, support, dual })
}

impl ClassifierModel {
    pub fn kernel_row(&self, x: &[f64]) -> Vec<f64> {
        self.support.iter().map(|s| self.kernel.eval(s, x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        self.dual.predict(&self.kernel_row(x))
    }
}

pub fn svm_predict(model: &ClassifierModel, x: &[f64]) -> Prediction {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hik_basics() {
        let x = [0.2, 0.5, 0.3];
        assert!((hik(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(hik(&x, &[0.0; 3]).unwrap(), 0.0);
        assert!(hik(&x, &[-0.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn separable_two_class() {
        let mut xs = vec![vec![1.0, 0.0]; 5];
        xs.extend(vec![vec![0.0, 1.0]; 5]);
        let labels: Vec<u32> = (0..10).map(|i| if i < 5 { 3 } else { 7 }).collect();
        let m = svm_train(&xs, &labels, 1.0, KernelKind::HistogramIntersection).unwrap();
        for (x, l) in xs.iter().zip(&labels) {
            assert_eq!(m.predict(x).label, *l);
        }
    }

    #[test]
    fn single_class_rejected() {
        let xs = vec![vec![1.0], vec![0.5]];
        assert!(svm_train(&xs, &[1, 1], 1.0, KernelKind::Linear).is_err());
    }

    #[test]
    fn bad_c_rejected() {
        let xs = vec![vec![1.0], vec![0.5]];
        assert!(matches!(svm_train(&xs, &[0, 1], 0.0, KernelKind::Linear), Err(Error::Config(_))));
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0]), 0);
    }

    #[test]
    fn non_finite_gram_rejected() {
        let g = Gram { n: 2, k: vec![1.0, f64::NAN, f64::NAN, 1.0] };
        assert!(matches!(DualModel::fit(&g, &[0, 1], 1.0), Err(Error::Numerical(_))));
    }
}
