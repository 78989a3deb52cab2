//! Subject-split evaluation protocol.

use std::fmt::Write as _;

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<u32>,
    pub test: Vec<u32>,
    /// Set on the split that trains on the subjects at odd positions.
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub subjects: Vec<u32>,
    pub folds: Vec<Fold>,
}

pub const HALF_SPLIT_TAG: &str = "5/5";

/// All `C(n, train_count)` train/test subject splits in lexicographic order
/// of the (sorted) subject ids.
pub fn enumerate_folds(subjects: &[u32], train_count: usize) -> Result<FoldPlan> {
    let mut subjects = subjects.to_vec();
    subjects.sort_unstable();
    subjects.dedup();
    if train_count == 0 || train_count >= subjects.len() {
        return Err(Error::config(format!("train_count must be in 1..{}, got {train_count}", subjects.len())));
    }
    let odd: Vec<u32> = subjects.iter().step_by(2).copied().collect();
    let folds = subjects
        .iter()
        .copied()
        .combinations(train_count)
        .map(|train| {
            let test = subjects.iter().copied().filter(|s| !train.contains(s)).collect();
            let tag = (train == odd).then(|| HALF_SPLIT_TAG.to_string());
            Fold { train, test, tag }
        })
        .collect();
    Ok(FoldPlan { subjects, folds })
}

/// Subject and class of one sample in an evaluation corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleMeta {
    pub subject: u32,
    pub label: u32,
}

/// Something that can be trained on some samples and predict others.
pub trait FoldPipeline: Sync {
    /// Predicted labels for `test`, in order. Indices refer to the corpus.
    fn run_fold(&self, train: &[usize], test: &[usize]) -> Result<Vec<u32>>;
}

/// Predicts one fixed label regardless of input.
pub struct ConstantPipeline(pub u32);

impl FoldPipeline for ConstantPipeline {
    fn run_fold(&self, _train: &[usize], test: &[usize]) -> Result<Vec<u32>> {
        Ok(vec![self.0; test.len()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: Fold,
    pub accuracy: f64,
    /// `confusion[true][pred]` over the report's class list.
    pub confusion: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classes: Vec<u32>,
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single fold.
    pub std: f64,
    pub max: f64,
    pub min: f64,
    /// Summed over every fold.
    pub confusion: Vec<Vec<u64>>,
}

pub fn evaluate<P: FoldPipeline + ?Sized>(pipeline: &P, samples: &[SampleMeta], plan: &FoldPlan) -> Result<EvalReport> {
    if plan.folds.is_empty() {
        return Err(Error::config("fold plan is empty"));
    }
    let mut classes: Vec<u32> = samples.iter().map(|s| s.label).collect();
    classes.sort_unstable();
    classes.dedup();
    let folds: Vec<FoldResult> = plan
        .folds
        .par_iter()
        .map(|fold| {
            let train: Vec<usize> = (0..samples.len()).filter(|&i| fold.train.contains(&samples[i].subject)).collect();
            let test: Vec<usize> = (0..samples.len()).filter(|&i| fold.test.contains(&samples[i].subject)).collect();
            if train.is_empty() || test.is_empty() {
                return Err(Error::data(format!("fold with train {:?} has no train or test samples", fold.train)));
            }
            let pred = pipeline.run_fold(&train, &test)?;
            if pred.len() != test.len() {
                return Err(Error::data("pipeline returned the wrong number of predictions"));
            }
            let mut confusion = vec![vec![0u64; classes.len()]; classes.len()];
            let mut correct = 0usize;
            for (&i, &p) in test.iter().zip(&pred) {
                let truth = samples[i].label;
                correct += usize::from(truth == p);
                if let (Ok(a), Ok(b)) = (classes.binary_search(&truth), classes.binary_search(&p)) {
                    confusion[a][b] += 1;
                }
            }
            Ok(FoldResult { fold: fold.clone(), accuracy: correct as f64 / test.len() as f64, confusion })
        })
        .collect::<Result<_>>()?;
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let (mean, std) = mean_std(&accs);
    let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut confusion = vec![vec![0u64; classes.len()]; classes.len()];
    for f in &folds {
        for (row, frow) in confusion.iter_mut().zip(&f.confusion) {
            row.iter_mut().zip(frow).for_each(|(a, b)| *a += b);
        }
    }
    Ok(EvalReport { classes, folds, mean, std, max, min, confusion })
}

/// Mean and sample standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn join(ids: &[u32]) -> String {
    ids.iter().map(u32::to_string).join(" ")
}

impl EvalReport {
    pub fn tagged(&self, tag: &str) -> Option<&FoldResult> {
        self.folds.iter().find(|f| f.fold.tag.as_deref() == Some(tag))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,train_subjects,test_subjects,accuracy,tag\n");
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{}",
                i,
                join(&f.fold.train),
                join(&f.fold.test),
                f.accuracy,
                f.fold.tag.as_deref().unwrap_or("")
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "folds: {}", self.folds.len());
        let _ = writeln!(s, "mean: {:.4} +- {:.4}", 100.0 * self.mean, 100.0 * self.std);
        let _ = writeln!(s, "max: {:.4}", 100.0 * self.max);
        let _ = writeln!(s, "min: {:.4}", 100.0 * self.min);
        match self.tagged(HALF_SPLIT_TAG) {
            Some(f) => {
                let _ = writeln!(s, "{}: {:.4}", HALF_SPLIT_TAG, 100.0 * f.accuracy);
            }
            None => {
                let _ = writeln!(s, "{}: n/a", HALF_SPLIT_TAG);
            }
        }
        let _ = writeln!(s, "confusion (rows true, cols predicted; classes {}):", join(&self.classes));
        for row in &self.confusion {
            let _ = writeln!(s, "  {}", row.iter().map(|c| format!("{c:6}")).join(""));
        }
        s
    }
}
