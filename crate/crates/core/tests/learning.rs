mod common;

use common::*;
use hopc::learn::eval::mean_std;
use hopc::learn::svm::{Gram, KernelKind};
use hopc::learn::{enumerate_folds, evaluate, kmeans_fit, svm_train, ConstantPipeline, SampleMeta};
use proptest::prelude::*;
use rand::Rng;

fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = rng(seed);
    let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..10 {
            xs.push(vec![c[0] + rng.random_range(-0.5..0.5), c[1] + rng.random_range(-0.5..0.5)]);
            ys.push(b);
        }
    }
    (xs, ys)
}

#[test]
fn kmeans_recovers_separated_blobs() {
    for seed in 0..10 {
        let (xs, ys) = blobs(seed);
        let fit = kmeans_fit(&xs, 4, seed, 100).unwrap();
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                assert_eq!(ys[i] == ys[j], fit.assignment[i] == fit.assignment[j]);
            }
        }
        let centers = &fit.codebook.centers;
        let oracle: f64 = xs
            .iter()
            .map(|x| centers.iter().map(|c| (c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2)).fold(f64::INFINITY, f64::min))
            .sum();
        let last = *fit.cost_history.last().unwrap();
        assert!((last - oracle).abs() <= 1e-9 * oracle.max(1.0), "cost {last} vs oracle {oracle}");
    }
}

#[test]
fn kmeans_with_k_distinct_points_has_zero_cost() {
    let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
    let fit = kmeans_fit(&xs, 6, 3, 50).unwrap();
    assert_eq!(*fit.cost_history.last().unwrap(), 0.0);
    let mut got = fit.codebook.centers.clone();
    got.sort_by(|a, b| a[0].total_cmp(&b[0]));
    assert_eq!(got, xs);
}

fn histogram(rng: &mut impl Rng, bins: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..bins).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

#[test]
fn hik_gram_is_psd_on_larger_sets() {
    let mut rng = rng(4);
    for _ in 0..10 {
        let xs: Vec<Vec<f64>> = (0..30).map(|_| histogram(&mut rng, 12)).collect();
        let g = Gram::compute(KernelKind::HistogramIntersection, &xs);
        let m: Vec<Vec<f64>> = (0..g.n).map(|i| (0..g.n).map(|j| g.at(i, j)).collect()).collect();
        assert!(min_eigenvalue(&m) >= -1e-10);
    }
}

fn three_class_data(seed: u64) -> (Vec<Vec<f64>>, Vec<u32>) {
    let mut rng = rng(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in 0..3u32 {
        for _ in 0..8 {
            let mut h = histogram(&mut rng, 6);
            h[c as usize * 2] += 1.0;
            let s: f64 = h.iter().sum();
            xs.push(h.into_iter().map(|x| x / s).collect());
            ys.push(c);
        }
    }
    (xs, ys)
}

#[test]
fn svm_scores_independent_of_sample_order() {
    let (xs, ys) = three_class_data(5);
    let a = svm_train(&xs, &ys, 1.0, KernelKind::HistogramIntersection).unwrap();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.reverse();
    order.rotate_left(7);
    let xs2: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
    let ys2: Vec<u32> = order.iter().map(|&i| ys[i]).collect();
    let b = svm_train(&xs2, &ys2, 1.0, KernelKind::HistogramIntersection).unwrap();
    let mut rng = rng(6);
    for _ in 0..20 {
        let q = histogram(&mut rng, 6);
        let (pa, pb) = (a.predict(&q), b.predict(&q));
        assert_eq!(pa.label, pb.label);
        for (x, y) in pa.scores.iter().zip(&pb.scores) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
}

#[test]
fn tiny_c_shrinks_scores_but_keeps_majority_baseline() {
    let (xs, ys) = three_class_data(8);
    let keep: Vec<usize> = (0..xs.len()).filter(|&i| ys[i] < 2).collect();
    let xs: Vec<Vec<f64>> = keep.iter().map(|&i| xs[i].clone()).collect();
    let ys: Vec<u32> = keep.iter().map(|&i| ys[i]).collect();
    let big = svm_train(&xs, &ys, 1.0, KernelKind::HistogramIntersection).unwrap();
    let small = svm_train(&xs, &ys, 1e-6, KernelKind::HistogramIntersection).unwrap();
    let spread = |m: &hopc::learn::ClassifierModel| {
        let s: Vec<f64> = xs.iter().map(|x| m.predict(x).scores[0]).collect();
        s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - s.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    assert!(spread(&small) < 1e-4 * spread(&big));
    let correct = xs.iter().zip(&ys).filter(|(x, y)| small.predict(x).label == **y).count();
    assert!(correct as f64 / xs.len() as f64 >= 0.5);
}

#[test]
fn separable_two_class_fits_training_set() {
    let xs: Vec<Vec<f64>> = (0..10).map(|i| if i < 5 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
    let ys: Vec<u32> = (0..10).map(|i| u32::from(i >= 5)).collect();
    let m = svm_train(&xs, &ys, 1.0, KernelKind::HistogramIntersection).unwrap();
    assert!(xs.iter().zip(&ys).all(|(x, y)| m.predict(x).label == *y));
}

proptest! {
    #[test]
    fn argmax_invariant_to_score_scaling(scores in prop::collection::vec(-5.0..5.0f64, 2..8), s in 1e-3..1e3f64) {
        let scaled: Vec<f64> = scores.iter().map(|x| x * s).collect();
        prop_assert_eq!(hopc::learn::svm::argmax(&scores), hopc::learn::svm::argmax(&scaled));
    }

    #[test]
    fn prediction_invariant_to_positive_kernel_scaling(seed in 0u64..50, s in 0.1..10.0f64) {
        let (xs, ys) = three_class_data(seed);
        let m = svm_train(&xs, &ys, 1.0, KernelKind::HistogramIntersection).unwrap();
        let mut r = rng(seed + 100);
        let q = histogram(&mut r, 6);
        let scores = m.predict(&q).scores;
        let scaled: Vec<f64> = scores.iter().map(|x| x * s).collect();
        prop_assert_eq!(m.dual.classes[hopc::learn::svm::argmax(&scaled)], m.predict(&q).label);
    }
}

#[test]
fn constant_pipeline_scores_class_frequency() {
    let samples: Vec<SampleMeta> =
        (1..=4).flat_map(|s| (0..3).map(move |l| SampleMeta { subject: s, label: l })).collect();
    let plan = enumerate_folds(&[1, 2, 3, 4], 2).unwrap();
    assert_eq!(plan.folds.len(), 6);
    let rep = evaluate(&ConstantPipeline(1), &samples, &plan).unwrap();
    for f in &rep.folds {
        assert!((f.accuracy - 1.0 / 3.0).abs() <= 1e-15);
    }
    assert_eq!(rep.std, 0.0);
}

#[test]
fn fold_counts_and_aggregation() {
    let plan = enumerate_folds(&(1..=10).collect::<Vec<_>>(), 5).unwrap();
    assert_eq!(plan.folds.len(), 252);
    assert_eq!(plan.folds.iter().filter(|f| f.tag.is_some()).count(), 1);
    let (m, s) = mean_std(&[1.0, 0.5]);
    assert!((m - 0.75).abs() < 1e-15);
    assert!((s - 0.3536).abs() < 5e-5);
}
