//! Keypoint descriptors quantized against a k-means codebook and classified
//! with a histogram-intersection SVM, trained on two subjects and tested on
//! a third.

use hopc::geom::{icosahedron_axes, SequenceIndex};
use hopc::io::synth::{subject_scene, synth_generate, N_ACTIONS};
use hopc::learn::{bow_encode, kmeans_fit, svm_train, KernelKind};
use hopc::stkp::{describe_keypoint, detect_stkp, DescriptorBackend, DetectorParams, ScaleParams, SurfaceGrid};

fn bag(action: u32, subject: u32) -> hopc::Result<Vec<Vec<f64>>> {
    let axes = icosahedron_axes(20)?;
    let seq = synth_generate(&subject_scene(action, subject, 16, 11))?.sequence;
    let params = DetectorParams { scales: ScaleParams::fixed(1.0, 2), top_n: Some(60), stride: 2, ..Default::default() };
    let kps = detect_stkp(&seq, &axes, &params)?;
    let index = SequenceIndex::new(&seq, 1.0);
    let backend = DescriptorBackend::Surface(SurfaceGrid::default());
    kps.iter().map(|k| describe_keypoint(&index, k, backend, &axes)).collect()
}

fn main() -> hopc::Result<()> {
    let mut train = Vec::new();
    for subject in [1, 2] {
        for action in 0..N_ACTIONS {
            train.push((action, bag(action, subject)?));
        }
    }
    let pool: Vec<Vec<f64>> = train.iter().flat_map(|(_, b)| b.iter().cloned()).collect();
    let fit = kmeans_fit(&pool, 48, 3, 50)?;
    println!("{} training descriptors, k-means cost {:.3} -> {:.3}", pool.len(), fit.cost_history[0], fit.cost_history.last().unwrap());

    let xs = train.iter().map(|(_, b)| bow_encode(b, &fit.codebook).map(|h| h.counts)).collect::<hopc::Result<Vec<_>>>()?;
    let ys: Vec<u32> = train.iter().map(|(a, _)| *a).collect();
    let model = svm_train(&xs, &ys, 1.0, KernelKind::HistogramIntersection)?;

    let mut correct = 0;
    for action in 0..N_ACTIONS {
        let h = bow_encode(&bag(action, 3)?, &fit.codebook)?;
        let pred = model.predict(&h.counts);
        correct += usize::from(pred.label == action);
        println!("action {action}: predicted {}", pred.label);
    }
    println!("held-out subject accuracy {correct}/{N_ACTIONS}");
    Ok(())
}
