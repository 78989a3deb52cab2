//! The same keypoints seen from rotated viewpoints: descriptors built in
//! the local principal frame barely change, world-frame HOPC does.

use hopc::geom::{icosahedron_axes, SequenceIndex, Vec3};
use hopc::io::synth::{subject_scene, synth_generate, SynthScenario};
use hopc::stkp::detect::score_candidate;
use hopc::stkp::{candidate_filter, describe_keypoint, detect_stkp, DescriptorBackend, DetectorParams, ScaleParams, SurfaceGrid};
use nalgebra::{Rotation3, Unit};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (a.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

fn main() -> hopc::Result<()> {
    let axes = icosahedron_axes(20)?;
    let params = DetectorParams { scales: ScaleParams::fixed(1.0, 2), top_n: Some(30), ..Default::default() };
    let backend = DescriptorBackend::Surface(SurfaceGrid::default());
    let scene = subject_scene(4, 2, 20, 1);
    let seq = synth_generate(&scene)?.sequence;
    let index = SequenceIndex::new(&seq, 1.0);
    let kps = detect_stkp(&seq, &axes, &params)?;

    for deg in [15.0f64, 30.0, 45.0, 60.0, 90.0] {
        let angle = deg.to_radians();
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::y()), angle);
        let rseq = synth_generate(&SynthScenario { rotation: Some((Vec3::y(), angle)), ..scene.clone() })?.sequence;
        let rindex = SequenceIndex::new(&rseq, 1.0);
        let (mut aligned, mut world, mut n) = (0.0, 0.0, 0);
        for k in &kps {
            let q = rot * k.p;
            let Some(c) = candidate_filter(&rindex, &q, k.t, k.r, k.tau, params.theta)? else { continue };
            let rk = score_candidate(&q, k.t, k.r, k.tau, &c, &axes);
            aligned += cosine(&describe_keypoint(&index, k, backend, &axes)?, &describe_keypoint(&rindex, &rk, backend, &axes)?);
            world += cosine(&k.h_st, &rk.h_st);
            n += 1;
        }
        println!("{deg:>4}°: {n} keypoints, mean cosine aligned {:.4}, world-frame {:.4}", aligned / n as f64, world / n as f64);
    }
    Ok(())
}
