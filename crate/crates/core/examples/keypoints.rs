//! Spatio-temporal keypoints of a waving actor, written as a native
//! keypoint dump and as CSV.

use hopc::geom::{icosahedron_axes, SequenceIndex};
use hopc::io::format::{save_keypoints, KeypointDump};
use hopc::io::synth::{subject_scene, synth_generate};
use hopc::stkp::{describe_keypoint, detect_stkp, DescriptorBackend, DetectorParams, ScaleParams, SurfaceGrid};

fn main() -> hopc::Result<()> {
    let out_dir = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let scene = synth_generate(&subject_scene(0, 1, 24, 3))?;
    let seq = &scene.sequence;
    let axes = icosahedron_axes(20)?;
    let params = DetectorParams { scales: ScaleParams::fixed(1.0, 2), top_n: Some(40), ..Default::default() };
    let kps = detect_stkp(seq, &axes, &params)?;

    let moving: usize = scene.motion.iter().flatten().filter(|m| **m).count();
    println!("{} frames, {} points, {moving} on moving parts", seq.n_frames(), seq.total_points());
    for k in kps.iter().take(10) {
        println!("t {:>2}  p ({:>6.3}, {:>6.3}, {:>6.3})  eta {:.4}", k.t, k.p.x, k.p.y, k.p.z, k.eta);
    }

    let index = SequenceIndex::new(seq, 1.0);
    let backend = DescriptorBackend::Surface(SurfaceGrid::default());
    let desc = kps.iter().map(|k| describe_keypoint(&index, k, backend, &axes)).collect::<hopc::Result<Vec<_>>>()?;
    let dump = KeypointDump::new(&kps, &desc, backend.dim())?;
    let bin = out_dir.join("wave.hpk");
    save_keypoints(&dump, &bin)?;
    std::fs::write(out_dir.join("wave.csv"), dump.to_csv())?;
    println!("{} keypoints with {}-dim descriptors written to {}", kps.len(), backend.dim(), bin.display());
    Ok(())
}
