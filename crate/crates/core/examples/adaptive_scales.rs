//! Adaptive support sizes. The spatial radius tracks the length of a rod
//! in clutter; the temporal half-window of an oscillating blob halves when
//! every other frame is dropped.

use hopc::geom::{Point3, SequenceIndex};
use hopc::io::synth::{synth_generate, ScenarioKind, SynthScenario};
use hopc::stkp::scale::{adaptive_spatial_scale, adaptive_temporal_scale_at, spatial_ratio_profile};

fn main() -> hopc::Result<()> {
    let radii = [0.5, 0.75, 1.0, 1.25, 1.5, 2.0];
    for half_length in [0.75, 1.0, 1.5] {
        let sc = SynthScenario { noise: 0.0, ..SynthScenario::new(ScenarioKind::RodSweep { half_length, period: 24.0, clutter: 100 }, 2, 3) };
        let seq = synth_generate(&sc)?.sequence;
        let cloud = &seq.frame(1).points;
        let profile: Vec<String> = spatial_ratio_profile(cloud, &Point3::origin(), &radii)
            .into_iter()
            .map(|v| v.map_or("-".into(), |v| format!("{v:.1}")))
            .collect();
        let r = adaptive_spatial_scale(cloud, &Point3::origin(), &radii);
        println!("rod half-length {half_length}: l1/l2 over radii [{}] -> r = {r:?}", profile.join(", "));
    }

    for period in [16.0, 20.0, 24.0] {
        let sc = SynthScenario { noise: 0.01, ..SynthScenario::new(ScenarioKind::OscillatingBlob { period, amplitude: 0.4 }, 81, 5) };
        let full = synth_generate(&sc)?.sequence;
        let half = full.decimate(2)?;
        let (fi, hi) = (SequenceIndex::new(&full, 1.0), SequenceIndex::new(&half, 1.0));
        let t = 41;
        let p = full.frame(t).points[0];
        let a = adaptive_temporal_scale_at(&fi, &p, t, 1.0, 16)?;
        let b = adaptive_temporal_scale_at(&hi, &p, t.div_ceil(2), 1.0, 8)?;
        println!("blob period {period}: tau* = {a:?} at full rate, {b:?} after 2x decimation");
    }
    Ok(())
}
