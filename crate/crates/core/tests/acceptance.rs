//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any
//! gating criterion fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use hopc::eigen::eig3;
use hopc::geom::{icosahedron_axes, neighbor_threshold, Point3, SequenceIndex, Vec3};
use hopc::hopc::{holistic_descriptor, hopc_point, HolisticParams, DEFAULT_THETA};
use hopc::io::config::{ExperimentConfig, FoldSelection, Protocol};
use hopc::io::depth::load_msr_dir;
use hopc::io::synth::{action_corpus, subject_scene, synth_generate, ScenarioKind, SynthScenario, N_ACTIONS};
use hopc::io::run_experiment;
use hopc::learn::{bow_encode, hik, kmeans_fit, Codebook};
use hopc::stkp::detect::{candidates, score_candidate};
use hopc::stkp::scale::adaptive_temporal_scale_at;
use hopc::stkp::{candidate_filter, describe_keypoint, detect_stkp, DescriptorBackend, DetectorParams, ScaleParams, SurfaceGrid};
use nalgebra::{Matrix3, Rotation3, Unit};
use rand::Rng;

const PSI_TOL: f64 = 1e-12;
const PSI_RUNTIME: Duration = Duration::from_millis(1);
const EIGEN_TOL: f64 = 1e-9;
const EIGEN_RUNTIME: Duration = Duration::from_secs(1);
const BLOCK_NORM_TOL: f64 = 1e-9;
const STATIC_ETA_TOL: f64 = 1e-9;
const VIEW_MIN_COSINE: f64 = 0.9;
const VIEW_MIN_MATCH: f64 = 0.8;
const VIEW_RUNTIME: Duration = Duration::from_secs(120);
const VIEW_KEYPOINTS: usize = 100;
const TAU_AGREEMENT: f64 = 0.9;
const CELL_NORM_TOL: f64 = 1e-9;
const E2E_MIN_ACCURACY: f64 = 0.9;
const E2E_RUNTIME: Duration = Duration::from_secs(600);
const GRAM_PSD_TOL: f64 = -1e-10;

struct Outcome {
    pass: Option<bool>,
    gating: bool,
    detail: String,
}

fn pass_if(pass: bool, detail: String) -> Outcome {
    Outcome { pass: Some(pass), gating: true, detail }
}

fn c1_psi() -> Outcome {
    let clock = Instant::now();
    let axes = icosahedron_axes(20).unwrap();
    let psi = neighbor_threshold(&axes);
    let elapsed = clock.elapsed();
    let closed = 5f64.sqrt() / 3.0;
    let mut brute = f64::NEG_INFINITY;
    for k in 0..20 {
        for l in k + 1..20 {
            brute = brute.max(axes.axes[k].dot(&axes.axes[l]));
        }
    }
    pass_if(
        (psi - closed).abs() <= PSI_TOL && (psi - brute).abs() <= PSI_TOL && elapsed < PSI_RUNTIME,
        format!("psi {psi:.15}, closed form {closed:.15}, pair scan {brute:.15}, {elapsed:?}"),
    )
}

fn c2_eigen() -> Outcome {
    let mut rng = rng(2);
    let mats: Vec<Matrix3<f64>> = (0..1000).map(|_| random_psd(&mut rng, 10.0)).collect();
    let clock = Instant::now();
    let eigs: Vec<_> = mats.iter().map(|m| eig3(m).unwrap()).collect();
    let elapsed = clock.elapsed();
    let (mut worst_val, mut worst_res) = (0f64, 0f64);
    for (m, e) in mats.iter().zip(&eigs) {
        let oracle = jacobi_eigenvalues(m);
        for j in 0..3 {
            worst_val = worst_val.max((e.lambdas[j] - oracle[j]).abs());
            let res = (m * e.vectors[j] - e.vectors[j] * e.lambdas[j]).norm() / e.lambdas[0].max(1.0);
            worst_res = worst_res.max(res);
        }
    }
    pass_if(
        worst_val <= EIGEN_TOL && worst_res <= EIGEN_TOL && elapsed < EIGEN_RUNTIME,
        format!("max |dλ| {worst_val:.2e}, max scaled residual {worst_res:.2e}, {elapsed:?}"),
    )
}

fn two_pass_scatter(pts: &[Point3]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let mu = pts.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n;
    pts.iter().fold(Matrix3::zeros(), |a, p| {
        let d = p.coords - mu;
        a + d * d.transpose()
    }) / n
}

fn c3_block_norm() -> Outcome {
    let axes = icosahedron_axes(20).unwrap();
    let mut rng = rng(3);
    let (mut blocks, mut worst, mut supports) = (0usize, 0f64, 0usize);
    while supports < 500 {
        let sd = [rng.random_range(1.5..3.0), rng.random_range(0.8..1.3), rng.random_range(0.1..0.6)];
        let cloud = anisotropic_cloud(&mut rng, 150, sd);
        let d = hopc_point(&Point3::origin(), &cloud, &axes, DEFAULT_THETA).unwrap();
        if d.discarded {
            continue;
        }
        supports += 1;
        let oracle = jacobi_eigenvalues(&two_pass_scatter(&cloud));
        for j in 0..3 {
            if d.block_mask[j] {
                continue;
            }
            blocks += 1;
            let norm = d.block(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max((norm - oracle[j]).abs());
        }
    }
    pass_if(worst <= BLOCK_NORM_TOL && blocks >= 500, format!("{supports} supports, {blocks} blocks, max |‖h‖ − λ| {worst:.2e}"))
}

fn frozen_actor(frames: usize) -> SynthScenario {
    let mut sc = subject_scene(0, 1, frames, 4);
    sc.speed = 0.0;
    sc.noise = 0.0;
    sc
}

fn c4_static() -> Outcome {
    let axes = icosahedron_axes(20).unwrap();
    let seq = synth_generate(&frozen_actor(30)).unwrap().sequence;
    let params = DetectorParams { scales: ScaleParams::fixed(1.0, 2), ..Default::default() };
    let cands = candidates(&seq, &axes, &params).unwrap();
    let max_eta = cands.iter().map(|k| k.eta).fold(0.0, f64::max);
    let kps = detect_stkp(&seq, &axes, &DetectorParams { eta_min: 0.05, ..params }).unwrap();
    pass_if(
        !cands.is_empty() && max_eta <= STATIC_ETA_TOL && kps.is_empty(),
        format!("{} candidates, max η {max_eta:.2e}, {} keypoints", cands.len(), kps.len()),
    )
}

fn c5_view() -> Outcome {
    let clock = Instant::now();
    let axes = icosahedron_axes(20).unwrap();
    let params = DetectorParams { scales: ScaleParams::fixed(1.0, 2), top_n: Some(VIEW_KEYPOINTS), ..Default::default() };
    let backend = DescriptorBackend::Surface(SurfaceGrid::default());
    let hol = HolisticParams { scales: ScaleParams::fixed(1.0, 2), stride: 2, ..Default::default() };
    let mut ok = true;
    let mut lines = Vec::new();
    let originals: Vec<_> = (0..N_ACTIONS).map(|a| subject_scene(a, 1, 24, 3)).collect();
    let seqs: Vec<_> = originals.iter().map(|sc| synth_generate(sc).unwrap().sequence).collect();
    let kps: Vec<_> = seqs.iter().map(|s| detect_stkp(s, &axes, &params).unwrap()).collect();
    let hol_orig: Vec<Vec<f64>> = seqs.iter().map(|s| holistic_descriptor(s, &axes, &hol).unwrap().h).collect();
    for deg in [25.0f64, 50.0] {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::y()), deg.to_radians());
        let (mut before, mut after, mut world_a, mut world_b, mut cos) = (vec![], vec![], vec![], vec![], vec![]);
        let mut hol_rot = Vec::new();
        let mut lost = 0;
        for (a, sc) in originals.iter().enumerate() {
            let mut rs = sc.clone();
            rs.rotation = Some((Vec3::y(), deg.to_radians()));
            let rseq = synth_generate(&rs).unwrap().sequence;
            hol_rot.push(holistic_descriptor(&rseq, &axes, &hol).unwrap().h);
            let index = SequenceIndex::new(&seqs[a], 1.0);
            let rindex = SequenceIndex::new(&rseq, 1.0);
            for k in &kps[a] {
                let q = rot * k.p;
                let Some(c) = candidate_filter(&rindex, &q, k.t, k.r, k.tau, params.theta).unwrap() else {
                    lost += 1;
                    continue;
                };
                let rk = score_candidate(&q, k.t, k.r, k.tau, &c, &axes);
                let da = describe_keypoint(&index, k, backend, &axes).unwrap();
                let db = describe_keypoint(&rindex, &rk, backend, &axes).unwrap();
                cos.push(cosine(&da, &db));
                before.push(da);
                after.push(db);
                world_a.push(k.h_st.to_vec());
                world_b.push(rk.h_st.to_vec());
            }
        }
        let mean_cos = cos.iter().sum::<f64>() / cos.len() as f64;
        let aligned = nn_match_rate(&after, &before);
        let holistic = nn_match_rate(&hol_rot, &hol_orig);
        let world = nn_match_rate(&world_b, &world_a);
        ok &= mean_cos >= VIEW_MIN_COSINE && aligned >= VIEW_MIN_MATCH && holistic < aligned && world < aligned;
        lines.push(format!(
            "{deg}°: {} pairs ({lost} lost), mean cos {mean_cos:.4}, aligned match {aligned:.3}, holistic match {holistic:.3}, world-frame hopc match {world:.3}",
            cos.len()
        ));
    }
    let elapsed = clock.elapsed();
    ok &= elapsed < VIEW_RUNTIME;
    pass_if(ok, format!("{}; {elapsed:.1?}", lines.join("; ")))
}

fn c6_speed() -> Outcome {
    let (mut agree, mut total) = (0usize, 0usize);
    for (period, noise) in [(16.0, 0.01), (20.0, 0.0), (20.0, 0.01), (24.0, 0.02)] {
        let mut sc = SynthScenario::new(ScenarioKind::OscillatingBlob { period, amplitude: 0.4 }, 81, 5);
        sc.noise = noise;
        let full = synth_generate(&sc).unwrap().sequence;
        let dec = full.decimate(2).unwrap();
        let fi = SequenceIndex::new(&full, 1.0);
        let di = SequenceIndex::new(&dec, 1.0);
        for t in (21..=61).step_by(2) {
            for p in full.frame(t).points.iter().step_by(37) {
                total += 1;
                let a = adaptive_temporal_scale_at(&fi, p, t, 1.0, 16).unwrap();
                let b = adaptive_temporal_scale_at(&di, p, t.div_ceil(2), 1.0, 8).unwrap();
                if let (Some(a), Some(b)) = (a, b) {
                    agree += usize::from((b as f64 - a as f64 / 2.0).abs() <= 1.0);
                }
            }
        }
    }
    let rate = agree as f64 / total as f64;

    let corpus = action_corpus(4, 36, 11).unwrap();
    let accuracy = |adaptive: bool| {
        let cfg = ExperimentConfig {
            protocol: Protocol::Speed,
            train_count: 2,
            stride: 4,
            adaptive_temporal: adaptive,
            delta_max: 8,
            seed: 6,
            ..Default::default()
        };
        let rep = run_experiment(&cfg, &corpus).unwrap();
        rep.sections.iter().map(|(_, r)| r.mean).sum::<f64>() / rep.sections.len() as f64
    };
    let (constant, adaptive) = (accuracy(false), accuracy(true));
    pass_if(
        rate >= TAU_AGREEMENT && adaptive >= constant,
        format!("τ* halving agreement {agree}/{total} = {rate:.3}; speed-shifted accuracy adaptive {adaptive:.4} vs constant {constant:.4}"),
    )
}

fn c7_holistic_dim() -> Outcome {
    let axes = icosahedron_axes(20).unwrap();
    let seq = synth_generate(&subject_scene(2, 3, 18, 7)).unwrap().sequence;
    let d = holistic_descriptor(&seq, &axes, &HolisticParams { scales: ScaleParams::fixed(1.0, 2), ..Default::default() }).unwrap();
    let mut worst = 0f64;
    let mut occupied = 0;
    for s in 0..d.grid.n_cells() {
        if d.occupied[s] {
            occupied += 1;
            let n = d.cell_block(s).iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max((n - 1.0).abs());
        }
    }
    pass_if(
        d.h.len() == 5400 && occupied > 0 && worst <= CELL_NORM_TOL,
        format!("length {}, {occupied}/90 occupied cells, max |‖block‖ − 1| {worst:.2e}", d.h.len()),
    )
}

fn c8_end_to_end() -> Outcome {
    let clock = Instant::now();
    let corpus = action_corpus(10, 36, 7).unwrap();
    let cfg = ExperimentConfig { seed: 8, ..Default::default() };
    let first = run_experiment(&cfg, &corpus).unwrap();
    let once = clock.elapsed();
    let second = run_experiment(&cfg, &action_corpus(10, 36, 7).unwrap()).unwrap();
    let rep = first.section("standard").unwrap();
    let identical = first.report_text() == second.report_text() && first.folds_csv() == second.folds_csv();
    pass_if(
        rep.folds.len() == 252 && rep.mean >= E2E_MIN_ACCURACY && identical && once < E2E_RUNTIME,
        format!(
            "{} folds, mean {:.4} ± {:.4}, min {:.4}, reports identical: {identical}, {once:.1?} per run",
            rep.folds.len(),
            rep.mean,
            rep.std,
            rep.min
        ),
    )
}

fn c9_learning() -> Outcome {
    let mut rng = rng(9);
    let mut bow_ok = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..12);
        let dim = rng.random_range(1..6);
        let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let descs: Vec<Vec<f64>> = (0..rng.random_range(1..40)).map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
        let book = Codebook::new(centers.clone()).unwrap();
        let h = bow_encode(&descs, &book).unwrap();
        let mut oracle = vec![0.0; k];
        for d in &descs {
            let dist = |c: &Vec<f64>| c.iter().zip(d).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let mut best = 0;
            for (j, c) in centers.iter().enumerate() {
                if dist(c) < dist(&centers[best]) {
                    best = j;
                }
            }
            oracle[best] += 1.0 / descs.len() as f64;
        }
        bow_ok += usize::from(h.counts.iter().zip(&oracle).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    let mut worst_eig = f64::INFINITY;
    for _ in 0..50 {
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let v: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let g: Vec<Vec<f64>> = xs.iter().map(|a| xs.iter().map(|b| hik(a, b).unwrap()).collect()).collect();
        worst_eig = worst_eig.min(min_eigenvalue(&g));
    }

    let mut runs = 0;
    let mut monotone = true;
    for seed in 0..20u64 {
        let n = rng.random_range(30..120);
        let data: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let fit = kmeans_fit(&data, rng.random_range(2..10), seed, 100).unwrap();
        runs += 1;
        monotone &= fit.cost_history.windows(2).all(|w| w[1] <= w[0]);
    }
    pass_if(
        bow_ok == 100 && worst_eig >= GRAM_PSD_TOL && monotone,
        format!("bow exact {bow_ok}/100, min Gram eigenvalue {worst_eig:.2e}, k-means monotone in {runs} runs: {monotone}"),
    )
}

fn c10_dataset() -> Outcome {
    let Some(dir) = std::env::var_os("HOPC_MSR_DIR").map(PathBuf::from) else {
        return Outcome { pass: None, gating: false, detail: "HOPC_MSR_DIR not set".into() };
    };
    let run = || -> hopc::Result<String> {
        let corpus = load_msr_dir(&dir)?;
        let mut subjects: Vec<u32> = corpus.iter().filter_map(|s| s.subject_id).collect();
        subjects.sort_unstable();
        subjects.dedup();
        let cfg = ExperimentConfig { folds: FoldSelection::Half, train_count: subjects.len().div_ceil(2), ..Default::default() };
        let rep = run_experiment(&cfg, &corpus)?;
        println!("{}", rep.report_text());
        Ok(format!("{} sequences, 5/5 accuracy {:.4}", corpus.len(), rep.section("standard").unwrap().mean))
    };
    let (pass, detail) = match run() {
        Ok(s) => (true, s),
        Err(e) => (false, e.to_string()),
    };
    Outcome { pass: Some(pass), gating: false, detail }
}

fn main() {
    let only = std::env::args().nth(1);
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("C1 neighbour threshold", c1_psi),
        ("C2 eigen oracle", c2_eigen),
        ("C3 block-norm law", c3_block_norm),
        ("C4 static quality", c4_static),
        ("C5 view invariance", c5_view),
        ("C6 speed invariance", c6_speed),
        ("C7 holistic dimension", c7_holistic_dim),
        ("C8 end-to-end synthetic", c8_end_to_end),
        ("C9 learning oracles", c9_learning),
        ("C10 dataset path", c10_dataset),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if only.as_deref().is_some_and(|id| name.split(' ').next() != Some(id)) {
            continue;
        }
        let o = f();
        let status = match o.pass {
            Some(true) => "PASS",
            Some(false) if o.gating => {
                failed += 1;
                "FAIL"
            }
            Some(false) => "FAIL (non-gating)",
            None => "SKIP",
        };
        println!("{status} {name}: {}", o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
