use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use hopc::geom::{icosahedron_axes, Vec3};
use hopc::io::config::{ExperimentConfig, CONFIG_KEYS};
use hopc::io::depth::load_msr_dir;
use hopc::io::experiment::{extract_holistic, extract_keypoints, run_experiment};
use hopc::io::format::*;
use hopc::io::synth::{action_corpus, synth_generate, ScenarioKind, SynthScenario};
use hopc::learn::{bow_encode, kmeans_codebook, svm_train, ClassifierModel, Codebook};
use hopc::{Error, Result};

fn config_args(cmd: Command) -> Command {
    let mut cmd = cmd.arg(Arg::new("config").long("config").value_name("FILE").value_parser(value_parser!(PathBuf)).help("key = value config file"));
    for k in CONFIG_KEYS {
        cmd = cmd.arg(Arg::new(*k).long(*k).value_name("VALUE").help_heading("Config overrides"));
    }
    cmd
}

fn inputs(help: &'static str) -> Arg {
    Arg::new("inputs").num_args(1..).required(true).value_parser(value_parser!(PathBuf)).help(help)
}

fn output(help: &'static str) -> Arg {
    Arg::new("output").long("output").short('o').required(true).value_parser(value_parser!(PathBuf)).help(help)
}

fn cli() -> Command {
    Command::new("hopc")
        .about("HOPC descriptors, spatio-temporal keypoints and action classification for pointcloud sequences")
        .subcommand_required(true)
        .subcommand(
            Command::new("ingest")
                .about("Convert a directory of 16-bit PGM depth frames plus intrinsics.txt to a native sequence")
                .arg(Arg::new("input").required(true).value_parser(value_parser!(PathBuf)))
                .arg(output("native sequence file"))
                .arg(Arg::new("subject").long("subject").value_parser(value_parser!(u32)))
                .arg(Arg::new("label").long("label").value_parser(value_parser!(u32))),
        )
        .subcommand(
            Command::new("synth")
                .about("Generate a synthetic scene")
                .arg(
                    Arg::new("scenario")
                        .long("scenario")
                        .required(true)
                        .value_parser(["two-limb", "oscillating-blob", "rod-sweep", "static-plane"]),
                )
                .arg(Arg::new("seed").long("seed").required(true).value_parser(value_parser!(u64)))
                .arg(Arg::new("frames").long("frames").default_value("36").value_parser(value_parser!(usize)))
                .arg(Arg::new("action").long("action").default_value("0").value_parser(value_parser!(u32)))
                .arg(Arg::new("period").long("period").default_value("20").value_parser(value_parser!(f64)))
                .arg(Arg::new("amplitude").long("amplitude").default_value("0.4").value_parser(value_parser!(f64)))
                .arg(Arg::new("half-length").long("half-length").default_value("1.0").value_parser(value_parser!(f64)))
                .arg(Arg::new("clutter").long("clutter").default_value("100").value_parser(value_parser!(usize)))
                .arg(Arg::new("speed").long("speed").default_value("1").value_parser(value_parser!(f64)))
                .arg(Arg::new("scale").long("scale").default_value("1").value_parser(value_parser!(f64)))
                .arg(Arg::new("noise").long("noise").default_value("0").value_parser(value_parser!(f64)))
                .arg(Arg::new("rotate-deg").long("rotate-deg").value_parser(value_parser!(f64)))
                .arg(Arg::new("rotate-axis").long("rotate-axis").default_value("0,1,0").help("x,y,z"))
                .arg(Arg::new("subject").long("subject").value_parser(value_parser!(u32)))
                .arg(output("native sequence file"))
                .arg(Arg::new("mask").long("mask").value_parser(value_parser!(PathBuf)).help("ground-truth motion mask CSV")),
        )
        .subcommand(config_args(
            Command::new("holistic")
                .about("Compute holistic descriptors of sequences")
                .arg(inputs("native sequence files"))
                .arg(output("descriptor set file")),
        ))
        .subcommand(config_args(
            Command::new("detect")
                .about("Detect and describe spatio-temporal keypoints of one sequence")
                .arg(Arg::new("input").required(true).value_parser(value_parser!(PathBuf)))
                .arg(output("keypoint dump"))
                .arg(Arg::new("csv").long("csv").value_parser(value_parser!(PathBuf)).help("also write a CSV table")),
        ))
        .subcommand(config_args(
            Command::new("codebook")
                .about("Cluster keypoint descriptors into a codebook (needs --seed)")
                .arg(inputs("keypoint dumps"))
                .arg(output("codebook file")),
        ))
        .subcommand(config_args(
            Command::new("train")
                .about("Train a classifier on a descriptor set, or on keypoint dumps with --codebook")
                .arg(inputs("descriptor set, or keypoint dumps"))
                .arg(Arg::new("codebook").long("codebook").value_parser(value_parser!(PathBuf)))
                .arg(output("model file")),
        ))
        .subcommand(
            Command::new("eval")
                .about("Evaluate a classifier on a labelled descriptor set or keypoint dumps")
                .arg(inputs("descriptor set, or keypoint dumps"))
                .arg(Arg::new("model").long("model").required(true).value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("codebook").long("codebook").value_parser(value_parser!(PathBuf))),
        )
        .subcommand(config_args(
            Command::new("report")
                .about("Run a full experiment and write report.txt, folds.csv and timing.txt (needs --seed)")
                .arg(
                    Arg::new("inputs")
                        .num_args(0..)
                        .value_parser(value_parser!(PathBuf))
                        .help("tagged native sequences or MSRAction3D-style directories"),
                )
                .arg(Arg::new("synthetic-subjects").long("synthetic-subjects").value_parser(value_parser!(u32)))
                .arg(Arg::new("synthetic-frames").long("synthetic-frames").default_value("36").value_parser(value_parser!(usize)))
                .arg(Arg::new("output-dir").long("output-dir").required(true).value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("print").long("print").action(ArgAction::SetTrue)),
        ))
}

fn build_config(m: &ArgMatches) -> Result<ExperimentConfig> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(p) => ExperimentConfig::parse(&fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
        None => ExperimentConfig::default(),
    };
    for k in CONFIG_KEYS {
        if let Some(v) = m.get_one::<String>(k) {
            cfg.set(k, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_seed(m: &ArgMatches) -> Result<()> {
    if m.value_source("seed") != Some(ValueSource::CommandLine) {
        return Err(Error::Config("--seed is required for this step".into()));
    }
    Ok(())
}

fn paths<'a>(m: &'a ArgMatches, id: &str) -> Vec<&'a PathBuf> {
    m.get_many::<PathBuf>(id).map(|v| v.collect()).unwrap_or_default()
}

fn parse_vec3(s: &str) -> Result<Vec3> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad vector {s:?}")))).collect::<Result<_>>()?;
    match v[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(Error::Config(format!("expected x,y,z, got {s:?}"))),
    }
}

/// Labelled rows for training or evaluation: a descriptor set, or BoW
/// histograms of keypoint dumps.
fn labelled_rows(files: &[&PathBuf], codebook: Option<&Codebook>) -> Result<(Vec<Vec<f64>>, Vec<u32>)> {
    let need = |l: Option<u32>, p: &Path| l.ok_or_else(|| Error::Data(format!("{}: rows need action labels", p.display())));
    match codebook {
        None => {
            let [file] = files else {
                return Err(Error::Config("pass exactly one descriptor set, or keypoint dumps with --codebook".into()));
            };
            let set = load_descriptors(file)?;
            let labels = set.rows.iter().map(|r| need(r.label, file)).collect::<Result<_>>()?;
            Ok((set.rows.into_iter().map(|r| r.values).collect(), labels))
        }
        Some(cb) => {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for f in files {
                let dump = load_keypoints(f)?;
                let desc: Vec<Vec<f64>> = (0..dump.records.len()).map(|i| dump.descriptor(i).to_vec()).collect();
                rows.push(bow_encode(&desc, cb)?.counts);
                labels.push(need(dump.label, f)?);
            }
            Ok((rows, labels))
        }
    }
}

fn run(m: &ArgMatches) -> Result<()> {
    match m.subcommand().expect("subcommand required") {
        ("ingest", m) => {
            let dir = m.get_one::<PathBuf>("input").unwrap();
            let seq = load_sequence(dir)?.with_tags(m.get_one("subject").copied(), m.get_one("label").copied());
            save_sequence(&seq, m.get_one::<PathBuf>("output").unwrap())?;
            println!("{} frames, {} points", seq.n_frames(), seq.total_points());
        }
        ("synth", m) => {
            let f = |id: &str| *m.get_one::<f64>(id).unwrap();
            let kind = match m.get_one::<String>("scenario").unwrap().as_str() {
                "two-limb" => ScenarioKind::TwoLimb { action: *m.get_one("action").unwrap(), period: f("period") },
                "oscillating-blob" => ScenarioKind::OscillatingBlob { period: f("period"), amplitude: f("amplitude") },
                "rod-sweep" => {
                    ScenarioKind::RodSweep { half_length: f("half-length"), period: f("period"), clutter: *m.get_one("clutter").unwrap() }
                }
                _ => ScenarioKind::StaticPlane,
            };
            let mut sc = SynthScenario::new(kind, *m.get_one("frames").unwrap(), *m.get_one("seed").unwrap());
            sc.speed = f("speed");
            sc.scale = f("scale");
            sc.noise = f("noise");
            if let Some(deg) = m.get_one::<f64>("rotate-deg") {
                sc.rotation = Some((parse_vec3(m.get_one::<String>("rotate-axis").unwrap())?, deg.to_radians()));
            }
            let out = synth_generate(&sc)?;
            let label = match sc.kind {
                ScenarioKind::TwoLimb { action, .. } => Some(action),
                _ => None,
            };
            let seq = out.sequence.with_tags(m.get_one("subject").copied(), label);
            save_sequence(&seq, m.get_one::<PathBuf>("output").unwrap())?;
            if let Some(p) = m.get_one::<PathBuf>("mask") {
                let mut s = String::from("frame,point,moving\n");
                for (t, frame) in out.motion.iter().enumerate() {
                    for (i, mv) in frame.iter().enumerate() {
                        s.push_str(&format!("{},{},{}\n", t + 1, i, u8::from(*mv)));
                    }
                }
                fs::write(p, s)?;
            }
        }
        ("holistic", m) => {
            let cfg = build_config(m)?;
            let seqs = paths(m, "inputs").into_iter().map(|p| load_sequence(p)).collect::<Result<Vec<_>>>()?;
            let desc = extract_holistic(&seqs, &cfg)?;
            let axes = icosahedron_axes(cfg.m)?;
            let rows = seqs
                .iter()
                .zip(desc)
                .map(|(s, d)| DescriptorRow { subject: s.subject_id, label: s.action_label, values: d.h })
                .collect::<Vec<_>>();
            let dim = rows[0].values.len();
            save_descriptors(
                &DescriptorSet { dim, m: cfg.m as u32, psi: axes.psi, echo: cfg.echo(), rows },
                m.get_one::<PathBuf>("output").unwrap(),
            )?;
        }
        ("detect", m) => {
            let cfg = build_config(m)?;
            let seq = load_sequence(m.get_one::<PathBuf>("input").unwrap())?;
            let (kps, desc) = extract_keypoints(&seq, &cfg)?;
            let mut dump = KeypointDump::new(&kps, &desc, cfg.backend().dim())?;
            dump.subject = seq.subject_id;
            dump.label = seq.action_label;
            save_keypoints(&dump, m.get_one::<PathBuf>("output").unwrap())?;
            if let Some(p) = m.get_one::<PathBuf>("csv") {
                fs::write(p, dump.to_csv())?;
            }
            println!("{} keypoints", kps.len());
        }
        ("codebook", m) => {
            require_seed(m)?;
            let cfg = build_config(m)?;
            let mut pool = Vec::new();
            for f in paths(m, "inputs") {
                let dump = load_keypoints(f)?;
                pool.extend((0..dump.records.len()).map(|i| dump.descriptor(i).to_vec()));
            }
            let cb = kmeans_codebook(&pool, cfg.k, cfg.seed, cfg.kmeans_max_iter)?;
            save_codebook(&cb, m.get_one::<PathBuf>("output").unwrap())?;
        }
        ("train", m) => {
            let cfg = build_config(m)?;
            let cb = m.get_one::<PathBuf>("codebook").map(|p| load_codebook(p)).transpose()?;
            let (x, y) = labelled_rows(&paths(m, "inputs"), cb.as_ref())?;
            let model = svm_train(&x, &y, cfg.c, cfg.kernel)?;
            save_model(&model, m.get_one::<PathBuf>("output").unwrap())?;
        }
        ("eval", m) => {
            let model: ClassifierModel = load_model(m.get_one::<PathBuf>("model").unwrap())?;
            let cb = m.get_one::<PathBuf>("codebook").map(|p| load_codebook(p)).transpose()?;
            let (x, y) = labelled_rows(&paths(m, "inputs"), cb.as_ref())?;
            let correct = x.iter().zip(&y).filter(|(x, y)| model.predict(x).label == **y).count();
            println!("accuracy: {:.4} ({correct}/{})", correct as f64 / y.len() as f64, y.len());
        }
        ("report", m) => {
            require_seed(m)?;
            let cfg = build_config(m)?;
            let mut data = Vec::new();
            if let Some(&n) = m.get_one::<u32>("synthetic-subjects") {
                data.extend(action_corpus(n, *m.get_one("synthetic-frames").unwrap(), cfg.seed)?);
            }
            for p in paths(m, "inputs") {
                if p.is_dir() {
                    data.extend(load_msr_dir(p)?);
                } else {
                    data.push(load_sequence(p)?);
                }
            }
            let bundle = run_experiment(&cfg, &data)?;
            bundle.write_to(m.get_one::<PathBuf>("output-dir").unwrap())?;
            if m.get_flag("print") {
                print!("{}", bundle.report_text());
            }
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(&cli().get_matches()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
