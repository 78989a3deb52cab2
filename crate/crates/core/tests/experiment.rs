use hopc::io::config::{FoldSelection, PipelineKind};
use hopc::io::synth::action_corpus;
use hopc::io::{run_experiment, ExperimentConfig};
use hopc::Error;

fn small_holistic() -> ExperimentConfig {
    ExperimentConfig { train_count: 2, stride: 6, n_t: 2, ..Default::default() }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let corpus = action_corpus(4, 12, 21).unwrap();
    let cfg = small_holistic();
    let a = run_experiment(&cfg, &corpus).unwrap();
    let b = run_experiment(&cfg, &action_corpus(4, 12, 21).unwrap()).unwrap();
    assert_eq!(a.report_text(), b.report_text());
    assert_eq!(a.folds_csv(), b.folds_csv());
    assert!(a.report_text().starts_with("# config\n"));
    assert!(a.report_text().contains(&cfg.echo()));
    assert_eq!(a.section("standard").unwrap().folds.len(), 6);
}

#[test]
fn bag_of_words_run_is_seeded() {
    let corpus = action_corpus(4, 10, 22).unwrap();
    let cfg = ExperimentConfig {
        pipeline: PipelineKind::StkpBow,
        train_count: 2,
        folds: FoldSelection::Half,
        k: 12,
        stride: 3,
        seed: 5,
        ..Default::default()
    };
    let a = run_experiment(&cfg, &corpus).unwrap();
    let b = run_experiment(&cfg, &corpus).unwrap();
    assert_eq!(a.report_text(), b.report_text());
    let rep = a.section("standard").unwrap();
    assert_eq!(rep.folds.len(), 1);
    assert_eq!(rep.folds[0].fold.tag.as_deref(), Some("5/5"));
}

#[test]
fn config_echo_round_trips() {
    let mut cfg = small_holistic();
    cfg.set("kernel", "linear").unwrap();
    cfg.set("radii", "0.5, 1, 1.5").unwrap();
    let back = ExperimentConfig::parse(&cfg.echo()).unwrap();
    assert_eq!(back.echo(), cfg.echo());
}

#[test]
fn invalid_config_fails_before_compute() {
    let corpus = action_corpus(2, 4, 1).unwrap();
    let cfg = ExperimentConfig { m: 12, ..Default::default() };
    let err = run_experiment(&cfg, &corpus).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert_eq!(err.exit_code(), 2);
    assert!(matches!(ExperimentConfig::parse("r = 1\nradius = 2\n"), Err(Error::Config(_))));
}
