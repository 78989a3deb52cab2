//! Holistic HOPC features on a synthetic six-action corpus, evaluated over
//! every subject split. Pass `--full` for the ten-subject, 252-fold run.

use hopc::io::synth::action_corpus;
use hopc::io::{run_experiment, ExperimentConfig};

fn main() -> hopc::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let (subjects, frames) = if full { (10, 36) } else { (4, 24) };
    let corpus = action_corpus(subjects, frames, 7)?;
    let cfg = ExperimentConfig {
        train_count: subjects as usize / 2,
        stride: if full { 1 } else { 3 },
        ..Default::default()
    };
    let bundle = run_experiment(&cfg, &corpus)?;
    print!("{}", bundle.report_text());
    eprint!("{}", bundle.timing_text());
    Ok(())
}
