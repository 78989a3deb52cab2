//! Data ingestion, persistence, synthetic scenes and experiment running.

pub mod config;
pub mod depth;
pub mod experiment;
pub mod format;
pub mod synth;

pub use config::ExperimentConfig;
pub use depth::{depth_to_cloud, CameraIntrinsics};
pub use experiment::{run_experiment, ReportBundle};
pub use format::{load_sequence, save_sequence, FormatError};
pub use synth::{synth_generate, ScenarioKind, SynthOutput, SynthScenario};
