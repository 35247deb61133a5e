//! Experiment plumbing: audio files, synthetic inputs, measurement and
//! degradation, the setup grid and batch reports.

pub mod experiment;
pub mod grid;
pub mod protocol;
pub mod synth;
pub mod wav;

pub use experiment::{
    run_experiment, Condition, ExperimentConfig, ExperimentReport, InputSpec, Overrides, Protocol,
    ReportRow, StftSettings,
};
pub use grid::{parse_code, Scaling, Setup, SetupGrid};
pub use protocol::{degrade, derive_seed, measure, signal_hash, Degraded};
pub use synth::{synth_signal, SynthKind, SynthSpec};
pub use wav::{load_wav, write_wav};
