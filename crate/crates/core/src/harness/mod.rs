//! Evaluation protocol, synthetic data, and the command-line front end.

#[cfg(feature = "cli")]
pub mod cli;
pub mod session;
pub mod synth;

pub use session::{
    run_repeats, run_sessions, session_averages, EvalReport, ImageRecord, MemoryStream,
    MetricAverages, Mode, RepeatReport, SessionPlan, SessionResult, StreamSource,
};
pub use synth::{generate_synthetic, synthesize, SynthData, SynthSpec};
