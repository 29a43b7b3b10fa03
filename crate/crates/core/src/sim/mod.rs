//! Experiment drivers: the one-shot prior-accuracy sweep and the
//! single-target tracking study.

pub mod config;
pub mod metrics;
pub mod output;
pub mod sweep;
pub mod track;

pub use config::{GridScale, GridSpec, Segment, SweepConfig, TrackConfig};
pub use sweep::{generate_mc_instance, run_sweep, McInstance, SweepRow, SweepTable};
pub use track::{generate_trajectory, run_track, MethodOutcome, MethodRun, RunRecord, TrackResult, TrackSummary, TruthState};
