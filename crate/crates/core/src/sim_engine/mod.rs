//! Day-by-day simulation of the network: scheduled uploads, pull rounds,
//! pair traffic, node removal and the metrics derived from a run.

mod config;
mod engine;
mod entropy;
mod experiments;
mod removal;
pub mod report;

pub use config::{Removal, RemovalStrategy, SimConfig, CONFIG_SCHEMA};
pub use engine::{run, run_with, EngineMutation, MessageRecord, RunObserver, SessionLog, SimMetrics};
pub use entropy::{binned_entropy, ground_truth_moments, path_entropy_analysis, trace_score, EntropyReport, PairEntropy};
pub use experiments::{
    congestion_sweep, draw_pairs, indistinguishability_check, indistinguishability_check_with, removal_sweep,
    IndistinguishabilityReport,
};
pub use removal::apply_removal;
