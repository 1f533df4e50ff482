//! Analysis pipelines and canned desk-scale experiments.

mod canned;
mod evolution;
pub mod objectives;
mod profile;
mod strategy;

pub use canned::{run_experiment, Check, ExperimentOutput, RunOptions, EXPERIMENTS, VCDR_PROBES};
pub use evolution::{density_evolution, DensityEvolution};
pub use profile::{average_ranks, error_vs_vc, mean, smooth, spearman, vc_bins, Smoothing, SortedErrorProfile};
pub use strategy::{
    strategy_compare, strategy_history_csv, uniform_points, Objective, Offset, Strategy, StrategyResult,
    StrategySetup, TestRecord, TEST_POINTS,
};
