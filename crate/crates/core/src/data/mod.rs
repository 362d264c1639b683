//! Device traces, synthetic data, the weighted-sum baseline and experiment runs.

pub mod baseline;
pub mod config;
pub mod experiment;
pub mod report;
pub mod synthetic;
pub mod trace;

pub use baseline::{baseline_matrix, baseline_weighted_sum_trust, BaselineWeights};
pub use config::RunConfig;
pub use experiment::{fit, run_experiment, run_experiment_to_dir, ExperimentConfig, ExperimentResult, Fitted};
pub use report::{read_csv, write_experiment, write_trust_csv, Manifest};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use trace::{load_trace, save_trace, TraceDataset};
