//! Data generators, metrics and replicate orchestration for simulation studies.

mod experiment;
mod generate;
mod metrics;
mod recovery;

pub use experiment::{
    experiment_designs, replicate_inputs, run_experiment, run_point, Amplitude, ExperimentConfig, ExperimentOutput,
    Method, MetricsSummary, NodeInput, PointResult, ReplicateInputs, Sweep, Transport, METRICS_CSV_HEADER,
};
pub use generate::{
    gen_design, gen_orthogonal_example, gen_response, gen_signal, orthogonal_mu, OrthogonalExample, SigmaSpec,
};
pub use metrics::{compute_metrics, mean_sd, Metrics};
pub use recovery::{recovery_csv, run_section4_recovery, RecoveryConfig, RecoveryRow, RECOVERY_CSV_HEADER};

use serde::{Deserialize, Serialize};

/// Contents of an experiment configuration file, told apart by `"experiment"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ConfigFile {
    Fdr(ExperimentConfig),
    Recovery(RecoveryConfig),
}
