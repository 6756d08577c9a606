//! Experiment harness: configuration, data generation, estimation,
//! policy evaluation, replication orchestration, and CSV emission.

mod config;
mod emit;
mod evaluate;
mod mle;
mod run;

pub use config::{
    EnvironmentSpec, EvaluationSpec, ExperimentConfig, FormulationSpec, ReferenceSpec, RhoKind,
    SolverSpec,
};
pub use emit::write_outputs;
pub use evaluate::{evaluate_exact, evaluate_rollout, evaluate_true_performance, Evaluation};
pub use mle::mle;
pub use run::{
    run_experiment, solve_replication, ExperimentOutput, FormulationRun, ReplicationResult,
    SolvedReplication, SummaryRow,
};
