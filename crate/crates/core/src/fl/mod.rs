//! Federated training over the simulated uplink.

mod engine;
mod model;

pub use engine::{
    estimate_grad_bound, local_update, run_round, run_training, FlState, Federation, LocalUpdate, ReceiverKind,
    RoundError, RoundTrace, Schedule, TrainingError, TrainingRun,
};
pub use model::{normalize, ModelVector, NormalizationState};
