//! Optimization: ADAM, dropout, ℓ2 regularization, the epoch loop, grid search, and
//! evaluation metrics.

mod adam;
mod dropout;
mod fit;
mod grid;
mod metrics;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use dropout::{apply_dropout, check_rate, Phase};
pub use fit::{
    add_l2, batch_gradient, derive_seed, loss_and_accuracy, train, BatchObjective, EpochRecord, RunHistory,
    TrainConfig, TrainOutcome,
};
pub use grid::{grid_search, Grid, GridReport, GridRun};
pub use metrics::{alignment_accuracy, evaluate, predict_all, AlignmentScore, ClassMetrics, Metrics};
