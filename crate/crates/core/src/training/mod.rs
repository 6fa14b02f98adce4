//! Losses, truncated backpropagation through time, Adam, parameter
//! counting and the training loop.

mod adam;
mod bptt;
mod counts;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use bptt::{bptt, finite_difference_check, window_loss};
pub use counts::{count_params, ParamFamily};
pub use loss::{graph_regularized_loss, prediction_loss, LossKind};
pub use trainer::{
    history_csv, one_step_predictions, resume, rollout, sweep_csv, sweep_window_lengths, train,
    transition_losses, window_starts, EpochRecord, SweepRow, TrainConfig, TrainRun, TrainState,
    HISTORY_HEADER, LAPLACIAN_TOL, SWEEP_T_HEADER,
};
