//! Loss, optimizer, plateau schedule, the training loop and multi-seed
//! experiments.

mod adam;
mod config;
mod experiment;
mod loss;
mod schedule;
mod trainer;

pub use adam::Adam;
pub use config::{AdamConfig, TrainingConfig};
pub use experiment::{
    build_for_seed, run_experiment, run_experiment_with, run_grid, run_seed, summarize, RunReport,
    SeedRun,
};
pub use loss::{
    cross_entropy_loss, grad_check_network, l2_penalty, record_loss, toy_config,
    toy_network_grad_check, KINK_MARGIN,
};
pub use schedule::{EpochAction, Plateau};
pub use trainer::{
    evaluate_confusion, evaluate_loss, history_csv, predict_probs, read_history, train,
    write_history, EpochRecord, TrainOutcome, HISTORY_HEADER,
};
