//! The stacked Padé network: configuration, assembly, parameter accounting
//! and checkpoints.

mod checkpoint;
pub mod container;
mod config;
mod network;

pub use checkpoint::{
    checkpoint_container, checkpoint_metadata, load_checkpoint, load_checkpoint_for,
    model_from_container, save_checkpoint, save_checkpoint_with, CHECKPOINT_KIND,
};
pub use config::{ModelConfig, ModelFamily, POOL_SIZE};
pub use network::{
    closed_form_param_count, count_params_for, Layer, Model, ParamInfo, Recorded,
};
