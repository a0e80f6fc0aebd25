//! Forward semantics of every layer in the network.

mod activation;
mod dense;
mod pade;
mod regularize;

pub use activation::{activation_apply, ActivationKind, LEAKY_SLOPE};
pub use dense::{affine, dense_forward, softmax, DenseActivation, DenseParams};
pub use pade::{
    generative_forward, min_denominator_term, pade_forward, pade_param_count, pade_parts,
    pade_on_tape, PadeLayerParams, PadeParts, PadeVars, DENOMINATOR_INIT_RANGE,
};
pub use regularize::{dropout_apply, dropout_mask, flatten, Mode};
