//! Dense networks with exact input-derivative jets and parameter gradients.

mod activation;
mod checkpoint;
mod field;
mod jet;
mod network;

pub use activation::{Activation, MAX_ACTIVATION_ORDER};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use field::{constant_field, AnalyticField, Field, InputMap, MappedNetwork};
pub use jet::{JetLayout, Jets, Partial, MAX_JET_ORDER};
pub use network::{init_mlp, loss_param_gradient, mlp_sizes, DerivativeBundle, NetworkParams, TapedForward};
