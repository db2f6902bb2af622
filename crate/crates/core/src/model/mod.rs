//! Bias-free fully-connected networks: forward passes with captured features,
//! the four training losses, backpropagation and minibatch SGD.

mod checkpoint;
mod loss;
mod mlp;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, LayerEntry};
pub use loss::{classification_error, loss_grad, loss_value, LossKind};
pub use mlp::{backward, forward, hidden_features, init_model, ForwardTrace, Gradients, MlpModel};
pub use train::{evaluate, train, EpochRecord, Evaluation, ProbeFn, RunRecord, TrainConfig};
