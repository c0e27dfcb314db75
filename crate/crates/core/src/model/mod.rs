//! Small dense networks with exact gradients and deterministic SGD training.

mod arch;
mod autoregressive;
mod margins;
mod network;
mod params;
mod train;

pub use arch::{Architecture, ModelKind, MAX_VOCAB};
pub use autoregressive::{context_features, next_token_margins, sequences_to_dataset};
pub use margins::{compute_all_margins, compute_margins};
pub use network::{accuracy, forward_batch, forward_logits, loss_and_grad, mean_loss};
pub use params::{init_params, ModelParams};
pub use train::{fit, train, train_subset, BatchSampler, Momentum, TrainConfig};

#[cfg(test)]
mod tests;
