//! Small pre-norm transformer with hand-written backward pass.
//!
//! Input is an [`AssembledSequence`](crate::assembler::AssembledSequence);
//! attention is bidirectional, queries and keys are rotated by the
//! three-axis rotary embedding, and the logits are read out at the last
//! token of the sequence.

mod config;
mod forward;
mod gradcheck;
mod input;
mod optim;
mod params;

pub use config::{ModelConfig, ModelFlags};
pub use forward::{backward_into, cross_entropy, forward, Cache};
pub use gradcheck::{grad_check, BlockCheck, GradCheckOptions, GradCheckReport};
pub use input::{embed_input, loss_and_backward, loss_and_backward_batch, predict, ModelInput, TokenGrid};
pub use optim::{opt_step, AdamHyper, OptState};
pub use params::{init_params, Params};

/// Gradients share the parameter layout.
pub type Gradients<F> = Params<F>;
