//! Autoregressive policy over the token grammar.
//!
//! A from-scratch transformer with exact reverse-mode gradients. See
//! [`model`] for the network, [`tape`] for the autodiff engine and
//! [`tensor`] for the dense kernels.

pub mod model;
pub mod tape;
pub mod tensor;

pub use model::{
    causal_logits, causal_logits_var, forward, forward_debug, forward_opts, grammar_masks,
    masked_probs, masked_sample, sample_sequence, sequence_logprob, sequence_logprob_var,
    BlockParams, LogProbError, ParamVars, PolicyHyper, PolicyParams,
};
pub use tape::{Grads, Tape, Var};
pub use tensor::Tensor;
