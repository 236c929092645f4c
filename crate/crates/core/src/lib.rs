//! Core machinery for learned design of metaheuristic algorithms.
//!
//! The crate is split along the data flow of the system:
//!
//! * [`vocab`] — the token vocabulary over algorithm components,
//!   hyperparameter grids, pointers and conditions, plus the grammar that
//!   constrains which token may follow a given prefix.
//! * [`ir`] — the validated program representation: token parsing, a
//!   canonical text format and control-flow resolution.
//! * [`problems`] — pseudo-Boolean benchmark objectives over bit strings
//!   with composable transformation layers.
//! * [`interpreter`] — executes a program as a population-based search
//!   under a function-evaluation budget.
//! * [`landscape`] — landscape-feature embeddings of problem instances.
//! * [`policy`] — a miniature autoregressive transformer with exact
//!   reverse-mode gradients.
//! * [`trainer`] — clipped policy-gradient training, inference and
//!   consolidation-regularized continual training.
//! * [`baselines`] — hand-coded reference metaheuristics used both as
//!   comparison baselines and as execution oracles.
//!
//! The crate is `no_std` (alloc required) so the algorithmic core stays
//! free of IO; file formats and the command line live in the companion
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod interpreter;
pub mod ir;
pub mod landscape;
pub mod policy;
pub mod problems;
pub mod seeds;
pub mod trainer;
pub mod vocab;

mod fmath;
