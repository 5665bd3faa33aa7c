//! Learners over composition plans: Monte Carlo tree search on discrete
//! (skill, binding) sequences and SPSA on tabular α logits.

mod eval;
mod mcts;
mod spsa;

pub use eval::{
    enumerate_actions, enumerate_bindings, Action, BindingSet, EvalConfig, Evaluator, Loss,
};
pub use mcts::{mcts_search, MctsConfig, SearchResult};
pub use spsa::{gradient_fit, soft_plan, GradientConfig, GradientResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("task {0}: no allowed skill is in the library")]
    NoSkills(String),
    #[error("task {0}: no legal (skill, binding) action")]
    NoActions(String),
}

/// Penalty standing in for the mse of a pair whose execution failed.
pub const PENALTY: f64 = 1e6;

/// Absolute per-word tolerance for `exact`.
pub const EXACT_TOLERANCE: f64 = 1e-6;

/// Default cap on bindings per skill.
pub const BINDING_CAP: usize = 512;

/// One sample of a learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Expansions (tree search) or iterations (SPSA) spent so far.
    pub at: usize,
    pub mse: f64,
    pub exact: f64,
}
