//! A differentiable-by-construction virtual machine: flat word states, a
//! SUBLEQ-based instruction set with skill calls, soft composition of skills
//! and learners that search over compositions.

pub mod asm;
pub mod compose;
pub mod curriculum;
pub mod exec;
pub mod isa;
pub mod learn;
pub mod library;
pub mod policy;
pub mod snapshot;
pub mod state;
pub mod task;
