//! Exact algorithms for progress loops of quantitative PCTL formulae over
//! finite Markov chains: model checking, closure and update, the progress
//! measure, loop search and model compression, and an ETR encoding of bounded
//! satisfiability.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod closure;
pub mod etr;
pub mod formula;
pub mod linalg;
pub mod markov;
pub mod measure;
pub mod modelcheck;
pub mod progress;
pub mod rational;

pub use formula::{Cmp, PathFormula, PathOp, StateFormula};
pub use markov::{MarkovChain, StateId};
pub use rational::Rational;
