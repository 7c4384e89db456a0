//! Reinforcement-learned quantum program synthesis for combinatorial
//! optimization: a dense statevector simulator exposed as an episodic
//! environment, a PPO actor-critic trained on random MaxCut / MaxQP / QUBO
//! instances, and a p=1 QAOA grid-search baseline.

pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod ppo;
pub mod problems;
pub mod qaoa;
pub mod seeding;
pub mod statevec;
pub mod transpiler;

pub use error::{Error, Result};
