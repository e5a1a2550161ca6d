//! Random hierarchy model: random unambiguous context-free grammars on a
//! regular tree, exact posterior inference by belief propagation under
//! several noise channels, the annealed mean-field theory of the denoising
//! transition, dynamical observables of forward-backward experiments, a
//! Gaussian random field null model, and correlation-based learnability
//! analyses.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! grammar  ->  noise  ->  bp  ->  observables
//!                 \                   /
//!                  meanfield (theory overlays)
//! ```
//!
//! with [`grf`] providing the non-hierarchical baseline and [`learnstats`]
//! the sample-complexity side. Everything is deterministic given a master
//! seed; substreams are derived in [`seeding`].

pub mod bp;
pub mod error;
pub mod grammar;
pub mod grf;
pub mod learnstats;
pub mod matrix;
pub mod meanfield;
pub mod noise;
pub mod observables;
pub mod seeding;

pub use error::{Error, Result};
pub use grammar::{RhmParams, RuleSet, SampleTree, Symbol};
pub use matrix::Matrix;
