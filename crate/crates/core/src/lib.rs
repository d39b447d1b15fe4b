//! Shield process compilation for communication-free multi-agent gridworlds.
//!
//! The pipeline: a shield document is parsed and validated ([`dsl`]), compiled
//! into a deterministic process automaton over global states ([`procauto`]),
//! synthesized into a global Mealy shield with per-agent action-set outputs
//! ([`global`]), and projected onto each agent as a local Mealy shield over
//! observations ([`local`]). The [`sim`] and [`learn`] modules execute
//! shielded or unshielded episodes and train tabular Q-learning policies;
//! [`prism`] exports the shielded system as a model-checker MDP and ships an
//! internal min/max reachability solver.

pub mod bench;
pub mod dsl;
pub mod dump;
pub mod env;
pub mod error;
pub mod global;
pub mod instances;
pub mod learn;
pub mod local;
pub mod prism;
pub mod procauto;
pub mod set;
pub mod sim;
pub mod templates;

pub use env::EnvironmentInstance;
pub use error::DslError;
pub use set::{BitSet, StateSet};
