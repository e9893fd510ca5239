//! Deterministic POMDPs: exact belief filtering, reachable-belief enumeration,
//! belief-space dynamic programming, separation analysis and cardinality bounds.
//!
//! All probabilities, costs and values are exact rationals. The cemetery point
//! `∂` and its belief `δ_∂` absorb the mass of outcomes that cannot occur.

pub mod analysis;
pub mod filtering;
pub mod measure;
pub mod model;
pub mod reachability;
pub mod solver;
pub mod value;

pub use measure::{Belief, ExtendedState, Measure, StepMapping};
pub use model::DetPomdpModel;
pub use value::{ExtendedValue, Rational};
