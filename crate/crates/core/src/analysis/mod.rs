//! Separation classification and cardinality bounds for reachable beliefs.

mod bounds;
mod separation;

pub use bounds::{
    bound_detpomdp, bound_littman, bound_separated, check_stable, scientific, stable_set, verify_bounds, BoundCheck,
    BoundsError, BoundsReport, DetPomdpBound, VerifyOptions,
};
pub use separation::{
    check_separated_dpomdp, exact_cemetery_separation, is_cemetery_separated, is_separated_mapping_set,
    replay_descriptor, replay_witness, scope_name, MappingDescriptor, PairWitness, Scope, SeparationOptions,
    SeparationStatus, SeparationVerdict, SeparationWitness,
};
