//! Encoders, decoders, function spaces, policy composition, exact
//! reduction/equivalence verdicts on finite tasks, and machine-checked order
//! axioms.

mod axioms;
mod compose;
mod function_space;
mod maps;
mod verdict;

pub use axioms::{
    partial_order_audit, verify_space_axioms, AuditCheck, AuditReport, AxiomReport,
    ClosureFailure, IdentityEntry, IndexedSpaces, SpaceKind,
};
pub use compose::{compose, ComposedPolicy, SpaceInfo};
pub use function_space::{DecoderSpace, EncoderSpace, FunctionSpace, MapArch, Members};
pub use maps::{Decoder, Encoder, FiniteMap, MapFn, MapForm};
pub use verdict::{
    check_equivalence, check_reduction, composed_exact_return, family_digest, ReductionVerdict,
    Witness,
};
