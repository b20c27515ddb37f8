//! Discourse representation graphs: data model, Penman I/O, the AM graph
//! algebra, decomposition, scope simplification and resolution, coreference
//! rewriting, SMATCH scoring and a random graph generator.

pub mod algebra;
pub mod alignment;
pub mod coref;
pub mod decompose;
pub mod drg;
pub mod gensuite;
pub mod penman;
pub mod registry;
pub mod scope;
pub mod simplify;
pub mod smatch;

pub use algebra::{AmDependencyTree, SGraph, SourceName};
pub use alignment::{Alignment, AlignmentError, START};
pub use drg::{
    canonical_box_numbering, canonical_box_numbers, is_isomorphic, is_well_formed, validate, Drg,
    DrgEdge, DrgError, EdgeLabel, Mode, Namespace, NodeId, NodeKind, Pos, Synset, Violation,
};
pub use penman::{parse_penman, serialize_lenient, serialize_strict, PenmanError, Variant};
pub use scope::{
    project, resolve_rule_based, resolve_with_dependencies, ScopeDepGraph, ScopeError, ScopeLabel,
};
pub use simplify::{to_compact, to_scopeless, SimplifyError};
pub use smatch::{smatch_score, SmatchResult};
