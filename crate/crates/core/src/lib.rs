//! A replicated multi-value register whose concurrent values are reduced by
//! an application-defined strict partial order.
//!
//! * [`order`]: value orders and the maximal-element reducer.
//! * [`oracle`]: reference semantics over an explicit event graph.
//! * [`register`]: the dot-tagged state-based register (eager and lazy
//!   resolution), [`classic`]: the per-value version-vector baseline,
//!   [`codec`]: canonical state encoding.
//! * [`sim`]: deterministic multi-replica simulation and divergence search.

pub mod classic;
pub mod clock;
pub mod codec;
pub mod oracle;
pub mod order;
pub mod register;
pub mod sim;

pub use classic::ClassicMvrState;
pub use clock::{vv_join, Dot, ReplicaId, VersionVector};
pub use codec::{decode_state, encode_state, DecodeError, ValueCodec};
pub use oracle::{f_mvr, f_mvrr, observed_subgraph, EventGraph, EventId, GraphError, WriteEvent};
pub use order::{
    explicit_relation_order, lww_order, natural_order, ranked_order, resolve_under, total_comparator_order,
    validate_order, ExplicitRelation, LwwValue, OrderError, OrderKind, ValidationReport, ValueOrder, Violation,
};
pub use register::{MergeError, RegisterState};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
