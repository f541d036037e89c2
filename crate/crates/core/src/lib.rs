//! Core domain model for a specialist-routing medical QA gateway.
//!
//! This crate holds everything that is pure computation: the specialty label
//! registry and the value types exchanged between pipeline stages, the
//! multi-label router (built-in hashed logistic scorer, top-n and threshold
//! selection, F-beta calibration, router evaluation) and the generation
//! metrics used to score system answers against reference answers.
//!
//! Network-facing parts (model backends, remote scorers, the HTTP gateway)
//! live in `medroute-gateway`.

pub mod corpus;
pub mod error;
pub mod label;
pub mod metrics;
pub mod router;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use label::{default_label_registry, LabelScore, SpecialtyLabel, LABEL_COUNT};
pub use types::{
    FinalAnswer, QAExample, ResponseStatus, RoutingDecision, RoutingStrategy, SpecialistResponse,
};
