//! Weakly-supervised entity linking.
//!
//! The pipeline has two halves:
//!
//! 1. **Candidate generation** ([`candidates`]): for every mention in an
//!    unlabeled document, build a short list of likely entities from anchor
//!    statistics ([`priors`]), embedding similarity, and max-product belief
//!    propagation over an entity link graph ([`linkgraph`]). The survivors
//!    are split into a positive list and a negative list.
//! 2. **Disambiguation** ([`model`]): a global star-shaped scoring model
//!    trained with a multi-instance hinge loss, using the positive/negative
//!    lists as weak supervision. At test time the model picks one entity
//!    per mention from its positive list.
//!
//! [`eval`] measures in-knowledge-base micro F1 and recall curves;
//! [`pipeline`] wires the stages into file-driven commands used by the
//! `weaklink` binary; [`corpus::synth`] generates deterministic desk-scale
//! corpora with known ground truth.
//!
//! All numeric code is generic over [`scalar::Scalar`]; the pipeline runs
//! with [`Real`].

pub mod candidates;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod linkgraph;
pub mod model;
pub mod pipeline;
pub mod priors;
pub mod scalar;

/// Concrete scalar type used by the pipeline and file formats.
pub type Real = f64;

pub use error::{Error, Result};
pub use scalar::Scalar;
