//! Spatiotemporal-aware translation embeddings for POI recommendation.
//!
//! Check-ins `(user, time, location, poi)` are turned into triples
//! `(user, <time-slot, region>, poi)`. Each `<time-slot, region>` pattern is a
//! relation that translates a user embedding towards the embedding of the POI
//! the user is likely to visit, and recommendation ranks every POI by its
//! distance to the translated point.
//!
//! The crate is organised along the pipeline:
//!
//! - [`ingest`]: parsing, time/space discretization, vocabularies, triples, splits.
//! - [`embedding`]: parameters, score functions, gradients and norm constraints
//!   for the TransE / TransH / TransR realizations.
//! - [`training`]: margin-ranking SGD with Bernoulli negative sampling.
//! - [`coldstart`]: POI-POI content triples and the joint objective.
//! - [`recsys`]: query translation, ranking, evaluation, model files and the
//!   experiment drivers.

pub mod coldstart;
pub mod embedding;
mod error;
pub mod ingest;
pub mod linalg;
pub mod pipeline;
pub mod recsys;
pub mod seed;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
