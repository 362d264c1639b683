//! Trust evaluation between devices from a self-supervised hypergraph encoder.
//!
//! Devices and their social relations (physical proximity, shared interests,
//! friendship groups, collaboration outcomes) form a hypergraph. Two randomly
//! masked views of it are encoded by a two-stage hypergraph network trained
//! with contrastive losses; trust between two devices is the cosine similarity
//! of their embeddings.

pub mod augment;
pub mod checkpoint;
pub mod contrast;
pub mod data;
pub mod encoder;
pub mod error;
pub mod files;
pub mod hypergraph;
pub mod seeding;
pub mod social;
pub mod trainer;
pub mod trust;

pub use error::{Error, Result};
