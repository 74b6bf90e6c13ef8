//! Sense embeddings built from layer-pooled contextual representations.

pub mod corpus;
pub mod embedstore;
pub mod eval;
pub mod fixtures;
pub mod inventory;
pub mod profiles;
pub mod senseindex;
pub mod senselearn;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
