//! Pun generation with a sense-conditioned generator trained against a
//! word-sense discriminator.
//!
//! The generator decodes outward from the pun word and mixes two
//! sense-conditioned language-model paths; the discriminator classifies the
//! sense of the target word or flags the sentence as generated, and its
//! output drives a policy-gradient ambiguity reward.

pub mod checkpoint;
pub mod corpus;
pub mod discriminator;
pub mod error;
pub mod evalmetrics;
pub mod generator;
pub mod numerics;
pub mod reward;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
