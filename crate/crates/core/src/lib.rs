//! Verifiable provenance envelopes for AI-generated content.
//!
//! Prompts are modeled as typed modules, generation results carry model,
//! hyper-parameter and confidence metadata, and the whole record is issued as
//! a JSON-LD verifiable credential secured by an `eddsa-rdfc-2022` proof.
//! The curation side judges requirement satisfaction and selects outputs for
//! reuse as fine-tuning data.

pub mod canon;
pub mod client;
pub mod curation;
pub mod did;
pub mod envelope;
pub mod generation;
pub mod par;
pub mod prompt;
pub mod proof;
pub mod rdf;
pub mod store;
pub mod vocab;
