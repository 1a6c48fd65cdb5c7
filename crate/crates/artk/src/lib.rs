//! Retrieval-augmented pipelines you can hold in your head.
//!
//! Every system in this crate is an instance of one four-stage contract:
//! an [`Encoder`](pipeline::Encoder) turns a query into a key, a
//! [`Retriever`](pipeline::Retriever) looks the key up in a knowledge base,
//! an [`Aggregator`](pipeline::Aggregator) condenses the returned candidates
//! into a single artefact, and a [`Model`](pipeline::Model) fuses the
//! artefact with the query to produce the output. The [`systems`] module
//! assembles well-known retrieval-augmented systems (kNN-LM, continuous
//! cache, DPR-style QA, knowledge-graph decoding, dialogue passage
//! selection, fact checking) from those four stages, scaled down so that
//! every run is deterministic and finishes in seconds.
//!
//! Nothing here is learned: backbones are counted n-gram models, encoders
//! are seeded random projections, and span extraction is lexical. The point
//! is the plumbing, which is exactly the part the large systems share.

pub mod backbone;
pub mod data;
pub mod dense;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod kb;
pub mod pipeline;
pub mod sparse;
pub mod systems;

#[cfg(doctest)]
mod book;

pub use error::{Error, Result};
pub use fusion::Distribution;
