//! Code-oriented architecture embeddings for surrogate-assisted neural
//! architecture search.
//!
//! The pipeline turns a discrete architecture specification into source text,
//! embeds that text with a pluggable provider, reduces the embedding with PCA,
//! and trains a small rank-oriented MLP surrogate on top. The surrogate is
//! evaluated under a stratified subsampled cross-validation protocol and can
//! drive a mutation-based search loop over a tabular benchmark.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`nb201`]: cell genotypes (parse/format/enumerate/mutate/path-encode)
//! - [`einspace`]: derivation-tree parsing for the grammar-based space
//! - [`codegen`]: deterministic architecture-to-code emission
//! - [`embedding`]: providers, mean pooling, and the content-addressed cache
//! - [`numerics`]: PCA, the MLP surrogate, and both training losses
//! - [`evaluation`]: Kendall's tau and the cross-validation protocol
//! - [`oracle`]: tabular ground-truth accuracy tables (real or synthetic)
//! - [`search`]: regularized-evolution warm-up plus surrogate-guided search

#![warn(missing_docs)]

pub mod codegen;
pub mod einspace;
pub mod embedding;
mod error;
pub mod evaluation;
pub mod nb201;
pub mod numerics;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
