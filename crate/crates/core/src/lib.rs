//! Mod-EDA: sentiment-aware, embedding-driven text augmentation.
//!
//! The crate is organised around the data flow of an augmentation experiment:
//!
//! - [`corpus`] loads, cleans and tokenizes labeled text.
//! - [`embeddings`] holds word vectors, answers nearest-neighbour queries and
//!   trains GloVe-style vectors from a corpus.
//! - [`sentiment`] scores words and sentences against an AFINN lexicon.
//! - [`keywords`] builds the per-class frequent keyword pools.
//! - [`augment`] implements the Mod-EDA operations, the EDA baseline and the
//!   corpus-level driver.
//! - [`classify`] is a softmax regression classifier used to measure the
//!   effect of augmentation.
//! - [`eval`] provides metrics, split protocols and the comparison runner.
//! - [`cli`] wires everything into the `modeda` command.

pub mod augment;
pub mod classify;
pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod keywords;
pub mod rng;
pub mod sentiment;

pub use error::{Error, Result};
