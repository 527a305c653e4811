//! Hierarchical attention-based sequence-to-sequence model for next-sentence
//! lyrics generation.
//!
//! A word-level GRU stack encodes each of the previous sentences, a
//! sentence-level GRU summarizes the window, and an attention-equipped GRU
//! decoder generates the next sentence. Everything, including the backward
//! pass, is implemented directly on dense `f64` arrays.

pub mod attention;
pub mod checkpoint;
pub mod corpus;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod gru;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
