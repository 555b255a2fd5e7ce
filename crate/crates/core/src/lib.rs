//! Measures from the discriminative lexicon model: linear, frequency-weighted
//! and deep form-to-meaning mappings, target correlation, contextual
//! independence from a word-to-word Rescorla-Wagner network, and classical
//! lexical predictors, assembled into a per-word predictor table.

pub mod cind;
pub mod config;
pub mod deep;
pub mod encoding;
pub mod error;
pub mod lexicon;
pub mod linear;
pub mod matrix;
pub mod measures;
pub mod pipeline;
pub mod predictors;
pub mod semantic;

pub use error::{Error, Result};
pub use matrix::Matrix;
