//! Capitalization-robust named entity recognition.
//!
//! A linear-chain CRF tagger trained and evaluated under four casing
//! strategies: an unmodified baseline, a caseless model, test-time
//! truecasing, and training-set augmentation with lowercased and uppercased
//! copies. Models are scored on original, lowercased and uppercased versions
//! of a test set.

pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod features;
pub mod harness;
pub mod synth;
pub mod transforms;
pub mod truecase;

pub use error::{Error, Result};
