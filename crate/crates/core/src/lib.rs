//! Fine-grained entity typing.
//!
//! A mention is encoded character by character, its left and right contexts by
//! bidirectional LSTMs, and the concatenated feature vector is scored against
//! every type through a shared low-dimensional embedding space. Training uses
//! hinge losses that treat mentions with a single type path ("clean") and
//! mentions with several conflicting paths ("noisy") differently. Prediction
//! walks the type hierarchy top-down while the best child scores above zero.

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod inference;
pub mod init;
pub mod model;
pub mod numerics;
pub mod par;
pub mod scorer;
pub mod synth;
pub mod trainer;
pub mod transfer;

pub use error::{Error, Result};
