//! Dense `f64` tensors with a small reverse-mode tape.
//!
//! Parameters live in a [`ParamStore`]; a [`Tape`] borrows the store, records
//! primitives during a forward pass and produces [`Gradients`] on `backward`.
//! Lookup-table rows produce row-sparse gradients so that a single mention
//! never materializes a full dense gradient for the embedding tables.

mod tape;
mod tensor;

pub use tape::{BackwardFault, Gradients, ParamId, ParamStore, Primitive, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tensor::dot;
