//! Commitment-level context compression: semantic atoms, lexicon-driven
//! normalization, scoring and render policy, the CCL notation, structured
//! state diffs, recall metrics and the budgeted codec.

#![no_std]

extern crate alloc;

pub mod atom;
pub mod ccl;
pub mod codec;
pub mod diff;
pub mod lexicon;
pub mod metrics;
pub mod normalize;
pub mod scoring;
pub mod tokenize;

pub use atom::{Atom, AtomId, AtomType, Evidence, Modality, Status, Value};
pub use ccl::{CclDocument, CclValue};
pub use lexicon::Lexicon;
