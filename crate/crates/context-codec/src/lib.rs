//! File formats, fixtures, decoders, the evaluation harness and the
//! `ccodec` command line for the context codec.

pub mod config;
pub mod counts;
pub mod decoder;
pub mod external;
pub mod fixtures;
pub mod harness;
pub mod jsondoc;
