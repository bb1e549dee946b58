//! File formats, image IO and the `sacl` command-line driver built on
//! [`sacl_core`].

pub mod cli;
pub mod config;
pub mod documents;
pub mod error;
pub mod images;
pub mod jsonl;
pub mod report;

pub use error::{Error, Result};
