//! Governed retrieval over atomic fact nuggets with temporal validity and
//! lifecycle states.

pub mod canonicalize;
pub mod config;
pub mod dates;
pub mod engine;
pub mod eval;
pub mod error;
pub mod extraction;
pub mod governance;
pub mod index;
pub mod model;
pub mod retrieval;
pub mod service;
pub mod validity;

pub use error::{Error, Result};
