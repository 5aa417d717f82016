pub mod error;
pub mod event_log;
pub mod canopy;
pub mod drift_gen;
pub mod classifiers;
pub mod encoding;
pub mod eval;
pub mod ltl;
pub mod persist;
pub mod pipelines;

pub use error::{Error, Result};
