//! Information value of partial annotation for structured outputs, and the
//! machinery to test it empirically: completion counting, information
//! curves, budgeted annotation schemes, exact constrained decoders, an
//! averaged perceptron, self-training over partially annotated structures,
//! and evaluation statistics.

pub mod annotation;
pub mod config;
pub mod corpus;
pub mod counting;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod inference;
pub mod infocurve;
pub mod perceptron;
pub mod report;
pub mod rng;
pub mod sspan;
pub mod structure;
pub mod synthetic;

pub use error::{Error, Result};
pub use exec::Execution;
pub use structure::{Labeling, PartialAnnotation, StructureFamily};
