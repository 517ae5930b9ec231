//! Multilingual homophobia/transphobia classification pipeline: corpus
//! construction, simulated script mixing, labelled dataset handling, training
//! orchestration and evaluation.

pub mod conditions;
pub mod corpus;
pub mod dataset;
pub mod metrics;
pub mod scriptmix;
pub mod synthetic;
pub mod trainer;

pub use conditions::{ExperimentCondition, LanguageCondition};
