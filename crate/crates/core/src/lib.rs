//! Knowledge-graph guided question-answer annotation for stories.

pub mod annotation;
pub mod bench;
pub mod concepts;
pub mod gloss;
pub mod kg;
pub mod metrics;
pub mod rank;
pub mod validation;
