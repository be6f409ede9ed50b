//! Signal Temporal Logic robustness over trace batches, trace-checking
//! monitors for pure-past safety properties, and an evolutionary learner of
//! failure-detection formulas.

pub mod engine;
pub mod evaluate;
pub mod formula;
pub mod learner;
pub mod scalar;
pub mod trace;
pub mod trainer;
