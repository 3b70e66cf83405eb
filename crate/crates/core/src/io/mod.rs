//! Serialization, scenarios and test oracles.

pub mod csv;
pub mod mincut;
