//! Configuration-driven experiment runner for the tdbem solvers.

pub mod config;
pub mod experiment;
pub mod presets;
