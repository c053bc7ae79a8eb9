//! Core of the `scrub` data-cleaning benchmark harness.

pub mod agent;
pub mod corrupt;
pub mod csv_io;
pub mod gate;
pub mod pipeline;
pub mod predicate;
pub mod provision;
pub mod report;
pub mod rng;
pub mod sandbox;
pub mod table;
