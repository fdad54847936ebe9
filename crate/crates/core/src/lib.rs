//! Distributed mutation analysis over MiniLang programs.

pub mod cluster;
pub mod job;
pub mod metrics;
pub mod minilang;
pub mod mutation;
pub mod partitioning;
